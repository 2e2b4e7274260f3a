"""Index computations on constructed synthetic logs with analytic values."""

import numpy as np
import pytest
from scipy import stats

from ergoguide.errors import EvaluationError, InputError
from ergoguide.metrics import (
    TickRecord,
    TrialLog,
    aggregate,
    angular_distance,
    confusion_index,
    decrement_ratio,
    final_error,
    path_speed,
    reaching_time,
    reaching_velocity,
    rm_anova_f,
    seq_score,
    success,
    sus_score,
)
from ergoguide.model import JOINTS

TORSO = JOINTS.index("torso")
XI_TORSO = 90.0


def torso_log(q_values, target=0.0, dt=0.1, commands_fn=None):
    """Single-joint synthetic log; eps derives from the torso trace."""
    log = TrialLog(
        modality="spot",
        protocol="modality_test",
        condition="synthetic",
        guided_joints=("torso",),
        seed=0,
    )
    for k, q in enumerate(q_values):
        q_c = np.zeros(5)
        q_c[TORSO] = q
        q_d = np.zeros(5)
        q_d[TORSO] = target
        eps = np.array([abs(q - target) / XI_TORSO])
        log.records.append(
            TickRecord(
                tick=k,
                t=k * dt,
                q_c=q_c,
                q_d=q_d,
                eps=eps,
                commands=commands_fn(k) if commands_fn else [],
            )
        )
    log.completed_at = log.records[-1].t
    return log


def constant_velocity_log():
    """Monotone approach entering the band at exactly t = 12.7 s, 2 s hold."""
    target = 60.0
    q_at_crossing = 55.6  # eps 0.0489, just inside the 5 % band
    v = q_at_crossing / 12.7
    values = []
    for k in range(148):  # 0 .. 14.7 s
        t = k * 0.1
        values.append(min(q_at_crossing, v * t))
    return torso_log(values, target=target)


class TestSuccess:
    def test_converged_log(self):
        log = torso_log([0.0] * 40, target=1.0)
        assert success(log)

    def test_never_in_band(self):
        log = torso_log([30.0] * 40, target=0.0)
        assert not success(log)

    def test_single_dip_inside_window(self):
        values = [30.0] * 40
        values[-5] = 3.0  # eps 0.033 once, within the final 2 s
        log = torso_log(values, target=0.0)
        assert success(log)

    def test_dip_before_window_does_not_count(self):
        values = [30.0] * 40
        values[5] = 0.0
        log = torso_log(values, target=0.0)
        assert not success(log)

    def test_short_log_rejected(self):
        log = torso_log([0.0] * 5, target=0.0)
        with pytest.raises(EvaluationError):
            success(log)

    def test_monotone_in_threshold(self, rng):
        # loosening the dead band can only turn failures into successes
        for _ in range(50):
            values = rng.uniform(-20, 20, size=40)
            log = torso_log(list(values), target=0.0)
            if success(log, dead_band=0.05):
                assert success(log, dead_band=0.06)


class TestReachingTime:
    def test_constant_velocity_crossing(self):
        log = constant_velocity_log()
        assert success(log)
        assert reaching_time(log) == pytest.approx(12.7, abs=1e-9)

    def test_already_at_target(self):
        # a trial that starts settled ends one window later: 21 ticks
        log = torso_log([0.5] * 21, target=0.0)
        assert reaching_time(log) == pytest.approx(0.0, abs=1e-12)

    def test_failure_is_absent(self):
        log = torso_log([45.0] * 30, target=0.0)
        assert reaching_time(log) is None


class TestPathMetrics:
    def test_monotone_move_equalities(self):
        # 30 degrees in 10 s, then a 2 s hold: no backtracking
        values = [3.0 * k * 0.1 for k in range(101)] + [30.0] * 20
        log = torso_log(values, target=30.0)
        assert angular_distance(log)["torso"] == pytest.approx(30.0, abs=1e-9)
        assert reaching_velocity(log)["torso"] == pytest.approx(3.0, abs=1e-9)
        assert path_speed(log)["torso"] == pytest.approx(3.0, abs=1e-9)

    def test_overshoot_path(self):
        # up 40 at 5 deg/s (8 s), back down 10 (2 s), hold 2 s at the target
        values = []
        for k in range(81):
            values.append(5.0 * k * 0.1)
        for k in range(1, 21):
            values.append(40.0 - 5.0 * k * 0.1)
        values += [30.0] * 20
        log = torso_log(values, target=30.0)
        dt = reaching_time(log)
        assert dt == pytest.approx(10.0, abs=1e-9)
        assert angular_distance(log)["torso"] == pytest.approx(50.0, abs=1e-9)
        assert reaching_velocity(log)["torso"] == pytest.approx(3.0, abs=1e-9)
        assert path_speed(log)["torso"] == pytest.approx(5.0, abs=1e-9)

    def test_zero_motion_degenerate(self):
        log = torso_log([0.0] * 30, target=0.0)
        assert angular_distance(log)["torso"] == 0.0
        assert reaching_velocity(log)["torso"] == 0.0
        assert path_speed(log)["torso"] == 0.0

    def test_theta_bounds_chord(self, rng):
        # fuzz: path length can never undercut the endpoint distance
        for _ in range(100):
            steps = rng.normal(0.0, 2.0, size=60)
            values = np.concatenate([[0.0], np.cumsum(steps)])
            values[-21:] = values[-21]  # settle
            log = torso_log(list(values), target=float(values[-1]))
            if not success(log):
                continue
            theta = angular_distance(log)["torso"]
            span, dt = [r for r in log.records if r.t <= reaching_time(log) + 1e-9], reaching_time(log)
            chord = abs(span[-1].q_c[TORSO] - span[0].q_c[TORSO])
            assert theta >= chord - 1e-9
            if dt > 0:
                assert path_speed(log)["torso"] >= reaching_velocity(log)["torso"] - 1e-12


class TestFinalError:
    def test_converged(self):
        log = torso_log([1.0] * 30, target=0.0)
        assert final_error(log)["torso"] < 5.0

    def test_plateau(self):
        log = torso_log([7.2] * 30, target=0.0)  # eps = 7.2/90 = 8 %
        assert final_error(log)["torso"] == pytest.approx(8.0, abs=1e-9)

    def test_noisy_tail_minimum(self):
        values = [30.0] * 30
        values[-8] = 0.042 * XI_TORSO
        log = torso_log(values, target=0.0)
        assert final_error(log)["torso"] == pytest.approx(4.2, abs=1e-9)


class TestConfusionIndex:
    def test_synthetic_thirty_percent(self):
        # 100 moving ticks toward/away from a target below: 30 wrong
        values = [50.0]
        wrong_ticks = {3 * i for i in range(30)}  # 0,3,...,87 < 100
        for k in range(100):
            step = +0.4 if k in wrong_ticks else -0.4
            values.append(values[-1] + step)
        values += [values[-1]] * 30  # stationary tail, still commanded
        log = torso_log(values, target=0.0)
        assert confusion_index(log) == pytest.approx(30.0, abs=1e-9)

    def test_ideal_motion_zero(self):
        values = [30.0 - 0.5 * k for k in range(50)] + [5.5] * 25
        log = torso_log(values, target=0.0)
        assert confusion_index(log) == 0.0

    def test_all_stationary_absent(self):
        log = torso_log([30.0] * 40, target=0.0)
        assert confusion_index(log) is None

    def test_slow_drift_excluded(self):
        # 0.04 deg per tick = 0.4 deg/s, below the moving threshold
        values = [30.0 + 0.04 * k for k in range(60)]
        log = torso_log(values, target=0.0)
        assert confusion_index(log) is None


class TestDecrementRatio:
    def test_halving(self):
        d = decrement_ratio(np.full(5, 20.0), np.full(5, 10.0))
        assert all(v == pytest.approx(50.0) for v in d.values())

    def test_table_sign_convention(self):
        # a final overload larger than the initial one is a negative ratio
        tau_i = np.full(5, 10.0)
        tau_f = np.full(5, 13.678)
        d = decrement_ratio(tau_i, tau_f)
        assert d["elbow"] == pytest.approx(-36.78, abs=1e-9)

    def test_unchanged_is_zero(self):
        d = decrement_ratio(np.full(5, 8.0), np.full(5, 8.0))
        assert all(v == 0.0 for v in d.values())

    def test_near_zero_initial_absent(self):
        tau_i = np.array([0.05, 5.0, 5.0, 5.0, 5.0])
        d = decrement_ratio(tau_i, np.full(5, 1.0))
        assert d["ankle"] is None
        assert d["knee"] == pytest.approx(80.0)

    def test_rescaling_invariant(self, rng):
        tau_i = rng.uniform(1.0, 30.0, size=5)
        tau_f = rng.uniform(0.5, 30.0, size=5)
        base = decrement_ratio(tau_i, tau_f)
        scaled = decrement_ratio(1000.0 * tau_i, 1000.0 * tau_f, min_torque=100.0)
        for joint in base:
            assert scaled[joint] == pytest.approx(base[joint], rel=1e-12)


class TestRmAnova:
    DATA = np.array(
        [
            [12.0, 18.0, 24.0],
            [14.0, 16.0, 22.0],
            [11.0, 19.0, 25.0],
            [13.0, 17.0, 21.0],
        ]
    )

    def test_identical_groups(self):
        data = np.tile([[3.0], [4.0], [5.0]], (1, 4))
        res = rm_anova_f(data)
        assert res["F"] == 0.0
        assert res["p"] == 1.0

    def test_textbook_dataset(self):
        # hand ANOVA table: SS_treat 220.667 (df 2), SS_err 16.667 (df 6)
        # => F = 110.333 / 2.7778 = 39.72; cross-checked with statsmodels
        res = rm_anova_f(self.DATA)
        assert res["F"] == pytest.approx(39.72, abs=1e-9)
        assert res["df"] == (2, 6)
        assert res["p"] == pytest.approx(0.000346, abs=5e-6)

    def test_two_conditions_equal_squared_paired_t(self):
        data = np.array(
            [[3.1, 4.0], [2.9, 3.5], [3.3, 4.4], [3.0, 3.9], [2.7, 3.2]]
        )
        res = rm_anova_f(data)
        t = stats.ttest_rel(data[:, 0], data[:, 1])
        assert res["F"] == pytest.approx(t.statistic**2, rel=1e-9)
        assert res["p"] == pytest.approx(t.pvalue, rel=1e-9)

    def test_unbalanced_rejected(self):
        data = self.DATA.copy()
        data[1, 2] = np.nan
        with pytest.raises(InputError):
            rm_anova_f(data)


class TestQuestionnaires:
    def test_sus_maximum(self):
        responses = [5, 1, 5, 1, 5, 1, 5, 1, 5, 1]
        assert sus_score(responses) == 100.0

    def test_sus_all_threes(self):
        assert sus_score([3] * 10) == 50.0

    def test_sus_out_of_range(self):
        with pytest.raises(InputError):
            sus_score([3] * 9 + [6])

    def test_sus_wrong_length(self):
        with pytest.raises(InputError):
            sus_score([3] * 9)

    def test_seq_passthrough(self):
        assert seq_score(7) == 7.0
        assert seq_score(1) == 1.0

    def test_seq_out_of_range(self):
        with pytest.raises(InputError):
            seq_score(8)


class TestAggregation:
    def test_mean_std_tables(self):
        trials = [
            {"modality": "spot", "condition": "torso", "reach_time": 10.0},
            {"modality": "spot", "condition": "torso", "reach_time": 14.0},
            {"modality": "ramp", "condition": "torso", "reach_time": 30.0},
        ]
        tables = aggregate(trials, ["modality", "condition"])
        spot = tables[("spot", "torso")]["reach_time"]
        assert spot["mean"] == pytest.approx(12.0)
        assert spot["std"] == pytest.approx(np.std([10.0, 14.0], ddof=1))
        assert spot["n"] == 2
        assert tables[("ramp", "torso")]["reach_time"]["std"] is None

    def test_absent_values_skipped(self):
        trials = [
            {"modality": "spot", "confusion": None},
            {"modality": "spot", "confusion": 10.0},
        ]
        tables = aggregate(trials, ["modality"])
        assert tables[("spot",)]["confusion"]["n"] == 1


class TestLogSerialization:
    def test_jsonl_roundtrip_byte_exact(self, tmp_path):
        log = constant_velocity_log()
        path_a = tmp_path / "a.jsonl"
        path_b = tmp_path / "b.jsonl"
        log.save(path_a)
        TrialLog.load(path_a).save(path_b)
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_segment_view(self):
        log = torso_log([0.0] * 30, target=0.0)
        for i, record in enumerate(log.records):
            log.records[i] = TickRecord(
                tick=record.tick,
                t=record.t,
                q_c=record.q_c,
                q_d=record.q_d,
                eps=record.eps,
                segment=0 if i < 15 else 1,
            )
        assert log.segment_ids() == [0, 1]
        assert len(log.segment(1).records) == 15

    def test_schema_version_enforced(self):
        with pytest.raises(InputError):
            TrialLog.from_records([{"type": "meta", "schema_version": 42}])
