"""Error normalization, joint/level selection, the three modality encoders."""

import numpy as np
import pytest

from ergoguide.errors import ConfigError, InputError, RegistryError
from ergoguide.feedback import (
    LAMBDA,
    PATTERN_UNITS,
    DeviceCommand,
    FeedbackConfig,
    Level,
    Modality,
    default_placements,
    encode_pattern,
    encode_ramp,
    encode_spot,
    error_magnitude,
    feedback_step,
    make_state,
    ramp_sequence,
    select_level,
    select_target_joint,
)
from ergoguide.model import Posture, upright

XI = np.array([90.0, 180.0, 145.0])
GUIDED = ("torso", "shoulder", "elbow")


class TestErrorMagnitude:
    def test_torso_protocol_step(self):
        eps = error_magnitude(np.array([30.0]), np.array([60.0]), np.array([90.0]), ("torso",))
        assert eps.values[0] == pytest.approx(30.0 / 90.0, abs=1e-15)

    def test_identity(self):
        eps = error_magnitude(np.zeros(3), np.zeros(3), XI, GUIDED)
        assert np.all(eps.values == 0.0)

    def test_elbow_protocol_step(self):
        eps = error_magnitude(
            np.array([0.0, 0.0, -45.0]), np.array([0.0, 0.0, -125.0]), XI, GUIDED
        )
        assert eps["elbow"] == pytest.approx(80.0 / 145.0, abs=1e-15)

    def test_rejects_nonpositive_xi(self):
        with pytest.raises(ConfigError):
            error_magnitude(np.zeros(1), np.zeros(1), np.array([0.0]), ("torso",))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InputError):
            error_magnitude(np.zeros(2), np.zeros(3), XI, GUIDED)


class TestJointSelection:
    def _eps(self, values):
        return error_magnitude(np.asarray(values) * XI, np.zeros(3), XI, GUIDED)

    def test_strict_argmax(self):
        assert select_target_joint(self._eps([0.1, 0.5, 0.2])) == "shoulder"

    def test_tie_breaks_to_chain_order(self):
        assert select_target_joint(self._eps([0.3, 0.3, 0.1])) == "torso"

    def test_dead_band_returns_none(self):
        assert select_target_joint(self._eps([0.04, 0.049, 0.0])) is None

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            select_target_joint(error_magnitude(np.zeros(0), np.zeros(0), np.zeros(0), ()))


class TestLevelSelection:
    @pytest.mark.parametrize(
        "eps,expected",
        [
            (0.0, Level.OFF),
            (0.04, Level.OFF),
            (0.05, Level.L1),
            (0.149, Level.L1),
            (0.15, Level.L2),
            (0.20, Level.L2),
            (0.299, Level.L2),
            (0.30, Level.L3),
            (1.0, Level.L3),
        ],
    )
    def test_thresholds(self, eps, expected):
        assert select_level(eps) == expected

    def test_lambda_ordering(self):
        assert LAMBDA[Level.OFF] == 0.0
        assert LAMBDA[Level.L1] < LAMBDA[Level.L2] < LAMBDA[Level.L3]


class TestSpotEncoder:
    def setup_method(self):
        self.placements = default_placements(Modality.SPOT)

    def test_decrease_fires_anterior_unit(self):
        # torso above target: must extend back, chest unit repels backward
        cmds = encode_spot(self.placements, "torso", -1, Level.L3)
        assert len(cmds) == 1
        assert cmds[0].device_id == "torso_front"
        assert cmds[0].duration_ms == 400

    def test_increase_fires_posterior_unit(self):
        cmds = encode_spot(self.placements, "torso", 1, Level.L2)
        assert cmds[0].device_id == "torso_back"
        assert cmds[0].lam == LAMBDA[Level.L2]

    def test_dead_band_empty(self):
        assert encode_spot(self.placements, "torso", -1, Level.OFF) == []

    def test_missing_registry(self):
        with pytest.raises(RegistryError):
            encode_spot({}, "torso", -1, Level.L1)

    def test_signs_opposed_per_joint(self):
        for units in self.placements.values():
            assert {u.repulsion_sign for u in units} == {-1, 1}


class TestRampEncoder:
    def setup_method(self):
        self.placements = default_placements(Modality.RAMP)

    def test_decrease_rises_across_cycle(self):
        lams = [
            encode_ramp(self.placements, "torso", -1, Level.L3, phase)[0].lam
            for phase in range(3)
        ]
        assert lams == sorted(lams)
        assert lams[0] < lams[1] < lams[2]
        assert lams[2] == LAMBDA[Level.L3]

    def test_increase_falls_across_cycle(self):
        lams = [
            encode_ramp(self.placements, "shoulder", 1, Level.L2, phase)[0].lam
            for phase in range(3)
        ]
        assert lams[0] > lams[1] > lams[2]
        assert lams[0] == LAMBDA[Level.L2]

    def test_dead_band_off(self):
        assert encode_ramp(self.placements, "torso", -1, Level.OFF, 0) == []

    def test_sequence_levels(self):
        seq = ramp_sequence(Level.L3, increasing=True)
        assert seq == pytest.approx((1 / 3, 2 / 3, 1.0))


class TestPatternEncoder:
    def setup_method(self):
        self.placements = default_placements(Modality.PATTERN)

    def test_torso_forward_sequence(self):
        # current above desired: ascending unit order, back-to-back onsets
        cmds = encode_pattern(self.placements, "torso", -1, Level.L3)
        assert [c.device_id for c in cmds] == ["torso_p1", "torso_p2", "torso_p3"]
        assert [c.onset_ms for c in cmds] == [0, 400, 800]

    def test_shoulder_backward_sequence(self):
        cmds = encode_pattern(self.placements, "shoulder", 1, Level.L1)
        assert [c.device_id for c in cmds] == ["shoulder_p2", "shoulder_p1"]
        assert [c.onset_ms for c in cmds] == [0, 400]

    def test_dead_band_empty(self):
        assert encode_pattern(self.placements, "elbow", -1, Level.OFF) == []

    def test_unit_counts(self):
        for joint, units in self.placements.items():
            assert len(units) == PATTERN_UNITS[joint]


def _posture(torso=0.0, shoulder=0.0, elbow=0.0):
    return upright().with_angles(torso=torso, shoulder=shoulder, elbow=elbow)


class TestFeedbackStep:
    def test_at_target_stays_silent(self):
        state = make_state(Modality.SPOT)
        q = _posture(torso=30.0)
        commands, state2 = feedback_step(state, q, q, 0.0)
        assert commands == []
        assert state2.active_joint is None
        assert state2.tick == state.tick + 1

    def test_single_joint_error_single_command(self):
        state = make_state(Modality.SPOT)
        q_c = _posture(torso=30.0)
        q_d = _posture(torso=60.0)  # error 0.333 -> L3, must increase
        commands, _ = feedback_step(state, q_c, q_d, 0.0)
        assert len(commands) == 1
        assert commands[0].device_id == "torso_back"
        assert commands[0].level == Level.L3

    def test_argmax_only_joint_commanded(self):
        state = make_state(Modality.SPOT)
        q_c = _posture(torso=10.0, shoulder=-20.0)
        q_d = _posture(torso=20.0, shoulder=-120.0)  # shoulder error dominates
        commands, state2 = feedback_step(state, q_c, q_d, 0.0)
        assert {c.device_id.split("_")[0] for c in commands} == {"shoulder"}
        assert state2.active_joint == "shoulder"

    def test_stop_commands_on_entering_dead_band(self):
        state = make_state(Modality.SPOT)
        q_c, q_d = _posture(torso=30.0), _posture(torso=60.0)
        _, state = feedback_step(state, q_c, q_d, 0.0)
        commands, state = feedback_step(state, q_d, q_d, 0.1)
        assert commands
        assert all(c.level == Level.OFF and c.lam == 0.0 for c in commands)
        commands, state = feedback_step(state, q_d, q_d, 0.2)
        assert commands == []

    def test_pattern_emits_once_per_cycle(self):
        state = make_state(Modality.PATTERN)
        q_c, q_d = _posture(torso=60.0), _posture(torso=0.0)
        emitted = []
        for k in range(24):
            commands, state = feedback_step(state, q_c, q_d, 0.1 * k)
            emitted.append(len(commands))
        cycle = state.pattern_cycle_ticks("torso")
        assert cycle == 12
        assert emitted[0] == 3
        assert sum(emitted) == 6  # two full trains in 24 ticks
        assert emitted[cycle] == 3

    def test_replay_determinism(self):
        streams = []
        for _ in range(2):
            state = make_state(Modality.RAMP)
            out = []
            q_d = _posture(torso=45.0)
            rng = np.random.default_rng(8)
            q = upright()
            for k in range(40):
                q = q.with_angles(torso=q["torso"] + rng.uniform(0, 2.5))
                commands, state = feedback_step(state, q, q_d, 0.1 * k)
                out.append([c.to_record() for c in commands])
            streams.append(out)
        assert streams[0] == streams[1]

    def test_command_record_roundtrip(self):
        cmd = DeviceCommand("torso_front", Level.L2, LAMBDA[Level.L2], 400, 0)
        assert DeviceCommand.from_record(cmd.to_record()) == cmd

    def test_off_lambda_invariant(self):
        with pytest.raises(InputError):
            DeviceCommand("x", Level.OFF, 0.5)
        with pytest.raises(InputError):
            DeviceCommand("x", Level.L1, 0.0)


class TestDeviceEmulator:
    def test_tracks_retrigger_and_expiry(self):
        from ergoguide.feedback import DeviceEmulator

        placements = default_placements(Modality.SPOT)
        emulator = DeviceEmulator(placements)
        cmd = encode_spot(placements, "torso", -1, Level.L3)
        emulator.feed(0.0, cmd)
        assert emulator.vibrating(0.2) == {"torso_front": 1.0}
        emulator.feed(0.1, cmd)  # retrigger extends the window
        assert emulator.vibrating(0.45) == {"torso_front": 1.0}
        assert emulator.vibrating(0.55) == {}

    def test_off_stops_immediately(self):
        from ergoguide.feedback import DeviceEmulator

        placements = default_placements(Modality.SPOT)
        emulator = DeviceEmulator(placements)
        emulator.feed(0.0, encode_spot(placements, "torso", 1, Level.L2))
        emulator.feed(0.1, [DeviceCommand("torso_back", Level.OFF, 0.0, 0)])
        assert emulator.vibrating(0.15) == {}

    def test_pattern_onsets_respected(self):
        from ergoguide.feedback import DeviceEmulator

        placements = default_placements(Modality.PATTERN)
        emulator = DeviceEmulator(placements)
        emulator.feed(0.0, encode_pattern(placements, "torso", -1, Level.L1))
        assert set(emulator.vibrating(0.1)) == {"torso_p1"}
        assert set(emulator.vibrating(0.5)) == {"torso_p2"}
        assert set(emulator.vibrating(0.9)) == {"torso_p3"}

    def test_unknown_device_rejected(self):
        from ergoguide.feedback import DeviceEmulator

        emulator = DeviceEmulator(default_placements(Modality.RAMP))
        with pytest.raises(RegistryError):
            emulator.feed(0.0, [DeviceCommand("nope", Level.L1, LAMBDA[Level.L1])])

    def test_metadata_carried(self):
        from ergoguide.feedback import DEVICE_INFO

        assert DEVICE_INFO["carrier_hz"] == 121.0
        assert DEVICE_INFO["mass_g"] == 28.0
        assert DEVICE_INFO["amplitude_levels"] == 3


class TestAlgorithmConformance:
    """Randomized tick sweep over all modalities."""

    def test_random_ticks(self):
        rng = np.random.default_rng(2024)
        config = FeedbackConfig()
        for modality in Modality:
            state = make_state(modality, config)
            for k in range(400):
                q_c = Posture(rng.uniform(-150, 100, size=5))
                q_d = Posture(rng.uniform(-150, 100, size=5))
                cur = np.array([q_c[j] for j in GUIDED])
                des = np.array([q_d[j] for j in GUIDED])
                eps = np.abs(cur - des) / XI
                commands, state = feedback_step(state, q_c, q_d, 0.1 * k)
                active = [c for c in commands if c.level != Level.OFF]
                if np.all(eps < 0.05):
                    assert active == []
                    continue
                target = int(np.argmax(eps))
                joint = GUIDED[target]
                if active:
                    assert {c.device_id.rsplit("_", 1)[0] for c in active} == {joint}
                expected_level = select_level(eps[target])
                for c in active:
                    assert c.level == expected_level
                if modality == Modality.SPOT:
                    assert len(active) == 1
                elif modality == Modality.PATTERN and active:
                    indices = [c.onset_ms for c in active]
                    assert indices == sorted(indices)
                    ids = [c.device_id for c in active]
                    expected = sorted(ids) if des[target] < cur[target] else sorted(ids, reverse=True)
                    assert ids == expected
