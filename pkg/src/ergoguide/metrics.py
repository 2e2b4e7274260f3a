"""Performance indices computed from closed-loop trial logs.

A trial log holds one tick record per control period (0.1 s nominal).  The
indices: success (any fully in-band sample within the final two seconds),
reaching time, per-joint angular distance / reaching velocity / path speed,
final error, confusion index (fraction of moving time spent traveling against
the cued direction), per-joint overload decrement ratio, plus SUS/SEQ
questionnaire scoring, descriptive aggregation, and the one-way
repeated-measures ANOVA F statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import EvaluationError, InputError
from .model import JOINTS, N_JOINTS
from .wire import read_jsonl, write_jsonl

LOG_SCHEMA_VERSION = 1

#: samples slower than this (deg/s) do not count as moving
MOVING_THRESHOLD = 0.5
#: normalized-error dead band shared with the feedback engine
DEAD_BAND = 0.05
#: final two seconds of a trial, the settling window checked for success
SUCCESS_WINDOW = 2.0


@dataclass(frozen=True)
class TickRecord:
    tick: int
    t: float
    q_c: np.ndarray  # full chain angles, deg
    q_d: np.ndarray
    eps: np.ndarray  # normalized errors, guided joints only
    commands: list = field(default_factory=list)  # wire records
    tau_overload: np.ndarray | None = None
    segment: int = 0

    def to_record(self) -> dict:
        rec = {
            "type": "tick",
            "tick": self.tick,
            "t": round(self.t, 9),
            "segment": self.segment,
            "q_c": [float(v) for v in self.q_c],
            "q_d": [float(v) for v in self.q_d],
            "eps": [float(v) for v in self.eps],
            "commands": self.commands,
        }
        rec["tau_overload"] = (
            None if self.tau_overload is None else [float(v) for v in self.tau_overload]
        )
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "TickRecord":
        tau = rec.get("tau_overload")
        return cls(
            tick=rec["tick"],
            t=rec["t"],
            q_c=np.array(rec["q_c"], dtype=float),
            q_d=np.array(rec["q_d"], dtype=float),
            eps=np.array(rec["eps"], dtype=float),
            commands=rec.get("commands", []),
            tau_overload=None if tau is None else np.array(tau, dtype=float),
            segment=rec.get("segment", 0),
        )


@dataclass
class TrialLog:
    """Timestamped closed-loop record of one trial."""

    modality: str
    protocol: str
    condition: str
    guided_joints: tuple[str, ...]
    seed: int
    tick_s: float = 0.1
    records: list[TickRecord] = field(default_factory=list)
    status: str = "completed"
    completed_at: float | None = None
    dead_band: float = DEAD_BAND
    extra: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        if not self.records:
            return 0.0
        return self.records[-1].t - self.records[0].t

    def segment_ids(self) -> list[int]:
        return sorted({r.segment for r in self.records})

    def segment(self, segment_id: int) -> "TrialLog":
        """A view of one reach (one target) of a multi-target trial."""
        sub = [r for r in self.records if r.segment == segment_id]
        return TrialLog(
            modality=self.modality,
            protocol=self.protocol,
            condition=self.condition,
            guided_joints=self.guided_joints,
            seed=self.seed,
            tick_s=self.tick_s,
            records=sub,
            status=self.status,
            completed_at=sub[-1].t if sub else None,
            dead_band=self.dead_band,
            extra=dict(self.extra, segment=segment_id),
        )

    def validate(self) -> None:
        """Check the per-tick invariants: monotone ticks, eps from the angles."""
        guided = [JOINTS.index(j) for j in self.guided_joints]
        xi = self.extra.get("feedback", {}).get("xi")
        prev_tick = None
        for record in self.records:
            if prev_tick is not None and record.tick <= prev_tick:
                raise InputError(f"ticks not strictly increasing at {record.tick}")
            prev_tick = record.tick
            if xi:
                expected = np.array(
                    [
                        abs(record.q_c[idx] - record.q_d[idx]) / xi[joint]
                        for idx, joint in zip(guided, self.guided_joints)
                    ]
                )
                if not np.allclose(record.eps, expected, atol=1e-9):
                    raise InputError(f"eps inconsistent with angles at tick {record.tick}")

    # -- line-delimited JSON --------------------------------------------------

    def to_records(self) -> list[dict]:
        meta = {
            "type": "meta",
            "schema_version": LOG_SCHEMA_VERSION,
            "modality": self.modality,
            "protocol": self.protocol,
            "condition": self.condition,
            "guided_joints": list(self.guided_joints),
            "joints": list(JOINTS),
            "seed": self.seed,
            "tick_s": self.tick_s,
            "dead_band": self.dead_band,
            "extra": self.extra,
        }
        end = {
            "type": "end",
            "status": self.status,
            "t": self.completed_at if self.completed_at is not None else self.duration,
        }
        return [meta] + [r.to_record() for r in self.records] + [end]

    def save(self, path: str | Path) -> None:
        write_jsonl(path, self.to_records())

    @classmethod
    def from_records(cls, records: list[dict]) -> "TrialLog":
        if not records or records[0].get("type") != "meta":
            raise InputError("trial log must start with a meta record")
        meta = records[0]
        if meta.get("schema_version") != LOG_SCHEMA_VERSION:
            raise InputError(f"unsupported log schema_version {meta.get('schema_version')!r}")
        log = cls(
            modality=meta["modality"],
            protocol=meta["protocol"],
            condition=meta["condition"],
            guided_joints=tuple(meta["guided_joints"]),
            seed=meta["seed"],
            tick_s=meta["tick_s"],
            dead_band=meta.get("dead_band", DEAD_BAND),
            extra=meta.get("extra", {}),
        )
        for rec in records[1:]:
            if rec.get("type") == "tick":
                log.records.append(TickRecord.from_record(rec))
            elif rec.get("type") == "end":
                log.status = rec["status"]
                log.completed_at = rec["t"]
        return log

    @classmethod
    def load(cls, path: str | Path) -> "TrialLog":
        return cls.from_records(read_jsonl(path))


def _require_window(log: TrialLog) -> list[TickRecord]:
    if log.duration + 1e-9 < SUCCESS_WINDOW:
        raise EvaluationError(
            f"log of {log.duration:.2f} s is shorter than the {SUCCESS_WINDOW} s window"
        )
    t_end = log.records[-1].t
    return [r for r in log.records if r.t >= t_end - SUCCESS_WINDOW - 1e-9]


def _in_band(record: TickRecord, dead_band: float) -> bool:
    return bool(np.all(record.eps < dead_band))


def success(log: TrialLog, dead_band: float | None = None) -> bool:
    """True iff some sample of the final window has every error in band."""
    db = log.dead_band if dead_band is None else dead_band
    return any(_in_band(r, db) for r in _require_window(log))


def reaching_time(log: TrialLog, dead_band: float | None = None) -> float | None:
    """Seconds from the first tick to the settling sample; None on failure.

    The settling sample is the first fully in-band sample inside the final
    window.  Trials end one window after settling, so on harness logs this is
    the moment the wearer entered the band (zero when the very first tick
    already satisfies every error).
    """
    db = log.dead_band if dead_band is None else dead_band
    for r in _require_window(log):
        if _in_band(r, db):
            return r.t - log.records[0].t
    return None


def _guided_index(log: TrialLog) -> list[int]:
    return [JOINTS.index(j) for j in log.guided_joints]


def _reach_slice(log: TrialLog) -> tuple[list[TickRecord], float]:
    dt = reaching_time(log)
    if dt is None:
        raise EvaluationError("metric defined only for successful trials")
    t0 = log.records[0].t
    span = [r for r in log.records if r.t <= t0 + dt + 1e-9]
    return span, dt


def angular_distance(log: TrialLog) -> dict[str, float]:
    """Total travelled angle per guided joint during the reach (deg)."""
    span, _ = _reach_slice(log)
    q = np.array([r.q_c for r in span])
    theta = np.abs(np.diff(q, axis=0)).sum(axis=0) if len(q) > 1 else np.zeros(N_JOINTS)
    return {j: float(theta[JOINTS.index(j)]) for j in log.guided_joints}


def reaching_velocity(log: TrialLog) -> dict[str, float]:
    """Chord velocity |q_f - q_i| / reach time per guided joint (deg/s)."""
    span, dt = _reach_slice(log)
    q_i, q_f = span[0].q_c, span[-1].q_c
    out = {}
    for j in log.guided_joints:
        idx = JOINTS.index(j)
        out[j] = float(abs(q_f[idx] - q_i[idx]) / dt) if dt > 0 else 0.0
    return out


def path_speed(log: TrialLog) -> dict[str, float]:
    """Path length over reach time per guided joint (deg/s)."""
    theta = angular_distance(log)
    _, dt = _reach_slice(log)
    return {j: (theta[j] / dt if dt > 0 else 0.0) for j in log.guided_joints}


def final_error(log: TrialLog) -> dict[str, float]:
    """Per-joint minimum normalized error over the final window, percent."""
    window = _require_window(log)
    eps = np.array([r.eps for r in window])
    mins = eps.min(axis=0) * 100.0
    return {j: float(mins[i]) for i, j in enumerate(log.guided_joints)}


def confusion_index(
    log: TrialLog, moving_threshold: float = MOVING_THRESHOLD
) -> float | None:
    """Percent of moving samples traveling against the cued direction.

    A sample counts when a joint is being cued (some error at or above the
    dead band; the cued joint is the error argmax, matching the engine rule)
    and that joint moves faster than ``moving_threshold`` deg/s.  Returns
    None when nothing moved under guidance.
    """
    if not log.records:
        raise EvaluationError("empty trial log")
    moving = wrong = 0
    guided = _guided_index(log)
    for prev, nxt in zip(log.records, log.records[1:]):
        if np.all(prev.eps < log.dead_band):
            continue
        target = guided[int(np.argmax(prev.eps))]
        dt = nxt.t - prev.t
        if dt <= 0:
            continue
        velocity = (nxt.q_c[target] - prev.q_c[target]) / dt
        if abs(velocity) < moving_threshold:
            continue
        moving += 1
        needed = np.sign(prev.q_d[target] - prev.q_c[target])
        if np.sign(velocity) != needed:
            wrong += 1
    if moving == 0:
        return None
    return 100.0 * wrong / moving


def decrement_ratio(
    tau_init, tau_final, min_torque: float = 0.1
) -> dict[str, float | None]:
    """Percent reduction of each joint's overloading torque magnitude.

    Positive means the final posture loads the joint less.  Joints whose
    initial magnitude is at or below ``min_torque`` N*m are reported absent.
    """
    t_i = np.asarray(getattr(tau_init, "values", tau_init), dtype=float)
    t_f = np.asarray(getattr(tau_final, "values", tau_final), dtype=float)
    if t_i.shape != (N_JOINTS,) or t_f.shape != (N_JOINTS,):
        raise InputError("torque vectors must cover the joint chain")
    out: dict[str, float | None] = {}
    for idx, joint in enumerate(JOINTS):
        mag_i = abs(t_i[idx])
        if mag_i <= min_torque:
            out[joint] = None
        else:
            out[joint] = 100.0 * (mag_i - abs(t_f[idx])) / mag_i
    return out


def trial_metrics(log: TrialLog) -> dict:
    """All indices for one trial segment, absent values as None."""
    ok = success(log)
    row: dict = {
        "modality": log.modality,
        "protocol": log.protocol,
        "condition": log.condition,
        "success": 100.0 if ok else 0.0,
        "confusion": confusion_index(log),
        "reach_time": reaching_time(log),
    }
    if ok:
        theta = angular_distance(log)
        vel = reaching_velocity(log)
        spd = path_speed(log)
        for j in log.guided_joints:
            row[f"theta_{j}"] = theta[j]
            row[f"velocity_{j}"] = vel[j]
            row[f"speed_{j}"] = spd[j]
    err = final_error(log)
    for j in log.guided_joints:
        row[f"final_error_{j}"] = err[j]
    first_tau = log.records[0].tau_overload if log.records else None
    last_tau = log.records[-1].tau_overload if log.records else None
    if first_tau is not None and last_tau is not None:
        for j, value in decrement_ratio(first_tau, last_tau).items():
            row[f"decrement_{j}"] = value
    return row


# -- aggregation and statistics ----------------------------------------------


def subject_means(
    rows: list[dict], keys: tuple[str, ...] = ("subject", "modality", "condition")
) -> list[dict]:
    """Collapse repeated reaches to one row per subject/modality/condition.

    Descriptive tables and the repeated-measures ANOVA both work on subject
    means, so a single-subject campaign reports no standard deviations.
    """
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row.get(k) for k in keys), []).append(row)
    collapsed = []
    for key, members in groups.items():
        out = dict(zip(keys, key))
        names = {
            k
            for member in members
            for k, v in member.items()
            if k not in keys and isinstance(v, (int, float))
        }
        for name in sorted(names):
            values = [m[name] for m in members if isinstance(m.get(name), (int, float))]
            if values:
                out[name] = float(np.mean(values))
        collapsed.append(out)
    return collapsed


def aggregate(trials: list[dict], grouping: list[str]) -> dict[tuple, dict]:
    """Mean/std/n tables per metric, grouped by the given keys.

    Standard deviations use n-1 weighting and are absent for single-trial
    groups; non-numeric and absent values are skipped.
    """
    groups: dict[tuple, list[dict]] = {}
    for trial in trials:
        key = tuple(trial.get(k) for k in grouping)
        groups.setdefault(key, []).append(trial)
    tables: dict[tuple, dict] = {}
    for key, rows in groups.items():
        metrics: dict[str, dict] = {}
        names = {k for row in rows for k, v in row.items()
                 if isinstance(v, (int, float)) and k not in grouping}
        for name in sorted(names):
            values = [row[name] for row in rows
                      if isinstance(row.get(name), (int, float))]
            if not values:
                continue
            metrics[name] = {
                "mean": float(np.mean(values)),
                "std": float(np.std(values, ddof=1)) if len(values) > 1 else None,
                "n": len(values),
            }
        tables[key] = metrics
    return tables


def rm_anova_f(groups) -> dict:
    """One-way repeated-measures ANOVA over a (subjects x conditions) table.

    Returns the F ratio with (k-1, (k-1)(n-1)) degrees of freedom and the
    upper-tail p value.  The design must be balanced: every subject measured
    in every condition.
    """
    data = np.asarray(groups, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
        raise InputError("need a 2-D (subjects x conditions) table, both >= 2")
    if np.any(np.isnan(data)):
        raise InputError("unbalanced design: missing cells")
    n, k = data.shape
    grand = data.mean()
    ss_treat = n * float(np.sum((data.mean(axis=0) - grand) ** 2))
    ss_subj = k * float(np.sum((data.mean(axis=1) - grand) ** 2))
    ss_total = float(np.sum((data - grand) ** 2))
    ss_err = ss_total - ss_treat - ss_subj
    df_treat = k - 1
    df_err = (k - 1) * (n - 1)
    ms_treat = ss_treat / df_treat
    ms_err = ss_err / df_err
    scale = max(ss_total, 1.0)
    if ss_treat <= 1e-12 * scale:
        f_ratio, p = 0.0, 1.0
    elif ms_err <= 1e-12 * scale:
        f_ratio, p = math.inf, 0.0
    else:
        f_ratio = ms_treat / ms_err
        p = float(stats.f.sf(f_ratio, df_treat, df_err))
    return {"F": f_ratio, "p": p, "df": (df_treat, df_err)}


def sus_score(responses) -> float:
    """System Usability Scale: ten 1-5 items to a 0-100 score."""
    items = list(responses)
    if len(items) != 10:
        raise InputError("SUS needs exactly 10 responses")
    total = 0.0
    for i, value in enumerate(items):
        if not 1 <= value <= 5:
            raise InputError(f"SUS item {i + 1} out of range 1-5: {value!r}")
        total += (value - 1) if i % 2 == 0 else (5 - value)
    return total * 2.5


def seq_score(response) -> float:
    """Single Ease Question: 1 (very hard) .. 7 (very easy), passthrough."""
    if not 1 <= response <= 7:
        raise InputError(f"SEQ response out of range 1-7: {response!r}")
    return float(response)
