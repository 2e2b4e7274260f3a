"""Experiment orchestration: protocols, closed-loop trials, campaigns, reports.

Two protocols are implemented.  The modality test guides a wearer through
three consecutive target configurations (single-joint torso set or
multi-joint arm set) under one feedback modality.  The ergonomic test starts
the wearer holding a load at a condition distance, solves the posture
optimization for the desired configuration, and guides toward it while
recording the estimated overloading torques each tick.

Sensor data is simulated at the sensor rate and averaged down to the control
tick; only tick-rate data is logged.  Trials are deterministic functions of
(config, seed): logs are byte-identical across runs and every logged command
can be reproduced by replaying the feedback engine over the logged angle
streams.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import PRESETS, Agent, AgentParams, make_agent
from .errors import ConfigError, InputError
from .feedback import (
    DeviceCommand,
    DevicePlacement,
    FeedbackConfig,
    FeedbackState,
    Modality,
    default_placements,
    error_magnitude,
    feedback_step,
    make_state,
)
from .loading import LoadSpec, PlateReading, estimate_overloading, simulate_plate
from .metrics import TickRecord, TrialLog, aggregate, subject_means, trial_metrics
from .model import (
    JOINTS,
    HumanModel,
    Posture,
    SescParams,
    default_model,
    sesc_calibrate,
    whole_body_com,
)
from .optimize import OptimizationSpec, SolverOptions, optimize_posture, reaching_posture

CONFIG_SCHEMA_VERSION = 1

TORSO_TARGETS = (-10.0, 30.0, 60.0)
SHOULDER_TARGETS = (10.0, -45.0, -90.0)
ELBOW_TARGETS = (-45.0, -90.0, -125.0)
CONDITION_DISTANCES = {1: 0.2, 2: 0.5, 3: 0.8}


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str = "modality_test"  # or "ergonomic_test"
    torso_targets: tuple = TORSO_TARGETS
    shoulder_targets: tuple = SHOULDER_TARGETS
    elbow_targets: tuple = ELBOW_TARGETS
    condition_distances: dict = field(default_factory=lambda: dict(CONDITION_DISTANCES))
    load_mass: float = 4.0
    initial_height: float = 0.5
    timeout_s: float = 180.0

    def __post_init__(self):
        if self.kind not in ("modality_test", "ergonomic_test"):
            raise ConfigError(f"unknown protocol kind {self.kind!r}")
        if any(d <= 0 for d in self.condition_distances.values()):
            raise ConfigError("condition distances must be > 0")
        if self.load_mass < 0:
            raise ConfigError("load mass must be >= 0")

    def validate_targets(self, model: HumanModel) -> None:
        sets = {
            "torso": self.torso_targets,
            "shoulder": self.shoulder_targets,
            "elbow": self.elbow_targets,
        }
        for joint, targets in sets.items():
            lo, hi = model.joint_limits[joint]
            for value in targets:
                if not lo <= value <= hi:
                    raise ConfigError(f"target {value} for {joint} outside [{lo}, {hi}]")

    def arm_sequence(self) -> list[dict]:
        return [
            {"shoulder": s, "elbow": e}
            for s, e in zip(self.shoulder_targets, self.elbow_targets)
        ]

    def torso_sequence(self) -> list[dict]:
        return [{"torso": t} for t in self.torso_targets]


@dataclass(frozen=True)
class SessionConfig:
    model_path: str | None = None
    modality: str = "spot"
    agent: str = "ideal"  # preset name, or "live" for a UI-driven wearer
    seed: int = 0
    out_dir: str = "runs"
    tick_rate: float = 10.0
    sensor_rate: float = 1000.0
    timeout_s: float = 180.0
    hold_s: float = 2.0  # in-band dwell that ends a reach
    cop_noise: float = 0.0  # m, plate CoP sigma
    grf_noise: float = 0.0  # N, plate GRF sigma
    feedback: dict = field(default_factory=dict)  # FeedbackConfig overrides
    solver: dict = field(default_factory=dict)  # SolverOptions overrides
    agent_params: dict = field(default_factory=dict)  # AgentParams overrides

    def __post_init__(self):
        if self.tick_rate <= 0 or self.sensor_rate <= 0:
            raise ConfigError("rates must be > 0")
        ratio = self.sensor_rate / self.tick_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("tick rate must divide sensor rate")

    @property
    def dt(self) -> float:
        return 1.0 / self.tick_rate

    @property
    def samples_per_tick(self) -> int:
        return int(round(self.sensor_rate / self.tick_rate))

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["schema_version"] = CONFIG_SCHEMA_VERSION
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        data = dict(data)
        version = data.pop("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {version!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "SessionConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def load_model(self) -> HumanModel:
        if self.model_path is None:
            return default_model()
        return HumanModel.load(self.model_path)

    def feedback_config(self, guided: tuple[str, ...]) -> FeedbackConfig:
        overrides = dict(self.feedback)
        overrides.setdefault("tick_ms", int(round(1000.0 / self.tick_rate)))
        xi = overrides.pop("xi", None)
        cfg = FeedbackConfig(guided=guided, **overrides)
        if xi:
            cfg = dataclasses.replace(cfg, xi={**cfg.xi, **xi})
        return cfg

    def solver_options(self) -> SolverOptions:
        return SolverOptions(seed=self.seed, **self.solver)

    def make_agent(self, modality, fb_config, placements, model) -> Agent:
        if self.agent == "live":
            raise ConfigError("live sessions run through serve_session, not trials")
        if self.agent_params:
            params = AgentParams(**self.agent_params)
            return make_agent(params, modality, fb_config, placements, model)
        return make_agent(self.agent, modality, fb_config, placements, model)


@dataclass
class SensorSim:
    """Per-tick plate simulation and overload estimation.

    The sensor stream runs at the sensor rate and is averaged down to one
    reading per control tick before estimation.
    """

    sesc_params: SescParams
    cop_noise: float = 0.0
    grf_noise: float = 0.0
    samples_per_tick: int = 100

    def tau(self, model, posture, load, rng) -> np.ndarray:
        if self.cop_noise or self.grf_noise:
            cops = np.empty(self.samples_per_tick)
            grfs = np.empty(self.samples_per_tick)
            for i in range(self.samples_per_tick):
                sample = simulate_plate(
                    model, posture, load, self.cop_noise, self.grf_noise, rng
                )
                cops[i] = sample.cop_x
                grfs[i] = sample.grf_z
            reading = PlateReading(grf_z=float(grfs.mean()), cop_x=float(cops.mean()))
        else:
            reading = simulate_plate(model, posture, load)
        est = estimate_overloading(reading, self.sesc_params, model, posture)
        return est.values


def calibrate_sesc(model: HumanModel, seed: int = 0, samples: int = 40):
    """Identify the CoM predictor from random feasible postures (noiseless)."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(samples):
        q = rng.uniform(model.limits_low, model.limits_high)
        posture = Posture(q)
        pairs.append((posture, whole_body_com(model, posture)))
    return sesc_calibrate(pairs)


def _command_records(commands: list[DeviceCommand]) -> list[dict]:
    return [c.to_record() for c in commands]


class _LegFollower:
    """Whole-body accommodation of the simulated wearer.

    Guidance cues only the torso and arm, yet a person folding toward the
    optimized posture bends the unguided leg joints along with the trunk.
    This tracks that coordination: the leg joints interpolate from their
    starting angles to the optimized ones as the guided error shrinks, with
    monotone progress so noisy wearers never snap backward.
    """

    def __init__(self, q_init: Posture, q_d: Posture, dead_band: float,
                 joints=("ankle", "knee")):
        self.joints = joints
        self.start = {j: q_init[j] for j in joints}
        self.target = {j: q_d[j] for j in joints}
        self.dead_band = dead_band
        self.r0 = None
        self.progress = 0.0

    def apply(self, posture: Posture, eps_values: np.ndarray) -> Posture:
        r = float(np.max(eps_values))
        if self.r0 is None:
            self.r0 = r
        span = self.r0 - self.dead_band
        p = 1.0 if span <= 0 else float(np.clip((self.r0 - r) / span, 0.0, 1.0))
        self.progress = max(self.progress, p)
        updates = {
            j: self.start[j] + self.progress * (self.target[j] - self.start[j])
            for j in self.joints
        }
        return posture.with_angles(**updates)


def _run_reach(
    model: HumanModel,
    state: FeedbackState,
    agent: Agent,
    q_c: Posture,
    q_d: Posture,
    rng: np.random.Generator,
    config: SessionConfig,
    segment: int,
    t0: float,
    tick0: int,
    load: LoadSpec | None = None,
    sensors: SensorSim | None = None,
    follower: _LegFollower | None = None,
):
    """Closed loop for one target; returns (records, q_c, state, status, t, tick)."""
    dt = config.dt
    cfg = state.config
    records: list[TickRecord] = []
    t, tick = t0, tick0
    t_enter = None  # start of the current fully in-band streak
    status = "timeout"
    max_ticks = int(round(config.timeout_s / dt))
    for _ in range(max_ticks):
        cur = np.array([q_c[j] for j in cfg.guided])
        des = np.array([q_d[j] for j in cfg.guided])
        eps = error_magnitude(cur, des, cfg.xi_vector, cfg.guided)
        commands, state = feedback_step(state, q_c, q_d, t)
        tau = sensors.tau(model, q_c, load, rng) if sensors is not None else None
        records.append(
            TickRecord(
                tick=tick,
                t=t,
                q_c=q_c.angles.copy(),
                q_d=q_d.angles.copy(),
                eps=eps.values.copy(),
                commands=_command_records(commands),
                tau_overload=tau,
                segment=segment,
            )
        )
        if np.all(eps.values < cfg.dead_band):
            if t_enter is None:
                t_enter = t
            elif t - t_enter >= config.hold_s - 1e-9:
                status = "completed"
                t += dt
                tick += 1
                break
        else:
            t_enter = None
        decision = agent.decide(commands, rng)
        q_c = agent.step(decision, q_c, dt)
        if follower is not None:
            q_c = follower.apply(q_c, eps.values)
        t += dt
        tick += 1
    return records, q_c, state, status, t, tick


def run_modality_trial(
    config: SessionConfig,
    target_sequence="torso",
    protocol: ProtocolSpec | None = None,
    start: Posture | None = None,
) -> TrialLog:
    """Three consecutive guided reaches under one modality.

    ``target_sequence`` is "torso", "arm", or an explicit list of
    {joint: angle} maps.  The wearer starts upright; each segment retargets
    the guided joints and runs until the settling hold or the timeout.
    """
    protocol = protocol or ProtocolSpec()
    model = config.load_model()
    protocol.validate_targets(model)
    if target_sequence == "torso":
        sequence, label = protocol.torso_sequence(), "torso"
    elif target_sequence == "arm":
        sequence, label = protocol.arm_sequence(), "arm"
    else:
        sequence, label = list(target_sequence), "custom"
    guided = tuple(j for j in JOINTS if any(j in step for step in sequence))
    if not guided:
        raise InputError("target sequence names no joints")

    modality = Modality(config.modality)
    fb_config = config.feedback_config(guided)
    placements = default_placements(modality, guided)
    state = make_state(modality, fb_config, placements)
    agent = config.make_agent(modality, fb_config, placements, model)
    rng = np.random.default_rng(config.seed)

    q_c = start if start is not None else Posture(np.zeros(len(JOINTS)))
    log = TrialLog(
        modality=modality.value,
        protocol="modality_test",
        condition=label,
        guided_joints=guided,
        seed=config.seed,
        tick_s=config.dt,
        dead_band=fb_config.dead_band,
        extra=_log_extra(config, fb_config, placements, {"targets": sequence}),
    )
    t, tick = 0.0, 0
    status = "completed"
    for segment, targets in enumerate(sequence):
        q_d = q_c.with_angles(**targets)
        records, q_c, state, status, t, tick = _run_reach(
            model, state, agent, q_c, q_d, rng, config, segment, t, tick
        )
        log.records.extend(records)
        if status != "completed":
            break
    log.status = status
    log.completed_at = log.records[-1].t if log.records else 0.0
    return log


def run_ergonomic_trial(
    config: SessionConfig,
    condition: int = 2,
    protocol: ProtocolSpec | None = None,
) -> TrialLog:
    """Guided ergonomic adjustment while holding the protocol load.

    Builds the starting posture by reaching to the condition distance at the
    initial object height, solves the posture optimization for the desired
    configuration, then runs the guidance loop logging the estimated
    overloading torques each tick.
    """
    protocol = protocol or ProtocolSpec(kind="ergonomic_test")
    model = config.load_model()
    distance = protocol.condition_distances[condition]
    load = LoadSpec(protocol.load_mass)
    q_init = reaching_posture(model, (distance, protocol.initial_height), load)

    opt_spec = OptimizationSpec(solver=config.solver_options())
    q_d, solve_report = optimize_posture(model, q_init, load, opt_spec)

    guided = ("torso", "shoulder", "elbow")
    modality = Modality(config.modality)
    fb_config = config.feedback_config(guided)
    placements = default_placements(modality, guided)
    state = make_state(modality, fb_config, placements)
    agent = config.make_agent(modality, fb_config, placements, model)
    rng = np.random.default_rng(config.seed)
    sensors = SensorSim(
        sesc_params=calibrate_sesc(model, seed=config.seed),
        cop_noise=config.cop_noise,
        grf_noise=config.grf_noise,
        samples_per_tick=config.samples_per_tick,
    )

    log = TrialLog(
        modality=modality.value,
        protocol="ergonomic_test",
        condition=f"condition_{condition}",
        guided_joints=guided,
        seed=config.seed,
        tick_s=config.dt,
        dead_band=fb_config.dead_band,
        extra=_log_extra(
            config,
            fb_config,
            placements,
            {
                "condition_distance": distance,
                "load_mass": load.mass,
                "q_init": [float(v) for v in q_init.angles],
                "q_desired": [float(v) for v in q_d.angles],
                "objective_init": solve_report.objective_init,
                "objective_final": solve_report.objective_final,
            },
        ),
    )
    follower = _LegFollower(q_init, q_d, fb_config.dead_band)
    records, _, _, status, _, _ = _run_reach(
        model, state, agent, q_init, q_d, rng, config, 0, 0.0, 0, load, sensors,
        follower,
    )
    log.records.extend(records)
    log.status = status
    log.completed_at = log.records[-1].t if log.records else 0.0
    return log


def _log_extra(config, fb_config, placements, extra):
    return {
        "feedback": {
            "guided": list(fb_config.guided),
            "xi": {j: fb_config.xi[j] for j in fb_config.guided},
            "dead_band": fb_config.dead_band,
            "level_thresholds": list(fb_config.level_thresholds),
            "duration_ms": fb_config.duration_ms,
            "tick_ms": fb_config.tick_ms,
        },
        "placements": [
            dataclasses.asdict(u) for units in placements.values() for u in units
        ],
        "agent": config.agent,
        **extra,
    }


def rebuild_engine(log: TrialLog) -> FeedbackState:
    """Reconstruct the feedback engine a log was produced with."""
    fb = log.extra["feedback"]
    cfg = FeedbackConfig(
        guided=tuple(fb["guided"]),
        xi=dict(fb["xi"]),
        dead_band=fb["dead_band"],
        level_thresholds=tuple(fb["level_thresholds"]),
        duration_ms=fb["duration_ms"],
        tick_ms=fb["tick_ms"],
    )
    placements: dict[str, list[DevicePlacement]] = {}
    for u in log.extra["placements"]:
        placements.setdefault(u["joint"], []).append(DevicePlacement(**u))
    return make_state(Modality(log.modality), cfg, placements)


def verify_replay(log: TrialLog) -> bool:
    """Re-run the engine over the logged angle streams; commands must match."""
    state = rebuild_engine(log)
    for record in log.records:
        commands, state = feedback_step(
            state, Posture(record.q_c), Posture(record.q_d), record.t
        )
        if _command_records(commands) != record.commands:
            return False
    return True


# -- campaigns ----------------------------------------------------------------


def _jittered_params(base: AgentParams, rng: np.random.Generator) -> AgentParams:
    comp = {
        m: float(np.clip(p - rng.uniform(0.0, 0.1), 0.0, 1.0))
        for m, p in base.comprehension.items()
    }
    return dataclasses.replace(
        base,
        comprehension=comp,
        max_joint_speed=base.max_joint_speed * rng.uniform(0.8, 1.2),
        reaction_delay=base.reaction_delay + rng.uniform(0.0, 0.2),
    )


def run_campaign(
    config: SessionConfig,
    protocol: ProtocolSpec | None = None,
    n_virtual_subjects: int = 5,
    modalities: tuple[str, ...] | None = None,
    jitter: bool = True,
) -> dict:
    """Run every trial of a protocol over seeded virtual subjects.

    Subjects get deterministic parameter jitter and a randomized target-set /
    condition order derived purely from the campaign seed.  Logs and CSV
    report tables are written under ``config.out_dir``.
    """
    if n_virtual_subjects < 1:
        raise InputError("need at least one virtual subject")
    protocol = protocol or ProtocolSpec()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if modalities is None:
        modalities = (
            tuple(m.value for m in Modality)
            if protocol.kind == "modality_test"
            else (config.modality,)
        )

    base_params = (
        AgentParams(**config.agent_params)
        if config.agent_params
        else PRESETS[config.agent]
    )
    seeds = np.random.SeedSequence(config.seed).spawn(n_virtual_subjects)
    rows = []
    log_paths = []
    for subject, seq in enumerate(seeds):
        rng = np.random.default_rng(seq)
        params = _jittered_params(base_params, rng) if jitter else base_params
        subject_seed = int(rng.integers(0, 2**31 - 1))
        params_dict = dataclasses.asdict(params)
        params_dict["comprehension"] = {
            m.value: p for m, p in params.comprehension.items()
        }
        for modality in modalities:
            sub_cfg = dataclasses.replace(
                config, modality=modality, seed=subject_seed, agent_params=params_dict
            )
            if protocol.kind == "modality_test":
                sets = ["torso", "arm"]
                rng.shuffle(sets)
                for target_set in sets:
                    log = run_modality_trial(sub_cfg, target_set, protocol)
                    log.extra["subject"] = subject
                    path = out_dir / f"subject{subject:02d}_{modality}_{target_set}.jsonl"
                    log.save(path)
                    log_paths.append(path)
                    for segment_id in log.segment_ids():
                        row = trial_metrics(log.segment(segment_id))
                        row.update(subject=subject, segment=segment_id)
                        rows.append(row)
            else:
                order = list(protocol.condition_distances)
                rng.shuffle(order)
                for condition in order:
                    log = run_ergonomic_trial(sub_cfg, condition, protocol)
                    log.extra["subject"] = subject
                    path = out_dir / f"subject{subject:02d}_{modality}_cond{condition}.jsonl"
                    log.save(path)
                    log_paths.append(path)
                    row = trial_metrics(log)
                    row.update(subject=subject, segment=0)
                    rows.append(row)

    trials_csv = out_dir / "trials.csv"
    summary_csv = out_dir / "summary.csv"
    write_trials_csv(rows, trials_csv)
    grouping = ["modality", "condition"]
    per_subject = subject_means(rows)
    write_summary_csv(aggregate(per_subject, grouping), grouping, summary_csv)
    return {
        "logs": [str(p) for p in log_paths],
        "trials_csv": str(trials_csv),
        "summary_csv": str(summary_csv),
        "rows": rows,
    }


def write_trials_csv(rows: list[dict], path) -> None:
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})


def write_summary_csv(tables: dict, grouping: list[str], path) -> None:
    """Aggregated mean/std/n rows mirroring the per-index report tables."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(grouping + ["metric", "mean", "std", "n"])
        for key in sorted(tables, key=str):
            for metric, cell in tables[key].items():
                std = "" if cell["std"] is None else cell["std"]
                writer.writerow(list(key) + [metric, cell["mean"], std, cell["n"]])


def report_from_logs(log_paths, out_path) -> list[dict]:
    """Recompute per-trial metrics from saved logs and write CSV tables."""
    rows = []
    for path in log_paths:
        log = TrialLog.load(path)
        subject = log.extra.get("subject")
        for segment_id in log.segment_ids():
            row = trial_metrics(log.segment(segment_id))
            row.update(subject=subject, segment=segment_id)
            rows.append(row)
    write_trials_csv(rows, out_path)
    return rows
