"""Directional vibrotactile feedback engine.

Each control tick the engine normalizes the per-joint angle errors, picks the
single joint with the largest normalized error, maps that error to a
vibration level, and hands off to the encoder of the active modality:

* ``SPOT``  -- two opposed units per joint; the unit on the side the wearer
  must move away from vibrates (repulsive cue).
* ``RAMP``  -- one unit per joint; a three-step amplitude ramp, rising when
  the angle must decrease and falling when it must increase.
* ``PATTERN`` -- a spatial unit row per joint pulsed in sequence; ascending
  index order when the angle must decrease, descending otherwise.

No vibration is commanded inside the dead band (5 % normalized error by
default).  Emulated devices carry the physical metadata of the real ones
(121 Hz carrier, 28 g, three amplitude levels) but no waveform synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import ConfigError, InputError, RegistryError
from .model import JOINTS, Posture

#: metadata of the emulated vibrotactile unit
DEVICE_INFO = {
    "carrier_hz": 121.0,
    "mass_g": 28.0,
    "size_mm": (68.1, 37.0, 17.3),
    "amplitude_levels": 3,
}

GUIDED_JOINTS = ("torso", "shoulder", "elbow")

#: per-joint normalization constants (degrees), the motion-range maxima
DEFAULT_XI = {"torso": 90.0, "shoulder": 180.0, "elbow": 145.0}


class Modality(str, Enum):
    SPOT = "spot"
    RAMP = "ramp"
    PATTERN = "pattern"


class Level(str, Enum):
    OFF = "off"
    L1 = "l1"
    L2 = "l2"
    L3 = "l3"


LAMBDA = {Level.OFF: 0.0, Level.L1: 0.33, Level.L2: 0.66, Level.L3: 1.0}

#: number of pattern units per joint (torso row of three, two along the arm)
PATTERN_UNITS = {"torso": 3, "shoulder": 2, "elbow": 2}


@dataclass(frozen=True)
class FeedbackConfig:
    guided: tuple[str, ...] = GUIDED_JOINTS
    xi: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_XI))
    dead_band: float = 0.05
    level_thresholds: tuple[float, float, float] = (0.05, 0.15, 0.30)
    duration_ms: int = 400
    tick_ms: int = 100

    def __post_init__(self):
        for joint in self.guided:
            if joint not in JOINTS:
                raise ConfigError(f"unknown guided joint {joint!r}")
            if self.xi.get(joint, 0.0) <= 0:
                raise ConfigError(f"normalization constant for {joint!r} must be > 0")
        if not 0 < self.level_thresholds[0] <= self.level_thresholds[1] <= self.level_thresholds[2]:
            raise ConfigError("level thresholds must be positive and ascending")

    @property
    def xi_vector(self) -> np.ndarray:
        return np.array([self.xi[j] for j in self.guided])


@dataclass(frozen=True)
class ErrorVector:
    """Normalized errors for the guided joints, |q_c - q_d| / xi."""

    values: np.ndarray
    joints: tuple[str, ...]
    xi: np.ndarray

    def __getitem__(self, joint: str) -> float:
        return float(self.values[self.joints.index(joint)])


@dataclass(frozen=True)
class DevicePlacement:
    device_id: str
    joint: str
    index: int  # 0-based along the pattern axis
    repulsion_sign: int  # joint-angle direction the unit pushes the wearer toward
    spacing: float = 0.05  # m between pattern rows

    def __post_init__(self):
        if self.repulsion_sign not in (-1, 1):
            raise ConfigError("repulsion_sign must be +1 or -1")


@dataclass(frozen=True)
class DeviceCommand:
    device_id: str
    level: Level
    lam: float  # vibration amplitude in [0, 1]
    duration_ms: int = 400
    onset_ms: int = 0

    def __post_init__(self):
        if (self.level == Level.OFF) != (self.lam == 0.0):
            raise InputError("OFF commands and zero amplitude must coincide")

    def to_record(self) -> dict:
        return {
            "device_id": self.device_id,
            "level": self.level.value,
            "lambda": self.lam,
            "duration_ms": self.duration_ms,
            "onset_ms": self.onset_ms,
        }

    @classmethod
    def from_record(cls, record: dict) -> "DeviceCommand":
        return cls(
            device_id=record["device_id"],
            level=Level(record["level"]),
            lam=record["lambda"],
            duration_ms=record["duration_ms"],
            onset_ms=record["onset_ms"],
        )


def default_placements(modality: Modality, guided=GUIDED_JOINTS) -> dict[str, list[DevicePlacement]]:
    """Device layout per joint for a modality.

    SPOT repulsion signs encode the fixed anatomy table: a chest unit pushes
    the torso toward extension (negative), front-of-arm units push shoulder
    and elbow toward their positive (extension) directions.
    """
    spot_signs = {"torso": (-1, 1), "shoulder": (1, -1), "elbow": (1, -1)}
    registry: dict[str, list[DevicePlacement]] = {}
    for joint in guided:
        if modality == Modality.SPOT:
            front_sign, back_sign = spot_signs[joint]
            registry[joint] = [
                DevicePlacement(f"{joint}_front", joint, 0, front_sign),
                DevicePlacement(f"{joint}_back", joint, 1, back_sign),
            ]
        elif modality == Modality.RAMP:
            registry[joint] = [DevicePlacement(f"{joint}_ramp", joint, 0, 1)]
        else:
            registry[joint] = [
                DevicePlacement(f"{joint}_p{i + 1}", joint, i, 1)
                for i in range(PATTERN_UNITS[joint])
            ]
    validate_placements(modality, registry)
    return registry


def validate_placements(modality: Modality, registry: dict[str, list[DevicePlacement]]) -> None:
    for joint, units in registry.items():
        if modality == Modality.SPOT:
            if len(units) != 2 or {u.repulsion_sign for u in units} != {-1, 1}:
                raise RegistryError(f"SPOT needs two opposed units at {joint!r}")
        elif modality == Modality.RAMP:
            if len(units) != 1:
                raise RegistryError(f"RAMP needs exactly one unit at {joint!r}")
        elif modality == Modality.PATTERN:
            expected = PATTERN_UNITS.get(joint)
            if expected is None or len(units) != expected:
                raise RegistryError(
                    f"PATTERN needs {expected} units at {joint!r}, got {len(units)}"
                )
            if sorted(u.index for u in units) != list(range(len(units))):
                raise RegistryError(f"PATTERN unit indices at {joint!r} must be 0..n-1")


# -- per-tick primitives ------------------------------------------------------


def error_magnitude(q_c: np.ndarray, q_d: np.ndarray, xi: np.ndarray,
                    joints: tuple[str, ...] = GUIDED_JOINTS) -> ErrorVector:
    """Elementwise |q_c - q_d| / xi for the guided joints."""
    q_c = np.asarray(q_c, dtype=float)
    q_d = np.asarray(q_d, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ConfigError("normalization constants must be > 0")
    if not q_c.shape == q_d.shape == xi.shape:
        raise InputError("q_c, q_d and xi must have matching shapes")
    return ErrorVector(values=np.abs(q_c - q_d) / xi, joints=tuple(joints), xi=xi)


def select_target_joint(eps: ErrorVector, dead_band: float = 0.05) -> str | None:
    """Joint with the maximum normalized error; ties go to the chain order.

    Returns None when every error is inside the dead band.
    """
    if eps.values.size == 0:
        raise InputError("empty error vector")
    if np.all(eps.values < dead_band):
        return None
    return eps.joints[int(np.argmax(eps.values))]


def select_level(eps_j: float, thresholds=(0.05, 0.15, 0.30)) -> Level:
    """The higher the normalized error, the higher the vibration level."""
    if eps_j < thresholds[0]:
        return Level.OFF
    if eps_j < thresholds[1]:
        return Level.L1
    if eps_j < thresholds[2]:
        return Level.L2
    return Level.L3


def _units_for(placements, joint) -> list[DevicePlacement]:
    units = placements.get(joint)
    if not units:
        raise RegistryError(f"no devices registered for joint {joint!r}")
    return units


def encode_spot(placements, joint: str, direction: int, level: Level,
                duration_ms: int = 400) -> list[DeviceCommand]:
    """One repulsive command: the unit opposing the needed motion vibrates."""
    if level == Level.OFF or direction == 0:
        return []
    units = _units_for(placements, joint)
    matches = [u for u in units if u.repulsion_sign == direction]
    if len(matches) != 1:
        raise RegistryError(f"SPOT registry at {joint!r} lacks a {direction:+d} unit")
    return [DeviceCommand(matches[0].device_id, level, LAMBDA[level], duration_ms)]


def ramp_sequence(level: Level, increasing: bool) -> tuple[float, ...]:
    lam = LAMBDA[level]
    seq = (lam / 3.0, 2.0 * lam / 3.0, lam)
    return seq if increasing else tuple(reversed(seq))


def encode_ramp(placements, joint: str, direction: int, level: Level, phase: int,
                duration_ms: int = 400) -> list[DeviceCommand]:
    """One step of the three-step amplitude ramp.

    The ramp rises when the joint angle must decrease (current above desired)
    and falls when it must increase; ``phase`` indexes the step.
    """
    if level == Level.OFF or direction == 0:
        return []
    units = _units_for(placements, joint)
    if len(units) != 1:
        raise RegistryError(f"RAMP expects one unit at {joint!r}")
    seq = ramp_sequence(level, increasing=direction < 0)
    lam = seq[phase % len(seq)]
    return [DeviceCommand(units[0].device_id, level, lam, duration_ms)]


def encode_pattern(placements, joint: str, direction: int, level: Level,
                   duration_ms: int = 400) -> list[DeviceCommand]:
    """A full spatial pulse train, one pulse per unit, onsets back to back.

    Ascending unit order cues a decreasing joint angle, descending order an
    increasing one.
    """
    if level == Level.OFF or direction == 0:
        return []
    units = sorted(_units_for(placements, joint), key=lambda u: u.index)
    if direction > 0:
        units = list(reversed(units))
    return [
        DeviceCommand(u.device_id, level, LAMBDA[level], duration_ms, onset_ms=i * duration_ms)
        for i, u in enumerate(units)
    ]


# -- the tick state machine ---------------------------------------------------


@dataclass(frozen=True)
class FeedbackState:
    """Immutable engine state advanced once per control tick."""

    modality: Modality
    config: FeedbackConfig
    placements: dict[str, list[DevicePlacement]]
    tick: int = 0
    active_joint: str | None = None
    ramp_phase: dict[str, int] = field(default_factory=dict)
    pattern_phase: dict[str, int] = field(default_factory=dict)
    dead_band_flags: dict[str, bool] = field(default_factory=dict)

    def pattern_cycle_ticks(self, joint: str) -> int:
        steps = -(-self.config.duration_ms // self.config.tick_ms)  # ceil
        return len(self.placements[joint]) * steps


def make_state(modality: Modality, config: FeedbackConfig | None = None,
               placements: dict[str, list[DevicePlacement]] | None = None) -> FeedbackState:
    config = config or FeedbackConfig()
    if placements is None:
        placements = default_placements(modality, config.guided)
    else:
        validate_placements(modality, placements)
    return FeedbackState(modality=modality, config=config, placements=placements)


def _stop_commands(state: FeedbackState, joint: str) -> list[DeviceCommand]:
    return [
        DeviceCommand(u.device_id, Level.OFF, 0.0, duration_ms=0)
        for u in state.placements[joint]
    ]


def _guided_angles(config: FeedbackConfig, posture: Posture | np.ndarray) -> np.ndarray:
    if isinstance(posture, Posture):
        return np.array([posture[j] for j in config.guided])
    arr = np.asarray(posture, dtype=float)
    if arr.shape != (len(config.guided),):
        raise InputError("expected a Posture or a guided-joint angle vector")
    return arr


class DeviceEmulator:
    """Tracks what each emulated unit is doing as commands stream in.

    A command starts a vibration at ``t + onset`` for its duration at its
    amplitude; re-commands retrigger.  OFF commands stop a unit immediately.
    Carrier frequency and form factor are metadata only (no waveforms).
    """

    def __init__(self, placements: dict[str, list[DevicePlacement]]):
        self.info = dict(DEVICE_INFO)
        self.units = {u.device_id: u for units in placements.values() for u in units}
        self._active: dict[str, tuple[float, float, float]] = {}  # id -> (lam, t0, t1)

    def feed(self, t: float, commands: list[DeviceCommand]) -> None:
        for command in commands:
            if command.device_id not in self.units:
                raise RegistryError(f"command for unknown device {command.device_id!r}")
            if command.level == Level.OFF:
                self._active.pop(command.device_id, None)
                continue
            start = t + command.onset_ms / 1000.0
            self._active[command.device_id] = (
                command.lam,
                start,
                start + command.duration_ms / 1000.0,
            )

    def vibrating(self, t: float) -> dict[str, float]:
        """Amplitude per unit currently vibrating at time ``t``."""
        return {
            device_id: lam
            for device_id, (lam, t0, t1) in self._active.items()
            if t0 <= t < t1
        }


def feedback_step(
    state: FeedbackState,
    q_c: Posture | np.ndarray,
    q_d: Posture | np.ndarray,
    t: float,
) -> tuple[list[DeviceCommand], FeedbackState]:
    """One control tick: error -> target joint -> level -> modality encoder.

    Pure function of (state, inputs): identical input streams replay to
    identical command streams.  Inside the dead band the previously actuated
    joint receives explicit OFF commands once, then nothing.
    """
    cfg = state.config
    cur = _guided_angles(cfg, q_c)
    des = _guided_angles(cfg, q_d)
    eps = error_magnitude(cur, des, cfg.xi_vector, cfg.guided)
    flags = {j: bool(eps[j] < cfg.dead_band) for j in cfg.guided}
    target = select_target_joint(eps, cfg.dead_band)

    commands: list[DeviceCommand] = []
    ramp_phase = dict(state.ramp_phase)
    pattern_phase = dict(state.pattern_phase)

    if target is None:
        if state.active_joint is not None:
            commands = _stop_commands(state, state.active_joint)
        next_state = replace(
            state,
            tick=state.tick + 1,
            active_joint=None,
            ramp_phase={},
            pattern_phase={},
            dead_band_flags=flags,
        )
        return commands, next_state

    if state.active_joint is not None and state.active_joint != target:
        commands.extend(_stop_commands(state, state.active_joint))
        ramp_phase.pop(state.active_joint, None)
        pattern_phase.pop(state.active_joint, None)

    idx = cfg.guided.index(target)
    level = select_level(eps.values[idx], cfg.level_thresholds)
    direction = 1 if des[idx] > cur[idx] else -1

    if state.modality == Modality.SPOT:
        commands.extend(encode_spot(state.placements, target, direction, level, cfg.duration_ms))
    elif state.modality == Modality.RAMP:
        phase = ramp_phase.get(target, 0)
        commands.extend(
            encode_ramp(state.placements, target, direction, level, phase, cfg.duration_ms)
        )
        ramp_phase[target] = (phase + 1) % 3
    else:
        phase = pattern_phase.get(target, 0)
        if phase == 0:
            commands.extend(
                encode_pattern(state.placements, target, direction, level, cfg.duration_ms)
            )
        pattern_phase[target] = (phase + 1) % state.pattern_cycle_ticks(target)

    next_state = replace(
        state,
        tick=state.tick + 1,
        active_joint=target,
        ramp_phase=ramp_phase,
        pattern_phase=pattern_phase,
        dead_band_flags=flags,
    )
    return commands, next_state
