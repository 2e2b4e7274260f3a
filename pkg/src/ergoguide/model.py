"""Planar sagittal body model: kinematic chain, mass distribution, CoM estimation.

Conventions (fixed once, used everywhere):

* Sagittal plane, ``x`` forward, ``z`` up, ankle joint at the origin.
* Chain order ``ankle -> knee -> torso -> shoulder -> elbow`` driving the
  segments ``shank, thigh, torso, upper_arm, forearm``.  The torso joint
  pivots at the hip point.
* Angles in degrees, all zero = upright stance with the arm hanging.
  Positive ankle leans the shank forward, positive knee flexes (hip moves
  backward), positive torso flexes forward, positive shoulder extends the
  arm behind the body (forward raise is negative), elbow is 0 when straight
  and negative when flexed.

With these signs the within-segment orientation (counterclockwise from +x)
composes as::

    shank     90 - q_ankle
    thigh     shank + q_knee
    torso     thigh - q_torso
    upper_arm torso - 180 - q_shoulder
    forearm   upper_arm - q_elbow
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import CalibrationError, InputError, ModelError

JOINTS = ("ankle", "knee", "torso", "shoulder", "elbow")
SEGMENTS = ("shank", "thigh", "torso", "upper_arm", "forearm")
#: chain points; point i is the pivot of joint i, the last point is the hand
POINTS = ("ankle", "knee", "hip", "shoulder", "elbow", "hand")
N_JOINTS = len(JOINTS)

#: per-joint sign applied when accumulating segment orientations
_CHAIN_SIGNS = np.array([-1.0, 1.0, -1.0, -1.0, -1.0])
#: orientation of each segment at the all-zero posture, degrees ccw from +x
_REST_OFFSETS = np.array([90.0, 90.0, 90.0, -90.0, -90.0])

SCHEMA_VERSION = 1

# Standard anthropometric-table fractions (length of stature, mass of body
# mass, CoM from the proximal joint).  Left/right limbs are lumped, feet are
# folded into the shank and the hand into the forearm so the five segments
# carry the whole body mass.
_ANTHROPOMETRY = {
    "shank": (0.246, 0.122, 0.433),
    "thigh": (0.245, 0.200, 0.433),
    "torso": (0.288, 0.578, 0.500),
    "upper_arm": (0.186, 0.056, 0.436),
    "forearm": (0.175, 0.044, 0.430),
}

_DEFAULT_LIMITS = {
    "ankle": (-30.0, 30.0),
    "knee": (0.0, 135.0),
    "torso": (-15.0, 90.0),
    "shoulder": (-180.0, 30.0),
    "elbow": (-145.0, 0.0),
}


@dataclass(frozen=True)
class Segment:
    name: str
    length: float  # m
    mass: float  # kg
    com_ratio: float  # CoM position from the proximal joint, fraction of length


@dataclass(frozen=True)
class FootGeometry:
    heel_offset: float = -0.05  # m, relative to the ankle ground projection
    toe_offset: float = 0.20


@dataclass(frozen=True)
class HumanModel:
    """Five-segment sagittal chain with mass distribution and stance geometry."""

    segments: tuple[Segment, ...]
    joint_limits: dict[str, tuple[float, float]]
    foot: FootGeometry = FootGeometry()
    gravity: float = 9.81

    def __post_init__(self):
        if len(self.segments) != N_JOINTS:
            raise ModelError(f"expected {N_JOINTS} segments, got {len(self.segments)}")
        for seg in self.segments:
            if seg.length <= 0:
                raise ModelError(f"segment {seg.name}: length must be > 0")
            if seg.mass < 0:
                raise ModelError(f"segment {seg.name}: mass must be >= 0")
            if not 0.0 <= seg.com_ratio <= 1.0:
                raise ModelError(f"segment {seg.name}: com_ratio must be in [0, 1]")
        for joint in JOINTS:
            if joint not in self.joint_limits:
                raise ModelError(f"missing joint limits for {joint!r}")
            lo, hi = self.joint_limits[joint]
            if not lo < hi:
                raise ModelError(f"joint {joint}: q_min must be < q_max")
        if not self.foot.heel_offset < self.foot.toe_offset:
            raise ModelError("foot: heel_offset must be < toe_offset")

    @property
    def total_mass(self) -> float:
        return sum(seg.mass for seg in self.segments)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([seg.length for seg in self.segments])

    @property
    def limits_low(self) -> np.ndarray:
        return np.array([self.joint_limits[j][0] for j in JOINTS])

    @property
    def limits_high(self) -> np.ndarray:
        return np.array([self.joint_limits[j][1] for j in JOINTS])

    def clamp(self, angles: np.ndarray) -> np.ndarray:
        return np.clip(angles, self.limits_low, self.limits_high)

    def within_limits(self, angles: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(
            np.all(angles >= self.limits_low - tol)
            and np.all(angles <= self.limits_high + tol)
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "gravity": self.gravity,
            "segments": [
                {
                    "name": s.name,
                    "length": s.length,
                    "mass": s.mass,
                    "com_ratio": s.com_ratio,
                }
                for s in self.segments
            ],
            "joint_limits": {j: list(self.joint_limits[j]) for j in JOINTS},
            "foot": {
                "heel_offset": self.foot.heel_offset,
                "toe_offset": self.foot.toe_offset,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HumanModel":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ModelError(f"unsupported model schema_version: {version!r}")
        try:
            segments = tuple(
                Segment(s["name"], s["length"], s["mass"], s["com_ratio"])
                for s in data["segments"]
            )
            limits = {j: tuple(v) for j, v in data["joint_limits"].items()}
            foot = FootGeometry(**data["foot"])
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed model definition: {exc}") from exc
        return cls(
            segments=segments,
            joint_limits=limits,
            foot=foot,
            gravity=data.get("gravity", 9.81),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "HumanModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_model(height: float = 1.75, mass: float = 70.0) -> HumanModel:
    """Model from standard anthropometric fractions of stature and body mass."""
    segments = tuple(
        Segment(name, _ANTHROPOMETRY[name][0] * height, _ANTHROPOMETRY[name][1] * mass,
                _ANTHROPOMETRY[name][2])
        for name in SEGMENTS
    )
    return HumanModel(segments=segments, joint_limits=dict(_DEFAULT_LIMITS))


@dataclass(frozen=True)
class Posture:
    """Joint-angle vector (degrees, chain order) with a timestamp in seconds."""

    angles: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.angles, dtype=float)
        if arr.shape != (N_JOINTS,):
            raise InputError(f"posture needs {N_JOINTS} angles, got shape {arr.shape}")
        object.__setattr__(self, "angles", arr)

    def __getitem__(self, joint: str) -> float:
        return float(self.angles[JOINTS.index(joint)])

    def with_angles(self, **updates: float) -> "Posture":
        angles = self.angles.copy()
        for joint, value in updates.items():
            angles[JOINTS.index(joint)] = value
        return replace(self, angles=angles)

    def is_feasible(self, model: HumanModel, tol: float = 1e-9) -> bool:
        return model.within_limits(self.angles, tol=tol)


def upright(timestamp: float = 0.0) -> Posture:
    return Posture(np.zeros(N_JOINTS), timestamp)


@dataclass(frozen=True)
class KeyPoints:
    """Chain point positions (m), rows ordered as :data:`POINTS`."""

    points: np.ndarray  # (6, 2) columns x, z

    def __getitem__(self, name: str) -> np.ndarray:
        return self.points[POINTS.index(name)]

    @property
    def hand(self) -> np.ndarray:
        return self.points[-1]

    @property
    def z_obj(self) -> float:
        """Height of a grasped object = hand height."""
        return float(self.points[-1, 1])

    @property
    def joint_x(self) -> np.ndarray:
        """Horizontal pivot positions of the five joints, chain order."""
        return self.points[:N_JOINTS, 0]


def segment_orientations(posture: Posture) -> np.ndarray:
    """Absolute segment orientations in degrees, ccw from +x."""
    return _REST_OFFSETS + np.cumsum(_CHAIN_SIGNS * posture.angles)


def _orientations_rad(angles: np.ndarray) -> np.ndarray:
    return np.radians(_REST_OFFSETS + np.cumsum(_CHAIN_SIGNS * angles))


def forward_kinematics(
    model: HumanModel, posture: Posture, base: tuple[float, float] = (0.0, 0.0)
) -> KeyPoints:
    """Chain positions for a posture; the base point is the ankle pivot."""
    alphas = _orientations_rad(posture.angles)
    steps = model.lengths[:, None] * np.stack([np.cos(alphas), np.sin(alphas)], axis=1)
    points = np.vstack([np.array(base, dtype=float), steps]).cumsum(axis=0)
    return KeyPoints(points=points)


def whole_body_com(
    model: HumanModel, posture: Posture, base: tuple[float, float] = (0.0, 0.0)
) -> np.ndarray:
    """Mass-weighted mean of segment CoMs.

    The x component doubles as the unloaded center of pressure in static
    double stance.
    """
    kp = forward_kinematics(model, posture, base)
    prox = kp.points[:-1]
    dist = kp.points[1:]
    ratios = np.array([s.com_ratio for s in model.segments])[:, None]
    masses = np.array([s.mass for s in model.segments])
    total = masses.sum()
    if total <= 0:
        raise ModelError("whole-body CoM undefined for a massless model")
    seg_coms = prox + ratios * (dist - prox)
    return (masses[:, None] * seg_coms).sum(axis=0) / total


@dataclass(frozen=True)
class SupportPolygon:
    """Ground-contact interval in the sagittal plane."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ModelError("support polygon requires x_min < x_max")

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.x_min - tol <= x <= self.x_max + tol

    def excursion(self, x: float) -> float:
        """Signed distance outside the interval (negative inside)."""
        return max(self.x_min - x, x - self.x_max)


def support_polygon(model: HumanModel, ankle_x: float = 0.0) -> SupportPolygon:
    return SupportPolygon(
        x_min=ankle_x + model.foot.heel_offset,
        x_max=ankle_x + model.foot.toe_offset,
    )


# -- statically-equivalent-chain CoM model ----------------------------------


@dataclass(frozen=True)
class SescParams:
    """Linear-in-orientation CoM predictor.

    ``coeffs[0]`` weights the segment-direction x components for the CoM x
    coordinate, ``coeffs[1]`` the z components for the CoM z coordinate;
    ``offset`` is the base term in meters.  Planar parameter count is
    ``2 * n_segments + 2``.
    """

    coeffs: np.ndarray  # (2, n_segments)
    offset: np.ndarray  # (2,)
    residual: float = 0.0  # fit RMS, m

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))


def _direction_components(posture: Posture) -> np.ndarray:
    alphas = _orientations_rad(posture.angles)
    return np.stack([np.cos(alphas), np.sin(alphas)])  # (2, n)


def sesc_calibrate(samples: list[tuple[Posture, np.ndarray]]) -> SescParams:
    """Least-squares identification from (posture, CoM) pairs.

    Needs at least ``n_segments + 1`` linearly independent postures; a
    deficient sample set raises :class:`CalibrationError` naming the
    unidentifiable directions.
    """
    if len(samples) < N_JOINTS + 1:
        raise CalibrationError(
            f"need at least {N_JOINTS + 1} samples, got {len(samples)}"
        )
    rows_x, rows_z, targets = [], [], []
    for posture, com in samples:
        comps = _direction_components(posture)
        rows_x.append(np.append(comps[0], 1.0))
        rows_z.append(np.append(comps[1], 1.0))
        targets.append(np.asarray(com, dtype=float))
    design_x = np.array(rows_x)
    design_z = np.array(rows_z)
    target = np.array(targets)

    deficient = _deficient_directions(design_x) | _deficient_directions(design_z)
    if deficient:
        raise CalibrationError(
            "rank-deficient calibration set; unidentifiable directions: "
            + ", ".join(sorted(deficient))
        )

    sol_x, res_x, _, _ = np.linalg.lstsq(design_x, target[:, 0], rcond=None)
    sol_z, res_z, _, _ = np.linalg.lstsq(design_z, target[:, 1], rcond=None)
    sse = float(res_x.sum() if res_x.size else 0.0) + float(
        res_z.sum() if res_z.size else 0.0
    )
    return SescParams(
        coeffs=np.stack([sol_x[:-1], sol_z[:-1]]),
        offset=np.array([sol_x[-1], sol_z[-1]]),
        residual=float(np.sqrt(sse / len(samples))),
    )


def _deficient_directions(design: np.ndarray, tol: float = 1e-8) -> set[str]:
    _, svals, vt = np.linalg.svd(design, full_matrices=False)
    names = list(SEGMENTS) + ["offset"]
    if design.shape[0] < design.shape[1]:
        return set(names)
    deficient: set[str] = set()
    scale = svals[0] if svals.size and svals[0] > 0 else 1.0
    for sval, direction in zip(svals, vt):
        if sval <= tol * scale:
            involved = np.flatnonzero(np.abs(direction) > 0.3)
            deficient.update(names[i] for i in involved)
    return deficient


def sesc_com(params: SescParams, posture: Posture) -> np.ndarray:
    """Evaluate the calibrated CoM predictor at a posture."""
    comps = _direction_components(posture)
    return params.offset + np.sum(params.coeffs * comps, axis=1)
