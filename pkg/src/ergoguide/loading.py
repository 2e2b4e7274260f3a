"""Static joint loading: gravity torques, plate simulation, overload estimation.

All torques are sagittal-plane moments in N*m, reported per joint in chain
order.  A positive value means the weight below pulls the distal chain toward
+x (forward) about that joint.  The overloading torque of a joint is the
increment caused by the held load alone, i.e. loaded minus unloaded statics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .model import (
    N_JOINTS,
    HumanModel,
    Posture,
    SescParams,
    forward_kinematics,
    sesc_com,
    whole_body_com,
)


@dataclass(frozen=True)
class LoadSpec:
    """External load held at the hand (both hands = one planar grasp point)."""

    mass: float  # kg

    def __post_init__(self):
        if self.mass < 0:
            raise InputError("load mass must be >= 0")


NO_LOAD = LoadSpec(0.0)


@dataclass(frozen=True)
class TorqueVector:
    """Per-joint torques (N*m), chain order; flagged when no load was seen."""

    values: np.ndarray
    no_load: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (N_JOINTS,):
            raise InputError(f"torque vector needs {N_JOINTS} entries")
        object.__setattr__(self, "values", arr)

    def __sub__(self, other: "TorqueVector") -> "TorqueVector":
        return TorqueVector(self.values - other.values)


@dataclass(frozen=True)
class PlateReading:
    """Vertical ground reaction force (N) and center of pressure abscissa (m)."""

    grf_z: float
    cop_x: float


def gravity_torques(model: HumanModel, posture: Posture) -> TorqueVector:
    """Moments from body-segment weights alone about each joint."""
    kp = forward_kinematics(model, posture)
    prox = kp.points[:-1]
    dist = kp.points[1:]
    ratios = np.array([s.com_ratio for s in model.segments])
    masses = np.array([s.mass for s in model.segments])
    com_x = prox[:, 0] + ratios * (dist[:, 0] - prox[:, 0])

    torques = np.zeros(N_JOINTS)
    for k in range(N_JOINTS):
        # every segment at or distal of joint k hangs from it
        levers = com_x[k:] - kp.points[k, 0]
        torques[k] = model.gravity * np.sum(masses[k:] * levers)
    return TorqueVector(torques)


def loaded_torques(model: HumanModel, posture: Posture, load: LoadSpec) -> TorqueVector:
    """Gravity torques plus the held mass acting vertically at the hand."""
    base = gravity_torques(model, posture)
    kp = forward_kinematics(model, posture)
    levers = kp.hand[0] - kp.joint_x
    return TorqueVector(base.values + load.mass * model.gravity * levers)


def overloading_torques_oracle(
    model: HumanModel, posture: Posture, load: LoadSpec
) -> TorqueVector:
    """Ground-truth load-induced torque increment (loaded minus unloaded)."""
    return loaded_torques(model, posture, load) - gravity_torques(model, posture)


def loaded_cop(model: HumanModel, posture: Posture, load: LoadSpec) -> float:
    """Static center of pressure with the load applied at the hand."""
    kp = forward_kinematics(model, posture)
    com_x = whole_body_com(model, posture)[0]
    total = model.total_mass + load.mass
    return (model.total_mass * com_x + load.mass * kp.hand[0]) / total


def simulate_plate(
    model: HumanModel,
    posture: Posture,
    load: LoadSpec = NO_LOAD,
    noise_sigma_cop: float = 0.0,
    noise_sigma_grf: float = 0.0,
    rng: np.random.Generator | None = None,
) -> PlateReading:
    """Force-plate reading for a static double-support stance.

    Noise is zero-mean Gaussian on each channel; defaults are deterministic.
    """
    grf = (model.total_mass + load.mass) * model.gravity
    cop = loaded_cop(model, posture, load)
    if noise_sigma_cop or noise_sigma_grf:
        if rng is None:
            rng = np.random.default_rng()
        cop += rng.normal(0.0, noise_sigma_cop) if noise_sigma_cop else 0.0
        grf += rng.normal(0.0, noise_sigma_grf) if noise_sigma_grf else 0.0
    return PlateReading(grf_z=float(grf), cop_x=float(cop))


def estimate_overloading(
    plate: PlateReading,
    sesc: SescParams,
    model: HumanModel,
    posture: Posture,
    min_load_mass: float = 0.2,
) -> TorqueVector:
    """Overloading torques from the plate/model CoP discrepancy.

    The surplus vertical force gives the load mass, the CoP displacement from
    the calibrated unloaded prediction locates its point of application, and
    each joint sees the mass times its horizontal lever.  A surplus below
    ``min_load_mass`` kg returns a zero vector flagged as no-load (guards the
    division by the estimated mass).
    """
    m_hat = plate.grf_z / model.gravity - model.total_mass
    if m_hat < min_load_mass:
        return TorqueVector(np.zeros(N_JOINTS), no_load=True)
    com_x_hat = sesc_com(sesc, posture)[0]
    x_load = (plate.cop_x * (model.total_mass + m_hat) - model.total_mass * com_x_hat) / m_hat
    kp = forward_kinematics(model, posture)
    levers = x_load - kp.joint_x
    return TorqueVector(m_hat * model.gravity * levers)
