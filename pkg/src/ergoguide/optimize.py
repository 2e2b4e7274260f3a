"""Constrained posture optimization minimizing weighted overloading torques.

The objective is ``0.5 * sum_k w_k * tau_k(q)^2`` over the joint chain, with
the load-induced torques from :mod:`ergoguide.loading`.  Constraints: joint
limits, loaded center of pressure inside the support polygon, and the grasped
object staying near its initial height.

The solver is a deterministic multi-start compass (pattern) search on a
lexicographic merit: any feasible point beats any infeasible one, infeasible
points are ranked by a quadratic penalty on their positive slacks.  Bound
constraints are enforced by clipping, so returned postures satisfy them
exactly; correctness is gated on an exhaustive grid oracle rather than on
solver internals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InfeasibleError, InputError
from .loading import LoadSpec, loaded_cop, overloading_torques_oracle
from .model import JOINTS, N_JOINTS, HumanModel, Posture, forward_kinematics, support_polygon

#: merit scale that makes meter-valued slacks comparable to degree slacks
_SLACK_MM = 1000.0


@dataclass(frozen=True)
class TaskSpec:
    """Keep the object near its reference height (meters)."""

    z_ref: float | None = None  # filled from the starting posture when None
    z_th: float = 0.10

    def __post_init__(self):
        if self.z_th <= 0:
            raise ConfigError("z_th must be > 0")


@dataclass(frozen=True)
class SolverOptions:
    restarts: int = 8
    max_iters: int = 200  # outer compass passes per restart
    penalty_coefficient: float = 1e4
    seed: int = 0
    initial_step: float = 16.0  # deg
    min_step: float = 1e-6  # deg

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("need at least one restart")


@dataclass(frozen=True)
class OptimizationSpec:
    weights: np.ndarray = field(default_factory=lambda: np.ones(N_JOINTS))
    task: TaskSpec = TaskSpec()
    solver: SolverOptions = SolverOptions()
    #: joints pinned to fixed angles (degrees), removed from the search space
    frozen: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (N_JOINTS,):
            raise ConfigError(f"weights must have {N_JOINTS} entries")
        if np.any(w < 0) or not np.any(w > 0):
            raise ConfigError("weights must be >= 0 with at least one > 0")
        object.__setattr__(self, "weights", w)
        for joint in self.frozen:
            if joint not in JOINTS:
                raise ConfigError(f"unknown joint {joint!r} in frozen map")

    def with_reference_height(self, z_ref: float) -> "OptimizationSpec":
        return replace(self, task=replace(self.task, z_ref=z_ref))


@dataclass(frozen=True)
class ConstraintReport:
    """Signed slacks; a constraint holds when its slack is <= 0."""

    bounds: np.ndarray  # deg, per joint
    stability: float  # m
    task: float  # m
    tolerance: float = 1e-6

    @property
    def max_violation(self) -> float:
        return float(max(self.bounds.max(), self.stability, self.task))

    @property
    def feasible(self) -> bool:
        return self.max_violation <= self.tolerance


@dataclass(frozen=True)
class SolveReport:
    objective_init: float
    objective_final: float
    constraints: ConstraintReport
    iterations: int
    evaluations: int


@dataclass(frozen=True)
class GridResult:
    """Best feasible grid point, or an explicit empty result."""

    found: bool
    posture: Posture | None
    objective: float | None
    feasible_points: int
    total_points: int


def weighted_torque_norm(torques: np.ndarray, weights: np.ndarray) -> float:
    """Half the weighted squared norm, the scalar being minimized."""
    return 0.5 * float(np.sum(np.asarray(weights) * np.square(np.asarray(torques))))


def objective(
    model: HumanModel, posture: Posture, load: LoadSpec, weights: np.ndarray
) -> float:
    tau = overloading_torques_oracle(model, posture, load)
    return weighted_torque_norm(tau.values, weights)


def evaluate_constraints(
    model: HumanModel, posture: Posture, load: LoadSpec, spec: OptimizationSpec
) -> ConstraintReport:
    if spec.task.z_ref is None:
        raise ConfigError("task.z_ref is unset; derive it from the starting posture")
    q = posture.angles
    bounds = np.maximum(model.limits_low - q, q - model.limits_high)
    cop = loaded_cop(model, posture, load)
    stability = support_polygon(model).excursion(cop)
    z_obj = forward_kinematics(model, posture).z_obj
    task = abs(z_obj - spec.task.z_ref) - spec.task.z_th
    return ConstraintReport(bounds=bounds, stability=float(stability), task=float(task))


def _merit(model, load, spec, angles) -> tuple[int, float]:
    """Lexicographic merit: (0, objective) if feasible, (1, penalty) otherwise."""
    posture = Posture(angles)
    report = evaluate_constraints(model, posture, load, spec)
    violation = np.concatenate(
        [
            np.maximum(report.bounds, 0.0),
            [max(report.stability, 0.0) * _SLACK_MM, max(report.task, 0.0) * _SLACK_MM],
        ]
    )
    if report.max_violation <= 0.0:
        return (0, objective(model, posture, load, spec.weights))
    return (1, spec.solver.penalty_coefficient * float(np.sum(np.square(violation))))


def _compass(merit, x0, lower, upper, free_idx, options: SolverOptions):
    """Deterministic coordinate pattern search; returns (x, merit, iters, evals)."""
    x = np.clip(x0, lower, upper)
    best = merit(x)
    evals = 1
    steps = np.full(len(free_idx), options.initial_step, dtype=float)
    iters = 0
    while iters < options.max_iters and np.any(steps >= options.min_step):
        iters += 1
        move = None
        for slot, i in enumerate(free_idx):
            if steps[slot] < options.min_step:
                continue
            for direction in (1.0, -1.0):
                cand = x.copy()
                cand[i] = np.clip(cand[i] + direction * steps[slot], lower[i], upper[i])
                if cand[i] == x[i]:
                    continue
                value = merit(cand)
                evals += 1
                if value < best:
                    best = value
                    move = cand
        if move is not None:
            x = move
        else:
            steps /= 2.0
    return x, best, iters, evals


def _resolve_frozen(spec: OptimizationSpec, q_init: Posture) -> tuple[np.ndarray, list[int]]:
    start = q_init.angles.copy()
    frozen_idx = set()
    for joint, angle in spec.frozen.items():
        idx = JOINTS.index(joint)
        start[idx] = angle
        frozen_idx.add(idx)
    free_idx = [i for i in range(N_JOINTS) if i not in frozen_idx]
    return start, free_idx


def optimize_posture(
    model: HumanModel, q_init: Posture, load: LoadSpec, spec: OptimizationSpec
) -> tuple[Posture, SolveReport]:
    """Minimize the weighted overloading-torque norm from ``q_init``.

    Deterministic for a fixed ``spec.solver.seed``.  Raises
    :class:`InfeasibleError` when no feasible posture is found across all
    restarts.
    """
    if spec.task.z_ref is None:
        spec = spec.with_reference_height(forward_kinematics(model, q_init).z_obj)
    start, free_idx = _resolve_frozen(spec, q_init)
    if not free_idx:
        raise ConfigError("all joints frozen; nothing to optimize")
    merit = lambda angles: _merit(model, load, spec, angles)
    obj_init = objective(model, Posture(start), load, spec.weights)

    start_merit = merit(start)
    if start_merit == (0, 0.0):
        report = evaluate_constraints(model, Posture(start), load, spec)
        return Posture(start, q_init.timestamp), SolveReport(
            objective_init=obj_init,
            objective_final=0.0,
            constraints=report,
            iterations=0,
            evaluations=1,
        )

    lower, upper = model.limits_low, model.limits_high
    rng = np.random.default_rng(spec.solver.seed)
    starts = [start]
    for _ in range(spec.solver.restarts - 1):
        draw = rng.uniform(lower, upper)
        draw[[i for i in range(N_JOINTS) if i not in free_idx]] = start[
            [i for i in range(N_JOINTS) if i not in free_idx]
        ]
        starts.append(draw)

    best_x, best_value = None, (2, np.inf)
    total_iters = total_evals = 0
    for x0 in starts:
        x, value, iters, evals = _compass(merit, x0, lower, upper, free_idx, spec.solver)
        total_iters += iters
        total_evals += evals
        if value < best_value:
            best_value, best_x = value, x

    if best_value[0] != 0:
        raise InfeasibleError(
            "no feasible posture found", best_penalty=best_value[1]
        )
    # the q_init-seeded restart never worsens, but keep the guarantee explicit
    if start_merit[0] == 0 and start_merit[1] < best_value[1]:
        best_x, best_value = start, start_merit
    q_d = Posture(best_x, q_init.timestamp)
    report = evaluate_constraints(model, q_d, load, spec)
    return q_d, SolveReport(
        objective_init=obj_init,
        objective_final=best_value[1],
        constraints=report,
        iterations=total_iters,
        evaluations=total_evals,
    )


def grid_oracle(
    model: HumanModel,
    load: LoadSpec,
    spec: OptimizationSpec,
    resolution: float,
    max_points: int = 10_000_000,
) -> GridResult:
    """Exhaustive scan over a joint-angle grid; the test oracle for the solver.

    Frozen joints stay at their pinned angles; every free joint is sampled
    from its lower limit in ``resolution``-degree steps.
    """
    if spec.task.z_ref is None:
        raise ConfigError("grid oracle needs an explicit task.z_ref")
    if resolution <= 0:
        raise InputError("resolution must be > 0")
    start, free_idx = _resolve_frozen(spec, Posture(np.zeros(N_JOINTS)))
    axes = []
    for i in free_idx:
        axes.append(np.arange(model.limits_low[i], model.limits_high[i] + 1e-9, resolution))
    total = int(np.prod([len(a) for a in axes])) if axes else 1
    if total > max_points:
        raise InputError(f"grid of {total} points exceeds the {max_points} cap")

    best_obj, best_q = None, None
    feasible_points = 0
    for combo in itertools.product(*axes):
        q = start.copy()
        q[free_idx] = combo
        value = _merit(model, load, spec, q)
        if value[0] != 0:
            continue
        feasible_points += 1
        if best_obj is None or value[1] < best_obj:
            best_obj, best_q = value[1], q.copy()
    if best_q is None:
        return GridResult(False, None, None, 0, total)
    return GridResult(True, Posture(best_q), best_obj, feasible_points, total)


def reaching_posture(
    model: HumanModel,
    hand_target: tuple[float, float],
    load: LoadSpec,
    tolerance: float = 0.005,
) -> Posture:
    """Deterministic inverse reach used to build protocol starting postures.

    Minimizes the hand-to-target distance while keeping the loaded center of
    pressure inside the support polygon, from a fixed set of stoop/squat
    seeds.  Raises :class:`InfeasibleError` if the target cannot be reached
    within ``tolerance`` meters.
    """
    lower, upper = model.limits_low, model.limits_high
    target = np.asarray(hand_target, dtype=float)
    polygon = support_polygon(model)

    def merit(angles):
        posture = Posture(angles)
        hand = forward_kinematics(model, posture).hand
        reach = float(np.sum((hand - target) ** 2))
        excursion = max(polygon.excursion(loaded_cop(model, posture, load)), 0.0)
        settle = 1e-9 * float(np.sum((angles / 100.0) ** 2))
        return (0, reach + excursion**2 * 1e2 + settle)

    seeds = [
        np.zeros(N_JOINTS),
        np.array([5.0, 10.0, 45.0, -30.0, -30.0]),  # stoop
        np.array([10.0, 60.0, 30.0, -20.0, -45.0]),  # squat
        np.array([0.0, 20.0, 80.0, -60.0, -10.0]),  # deep bend
    ]
    rng = np.random.default_rng(7)
    seeds.extend(rng.uniform(lower, upper) for _ in range(4))

    options = SolverOptions(restarts=1, max_iters=300, initial_step=16.0, min_step=1e-7)
    best_x, best_value = None, (0, np.inf)
    for seed in seeds:
        x, value, _, _ = _compass(merit, seed, lower, upper, list(range(N_JOINTS)), options)
        if value < best_value:
            best_value, best_x = value, x

    posture = Posture(best_x)
    hand = forward_kinematics(model, posture).hand
    err = float(np.linalg.norm(hand - target))
    if err > tolerance:
        raise InfeasibleError(
            f"hand target {tuple(target)} unreachable; residual {err:.4f} m",
            best_penalty=best_value[1],
        )
    return posture
