"""Simulated wearers that perceive device commands and move their joints.

An agent decodes the active modality each tick, then integrates joint motion
toward (or, when it misunderstands, away from) the cued direction.  Decoding
is conservative: a cue at vibration level ``l`` implies the normalized error
is at least the lower threshold of ``l``, so the agent budgets at most that
many degrees of motion per decision.  An agent that always understands the
cues therefore never overshoots the target, which pins the closed-loop
guarantees (success 100 %, confusion exactly 0) used by the test suite.

Misunderstanding inverts the decoded direction, which is what the confusion
index counts.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .feedback import (
    LAMBDA,
    DeviceCommand,
    FeedbackConfig,
    Level,
    Modality,
)
from .model import HumanModel, Posture


def _as_modality_map(value) -> dict[Modality, float]:
    if isinstance(value, dict):
        out = {Modality(k): float(v) for k, v in value.items()}
    else:
        out = {m: float(value) for m in Modality}
    for m, p in out.items():
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"comprehension for {m.value} must be in [0, 1]")
    return out


@dataclass(frozen=True)
class AgentParams:
    comprehension: dict | float = 1.0  # probability per modality
    reaction_delay: float = 0.0  # s
    max_joint_speed: float = 30.0  # deg/s
    speed_gain: float = 100.0  # deg/s at full perceived amplitude
    perception_threshold: float = 0.05  # minimum lambda the agent feels
    dwell: float = 1.3  # s of continued motion between decisions

    def __post_init__(self):
        object.__setattr__(self, "comprehension", _as_modality_map(self.comprehension))
        if self.max_joint_speed <= 0 or self.speed_gain <= 0:
            raise ConfigError("speeds must be > 0")
        if self.reaction_delay < 0:
            raise ConfigError("reaction_delay must be >= 0")


PRESETS = {
    "ideal": AgentParams(),
    "noisy": AgentParams(
        comprehension={"spot": 0.9, "ramp": 0.75, "pattern": 0.8},
        reaction_delay=0.3,
        max_joint_speed=25.0,
        speed_gain=40.0,
        perception_threshold=0.1,
    ),
    "sluggish": AgentParams(
        comprehension=0.95,
        reaction_delay=0.8,
        max_joint_speed=12.0,
        speed_gain=20.0,
        dwell=1.5,
    ),
    "inverting": AgentParams(comprehension=0.0),
}


@dataclass
class _Intent:
    direction: int = 0
    budget: float = 0.0  # deg the agent allows itself before the next cue
    lam: float = 0.0
    decided_at: float = 0.0


class Agent:
    """One simulated wearer; holds per-trial decoding state."""

    def __init__(
        self,
        params: AgentParams,
        modality: Modality,
        config: FeedbackConfig,
        placements: dict,
        model: HumanModel | None = None,
    ):
        self.params = params
        self.modality = Modality(modality)
        self.config = config
        self.model = model
        self.device_joint = {u.device_id: u for units in placements.values() for u in units}
        self.t = 0.0
        self.intents: dict[str, _Intent] = {j: _Intent() for j in config.guided}
        self._ramp_history: dict[str, deque] = {}
        self._pending: list[tuple[float, str, int, float, float]] = []
        self._last_cue_t: dict[str, float] = {}

    # -- decoding -------------------------------------------------------------

    def _perceived(self, commands: list[DeviceCommand]) -> list[DeviceCommand]:
        return [
            c
            for c in commands
            if c.level != Level.OFF and c.lam >= self.params.perception_threshold
        ]

    def _budget_for(self, joint: str, lam: float) -> float:
        """Safe motion allowance: the error floor implied by the felt level."""
        t1, t2, t3 = self.config.level_thresholds
        if lam >= LAMBDA[Level.L3] - 1e-9:
            floor = t3
        elif lam >= LAMBDA[Level.L2] - 1e-9:
            floor = t2
        else:
            floor = t1
        return floor * self.config.xi[joint]

    def _decode(self, perceived: list[DeviceCommand]):
        """Return (joint, direction, lam) or None when no new cue is readable."""
        if self.modality == Modality.SPOT:
            cmd = perceived[0]
            unit = self.device_joint[cmd.device_id]
            return unit.joint, unit.repulsion_sign, cmd.lam
        if self.modality == Modality.RAMP:
            cmd = perceived[0]
            unit = self.device_joint[cmd.device_id]
            hist = self._ramp_history.setdefault(unit.joint, deque(maxlen=3))
            hist.append(cmd.lam)
            if len(hist) == 3:
                a, b, c = hist
                if a < b < c:
                    return unit.joint, -1, c  # rising ramp: angle must decrease
                if a > b > c:
                    return unit.joint, 1, a
            return None
        # PATTERN: the whole train arrives in one tick, ordered by onset
        train = sorted(perceived, key=lambda c: c.onset_ms)
        units = [self.device_joint[c.device_id] for c in train]
        if len({u.joint for u in units}) != 1 or len(units) < 2:
            return None
        indices = [u.index for u in units]
        if indices == sorted(indices):
            return units[0].joint, -1, train[0].lam
        if indices == sorted(indices, reverse=True):
            return units[0].joint, 1, train[0].lam
        return None

    def _cue_cadence(self, joint: str) -> float:
        """How long a cue stream may go silent before the agent stops moving.

        SPOT and RAMP command every tick while active, so one missing tick
        means the target is reached; PATTERN trains repeat once per cycle.
        """
        tick = self.config.tick_ms / 1000.0
        if self.modality == Modality.PATTERN:
            steps = -(-self.config.duration_ms // self.config.tick_ms)
            units = max(
                (u.index + 1 for u in self.device_joint.values() if u.joint == joint),
                default=1,
            )
            cadence = units * steps * tick + 0.5 * tick
        else:
            cadence = 1.5 * tick
        return min(self.params.dwell, cadence)

    def decide(
        self, commands: list[DeviceCommand], rng: np.random.Generator
    ) -> dict[str, int]:
        """Per-joint intended motion direction for this tick."""
        perceived = self._perceived(commands)
        cued_joints = {self.device_joint[c.device_id].joint for c in perceived}
        # a ramp is only readable as a contiguous stream: any silent tick for
        # a joint breaks it, so stale amplitude history must not leak across
        for joint in list(self._ramp_history):
            if joint not in cued_joints:
                del self._ramp_history[joint]
        for joint in cued_joints:
            self._last_cue_t[joint] = self.t
        if perceived:
            decoded = self._decode(perceived)
            if decoded is not None:
                joint, direction, lam = decoded
                p = self.params.comprehension[self.modality]
                if p < 1.0 and (p == 0.0 or rng.random() > p):
                    direction = -direction
                self._pending.append(
                    (self.t + self.params.reaction_delay, joint, direction, lam,
                     self._budget_for(joint, lam))
                )

        while self._pending and self._pending[0][0] <= self.t + 1e-12:
            _, joint, direction, lam, budget = self._pending.pop(0)
            for j, intent in self.intents.items():
                if j != joint:
                    intent.direction = 0
            self.intents[joint] = _Intent(direction, budget, lam, self.t)

        out = {}
        for joint, intent in self.intents.items():
            last_cue = self._last_cue_t.get(joint)
            stale = last_cue is None or self.t - last_cue > self._cue_cadence(joint) + 1e-12
            spent = intent.budget <= 1e-12
            out[joint] = 0 if (intent.direction == 0 or stale or spent) else intent.direction
        return out

    def step(self, decision: dict[str, int], posture: Posture, dt: float) -> Posture:
        """Integrate one tick of motion, bounded by joint limits and budgets."""
        updates = {}
        for joint, direction in decision.items():
            if direction == 0:
                continue
            intent = self.intents[joint]
            speed = min(self.params.max_joint_speed, self.params.speed_gain * max(intent.lam, 0.0))
            step = min(speed * dt, max(intent.budget, 0.0))
            if step <= 0:
                continue
            intent.budget -= step
            updates[joint] = posture[joint] + direction * step
        self.t += dt
        moved = Posture(posture.angles, posture.timestamp + dt)
        if updates:
            moved = moved.with_angles(**updates)
        if self.model is not None:
            moved = Posture(self.model.clamp(moved.angles), moved.timestamp)
        return moved


def make_agent(
    preset_or_params,
    modality: Modality,
    config: FeedbackConfig,
    placements: dict,
    model: HumanModel | None = None,
) -> Agent:
    params = PRESETS[preset_or_params] if isinstance(preset_or_params, str) else preset_or_params
    return Agent(params, modality, config, placements, model=model)


def agent_decide(
    agent: Agent, perceived: list[DeviceCommand], modality, rng: np.random.Generator
) -> dict[str, int]:
    if Modality(modality) != agent.modality:
        raise ConfigError("agent was built for a different modality")
    return agent.decide(perceived, rng)


def agent_step(agent: Agent, decision: dict[str, int], posture: Posture, dt: float) -> Posture:
    return agent.step(decision, posture, dt)
