"""Live session endpoint: a websocket bridge between the loop and a UI wearer.

One websocket connection owns one session.  Outbound state frames are sent at
the control tick rate; inbound frames adjust joints, control trials, or
submit questionnaires.  All mutable state lives on the event loop, inbound
handling and the ticker never touch it concurrently.

Frame payloads are the canonical JSON records of :mod:`ergoguide.wire`; over
a websocket each text message carries exactly one record (the socket layer
provides the length framing that raw byte streams get from
:func:`ergoguide.wire.encode_frame`).
"""

from __future__ import annotations

import asyncio
import dataclasses
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .errors import ErgoguideError
from .feedback import (
    Modality,
    default_placements,
    error_magnitude,
    feedback_step,
    make_state,
)
from .harness import (
    ProtocolSpec,
    SensorSim,
    SessionConfig,
    calibrate_sesc,
    _command_records,
    _log_extra,
)
from .loading import LoadSpec
from .metrics import TickRecord, TrialLog, seq_score, sus_score, trial_metrics
from .model import JOINTS, Posture
from .optimize import OptimizationSpec, optimize_posture, reaching_posture
from .wire import dumps_record

PROTOCOL_VERSION = 1


class LiveSession:
    """Server-side state of one connected wearer."""

    def __init__(self, config: SessionConfig, protocol: ProtocolSpec | None = None):
        self.config = config
        self.protocol = protocol or ProtocolSpec()
        self.model = config.load_model()
        self.tick = 0
        self.t = 0.0
        self.q_c = Posture(np.zeros(len(JOINTS)))
        self.q_d: Posture | None = None
        self.engine = None
        self.trial: TrialLog | None = None
        self.sensors: SensorSim | None = None
        self.load: LoadSpec | None = None
        self.questionnaires: list[dict] = []
        self.trial_count = 0

    # -- frames ---------------------------------------------------------------

    def hello_frame(self) -> dict:
        modality = Modality(self.config.modality)
        guided = ("torso", "shoulder", "elbow")
        fb = self.config.feedback_config(guided)
        placements = default_placements(modality, guided)
        return {
            "type": "hello",
            "protocol_version": PROTOCOL_VERSION,
            "modality": modality.value,
            "model": self.model.to_dict(),
            "guided_joints": list(guided),
            "joints": list(JOINTS),
            "xi": {j: fb.xi[j] for j in guided},
            "dead_band": fb.dead_band,
            "tick_s": self.config.dt,
            "placements": [
                dataclasses.asdict(u) for units in placements.values() for u in units
            ],
        }

    def state_frame(self) -> dict:
        frame = {
            "type": "state",
            "tick": self.tick,
            "t": round(self.t, 9),
            "trial_active": self.trial is not None,
            "q_c": [float(v) for v in self.q_c.angles],
            "q_d": None if self.q_d is None else [float(v) for v in self.q_d.angles],
            "eps": None,
            "commands": [],
            "tau_overload": None,
        }
        if self.trial is None or self.q_d is None:
            return frame
        cfg = self.engine.config
        cur = np.array([self.q_c[j] for j in cfg.guided])
        des = np.array([self.q_d[j] for j in cfg.guided])
        eps = error_magnitude(cur, des, cfg.xi_vector, cfg.guided)
        commands, self.engine = feedback_step(self.engine, self.q_c, self.q_d, self.t)
        tau = None
        if self.sensors is not None:
            tau = self.sensors.tau(self.model, self.q_c, self.load, np.random.default_rng(0))
        self.trial.records.append(
            TickRecord(
                tick=self.tick,
                t=self.t,
                q_c=self.q_c.angles.copy(),
                q_d=self.q_d.angles.copy(),
                eps=eps.values.copy(),
                commands=_command_records(commands),
                tau_overload=tau,
                segment=0,
            )
        )
        frame["eps"] = [float(v) for v in eps.values]
        frame["commands"] = _command_records(commands)
        frame["tau_overload"] = None if tau is None else [float(v) for v in tau]
        return frame

    def advance(self) -> dict:
        frame = self.state_frame()
        self.tick += 1
        self.t += self.config.dt
        return frame

    # -- inbound --------------------------------------------------------------

    def handle(self, frame: dict) -> dict | None:
        kind = frame.get("type")
        if kind == "adjust":
            return self._handle_adjust(frame)
        if kind == "trial":
            return self._handle_trial(frame)
        if kind == "questionnaire":
            return self._handle_questionnaire(frame)
        raise ErgoguideError(f"unknown frame type {kind!r}")

    def _handle_adjust(self, frame: dict) -> None:
        if self.trial is None:
            raise ErgoguideError("no active trial; adjustments ignored")
        deltas = frame.get("deltas")
        if not isinstance(deltas, dict) or not deltas:
            raise ErgoguideError("adjust frame needs a non-empty deltas map")
        updates = {}
        for joint, delta in deltas.items():
            if joint not in JOINTS:
                raise ErgoguideError(f"unknown joint {joint!r}")
            updates[joint] = self.q_c[joint] + float(delta)
        moved = self.q_c.with_angles(**updates)
        self.q_c = Posture(self.model.clamp(moved.angles), moved.timestamp)
        return None

    def _handle_trial(self, frame: dict) -> dict | None:
        action = frame.get("action")
        if action == "start":
            return self._start_trial(frame)
        if action in ("complete", "abort"):
            return self._finish_trial(action)
        raise ErgoguideError(f"unknown trial action {action!r}")

    def _start_trial(self, frame: dict) -> dict:
        if self.trial is not None:
            raise ErgoguideError("a trial is already active")
        kind = frame.get("kind", "modality")
        modality = Modality(self.config.modality)
        if kind == "ergonomic":
            condition = int(frame.get("condition", 2))
            distance = self.protocol.condition_distances[condition]
            self.load = LoadSpec(self.protocol.load_mass)
            q_init = reaching_posture(
                self.model, (distance, self.protocol.initial_height), self.load
            )
            spec = OptimizationSpec(solver=self.config.solver_options())
            q_d, _ = optimize_posture(self.model, q_init, self.load, spec)
            self.q_c, self.q_d = q_init, q_d
            self.sensors = SensorSim(
                sesc_params=calibrate_sesc(self.model, seed=self.config.seed),
                samples_per_tick=self.config.samples_per_tick,
            )
            condition_label = f"condition_{condition}"
        elif kind == "modality":
            targets = frame.get("targets")
            if not isinstance(targets, dict) or not targets:
                raise ErgoguideError("modality trial start needs a targets map")
            unknown = set(targets) - set(JOINTS)
            if unknown:
                raise ErgoguideError(f"unknown joints in targets: {sorted(unknown)}")
            self.q_d = self.q_c.with_angles(**{j: float(v) for j, v in targets.items()})
            self.load = None
            self.sensors = None
            condition_label = "live"
        else:
            raise ErgoguideError(f"unknown trial kind {kind!r}")

        guided = tuple(
            j for j in ("torso", "shoulder", "elbow")
            if kind == "ergonomic" or j in frame.get("targets", {})
        )
        fb = self.config.feedback_config(guided)
        placements = default_placements(modality, guided)
        self.engine = make_state(modality, fb, placements)
        self.trial = TrialLog(
            modality=modality.value,
            protocol=f"{kind}_test",
            condition=condition_label,
            guided_joints=guided,
            seed=self.config.seed,
            tick_s=self.config.dt,
            dead_band=fb.dead_band,
            extra=_log_extra(self.config, fb, placements, {"live": True}),
        )
        return {"type": "trial", "action": "started", "kind": kind}

    def _finish_trial(self, action: str) -> dict:
        if self.trial is None:
            raise ErgoguideError("no active trial")
        log = self.trial
        log.status = "completed" if action == "complete" else "aborted"
        log.completed_at = log.records[-1].t if log.records else self.t
        out_dir = Path(self.config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"live_trial_{self.trial_count:03d}.jsonl"
        log.save(path)
        self.trial_count += 1
        summary = None
        if log.records and log.duration + 1e-9 >= 2.0:
            summary = {
                k: v for k, v in trial_metrics(log).items()
                if not isinstance(v, str)
            }
        self.trial = None
        self.q_d = None
        self.engine = None
        self.sensors = None
        self.load = None
        return {
            "type": "trial",
            "action": "finished",
            "status": log.status,
            "log_path": str(path),
            "summary": summary,
        }

    def _handle_questionnaire(self, frame: dict) -> dict:
        kind = frame.get("kind")
        responses = frame.get("responses")
        try:
            if kind == "sus":
                score = sus_score(responses)
            elif kind == "seq":
                score = seq_score(responses)
            else:
                raise ErgoguideError(f"unknown questionnaire kind {kind!r}")
        except ErgoguideError:
            raise
        except Exception as exc:  # range/type problems from scoring
            raise ErgoguideError(str(exc)) from exc
        entry = {"kind": kind, "responses": responses, "score": score, "t": round(self.t, 9)}
        self.questionnaires.append(entry)
        return {"type": "score", "kind": kind, "score": score}


def create_app(config: SessionConfig, protocol: ProtocolSpec | None = None) -> FastAPI:
    app = FastAPI(title="ergoguide live session")

    @app.websocket("/session")
    async def session_endpoint(ws: WebSocket):
        await ws.accept()
        session = LiveSession(config, protocol)
        await ws.send_text(dumps_record(session.hello_frame()))

        async def ticker():
            while True:
                frame = session.advance()
                await ws.send_text(dumps_record(frame))
                await asyncio.sleep(config.dt)

        task = asyncio.create_task(ticker())
        try:
            while True:
                try:
                    frame = await ws.receive_json()
                except WebSocketDisconnect:
                    raise
                except Exception:
                    await ws.send_text(
                        dumps_record({"type": "error", "reason": "malformed frame"})
                    )
                    continue
                try:
                    reply = session.handle(frame)
                except ErgoguideError as exc:
                    reply = {"type": "error", "reason": str(exc)}
                if reply is not None:
                    await ws.send_text(dumps_record(reply))
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app


def serve_session(config: SessionConfig, port: int = 8700, host: str = "127.0.0.1"):
    """Run the live session endpoint (blocking)."""
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
