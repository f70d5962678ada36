"""FastAPI gateway: live sessions over WebSocket, museum snapshot over REST.

Each connection gets its own session and event loop; the museum is shared
read-only. In live mode the logical clock follows the wall clock 1:1; a
``time_scale`` > 1 speeds logical time up (used by tests and demos).
"""

from __future__ import annotations

import asyncio
import itertools
import logging

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from ..dialogue import ScriptedBackend, load_script_rules
from ..engine import (EngineConfig, NotifyArtwork, PhaseChanged, RequestBackend,
                      Say, SessionEvent, SessionState, TourPhase, TourFinished,
                      call_backend, handle_event)
from ..museum import MuseumMap, serialize_museum
from .schemas import (InboundMessage, NotificationMsg, PhaseChangeMsg,
                      PoseUpdateMsg, RobotUtteranceMsg, TourSummaryMsg)

log = logging.getLogger(__name__)

_session_counter = itertools.count(1)


def make_backend(museum: MuseumMap, backend_config: dict):
    """Instantiate the configured backend (scripted or http)."""
    kind = backend_config.get("type", "scripted")
    if kind == "scripted":
        rules, options = load_script_rules(backend_config)
        return ScriptedBackend(rules, museum, **options)
    if kind == "http":
        from ..dialogue import HttpBackend
        return HttpBackend(
            endpoint=backend_config["endpoint"],
            model=backend_config.get("model", "gpt-4o-mini"),
            timeout_s=float(backend_config.get("timeout_s", 20.0)),
            api_key_env=backend_config.get("api_key_env", "OPENAI_API_KEY"),
        )
    raise ValueError(f"unknown backend type {kind!r}")


class _LiveSession:
    """One connected visitor: serialized event queue, wall-clock ticker."""

    def __init__(self, websocket: WebSocket, museum: MuseumMap,
                 config: EngineConfig, backend, time_scale: float):
        self.ws = websocket
        self.backend = backend
        self.time_scale = time_scale
        self.session_id = f"live-{next(_session_counter)}"
        self.state = SessionState.new(museum, config, self.session_id)
        self.queue: asyncio.Queue = asyncio.Queue()
        self.done = asyncio.Event()

    async def _send(self, model) -> None:
        await self.ws.send_json(model.model_dump())

    def _meta(self) -> dict:
        return {"session_id": self.session_id, "logical_time": round(self.state.clock, 3)}

    async def _emit_effects(self, effects) -> None:
        for effect in effects:
            if isinstance(effect, Say):
                await self._send(RobotUtteranceMsg(text=effect.text, **self._meta()))
            elif isinstance(effect, PhaseChanged):
                await self._send(PhaseChangeMsg(phase=effect.phase.value, **self._meta()))
            elif isinstance(effect, NotifyArtwork):
                await self._send(NotificationMsg(artwork_id=effect.artwork_id,
                                                 text=effect.text, **self._meta()))
            elif isinstance(effect, TourFinished):
                await self._send(TourSummaryMsg(transcript=effect.transcript.to_dict(),
                                                **self._meta()))
            elif isinstance(effect, RequestBackend):
                asyncio.get_running_loop().create_task(self._backend_call())

    async def _backend_call(self) -> None:
        result = await asyncio.to_thread(call_backend, self.state, self.backend)
        if result is None:
            # call_backend already recorded the apology; surface it
            self.state.awaiting_reply = False
            await self._send(RobotUtteranceMsg(
                text=self.state.history[-1].text, **self._meta()))
            return
        t, reply = result
        await self.queue.put(SessionEvent.backend_reply(max(t, self.state.clock), reply))

    async def _ticker(self) -> None:
        dt = self.state.config.tick_s
        while not self.done.is_set():
            await asyncio.sleep(dt / self.time_scale)
            await self.queue.put(SessionEvent.tick(self.state.clock + dt, dt))

    async def _reader(self) -> None:
        try:
            while not self.done.is_set():
                raw = await self.ws.receive_json()
                msg = InboundMessage.model_validate(raw)
                t = self.state.clock
                if msg.type == "approach":
                    await self.queue.put(SessionEvent.visitor_detected(t))
                elif msg.type == "consent":
                    await self.queue.put(SessionEvent.consent(t, bool(msg.yes)))
                elif msg.type == "utterance":
                    await self.queue.put(SessionEvent.utterance(t, msg.text or ""))
                elif msg.type == "end_request":
                    await self.queue.put(SessionEvent.end_request(t))
        except (WebSocketDisconnect, RuntimeError):
            await self.queue.put(None)

    async def run(self) -> None:
        tasks = [asyncio.create_task(self._ticker()),
                 asyncio.create_task(self._reader())]
        try:
            while True:
                event = await self.queue.get()
                if event is None:
                    # orphaned connection: finalize via end-tour semantics
                    if self.state.phase not in (TourPhase.IDLE, TourPhase.DONE):
                        self.state, _ = handle_event(
                            self.state, SessionEvent.end_request(self.state.clock))
                    raise WebSocketDisconnect(1001)
                if event.time_s < self.state.clock:
                    event = SessionEvent(**{**event.__dict__, "time_s": self.state.clock})
                was_navigating = self.state.phase in (TourPhase.NAVIGATING,
                                                      TourPhase.ENDING)
                self.state, effects = handle_event(self.state, event)
                await self._emit_effects(effects)
                if event.kind == "tick" and was_navigating:
                    pose = self.state.nav.pose
                    await self._send(PoseUpdateMsg(x=pose.x, y=pose.y,
                                                   heading=pose.heading, **self._meta()))
                if self.state.phase is TourPhase.DONE:
                    break
        except WebSocketDisconnect:
            raise
        finally:
            self.done.set()
            for task in tasks:
                task.cancel()


def create_app(museum: MuseumMap, config: EngineConfig = None,
               backend_config: dict = None, time_scale: float = 1.0) -> FastAPI:
    config = config or EngineConfig()
    backend_config = backend_config or config.backend
    app = FastAPI(title="tourguide gateway")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/museum")
    def museum_snapshot():
        return serialize_museum(museum)

    @app.websocket("/ws/session")
    async def session_socket(websocket: WebSocket):
        await websocket.accept()
        backend = make_backend(museum, backend_config)
        session = _LiveSession(websocket, museum, config, backend, time_scale)
        pose = session.state.nav.pose
        await session._send(PoseUpdateMsg(x=pose.x, y=pose.y, heading=pose.heading,
                                          **session._meta()))
        try:
            await session.run()
        except WebSocketDisconnect:
            log.info("session %s disconnected", session.session_id)
        finally:
            try:
                await websocket.close()
            except Exception:
                pass

    return app
