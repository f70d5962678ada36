"""Session event loop and tour finite-state machine under a logical clock.

The phase graph: Idle -> Greeting -> AwaitConsent -> Navigating/AtArea through
the two mandatory areas -> FreeExploration -> Ending -> Done. A 120 s silence
timeout ends the tour from AwaitConsent, AtArea, and FreeExploration; the
timer is paused while navigating. All time is logical: the clock advances only
through events.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import navsim
from .analytics import TranscriptRecord
from .dialogue import (END_TOUR, GO_TO, ChatMessage, LlmResponse, PromptBundle,
                       ToolCall, build_prompt, tool_schema)
from .errors import BackendError
from .museum import MuseumMap

log = logging.getLogger(__name__)


class TourPhase(str, Enum):
    IDLE = "idle"
    GREETING = "greeting"
    AWAIT_CONSENT = "await_consent"
    NAVIGATING = "navigating"
    AT_AREA = "at_area"
    FREE_EXPLORATION = "free_exploration"
    ENDING = "ending"
    DONE = "done"


_TIMER_PHASES = (TourPhase.AWAIT_CONSENT, TourPhase.AT_AREA, TourPhase.FREE_EXPLORATION)


@dataclass(frozen=True)
class SessionEvent:
    kind: str
    time_s: float
    yes: Optional[bool] = None
    text: Optional[str] = None
    area_id: Optional[str] = None
    dt_s: Optional[float] = None
    reply: Optional[LlmResponse] = None
    artwork_id: Optional[str] = None

    @classmethod
    def visitor_detected(cls, t):
        return cls("visitor_detected", t)

    @classmethod
    def consent(cls, t, yes):
        return cls("consent", t, yes=yes)

    @classmethod
    def utterance(cls, t, text):
        return cls("utterance", t, text=text)

    @classmethod
    def arrived(cls, t, area_id):
        return cls("arrived", t, area_id=area_id)

    @classmethod
    def tick(cls, t, dt=1.0):
        return cls("tick", t, dt_s=dt)

    @classmethod
    def backend_reply(cls, t, reply):
        return cls("backend_reply", t, reply=reply)

    @classmethod
    def notification(cls, t, artwork_id):
        return cls("notification", t, artwork_id=artwork_id)

    @classmethod
    def end_request(cls, t):
        return cls("end_request", t)


# --- effects ----------------------------------------------------------------

@dataclass(frozen=True)
class Say:
    text: str
    label: Optional[str] = None


@dataclass(frozen=True)
class RequestBackend:
    visitor_text: str


@dataclass(frozen=True)
class NotifyArtwork:
    artwork_id: str
    text: str


@dataclass(frozen=True)
class PhaseChanged:
    phase: TourPhase


@dataclass(frozen=True)
class TourFinished:
    transcript: TranscriptRecord


# --- configuration ----------------------------------------------------------

DEFAULT_ROBOT_INFO = (
    "You are Ego, an autonomous museum guide robot. You walk visitors through "
    "the exhibition, introduce each area, and answer questions about the "
    "artworks using the knowledge base below. You can move to an exhibit area "
    "with the go_to action, but only after the visitor agrees on the "
    "destination, and you can end the tour with the end_tour action, which "
    "returns you to the entrance."
)

GREETING_TEXT = (
    "Hello! I am Ego, your museum guide. I can walk you through the "
    "exhibition and answer questions about the artworks. Would you like to "
    "start a guided tour?"
)

APOLOGY_TEXT = (
    "I'm sorry, I'm having trouble reaching my language service right now. "
    "Could you try again in a moment?"
)

FAREWELL_TEXT = (
    "Thank you for visiting! I'll head back to the entrance now. Goodbye!"
)

AFFIRMATIVE_PATTERNS = ("yes", "sure", "ok", "okay", "of course", "please do",
                        "let's go", "yes please", "start", "why not")
NEGATIVE_PATTERNS = ("no", "not now", "no thanks", "no thank you", "maybe later",
                     "i'd rather not")
READINESS_PATTERNS = ("continue", "let's continue", "ready", "next", "go on",
                      "move on", "let's move on", "yes")


@dataclass
class EngineConfig:
    timeout_s: float = 120.0
    grace_s: float = 30.0
    history_window: int = 20
    linear_speed: float = 0.7
    angular_speed: float = math.pi / 2
    fov_half_angle: float = math.pi / 3
    retries: int = 2
    tick_s: float = 1.0
    robot_info: str = DEFAULT_ROBOT_INFO
    backend: dict = field(default_factory=lambda: {"type": "scripted"})

    @classmethod
    def from_dict(cls, doc: dict) -> "EngineConfig":
        cfg = cls()
        for key in ("timeout_s", "grace_s", "linear_speed", "angular_speed",
                    "fov_half_angle", "tick_s"):
            if key in doc:
                setattr(cfg, key, float(doc[key]))
        for key in ("history_window", "retries"):
            if key in doc:
                setattr(cfg, key, int(doc[key]))
        if "robot_info" in doc:
            cfg.robot_info = str(doc["robot_info"])
        if "backend" in doc:
            cfg.backend = dict(doc["backend"])
        return cfg

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --- session state ----------------------------------------------------------

@dataclass
class SessionState:
    museum: MuseumMap
    config: EngineConfig
    session_id: str
    phase: TourPhase = TourPhase.IDLE
    clock: float = 0.0
    current_area_id: str = ""
    target_area_id: Optional[str] = None
    visited: list = field(default_factory=list)
    nav: navsim.NavState = None
    history: list = field(default_factory=list)
    last_visitor_activity: float = 0.0
    awaiting_reply: bool = False
    readiness_signaled: bool = False
    transcript: TranscriptRecord = None

    @classmethod
    def new(cls, museum: MuseumMap, config: EngineConfig, session_id: str) -> "SessionState":
        entrance = museum.entrance
        nav = navsim.NavState(
            pose=entrance.waypoint,
            linear_speed=config.linear_speed,
            angular_speed=config.angular_speed,
            trigger_arming={a.id: True for a in museum.artworks},
        )
        return cls(museum=museum, config=config, session_id=session_id,
                   current_area_id=entrance.id, nav=nav,
                   transcript=TranscriptRecord(session_id=session_id))

    @property
    def mandatory_complete(self) -> bool:
        m1 = self.museum.mandatory_area(1)
        m2 = self.museum.mandatory_area(2)
        return m1.id in self.visited and m2.id in self.visited

    def next_mandatory_id(self) -> Optional[str]:
        for rank in (1, 2):
            area = self.museum.mandatory_area(rank)
            if area.id not in self.visited:
                return area.id
        return None


def _record(state: SessionState, role: str, text: str, label=None) -> ChatMessage:
    msg = ChatMessage(role=role, text=text, logical_time=state.clock,
                      label=label, area_id=state.current_area_id)
    state.history.append(msg)
    state.transcript.messages.append(msg)
    return msg


def _say(state: SessionState, text: str, label=None) -> Say:
    _record(state, "robot", text, label)
    return Say(text, label)


def _matches(text: str, patterns) -> bool:
    low = text.lower()
    return any(re.search(r"\b" + re.escape(p) + r"\b", low) for p in patterns)


def _start_navigation(state: SessionState, area_id: str) -> list:
    area = state.museum.area(area_id)
    path = navsim.plan_path(state.museum.grid, state.nav.pose,
                            (area.waypoint.x, area.waypoint.y))
    state.nav = navsim.NavState(
        pose=state.nav.pose, path=path, target_area=area_id,
        linear_speed=state.nav.linear_speed, angular_speed=state.nav.angular_speed,
        trigger_arming=state.nav.trigger_arming)
    state.target_area_id = area_id
    if state.phase is not TourPhase.ENDING:
        state.phase = TourPhase.NAVIGATING
    return [PhaseChanged(state.phase)]


def _record_tool_call(state: SessionState, call: ToolCall) -> None:
    state.transcript.tool_calls.append((call, state.clock))


def _end_tour(state: SessionState) -> list:
    if state.phase in (TourPhase.ENDING, TourPhase.DONE):
        return []
    _record_tool_call(state, ToolCall(END_TOUR))
    effects = [_say(state, FAREWELL_TEXT, label="other")]
    state.phase = TourPhase.ENDING
    effects += _start_navigation(state, state.museum.entrance_area_id)
    return effects


def _finalize(state: SessionState) -> list:
    state.phase = TourPhase.DONE
    state.transcript.end_s = state.clock
    state.transcript.areas_visited = list(state.visited)
    return [PhaseChanged(TourPhase.DONE), TourFinished(state.transcript)]


def _consent(state: SessionState, yes: bool) -> list:
    m1 = state.museum.mandatory_area(1)
    if yes:
        effects = [_say(state,
                        f"Wonderful! Let me take you to the {m1.name} area first. "
                        "Follow me!", label="other")]
        effects += _start_navigation(state, m1.id)
        return effects
    effects = [_say(state, "No problem! I'll be right here if you change "
                           "your mind.", label="other")]
    state.phase = TourPhase.IDLE
    effects.append(PhaseChanged(TourPhase.IDLE))
    return effects


def readiness_to_advance(state: SessionState) -> bool:
    """True once the visitor signals readiness at the first mandatory area,
    or after the idle-advance grace period with no open question."""
    if state.awaiting_reply:
        return False
    if state.readiness_signaled:
        return True
    return state.clock - state.last_visitor_activity >= state.config.grace_s


def _advance_to_second(state: SessionState) -> list:
    m2 = state.museum.mandatory_area(2)
    state.readiness_signaled = False
    effects = [_say(state, f"Let's move on to the {m2.name} area. Follow me!",
                    label="other")]
    effects += _start_navigation(state, m2.id)
    return effects


def _handle_arrival(state: SessionState, area_id: str) -> list:
    state.current_area_id = area_id
    state.target_area_id = None
    if state.phase is TourPhase.ENDING:
        return _finalize(state)
    area = state.museum.area(area_id)
    if area_id != state.museum.entrance_area_id and area_id not in state.visited:
        state.visited.append(area_id)
    state.phase = TourPhase.AT_AREA
    state.last_visitor_activity = state.clock
    state.readiness_signaled = False
    return [PhaseChanged(TourPhase.AT_AREA), _say(state, area.intro_text, label="other")]


def _handle_tick(state: SessionState, dt: float) -> list:
    effects: list = []
    if state.phase is TourPhase.GREETING:
        state.phase = TourPhase.AWAIT_CONSENT
        state.last_visitor_activity = state.clock
        return [PhaseChanged(TourPhase.AWAIT_CONSENT)]

    if state.phase in (TourPhase.NAVIGATING, TourPhase.ENDING):
        state.nav, arrived = navsim.advance(state.nav, dt)
        state.nav, fired = navsim.check_notifications(
            state.nav, list(state.museum.artworks),
            state.config.fov_half_angle, state.clock)
        for note in fired:
            _record(state, "robot", note.utterance, label="other")
            effects.append(NotifyArtwork(note.artwork_id, note.utterance))
        if arrived:
            effects += _handle_arrival(state, state.target_area_id
                                       or state.current_area_id)
        return effects

    if state.phase in _TIMER_PHASES:
        if state.clock - state.last_visitor_activity > state.config.timeout_s:
            return _end_tour(state)
        if state.phase is TourPhase.AT_AREA:
            if state.mandatory_complete:
                state.phase = TourPhase.FREE_EXPLORATION
                return [PhaseChanged(TourPhase.FREE_EXPLORATION)]
            if (state.current_area_id == state.museum.mandatory_area(1).id
                    and readiness_to_advance(state)):
                return _advance_to_second(state)
    return effects


def _handle_utterance(state: SessionState, text: str) -> list:
    if state.phase in (TourPhase.IDLE, TourPhase.DONE):
        return []
    _record(state, "visitor", text)
    state.last_visitor_activity = state.clock

    if state.phase in (TourPhase.GREETING, TourPhase.AWAIT_CONSENT):
        if _matches(text, NEGATIVE_PATTERNS):
            return _consent(state, False)
        if _matches(text, AFFIRMATIVE_PATTERNS):
            return _consent(state, True)
        return [_say(state, "I'm sorry, would you like to start the guided "
                            "tour? A simple yes or no will do.", label="other")]

    if (state.phase is TourPhase.AT_AREA and not state.mandatory_complete
            and state.current_area_id == state.museum.mandatory_area(1).id
            and _matches(text, READINESS_PATTERNS)):
        state.readiness_signaled = True
        return _advance_to_second(state)

    if state.phase is TourPhase.ENDING:
        return []
    if state.awaiting_reply:
        return []
    state.awaiting_reply = True
    return [RequestBackend(text)]


def _handle_backend_reply(state: SessionState, reply: LlmResponse) -> list:
    state.awaiting_reply = False
    if state.phase in (TourPhase.ENDING, TourPhase.DONE):
        return []
    effects: list = []
    if reply.utterance:
        effects.append(_say(state, reply.utterance, label=reply.label))
    call = reply.tool_call
    if call is None:
        return effects
    _record_tool_call(state, call)
    if call.name == END_TOUR:
        return effects + _end_tour(state)

    dest = call.destination_area_id
    area = state.museum.area(dest) if dest else None
    if area is None:
        effects.append(_say(state, "I'm not sure which area you mean. Could "
                                   "you name one of the areas of the "
                                   "exhibition?", label="other"))
        return effects
    if not state.mandatory_complete and dest != state.next_mandatory_id():
        effects.append(_say(state, "Let's first finish the two introductory "
                                   f"areas, then I'll gladly take you to the "
                                   f"{area.name} area.", label="other"))
        return effects
    if dest == state.current_area_id and state.phase in (TourPhase.AT_AREA,
                                                         TourPhase.FREE_EXPLORATION):
        effects.append(_say(state, f"We are already in the {area.name} area!",
                            label="other"))
        return effects
    effects += _start_navigation(state, dest)
    return effects


def handle_event(state: SessionState, event: SessionEvent) -> tuple:
    """Apply one event; returns (state, effects). Impossible events are
    ignored with a logged warning and leave the state unchanged."""
    if event.time_s < state.clock - 1e-9:
        raise ValueError(f"event time {event.time_s} precedes clock {state.clock}")
    if state.phase is TourPhase.DONE:
        return state, []
    state.clock = event.time_s

    if event.kind == "tick":
        return state, _handle_tick(state, event.dt_s or state.config.tick_s)

    if event.kind == "visitor_detected":
        if state.phase is not TourPhase.IDLE:
            log.warning("ignoring visitor_detected in phase %s", state.phase)
            return state, []
        state.phase = TourPhase.GREETING
        state.transcript.start_s = state.clock
        return state, [PhaseChanged(TourPhase.GREETING),
                       _say(state, GREETING_TEXT, label="other")]

    if event.kind == "consent":
        if state.phase not in (TourPhase.GREETING, TourPhase.AWAIT_CONSENT):
            log.warning("ignoring consent in phase %s", state.phase)
            return state, []
        _record(state, "visitor", "yes" if event.yes else "no")
        state.last_visitor_activity = state.clock
        return state, _consent(state, bool(event.yes))

    if event.kind == "utterance":
        return state, _handle_utterance(state, event.text or "")

    if event.kind == "arrived":
        if state.phase not in (TourPhase.NAVIGATING, TourPhase.ENDING):
            log.warning("ignoring arrived in phase %s", state.phase)
            return state, []
        return state, _handle_arrival(state, event.area_id)

    if event.kind == "backend_reply":
        return state, _handle_backend_reply(state, event.reply)

    if event.kind == "end_request":
        if state.phase in (TourPhase.IDLE, TourPhase.ENDING):
            log.warning("ignoring end_request in phase %s", state.phase)
            return state, []
        _record(state, "visitor", "I would like to end the tour now.")
        state.last_visitor_activity = state.clock
        return state, _end_tour(state)

    if event.kind == "notification":
        art = next((a for a in state.museum.artworks if a.id == event.artwork_id), None)
        if art is None:
            log.warning("ignoring notification for unknown artwork %s", event.artwork_id)
            return state, []
        _record(state, "robot", art.passing_utterance, label="other")
        return state, [NotifyArtwork(art.id, art.passing_utterance)]

    log.warning("ignoring unknown event kind %s", event.kind)
    return state, []


# --- backend integration ----------------------------------------------------

def build_session_prompt(state: SessionState, window: Optional[int] = None) -> PromptBundle:
    unvisited = [a.id for a in state.museum.exhibit_areas() if a.id not in state.visited]
    return build_prompt(state.config.robot_info, state.current_area_id,
                        list(state.visited), unvisited, state.museum,
                        state.nav.pose, state.history,
                        window=window if window is not None else state.config.history_window)


def call_backend(state: SessionState, backend) -> Optional[tuple]:
    """Issue one backend call with retries. Returns (delivery_time, reply),
    or None after repeated failure (apology already recorded)."""
    bundle = build_session_prompt(state)
    schema = tool_schema([a.id for a in state.museum.exhibit_areas()])
    attempts = state.config.retries + 1
    for _ in range(attempts):
        try:
            reply = backend.complete(bundle, schema)
            return state.clock + reply.latency_s, reply
        except BackendError as exc:
            log.warning("backend failure: %s", exc)
            last = exc
    state.transcript.fault_flags.append(f"backend failure after {attempts} attempts: {last}")
    _say(state, APOLOGY_TEXT, label="other")
    return None


def run_loop(state: SessionState, events, backend) -> TranscriptRecord:
    """Consume events until Done (or the source is exhausted). Backend calls
    are issued on RequestBackend effects; the reply is delivered as a
    backend_reply event once the logical clock reaches request time plus the
    backend's latency, so ticks (and the silence timeout) keep flowing while
    a call is outstanding."""
    pending: Optional[tuple] = None
    for event in events:
        while pending is not None and pending[0] <= event.time_s:
            t, reply = pending
            pending = None
            state, effects = handle_event(state, SessionEvent.backend_reply(max(t, state.clock), reply))
            pending = _issue_requests(state, effects, backend, pending)
        state, effects = handle_event(state, event)
        pending = _issue_requests(state, effects, backend, pending)
        if state.phase is TourPhase.DONE:
            break
    if state.phase is not TourPhase.DONE:
        _finalize(state)
    return state.transcript


def _issue_requests(state, effects, backend, pending):
    for effect in effects:
        if isinstance(effect, RequestBackend):
            if pending is not None:
                # one outstanding call per session
                state.awaiting_reply = True
                continue
            result = call_backend(state, backend)
            if result is None:
                state.awaiting_reply = False
            else:
                pending = result
    return pending
