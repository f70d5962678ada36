"""Scripted visitor personas driving automated end-to-end sessions.

A persona is an ordered action script; actions are mapped onto session events
on the logical clock, interleaved with 1 s ticks, and fed through the engine
loop. Identical inputs replay to identical transcripts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .analytics import TranscriptRecord
from .engine import EngineConfig, SessionEvent, SessionState, TourPhase, run_loop
from .errors import ParseError, UnknownArea
from .museum import MuseumMap

# Extra logical time allowed after the script ends, so timeouts and the walk
# back to the entrance can complete.
_TAIL_S = 600.0


@dataclass(frozen=True)
class VisitorAction:
    kind: str  # approach | say | request_area | silence | end
    text: str = ""
    area_id: str = ""
    delay_s: float = 0.0
    duration_s: float = 0.0


@dataclass(frozen=True)
class Persona:
    name: str
    script: tuple

    @classmethod
    def from_dict(cls, doc: dict) -> "Persona":
        try:
            actions = []
            for raw in doc["script"]:
                kind = raw["action"]
                if kind not in ("approach", "say", "request_area", "silence", "end"):
                    raise ParseError(f"unknown persona action {kind!r}")
                actions.append(VisitorAction(
                    kind=kind,
                    text=raw.get("text", ""),
                    area_id=raw.get("area_id", ""),
                    delay_s=float(raw.get("delay_s", 0.0)),
                    duration_s=float(raw.get("duration_s", 0.0)),
                ))
            if not actions:
                raise ParseError("persona script must be non-empty")
            return cls(name=doc["name"], script=tuple(actions))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed persona: {exc}") from None


def load_persona_file(path) -> Persona:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in {path}: {exc}") from None
    return Persona.from_dict(doc)


def schedule_events(persona: Persona, museum: MuseumMap) -> list[SessionEvent]:
    """Map persona actions onto timed session events."""
    t = 0.0
    events = []
    for action in persona.script:
        if action.kind == "approach":
            events.append(SessionEvent.visitor_detected(t))
        elif action.kind == "say":
            t += action.delay_s
            events.append(SessionEvent.utterance(t, action.text))
        elif action.kind == "request_area":
            t += action.delay_s
            area = museum.area(action.area_id)
            if area is None:
                raise UnknownArea(action.area_id)
            events.append(SessionEvent.utterance(
                t, f"Can you take me to the {area.name} area?"))
        elif action.kind == "silence":
            t += action.duration_s
        elif action.kind == "end":
            t += action.delay_s
            events.append(SessionEvent.end_request(t))
    return events


def _merged_stream(persona_events, state: SessionState, tick_s: float):
    """Persona events merged with ticks in time order (persona first on
    ties); ticks continue past the script until the session settles."""
    horizon = (persona_events[-1].time_s if persona_events else 0.0) \
        + state.config.timeout_s + _TAIL_S
    idx = 0
    tick_time = tick_s
    while True:
        if idx < len(persona_events) and persona_events[idx].time_s <= tick_time:
            yield persona_events[idx]
            idx += 1
            continue
        if idx >= len(persona_events) and state.phase is TourPhase.IDLE:
            return  # visitor left without a tour; nothing more will happen
        if tick_time > horizon:
            return
        yield SessionEvent.tick(tick_time, tick_s)
        tick_time += tick_s


def run_session(persona: Persona, museum: MuseumMap, backend,
                config: EngineConfig = None, seed: int = 0) -> TranscriptRecord:
    """Run one deterministic scripted session and return its transcript."""
    config = config or EngineConfig()
    session_id = f"{persona.name}-{seed}"
    state = SessionState.new(museum, config, session_id)
    events = schedule_events(persona, museum)
    return run_loop(state, _merged_stream(events, state, config.tick_s), backend)


def generate_corpus(personas, museum: MuseumMap, backend,
                    config: EngineConfig = None, seeds=(0,)) -> list[TranscriptRecord]:
    """One transcript per (persona, seed), in deterministic order."""
    out = []
    for persona in personas:
        for seed in seeds:
            out.append(run_session(persona, museum, backend, config, seed))
    return out
