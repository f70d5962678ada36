"""Transcript records, turn labeling, and visit-parameter metrics.

A transcript captures one session: duration, ordered areas visited, the full
dialogue, and the tool calls issued. Metrics summarize a corpus with per-
parameter mean and sample standard deviation, plus per-area error rates
(comprehension failures divided by the number of visitors to the area).
"""

from __future__ import annotations

import csv
import json
import re
import statistics
from dataclasses import dataclass, field, replace

from .dialogue import ChatMessage, ToolCall
from .errors import EmptyCorpus, ParseError
from .museum import MuseumMap

QUESTION = "question"
ANSWERED = "answered"
OUT_OF_SCOPE = "out_of_scope"
COMPREHENSION_FAILURE = "comprehension_failure"
OTHER = "other"

_INTERROGATIVE = re.compile(
    r"^(what|where|when|who|whom|whose|why|how|which|can|could|would|will|"
    r"do|does|did|is|are|was|were|tell me)\b", re.IGNORECASE)

DEFAULT_PHRASES = {
    "out_of_scope": [
        "not aware of this information",
        "ask the museum staff",
        "i do not have that information",
    ],
    "comprehension_failure": [
        "could you repeat",
        "didn't understand",
        "didn't catch that",
        "did not understand",
    ],
}


@dataclass
class TranscriptRecord:
    session_id: str
    start_s: float = 0.0
    end_s: float = 0.0
    messages: list = field(default_factory=list)  # ChatMessage
    tool_calls: list = field(default_factory=list)  # (ToolCall, time_s)
    areas_visited: list = field(default_factory=list)
    fault_flags: list = field(default_factory=list)
    annotations: dict = field(default_factory=dict)  # reserved (e.g. observed pauses)

    @property
    def duration_minutes(self) -> float:
        return (self.end_s - self.start_s) / 60.0

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "start_s": round(self.start_s, 3),
            "end_s": round(self.end_s, 3),
            "messages": [
                {
                    "role": m.role,
                    "text": m.text,
                    "time_s": round(m.logical_time, 3),
                    "label": m.label,
                    "area_id": m.area_id,
                }
                for m in self.messages
            ],
            "tool_calls": [
                {
                    "name": tc.name,
                    **({"destination": tc.destination_area_id}
                       if tc.destination_area_id else {}),
                    "time_s": round(t, 3),
                }
                for tc, t in self.tool_calls
            ],
            "areas_visited": list(self.areas_visited),
            "fault_flags": list(self.fault_flags),
            "annotations": dict(self.annotations),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TranscriptRecord":
        try:
            return cls(
                session_id=doc["session_id"],
                start_s=float(doc["start_s"]),
                end_s=float(doc["end_s"]),
                messages=[
                    ChatMessage(role=m["role"], text=m["text"],
                                logical_time=float(m["time_s"]),
                                label=m.get("label"), area_id=m.get("area_id"))
                    for m in doc.get("messages", [])
                ],
                tool_calls=[
                    (ToolCall(tc["name"], tc.get("destination")), float(tc["time_s"]))
                    for tc in doc.get("tool_calls", [])
                ],
                areas_visited=list(doc.get("areas_visited", [])),
                fault_flags=list(doc.get("fault_flags", [])),
                annotations=dict(doc.get("annotations", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed transcript: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def load_transcript_file(path) -> TranscriptRecord:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in {path}: {exc}") from None
    return TranscriptRecord.from_dict(doc)


def _matches_any(text: str, phrases) -> bool:
    low = text.lower()
    return any(p.lower() in low for p in phrases)


def _is_question(text: str) -> bool:
    stripped = text.strip()
    return stripped.endswith("?") or bool(_INTERROGATIVE.match(stripped))


def label_turns(transcript: TranscriptRecord, phrase_config: dict = None) -> TranscriptRecord:
    """Classify unlabeled turns; ground-truth labels are preserved verbatim.

    Visitor turns become question/other; robot turns become out_of_scope or
    comprehension_failure by phrase match, answered when they follow a
    question, other otherwise. Idempotent.
    """
    phrases = phrase_config or DEFAULT_PHRASES
    oos = phrases.get("out_of_scope", [])
    fail = phrases.get("comprehension_failure", [])

    labeled = []
    open_question = False
    for msg in transcript.messages:
        label = msg.label
        if msg.role == "visitor":
            if label is None:
                label = QUESTION if _is_question(msg.text) else OTHER
            if label == QUESTION:
                open_question = True
        elif msg.role == "robot":
            if label is None:
                if _matches_any(msg.text, fail):
                    label = COMPREHENSION_FAILURE
                elif _matches_any(msg.text, oos):
                    label = OUT_OF_SCOPE
                elif open_question:
                    label = ANSWERED
                else:
                    label = OTHER
            if open_question and label in (ANSWERED, OUT_OF_SCOPE, COMPREHENSION_FAILURE):
                open_question = False
        labeled.append(replace(msg, label=label))
    return replace_messages(transcript, labeled)


def replace_messages(transcript: TranscriptRecord, messages: list) -> TranscriptRecord:
    return TranscriptRecord(
        session_id=transcript.session_id,
        start_s=transcript.start_s,
        end_s=transcript.end_s,
        messages=messages,
        tool_calls=list(transcript.tool_calls),
        areas_visited=list(transcript.areas_visited),
        fault_flags=list(transcript.fault_flags),
        annotations=dict(transcript.annotations),
    )


PARAMETERS = ("duration_minutes", "areas_visited", "questions", "answers",
              "out_of_scope", "comprehension_failures")


@dataclass(frozen=True)
class VisitMetrics:
    """Per-parameter (mean, sample standard deviation) over a corpus."""

    duration_minutes: tuple
    areas_visited: tuple
    questions: tuple
    answers: tuple
    out_of_scope: tuple
    comprehension_failures: tuple

    def as_rows(self) -> list[tuple]:
        return [(name, *getattr(self, name)) for name in PARAMETERS]


def _count(transcript: TranscriptRecord, role: str, label: str) -> int:
    return sum(1 for m in transcript.messages if m.role == role and m.label == label)


def _mu_sigma(values: list[float]) -> tuple[float, float]:
    mu = statistics.fmean(values)
    sigma = statistics.stdev(values) if len(values) > 1 else 0.0
    return mu, sigma


def compute_metrics(corpus: list[TranscriptRecord]) -> VisitMetrics:
    """Mean and sample std dev (n-1; singleton corpus gives 0) per parameter."""
    if not corpus:
        raise EmptyCorpus("no transcripts supplied")
    samples = {name: [] for name in PARAMETERS}
    for t in corpus:
        samples["duration_minutes"].append(t.duration_minutes)
        samples["areas_visited"].append(float(len(set(t.areas_visited))))
        samples["questions"].append(float(_count(t, "visitor", QUESTION)))
        samples["answers"].append(float(_count(t, "robot", ANSWERED)))
        samples["out_of_scope"].append(float(_count(t, "robot", OUT_OF_SCOPE)))
        samples["comprehension_failures"].append(
            float(_count(t, "robot", COMPREHENSION_FAILURE)))
    return VisitMetrics(**{name: _mu_sigma(vals) for name, vals in samples.items()})


def per_area_error_rates(corpus: list[TranscriptRecord], museum: MuseumMap = None) -> dict:
    """rate(a) = comprehension failures emitted while at a / transcripts visiting a.

    Areas with zero visitors are omitted.
    """
    visitors: dict[str, int] = {}
    failures: dict[str, int] = {}
    for t in corpus:
        for area_id in set(t.areas_visited):
            visitors[area_id] = visitors.get(area_id, 0) + 1
        for m in t.messages:
            if (m.role == "robot" and m.label == COMPREHENSION_FAILURE
                    and m.area_id is not None):
                failures[m.area_id] = failures.get(m.area_id, 0) + 1
    order = [a.id for a in museum.areas] if museum is not None else sorted(visitors)
    rates = {}
    for area_id in order:
        if area_id in visitors:
            rates[area_id] = failures.get(area_id, 0) / visitors[area_id]
    return rates


def export_metrics(metrics: VisitMetrics, rates: dict, path) -> None:
    """Write one CSV: parameter rows (name, mean, sd) then area rows
    (area, rate as percent); stable ordering."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "mean", "sd"])
        for name, mu, sigma in metrics.as_rows():
            writer.writerow([name, f"{mu:.4f}", f"{sigma:.4f}"])
        for area_id in rates:
            writer.writerow([f"error_rate[{area_id}]", f"{rates[area_id] * 100:.2f}", ""])
