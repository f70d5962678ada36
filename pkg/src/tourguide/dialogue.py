"""Dynamic prompt construction, tool-call parsing, and LLM backends.

The prompt has five fixed sections: robot information, current location,
visit progress, knowledge base (current area only, facts annotated with the
artwork's direction relative to the robot), and a bounded chat history.
Backends implement ``complete(bundle, tools)``; the scripted backend is the
deterministic test stand-in for a chat-completions endpoint.
"""

from __future__ import annotations

import fnmatch
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import httpx

from .errors import (AuthError, BackendTimeout, MalformedResponse, NetworkError,
                     UnknownArea)
from .museum import MuseumMap, Pose, normalize_angle

GO_TO = "go_to"
END_TOUR = "end_tour"

SECTION_HEADERS = (
    "## Robot Information",
    "## Current Location",
    "## Visit Progress",
    "## Knowledge Base",
    "## Conversation History",
)


@dataclass(frozen=True)
class ChatMessage:
    role: str  # visitor | robot | system
    text: str
    logical_time: float
    label: Optional[str] = None
    area_id: Optional[str] = None


@dataclass(frozen=True)
class ToolCall:
    name: str  # go_to | end_tour
    destination_area_id: Optional[str] = None


@dataclass(frozen=True)
class LlmResponse:
    utterance: Optional[str] = None
    tool_call: Optional[ToolCall] = None
    latency_s: float = 0.0
    label: Optional[str] = None  # analytics ground truth from scripted rules

    def __post_init__(self):
        if self.utterance is None and self.tool_call is None:
            raise ValueError("LlmResponse needs an utterance or a tool call")


@dataclass(frozen=True)
class PromptBundle:
    robot_info: str
    current_location: str
    visited: tuple  # area names
    unvisited: tuple  # area names
    knowledge: tuple  # annotated fact strings
    history: tuple  # ChatMessage window


def relative_direction(pose: Pose, point: tuple[float, float]) -> str:
    """Qualitative quadrant of a point as seen from the robot's heading."""
    bearing = normalize_angle(math.atan2(point[1] - pose.y, point[0] - pose.x)
                              - pose.heading)
    if abs(bearing) <= math.pi / 4:
        return "ahead"
    if abs(bearing) >= 3 * math.pi / 4:
        return "behind"
    return "to the left" if bearing > 0 else "to the right"


def build_prompt(robot_info: str, current_area_id: str, visited: list[str],
                 unvisited: list[str], museum: MuseumMap, robot_pose: Pose,
                 history: list[ChatMessage], window: int = 20) -> PromptBundle:
    """Assemble the five-section bundle for the robot's current area."""
    area = museum.area(current_area_id)
    if area is None:
        raise UnknownArea(current_area_id)

    exhibit_ids = {a.id for a in museum.exhibit_areas()}
    if set(visited) | set(unvisited) != exhibit_ids or set(visited) & set(unvisited):
        raise ValueError("visited/unvisited must partition the non-entrance areas")

    def names(ids):
        return tuple(museum.area(i).name for i in ids)

    knowledge = []
    for art in museum.artworks_in(current_area_id):
        direction = relative_direction(robot_pose, art.position)
        for fact in art.facts:
            knowledge.append(f"[{art.title} by {art.author}, {direction}] {fact}")

    return PromptBundle(
        robot_info=robot_info,
        current_location=area.name,
        visited=names(visited),
        unvisited=names(unvisited),
        knowledge=tuple(knowledge),
        history=tuple(history[-window:]) if window > 0 else (),
    )


def render_prompt(bundle: PromptBundle) -> str:
    """Deterministic textual form with the five fixed section headers."""
    lines = [SECTION_HEADERS[0], bundle.robot_info, ""]
    lines += [SECTION_HEADERS[1], f"You are currently in the {bundle.current_location} area.", ""]
    lines += [
        SECTION_HEADERS[2],
        "Areas already explored: " + (", ".join(bundle.visited) if bundle.visited else "none"),
        "Areas not yet explored: " + (", ".join(bundle.unvisited) if bundle.unvisited else "none"),
        "",
    ]
    lines.append(SECTION_HEADERS[3])
    lines += [f"- {fact}" for fact in bundle.knowledge]
    lines.append("")
    lines.append(SECTION_HEADERS[4])
    for msg in bundle.history:
        lines.append(f"{msg.role.upper()}: {msg.text}")
    return "\n".join(lines) + "\n"


def tool_schema(area_ids: list[str]) -> list[dict]:
    """Chat-completions tool definitions for the two callable actions."""
    return [
        {
            "type": "function",
            "function": {
                "name": GO_TO,
                "description": "Move the robot to the specified exhibit area. "
                               "Call only after the visitor agrees on the destination.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "destination": {"type": "string", "enum": list(area_ids)},
                    },
                    "required": ["destination"],
                },
            },
        },
        {
            "type": "function",
            "function": {
                "name": END_TOUR,
                "description": "End the tour and return the robot to the entrance.",
                "parameters": {"type": "object", "properties": {}},
            },
        },
    ]


def parse_tool_call(payload: dict, known_area_ids) -> LlmResponse:
    """Map a chat-completions response payload onto an LlmResponse."""
    try:
        message = payload["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise MalformedResponse("payload has no choices[0].message") from None

    text = message.get("content") or None
    tool = None
    tool_calls = message.get("tool_calls") or []
    if tool_calls:
        try:
            fn = tool_calls[0]["function"]
            name = fn["name"]
            raw_args = fn.get("arguments") or "{}"
            args = json.loads(raw_args) if isinstance(raw_args, str) else raw_args
        except (KeyError, TypeError, json.JSONDecodeError):
            raise MalformedResponse("unparsable tool call") from None
        if name == GO_TO:
            dest = args.get("destination")
            if dest not in set(known_area_ids):
                raise UnknownArea(str(dest))
            tool = ToolCall(GO_TO, dest)
        elif name == END_TOUR:
            tool = ToolCall(END_TOUR)
        else:
            raise MalformedResponse(f"unknown tool {name!r}")

    if text is None and tool is None:
        raise MalformedResponse("neither text nor tool call present")
    return LlmResponse(utterance=text, tool_call=tool)


def serialize_tool_call(response: LlmResponse) -> dict:
    """Build the chat-completions payload a backend would have sent."""
    message: dict = {"role": "assistant", "content": response.utterance}
    if response.tool_call is not None:
        args = {}
        if response.tool_call.name == GO_TO:
            args["destination"] = response.tool_call.destination_area_id
        message["tool_calls"] = [{
            "id": "call_0",
            "type": "function",
            "function": {"name": response.tool_call.name,
                         "arguments": json.dumps(args)},
        }]
    return {"choices": [{"message": message}]}


# --- scripted backend -------------------------------------------------------

LABELS = ("answered", "out_of_scope", "comprehension_failure", "other")

DEFAULT_FALLBACK = "Could you repeat your question? I didn't understand"


@dataclass(frozen=True)
class ScriptRule:
    pattern: str  # literal or fnmatch wildcard, case-insensitive
    response: Optional[str] = None
    label: str = "other"
    latency_s: float = 0.5
    goto: Optional[str] = None  # fixed destination area id
    goto_from_text: bool = False  # infer destination from area names in the text
    end_tour: bool = False
    guard: Optional[Callable[[PromptBundle], bool]] = None


class ScriptedBackend:
    """Deterministic rule-table backend; first matching rule wins."""

    def __init__(self, rules: list[ScriptRule], museum: MuseumMap,
                 fallback: str = DEFAULT_FALLBACK, fallback_latency_s: float = 0.5):
        self.rules = list(rules)
        self.museum = museum
        self.fallback = fallback
        self.fallback_latency_s = fallback_latency_s

    def _last_visitor_text(self, bundle: PromptBundle) -> str:
        for msg in reversed(bundle.history):
            if msg.role == "visitor":
                return msg.text
        return ""

    def _infer_destination(self, text: str) -> Optional[str]:
        low = text.lower()
        for area in self.museum.areas:
            if area.name.lower() in low:
                return area.id
        return None

    def complete(self, bundle: PromptBundle, tools: list[dict]) -> LlmResponse:
        text = self._last_visitor_text(bundle)
        low = text.lower()
        for rule in self.rules:
            if not fnmatch.fnmatch(low, rule.pattern.lower()):
                continue
            if rule.guard is not None and not rule.guard(bundle):
                continue
            tool = None
            if rule.end_tour:
                tool = ToolCall(END_TOUR)
            elif rule.goto is not None:
                tool = ToolCall(GO_TO, rule.goto)
            elif rule.goto_from_text:
                dest = self._infer_destination(text)
                if dest is None:
                    return LlmResponse(
                        utterance="I'm not sure which area you mean. Could you "
                                  "name one of the areas of the exhibition?",
                        latency_s=rule.latency_s, label="other")
                tool = ToolCall(GO_TO, dest)
            return LlmResponse(utterance=rule.response, tool_call=tool,
                               latency_s=rule.latency_s, label=rule.label)
        return LlmResponse(utterance=self.fallback,
                           latency_s=self.fallback_latency_s,
                           label="comprehension_failure")


def load_script_rules(doc) -> tuple[list[ScriptRule], dict]:
    """Parse scripted-backend rules from a config dict (or JSON text).

    Returns (rules, options) where options may carry fallback overrides.
    """
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    rules = []
    for raw in doc.get("rules", []):
        rules.append(ScriptRule(
            pattern=raw["pattern"],
            response=raw.get("response"),
            label=raw.get("label", "other"),
            latency_s=float(raw.get("latency_s", 0.5)),
            goto=raw.get("goto"),
            goto_from_text=bool(raw.get("goto_from_text", False)),
            end_tour=bool(raw.get("end_tour", False)),
        ))
    options = {
        "fallback": doc.get("fallback", DEFAULT_FALLBACK),
        "fallback_latency_s": float(doc.get("fallback_latency_s", 0.5)),
    }
    return rules, options


# --- HTTP backend -----------------------------------------------------------

class HttpBackend:
    """Chat-completions client with the go_to/end_tour tool schema.

    Credentials come from an environment variable; failures surface as
    retriable backend errors.
    """

    def __init__(self, endpoint: str, model: str, timeout_s: float = 20.0,
                 api_key_env: str = "OPENAI_API_KEY",
                 client: Optional[httpx.Client] = None):
        self.endpoint = endpoint
        self.model = model
        self.timeout_s = timeout_s
        self.api_key_env = api_key_env
        self._client = client or httpx.Client(timeout=timeout_s)

    def _area_ids(self, bundle: PromptBundle, tools: list[dict]) -> list[str]:
        for tool in tools:
            fn = tool.get("function", {})
            if fn.get("name") == GO_TO:
                return fn["parameters"]["properties"]["destination"]["enum"]
        return []

    def complete(self, bundle: PromptBundle, tools: list[dict]) -> LlmResponse:
        headers = {}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        messages = [{"role": "system", "content": render_prompt(bundle)}]
        for msg in bundle.history:
            role = "user" if msg.role == "visitor" else "assistant"
            messages.append({"role": role, "content": msg.text})
        body = {"model": self.model, "messages": messages, "tools": tools}

        started = time.monotonic()
        try:
            resp = self._client.post(self.endpoint, json=body, headers=headers,
                                     timeout=self.timeout_s)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(str(exc)) from None
        except httpx.HTTPError as exc:
            raise NetworkError(str(exc)) from None
        latency = time.monotonic() - started

        if resp.status_code in (401, 403):
            raise AuthError(f"backend returned {resp.status_code}")
        if resp.status_code >= 400:
            raise NetworkError(f"backend returned {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError:
            raise MalformedResponse("response body is not JSON") from None

        parsed = parse_tool_call(payload, self._area_ids(bundle, tools))
        return LlmResponse(utterance=parsed.utterance, tool_call=parsed.tool_call,
                           latency_s=latency)
