"""Pydantic models for the gateway wire protocol.

Messages travel as JSON over a persistent WebSocket, one message per frame,
snake_case fields. Every outbound message carries the session id and the
session's logical time.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel


class InboundMessage(BaseModel):
    type: Literal["approach", "consent", "utterance", "end_request"]
    yes: Optional[bool] = None
    text: Optional[str] = None


class OutboundBase(BaseModel):
    session_id: str
    logical_time: float


class RobotUtteranceMsg(OutboundBase):
    type: Literal["robot_utterance"] = "robot_utterance"
    text: str


class PoseUpdateMsg(OutboundBase):
    type: Literal["pose_update"] = "pose_update"
    x: float
    y: float
    heading: float


class PhaseChangeMsg(OutboundBase):
    type: Literal["phase_change"] = "phase_change"
    phase: str


class NotificationMsg(OutboundBase):
    type: Literal["notification"] = "notification"
    artwork_id: str
    text: str


class TourSummaryMsg(OutboundBase):
    type: Literal["tour_summary"] = "tour_summary"
    transcript: dict
