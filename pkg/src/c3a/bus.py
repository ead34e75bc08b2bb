"""In-process publish/subscribe backbone with a fixed topic roster, latched
topics, and the JSON text-frame codec used by the UI bridge."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Any

from . import serde
from .arbitration import ModeAnnouncement
from .heuristics import DistanceSample, GoalPose, TrendLabel
from .localization import PoseEstimate
from .mapping import TernaryGrid
from .memory import (
    EpisodicEvent,
    StateAction,
    episode_from_dict,
    episode_to_dict,
    state_action_from_dict,
    state_action_to_dict,
)
from .world import LaserScan, VelocityCommand


class UnknownTopic(KeyError):
    pass


class PayloadTypeMismatch(TypeError):
    pass


class MalformedFrame(ValueError):
    pass


@dataclass(frozen=True)
class TopicSpec:
    name: str
    payload_type: type
    latched: bool = False


TOPICS: dict[str, TopicSpec] = {
    spec.name: spec
    for spec in (
        TopicSpec("/cmd_vel_human", VelocityCommand),
        TopicSpec("/cmd_vel_machine", VelocityCommand),
        TopicSpec("/cmd_vel", VelocityCommand),
        TopicSpec("/scan", LaserScan),
        TopicSpec("/pose_truth", PoseEstimate),
        TopicSpec("/pose_estimate", PoseEstimate),
        TopicSpec("/map", TernaryGrid, latched=True),
        TopicSpec("/goal", GoalPose, latched=True),
        TopicSpec("/mode", ModeAnnouncement, latched=True),
        TopicSpec("/metric/distance", DistanceSample),
        TopicSpec("/metric/trend", TrendLabel),
        TopicSpec("/state_action", StateAction),
        TopicSpec("/episode", EpisodicEvent),
    )
}

# Topics a bridge client may send toward the server.
CLIENT_WRITABLE = ("/cmd_vel_human", "/goal")

# Architecture data flows and the roster topics that carry them.
FLOW_TOPICS: dict[str, tuple[str, ...]] = {
    "state_action": ("/state_action",),
    "map": ("/map",),
    "goal": ("/goal",),
    "smart_driver_metric": ("/metric/trend", "/metric/distance"),
    "episode": ("/episode",),
    "agent_position": ("/pose_estimate",),
}


@dataclass(frozen=True)
class Envelope:
    topic: str
    stamp: float
    seq: int
    payload: Any


class Subscription:
    def __init__(self, topic: str):
        self.topic = topic
        self._queue: deque[Envelope] = deque()

    def _push(self, env: Envelope) -> None:
        self._queue.append(env)

    def pop(self) -> Envelope | None:
        return self._queue.popleft() if self._queue else None

    def drain(self) -> list[Envelope]:
        out = list(self._queue)
        self._queue.clear()
        return out

    def __len__(self) -> int:
        return len(self._queue)


class Bus:
    """Synchronous same-tick delivery: publish appends the envelope to every
    current subscription immediately, in subscription order."""

    def __init__(self) -> None:
        self._seq: dict[str, int] = {name: 0 for name in TOPICS}
        self._subs: dict[str, list[Subscription]] = {name: [] for name in TOPICS}
        self._latched: dict[str, Envelope] = {}

    def publish(self, topic: str, payload: Any, stamp: float) -> Envelope:
        spec = TOPICS.get(topic)
        if spec is None:
            raise UnknownTopic(topic)
        if not isinstance(payload, spec.payload_type):
            raise PayloadTypeMismatch(
                f"{topic} carries {spec.payload_type.__name__}, got {type(payload).__name__}"
            )
        self._seq[topic] += 1
        env = Envelope(topic, stamp, self._seq[topic], payload)
        if spec.latched:
            self._latched[topic] = env
        for sub in self._subs[topic]:
            sub._push(env)
        return env

    def subscribe(self, topic: str) -> Subscription:
        if topic not in TOPICS:
            raise UnknownTopic(topic)
        sub = Subscription(topic)
        retained = self._latched.get(topic)
        if retained is not None:
            sub._push(retained)
        self._subs[topic].append(sub)
        return sub

    def latched(self, topic: str) -> Envelope | None:
        if topic not in TOPICS:
            raise UnknownTopic(topic)
        return self._latched.get(topic)


def _encode_payload(payload: Any) -> dict[str, Any]:
    if isinstance(payload, StateAction):
        return state_action_to_dict(payload)
    if isinstance(payload, EpisodicEvent):
        d = episode_to_dict(payload)
        d.pop("rec", None)
        return d
    return serde.encode_payload(payload)


def _decode_payload(cls: type, data: dict[str, Any]) -> Any:
    if cls is StateAction:
        return state_action_from_dict(data)
    if cls is EpisodicEvent:
        return episode_from_dict(data)
    return serde.decode_payload(cls, data)


def bridge_encode(env: Envelope) -> str:
    """Canonical one-line JSON frame: {topic, stamp, seq, data}."""
    if env.topic not in TOPICS:
        raise UnknownTopic(env.topic)
    frame = {
        "topic": env.topic,
        "stamp": env.stamp,
        "seq": env.seq,
        "data": _encode_payload(env.payload),
    }
    return json.dumps(frame, sort_keys=True, separators=(",", ":"))


def bridge_decode(frame: str) -> Envelope:
    try:
        obj = json.loads(frame)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedFrame("frame must be a JSON object")
    for key in ("topic", "stamp", "seq", "data"):
        if key not in obj:
            raise MalformedFrame(f"frame missing {key!r}")
    topic = obj["topic"]
    spec = TOPICS.get(topic)
    if spec is None:
        raise UnknownTopic(str(topic))
    try:
        payload = _decode_payload(spec.payload_type, obj["data"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFrame(f"bad payload for {topic}: {exc}") from exc
    try:
        stamp = float(obj["stamp"])
        seq = int(obj["seq"])
    except (TypeError, ValueError) as exc:
        raise MalformedFrame(f"bad stamp/seq: {exc}") from exc
    return Envelope(topic, stamp, seq, payload)
