"""Procedural and episodic memory: latest-value keys plus an ordered
state-action log, event slices over it, and a replayable append-only backing
file (one JSON record per line under a schema-versioned header)."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, IO

from . import serde
from .assessment import CognitiveProfile
from .heuristics import GoalPose
from .world import CommandSource, Pose2D, VelocityCommand

log = logging.getLogger(__name__)

SCHEMA = "c3a-memory-log@1"


class ProceduralKey(Enum):
    COGNITIVE_SCORE = "COGNITIVE_SCORE"
    GOAL = "GOAL"
    AGENT_POSITION = "AGENT_POSITION"
    STATE_ACTION = "STATE_ACTION"


class EpisodeKind(Enum):
    TAKEOVER = "TAKEOVER"
    RECLAIM = "RECLAIM"
    GOAL_SET = "GOAL_SET"
    GOAL_REACHED = "GOAL_REACHED"


class StaleStamp(ValueError):
    pass


class KeyAbsent(KeyError):
    pass


class IoFailure(OSError):
    pass


@dataclass(frozen=True)
class StateAction:
    mode: CommandSource
    command: VelocityCommand
    pose: Pose2D


@dataclass(frozen=True)
class ProceduralRecord:
    key: ProceduralKey
    stamp: float
    payload: Any  # profile / GoalPose / Pose2D / StateAction, per key


@dataclass(frozen=True)
class EpisodicEvent:
    event_id: int
    kind: EpisodeKind
    t_start: float
    t_end: float
    trace: tuple[ProceduralRecord, ...]


def state_action_to_dict(sa: StateAction) -> dict[str, Any]:
    return {
        "mode": sa.mode.value,
        "command": serde.command_to_dict(sa.command),
        "pose": serde.pose_to_dict(sa.pose),
    }


def state_action_from_dict(d: dict[str, Any]) -> StateAction:
    return StateAction(
        CommandSource(d["mode"]),
        serde.command_from_dict(d["command"]),
        serde.pose_from_dict(d["pose"]),
    )


_PAYLOAD_CODECS = {
    ProceduralKey.COGNITIVE_SCORE: (serde.profile_to_dict, serde.profile_from_dict),
    ProceduralKey.GOAL: (serde.goal_to_dict, serde.goal_from_dict),
    ProceduralKey.AGENT_POSITION: (serde.pose_to_dict, serde.pose_from_dict),
    ProceduralKey.STATE_ACTION: (state_action_to_dict, state_action_from_dict),
}


def _record_to_dict(rec: ProceduralRecord) -> dict[str, Any]:
    enc, _ = _PAYLOAD_CODECS[rec.key]
    return {"rec": "procedural", "key": rec.key.value, "stamp": rec.stamp, "payload": enc(rec.payload)}


def _record_from_dict(d: dict[str, Any]) -> ProceduralRecord:
    key = ProceduralKey(d["key"])
    _, dec = _PAYLOAD_CODECS[key]
    return ProceduralRecord(key, float(d["stamp"]), dec(d["payload"]))


def episode_to_dict(ev: EpisodicEvent) -> dict[str, Any]:
    return {
        "rec": "episode",
        "event_id": ev.event_id,
        "kind": ev.kind.value,
        "t_start": ev.t_start,
        "t_end": ev.t_end,
        "trace": [_record_to_dict(r) for r in ev.trace],
    }


def episode_from_dict(d: dict[str, Any]) -> EpisodicEvent:
    return EpisodicEvent(
        event_id=int(d["event_id"]),
        kind=EpisodeKind(d["kind"]),
        t_start=float(d["t_start"]),
        t_end=float(d["t_end"]),
        trace=tuple(_record_from_dict(r) for r in d["trace"]),
    )


class MemoryStore:
    """Single-writer store. With a backing path every accepted write is
    appended as one JSON line; reopening the file reproduces the store."""

    def __init__(self, backing: str | Path | None = None):
        self.backing = Path(backing) if backing is not None else None
        self._latest: dict[ProceduralKey, ProceduralRecord] = {}
        self._state_actions: list[ProceduralRecord] = []
        self._episodes: list[EpisodicEvent] = []
        self._fh: IO[str] | None = None
        if self.backing is not None:
            try:
                fresh = not self.backing.exists() or self.backing.stat().st_size == 0
                self._fh = open(self.backing, "a", encoding="utf-8")
                if fresh:
                    self._fh.write(json.dumps({"schema": SCHEMA}) + "\n")
                    self._fh.flush()
            except OSError as exc:
                raise IoFailure(f"cannot open memory log {self.backing}: {exc}") from exc

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _append(self, obj: dict[str, Any]) -> None:
        if self._fh is None:
            return
        try:
            self._fh.write(json.dumps(obj, sort_keys=True) + "\n")
            self._fh.flush()
        except OSError as exc:
            raise IoFailure(f"cannot append to memory log {self.backing}: {exc}") from exc

    def put(self, record: ProceduralRecord) -> None:
        prev = self._latest.get(record.key)
        if prev is not None and record.stamp < prev.stamp:
            raise StaleStamp(
                f"{record.key.value}: stamp {record.stamp} older than {prev.stamp}"
            )
        if record.key == ProceduralKey.STATE_ACTION:
            self._state_actions.append(record)
        self._latest[record.key] = record
        self._append(_record_to_dict(record))

    def get(self, key: ProceduralKey) -> Any:
        """Latest payload for latest-value keys; the full ordered trace for
        STATE_ACTION."""
        if key == ProceduralKey.STATE_ACTION:
            if not self._state_actions:
                raise KeyAbsent(key.value)
            return list(self._state_actions)
        rec = self._latest.get(key)
        if rec is None:
            raise KeyAbsent(key.value)
        return rec.payload

    def record_episode(self, kind: EpisodeKind, t_start: float, t_end: float) -> EpisodicEvent:
        if t_start > t_end:
            raise ValueError(f"t_start {t_start} > t_end {t_end}")
        trace = tuple(r for r in self._state_actions if t_start <= r.stamp <= t_end)
        if not trace:
            log.warning("episode %s over [%s, %s] has no state-action records", kind.value, t_start, t_end)
        event = EpisodicEvent(len(self._episodes) + 1, kind, t_start, t_end, trace)
        self._episodes.append(event)
        self._append(episode_to_dict(event))
        return event

    def recall(self, kind: EpisodeKind) -> list[EpisodicEvent]:
        return [e for e in self._episodes if e.kind == kind]

    @property
    def episodes(self) -> list[EpisodicEvent]:
        return list(self._episodes)


def open_store(path: str | Path) -> MemoryStore:
    """Rebuild a store from its backing log, then keep appending to it."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read memory log {path}: {exc}") from exc
    if not lines:
        raise IoFailure(f"memory log {path} is empty")
    header = json.loads(lines[0])
    if header.get("schema") != SCHEMA:
        raise IoFailure(f"memory log {path} has unknown schema {header.get('schema')!r}")

    store = MemoryStore(backing=None)
    for line in lines[1:]:
        obj = json.loads(line)
        if obj.get("rec") == "procedural":
            store.put(_record_from_dict(obj))
        elif obj.get("rec") == "episode":
            ev = episode_from_dict(obj)
            store._episodes.append(ev)
        else:
            raise IoFailure(f"memory log {path}: unknown record {obj.get('rec')!r}")
    # resume appending to the same file
    store.backing = path
    store._fh = open(path, "a", encoding="utf-8")
    return store
