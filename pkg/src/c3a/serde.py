"""Canonical dict codecs for the domain types that cross process boundaries
(bridge frames, memory log lines). Encode/decode pairs are exact inverses."""

from __future__ import annotations

from typing import Any

import numpy as np

from .arbitration import ModeAnnouncement, TransitionCause
from .assessment import CognitiveProfile, Group, build_profile
from .heuristics import DistanceBasis, DistanceSample, GoalPose, TrendLabel
from .localization import PoseEstimate
from .mapping import TernaryGrid
from .world import CommandSource, LaserScan, Pose2D, VelocityCommand


def pose_to_dict(p: Pose2D) -> dict[str, Any]:
    return {"x": p.x, "y": p.y, "theta": p.theta}


def pose_from_dict(d: dict[str, Any]) -> Pose2D:
    return Pose2D(float(d["x"]), float(d["y"]), float(d["theta"]))


def command_to_dict(c: VelocityCommand) -> dict[str, Any]:
    return {"linear": c.linear, "angular": c.angular, "source": c.source.value, "stamp": c.stamp}


def command_from_dict(d: dict[str, Any]) -> VelocityCommand:
    return VelocityCommand(
        float(d["linear"]), float(d["angular"]), CommandSource(d["source"]), float(d["stamp"])
    )


def scan_to_dict(s: LaserScan) -> dict[str, Any]:
    return {
        "angle_min": s.angle_min,
        "angle_max": s.angle_max,
        "angle_increment": s.angle_increment,
        "range_max": s.range_max,
        "ranges": list(s.ranges),
        "stamp": s.stamp,
    }


def scan_from_dict(d: dict[str, Any]) -> LaserScan:
    return LaserScan(
        angle_min=float(d["angle_min"]),
        angle_max=float(d["angle_max"]),
        angle_increment=float(d["angle_increment"]),
        range_max=float(d["range_max"]),
        ranges=tuple(float(r) for r in d["ranges"]),
        stamp=float(d["stamp"]),
    )


def grid_to_dict(g: TernaryGrid) -> dict[str, Any]:
    # rows indexed bottom-up, one digit per cell (0 free, 1 occupied, 2 unknown)
    rows = ["".join(str(int(v)) for v in g.cells[iy]) for iy in range(g.height)]
    return {
        "width": g.width,
        "height": g.height,
        "resolution": g.resolution,
        "origin": pose_to_dict(g.origin),
        "rows": rows,
    }


def grid_from_dict(d: dict[str, Any]) -> TernaryGrid:
    rows = d["rows"]
    cells = np.array([[int(ch) for ch in row] for row in rows], dtype=np.int8)
    return TernaryGrid(
        width=int(d["width"]),
        height=int(d["height"]),
        resolution=float(d["resolution"]),
        origin=pose_from_dict(d["origin"]),
        cells=cells,
    )


def estimate_to_dict(e: PoseEstimate) -> dict[str, Any]:
    return {
        "mean": pose_to_dict(e.mean),
        "covariance": [[float(v) for v in row] for row in e.covariance],
        "stamp": e.stamp,
    }


def estimate_from_dict(d: dict[str, Any]) -> PoseEstimate:
    return PoseEstimate(
        mean=pose_from_dict(d["mean"]),
        covariance=np.array(d["covariance"], dtype=np.float64),
        stamp=float(d["stamp"]),
    )


def goal_to_dict(g: GoalPose) -> dict[str, Any]:
    return {"pose": pose_to_dict(g.pose), "cell": [g.cell[0], g.cell[1]], "stamp": g.stamp}


def goal_from_dict(d: dict[str, Any]) -> GoalPose:
    return GoalPose(
        pose=pose_from_dict(d["pose"]),
        cell=(int(d["cell"][0]), int(d["cell"][1])),
        stamp=float(d["stamp"]),
    )


def trend_to_dict(t: TrendLabel) -> dict[str, Any]:
    return {"value": t.value}


def trend_from_dict(d: dict[str, Any]) -> TrendLabel:
    return TrendLabel(d["value"])


def sample_to_dict(s: DistanceSample) -> dict[str, Any]:
    return {"t": s.t, "d": s.d, "basis": s.basis.value}


def sample_from_dict(d: dict[str, Any]) -> DistanceSample:
    return DistanceSample(float(d["t"]), float(d["d"]), DistanceBasis(d["basis"]))


def announcement_to_dict(a: ModeAnnouncement) -> dict[str, Any]:
    return {"mode": a.mode.value, "cause": a.cause.value, "stamp": a.stamp}


def announcement_from_dict(d: dict[str, Any]) -> ModeAnnouncement:
    return ModeAnnouncement(
        CommandSource(d["mode"]), TransitionCause(d["cause"]), float(d["stamp"])
    )


def profile_to_dict(p: CognitiveProfile) -> dict[str, Any]:
    return {
        "subject_id": p.subject_id,
        "answers": [bool(a) for a in p.answers],
        "score": p.score,
        "group": p.group.value,
    }


def profile_from_dict(d: dict[str, Any]) -> CognitiveProfile:
    profile = build_profile(str(d["subject_id"]), tuple(bool(a) for a in d["answers"]))
    if profile.score != int(d["score"]) or profile.group != Group(d["group"]):
        raise ValueError("profile fields disagree with the stored answers")
    return profile


ENCODERS = {
    Pose2D: pose_to_dict,
    VelocityCommand: command_to_dict,
    LaserScan: scan_to_dict,
    TernaryGrid: grid_to_dict,
    PoseEstimate: estimate_to_dict,
    GoalPose: goal_to_dict,
    TrendLabel: trend_to_dict,
    DistanceSample: sample_to_dict,
    ModeAnnouncement: announcement_to_dict,
    CognitiveProfile: profile_to_dict,
}

DECODERS = {
    Pose2D: pose_from_dict,
    VelocityCommand: command_from_dict,
    LaserScan: scan_from_dict,
    TernaryGrid: grid_from_dict,
    PoseEstimate: estimate_from_dict,
    GoalPose: goal_from_dict,
    TrendLabel: trend_from_dict,
    DistanceSample: sample_from_dict,
    ModeAnnouncement: announcement_from_dict,
    CognitiveProfile: profile_from_dict,
}


def encode_payload(payload: Any) -> dict[str, Any]:
    enc = ENCODERS.get(type(payload))
    if enc is None:
        raise TypeError(f"no codec for payload type {type(payload).__name__}")
    return enc(payload)


def decode_payload(cls: type, data: dict[str, Any]) -> Any:
    dec = DECODERS.get(cls)
    if dec is None:
        raise TypeError(f"no codec for payload type {cls.__name__}")
    return dec(data)
