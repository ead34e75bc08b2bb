"""Driving-quality heuristics: the distance-to-goal performance metric, its
trend over a sliding window, and the smart-driver recommendation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Sequence

from .navigation import GlobalPlan, remaining_path_length
from .world import CommandSource, Pose2D

if TYPE_CHECKING:
    from .assessment import PriorityConfig

SAMPLE_PERIOD = 0.5  # s of sim time between distance samples


class TrendLabel(Enum):
    IMPROVING = "IMPROVING"
    WORSENING = "WORSENING"
    NEUTRAL = "NEUTRAL"


class DistanceBasis(Enum):
    PATH = "PATH"
    EUCLIDEAN = "EUCLIDEAN"


class NoGoal(RuntimeError):
    pass


@dataclass(frozen=True)
class GoalPose:
    pose: Pose2D
    cell: tuple[int, int]
    stamp: float = 0.0


@dataclass(frozen=True)
class DistanceSample:
    t: float
    d: float
    basis: DistanceBasis


@dataclass(frozen=True)
class SmartDriverDecision:
    recommended: CommandSource
    trend: TrendLabel
    stamp: float = 0.0


def sample_distance(
    pose_estimate: Pose2D,
    goal: GoalPose | None,
    plan: GlobalPlan | None,
    t: float,
) -> DistanceSample:
    """Distance from the agent to the shared goal: along the active plan when
    one exists, straight-line before the first plan is available."""
    if goal is None:
        raise NoGoal("no shared goal set")
    if plan is not None and plan.waypoints:
        return DistanceSample(t, remaining_path_length(plan, pose_estimate), DistanceBasis.PATH)
    d = math.hypot(goal.pose.x - pose_estimate.x, goal.pose.y - pose_estimate.y)
    return DistanceSample(t, d, DistanceBasis.EUCLIDEAN)


def classify_trend(window: Sequence[DistanceSample], config: "PriorityConfig") -> TrendLabel:
    """Endpoint comparison over the configured window with a deadband: the
    distance change between the newest sample and the oldest one still inside
    the window decides the label. Too little history is NEUTRAL."""
    if len(window) < 2:
        return TrendLabel.NEUTRAL
    newest = window[-1]
    if newest.t - window[0].t < config.trend_window:
        return TrendLabel.NEUTRAL
    cutoff = newest.t - config.trend_window
    oldest_in_window = next(s for s in window if s.t >= cutoff)
    delta = newest.d - oldest_in_window.d
    if delta > config.worsen_epsilon:
        return TrendLabel.WORSENING
    if delta < -config.worsen_epsilon:
        return TrendLabel.IMPROVING
    return TrendLabel.NEUTRAL


def recommend(
    trend: TrendLabel,
    config: "PriorityConfig",
    mode: CommandSource,
    human_paused: bool,
    stamp: float = 0.0,
) -> SmartDriverDecision:
    """Machine takes over only from a paused human whose trend qualifies under
    the priority policy; an active human always gets (or keeps) control."""
    if mode == CommandSource.HUMAN:
        if human_paused and trend in config.takeover_trends:
            return SmartDriverDecision(CommandSource.MACHINE, trend, stamp)
        return SmartDriverDecision(CommandSource.HUMAN, trend, stamp)
    if not human_paused:
        return SmartDriverDecision(CommandSource.HUMAN, trend, stamp)
    return SmartDriverDecision(CommandSource.MACHINE, trend, stamp)
