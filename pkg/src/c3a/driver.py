"""Parametric scripted drivers standing in for human subjects: imperfect
route following with heading noise, spontaneous pauses, and bounded
wrong-corridor excursions, all scaled by attentiveness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .navigation import GlobalPlan, NoPlan, _lookahead_target
from .world import CommandSource, Pose2D, V_MAX, VelocityCommand, W_MAX, normalize_angle

WRONG_TURN_SPAN = (1.0, 3.0)  # s a wrong-corridor excursion lasts


@dataclass(frozen=True)
class ScriptedDriver:
    attentiveness: float                  # 1.0 = flawless route following
    heading_noise_sigma: float = 0.0      # rad
    pause_prob: float = 0.0               # per-tick, before attentiveness scaling
    pause_duration: tuple[float, float] = (0.5, 1.5)
    wrong_turn_prob: float = 0.0          # per-tick, before attentiveness scaling
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("attentiveness", "pause_prob", "wrong_turn_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


CONFUSION_PAUSE_PROB = 0.8   # hesitation right after a wrong excursion
DEFER_BASE = 0.4             # s a driver watches the machine after a takeover


class DriverSession:
    """Runtime state for one trial: deterministic given (driver, seed)."""

    def __init__(self, driver: ScriptedDriver, seed: int | None = None):
        self.driver = driver
        self.rng = np.random.default_rng(driver.rng_seed if seed is None else seed)
        self.pause_until = -math.inf
        self.wrong_until = -math.inf
        self.wrong_offset = 0.0
        self._wrong_active = False

    @property
    def _error_scale(self) -> float:
        return 1.0 - self.driver.attentiveness

    def notice_takeover(self, now: float) -> None:
        """The driver sees the machine correcting course and defers briefly;
        inattentive drivers defer longer before reclaiming."""
        defer = DEFER_BASE + 1.6 * self._error_scale
        self.pause_until = max(self.pause_until, now + defer)

    def step(self, pose_estimate: Pose2D, plan: GlobalPlan | None, now: float) -> VelocityCommand | None:
        """One keyboard-rate decision: None models the driver's hands off the
        keys; otherwise a steering command toward the next route point."""
        if plan is None or not plan.waypoints:
            raise NoPlan("scripted driver needs the route the subject is following")
        d = self.driver
        if now < self.pause_until:
            return None
        scale = self._error_scale
        if self._wrong_active and now >= self.wrong_until:
            # excursion over: the driver realizes they are lost and hesitates
            self._wrong_active = False
            if self.rng.uniform() < CONFUSION_PAUSE_PROB:
                lo, hi = d.pause_duration
                self.pause_until = now + 1.2 * float(self.rng.uniform(lo, hi))
                return None
        if d.pause_prob * scale > 0.0 and self.rng.uniform() < d.pause_prob * scale:
            lo, hi = d.pause_duration
            self.pause_until = now + float(self.rng.uniform(lo, hi))
            return None
        if now >= self.wrong_until and d.wrong_turn_prob * scale > 0.0:
            if self.rng.uniform() < d.wrong_turn_prob * scale:
                self.wrong_until = now + float(self.rng.uniform(*WRONG_TURN_SPAN))
                self.wrong_offset = float(self.rng.choice([-1.0, 1.0])) * float(
                    self.rng.uniform(math.pi / 2, math.pi)
                )
                self._wrong_active = True

        target = _lookahead_target(plan, pose_estimate, 0.6)
        heading_error = normalize_angle(
            math.atan2(target.y - pose_estimate.y, target.x - pose_estimate.x)
            - pose_estimate.theta
        )
        if now < self.wrong_until:
            heading_error = normalize_angle(heading_error + self.wrong_offset)
        if d.heading_noise_sigma > 0.0:
            heading_error = normalize_angle(
                heading_error + float(self.rng.normal(0.0, d.heading_noise_sigma))
            )
        angular = max(-W_MAX, min(W_MAX, 2.0 * heading_error))
        linear = V_MAX * max(0.0, math.cos(heading_error))
        return VelocityCommand(linear, angular, CommandSource.HUMAN, now)


def scripted_driver_step(
    session: DriverSession, pose_estimate: Pose2D, plan: GlobalPlan | None, now: float
) -> VelocityCommand | None:
    return session.step(pose_estimate, plan, now)
