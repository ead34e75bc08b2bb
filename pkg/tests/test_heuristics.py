import itertools
import math

import numpy as np
import pytest

from c3a.assessment import Group, PriorityConfig, build_profile, make_priority_config
from c3a.heuristics import (
    DistanceBasis,
    DistanceSample,
    GoalPose,
    NoGoal,
    TrendLabel,
    classify_trend,
    recommend,
    sample_distance,
)
from c3a.navigation import GlobalPlan
from c3a.world import CommandSource, Pose2D

LCS_CFG = make_priority_config(build_profile("lcs", (True,) * 2 + (False,) * 8))
HCS_CFG = make_priority_config(build_profile("hcs", (True,) * 9 + (False,) * 1))


def corridor_plan(length_m, res=0.25):
    n = int(length_m / res) + 1
    waypoints = [Pose2D((k + 0.5) * res, 0.5 * res, 0.0) for k in range(n)]
    return GlobalPlan(waypoints, [(k, 0) for k in range(n)], length_m)


class TestSampleDistance:
    def test_at_goal_zero(self):
        goal = GoalPose(Pose2D(1.0, 2.0, 0.0), (4, 8))
        s = sample_distance(Pose2D(1.0, 2.0, 0.5), goal, None, t=1.0)
        assert s.d == 0.0
        assert s.basis == DistanceBasis.EUCLIDEAN

    def test_path_basis_along_plan(self):
        plan = corridor_plan(3.0)
        goal = GoalPose(plan.waypoints[-1], plan.cells[-1])
        s = sample_distance(plan.waypoints[0], goal, plan, t=2.0)
        assert s.d == pytest.approx(3.0)
        assert s.basis == DistanceBasis.PATH

    def test_euclidean_fallback_345(self):
        goal = GoalPose(Pose2D(3.0, 4.0, 0.0), (12, 16))
        s = sample_distance(Pose2D(0.0, 0.0, 0.0), goal, None, t=0.0)
        assert s.d == pytest.approx(5.0)
        assert s.basis == DistanceBasis.EUCLIDEAN

    def test_no_goal(self):
        with pytest.raises(NoGoal):
            sample_distance(Pose2D(0, 0, 0), None, None, t=0.0)


class TestClassifyTrend:
    def _window(self, pairs):
        return [DistanceSample(t, d, DistanceBasis.PATH) for t, d in pairs]

    def test_improving(self):
        w = self._window([(0.0, 5.0), (1.5, 4.8), (3.0, 4.5)])
        assert classify_trend(w, HCS_CFG) == TrendLabel.IMPROVING

    def test_worsening(self):
        w = self._window([(0.0, 4.0), (1.5, 4.2), (3.0, 4.4)])
        assert classify_trend(w, HCS_CFG) == TrendLabel.WORSENING

    def test_neutral_within_deadband(self):
        w = self._window([(0.0, 4.0), (3.0, 4.03)])
        assert classify_trend(w, HCS_CFG) == TrendLabel.NEUTRAL

    def test_short_window_neutral(self):
        w = self._window([(0.0, 9.0), (1.0, 2.0)])
        assert classify_trend(w, HCS_CFG) == TrendLabel.NEUTRAL
        assert classify_trend([], HCS_CFG) == TrendLabel.NEUTRAL

    def test_uses_oldest_inside_window_only(self):
        # ancient sample outside the window must not dominate the comparison
        w = self._window([(0.0, 99.0), (2.0, 4.0), (5.0, 4.5)])
        assert classify_trend(w, HCS_CFG) == TrendLabel.WORSENING

    def test_translation_invariance(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            ts = np.cumsum(rng.uniform(0.4, 0.6, 8))
            ds = rng.uniform(1.0, 6.0, 8)
            shift = rng.uniform(-10, 10)
            w1 = self._window(list(zip(ts, ds)))
            w2 = self._window(list(zip(ts, ds + shift)))
            assert classify_trend(w1, LCS_CFG) == classify_trend(w2, LCS_CFG)


class TestRecommend:
    def test_paused_worsening_hands_to_machine(self):
        for cfg in (LCS_CFG, HCS_CFG):
            d = recommend(TrendLabel.WORSENING, cfg, CommandSource.HUMAN, human_paused=True)
            assert d.recommended == CommandSource.MACHINE

    def test_paused_improving_stays_human(self):
        for cfg in (LCS_CFG, HCS_CFG):
            d = recommend(TrendLabel.IMPROVING, cfg, CommandSource.HUMAN, human_paused=True)
            assert d.recommended == CommandSource.HUMAN

    def test_neutral_splits_by_group(self):
        d_h = recommend(TrendLabel.NEUTRAL, HCS_CFG, CommandSource.HUMAN, human_paused=True)
        d_l = recommend(TrendLabel.NEUTRAL, LCS_CFG, CommandSource.HUMAN, human_paused=True)
        assert d_h.recommended == CommandSource.HUMAN
        assert d_l.recommended == CommandSource.MACHINE

    def test_never_machine_while_human_active(self):
        for trend, cfg, mode in itertools.product(
            TrendLabel, (LCS_CFG, HCS_CFG), (CommandSource.HUMAN, CommandSource.MACHINE)
        ):
            d = recommend(trend, cfg, mode, human_paused=False)
            assert d.recommended == CommandSource.HUMAN

    def test_lcs_intervention_dominates_hcs(self):
        # machine under the strict policy implies machine under the lenient one
        for trend, mode, paused in itertools.product(
            TrendLabel, (CommandSource.HUMAN, CommandSource.MACHINE), (True, False)
        ):
            hcs = recommend(trend, HCS_CFG, mode, paused).recommended
            lcs = recommend(trend, LCS_CFG, mode, paused).recommended
            if hcs == CommandSource.MACHINE:
                assert lcs == CommandSource.MACHINE
