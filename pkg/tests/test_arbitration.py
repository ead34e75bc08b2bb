import itertools

import numpy as np
import pytest

from c3a.arbitration import (
    ArbitrationState,
    Mode,
    ModeAnnouncement,
    MuxConfig,
    TransitionCause,
    current_mode,
    initial_state,
    mux_step,
)
from c3a.assessment import Group, build_profile, make_priority_config
from c3a.heuristics import TrendLabel
from c3a.world import CommandSource, VelocityCommand

LCS_PRIORITY = make_priority_config(build_profile("lcs", (True,) * 2 + (False,) * 8))
HCS_PRIORITY = make_priority_config(build_profile("hcs", (True,) * 9 + (False,) * 1))

HUMAN_CMD = VelocityCommand(0.4, 0.1, CommandSource.HUMAN)
MACHINE_CMD = VelocityCommand(0.7, -0.2, CommandSource.MACHINE)


def expected_transition(mode, trend, paused, cmd_present, priority):
    """Normative FSM, written out independently of the implementation:
    any human input reclaims instantly; takeover needs pause + qualifying
    trend; a paused human who keeps control coasts."""
    if cmd_present:
        return Mode.HUMAN, "human"
    if mode == Mode.HUMAN:
        if paused and trend in priority.takeover_trends:
            return Mode.MACHINE, "machine"
        return Mode.HUMAN, "zero"
    return Mode.MACHINE, "machine"


class TestFsmExhaustive:
    def test_all_input_combinations_match_normative_table(self):
        mismatches = []
        for mode, trend, paused, cmd_present, priority in itertools.product(
            (Mode.HUMAN, Mode.MACHINE),
            TrendLabel,
            (True, False),
            (True, False),
            (LCS_PRIORITY, HCS_PRIORITY),
        ):
            cfg = MuxConfig(priority=priority, initial_mode=mode)
            now = 100.0
            # realize paused/active away from the exact float boundary
            last = now - priority.pause_timeout * (1.5 if paused else 0.5)
            state = ArbitrationState(mode=mode, last_human_cmd_stamp=last)
            human = HUMAN_CMD if cmd_present else None
            new_state, out, _ = mux_step(state, human, MACHINE_CMD, trend, cfg, now)
            want_mode, want_out = expected_transition(mode, trend, paused, cmd_present, priority)
            got_out = (
                "human"
                if cmd_present and (out.linear, out.angular) == (HUMAN_CMD.linear, HUMAN_CMD.angular)
                else "machine"
                if (out.linear, out.angular) == (MACHINE_CMD.linear, MACHINE_CMD.angular)
                else "zero"
                if (out.linear, out.angular) == (0.0, 0.0)
                else "?"
            )
            if new_state.mode != want_mode or got_out != want_out:
                mismatches.append((mode, trend, paused, cmd_present, priority.group))
        assert mismatches == []


class TestScenarios:
    def test_takeover_on_pause_and_worsening(self):
        cfg = MuxConfig(priority=HCS_PRIORITY)
        state = initial_state(cfg)
        now = cfg.priority.pause_timeout + 0.1
        state, out, ann = mux_step(state, None, MACHINE_CMD, TrendLabel.WORSENING, cfg, now)
        assert state.mode == Mode.MACHINE
        assert (out.linear, out.angular) == (MACHINE_CMD.linear, MACHINE_CMD.angular)
        assert out.source == CommandSource.MACHINE
        assert state.takeover_count == 1
        assert ann == ModeAnnouncement(Mode.MACHINE, TransitionCause.TAKEOVER, now)

    def test_no_takeover_while_improving(self):
        cfg = MuxConfig(priority=HCS_PRIORITY)
        state = initial_state(cfg)
        now = cfg.priority.pause_timeout + 5.0
        state, out, ann = mux_step(state, None, MACHINE_CMD, TrendLabel.IMPROVING, cfg, now)
        assert state.mode == Mode.HUMAN
        assert (out.linear, out.angular) == (0.0, 0.0)
        assert out.source == CommandSource.HUMAN
        assert ann is None

    def test_reclaim_is_unconditional(self):
        cfg = MuxConfig(priority=HCS_PRIORITY, initial_mode=Mode.MACHINE)
        state = initial_state(cfg)
        state, out, ann = mux_step(state, HUMAN_CMD, MACHINE_CMD, TrendLabel.WORSENING, cfg, 3.0)
        assert state.mode == Mode.HUMAN
        assert (out.linear, out.angular) == (HUMAN_CMD.linear, HUMAN_CMD.angular)
        assert state.reclaim_count == 1
        assert ann == ModeAnnouncement(Mode.HUMAN, TransitionCause.RECLAIM, 3.0)

    def test_pause_shorter_than_timeout_keeps_human(self):
        cfg = MuxConfig(priority=HCS_PRIORITY)
        state = initial_state(cfg)
        now = cfg.priority.pause_timeout / 2
        state, out, _ = mux_step(state, None, MACHINE_CMD, TrendLabel.WORSENING, cfg, now)
        assert state.mode == Mode.HUMAN
        assert (out.linear, out.angular) == (0.0, 0.0)


class TestCurrentMode:
    def test_initial_modes(self):
        assert current_mode(initial_state(MuxConfig(priority=LCS_PRIORITY))) == Mode.HUMAN
        assert (
            current_mode(initial_state(MuxConfig(priority=LCS_PRIORITY, initial_mode=Mode.MACHINE)))
            == Mode.MACHINE
        )

    def test_after_transitions(self):
        cfg = MuxConfig(priority=LCS_PRIORITY)
        state = initial_state(cfg)
        state, _, _ = mux_step(state, None, MACHINE_CMD, TrendLabel.WORSENING, cfg, 10.0)
        assert current_mode(state) == Mode.MACHINE
        state, _, _ = mux_step(state, HUMAN_CMD, MACHINE_CMD, TrendLabel.WORSENING, cfg, 10.1)
        assert current_mode(state) == Mode.HUMAN


class TestProperties:
    def test_reclaim_safety_randomized(self):
        rng = np.random.default_rng(2024)
        for priority in (LCS_PRIORITY, HCS_PRIORITY):
            cfg = MuxConfig(priority=priority)
            state = initial_state(cfg)
            now = 0.0
            for _ in range(2000):
                now += float(rng.uniform(0.01, 0.5))
                trend = list(TrendLabel)[rng.integers(0, 3)]
                human = (
                    VelocityCommand(float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), CommandSource.HUMAN)
                    if rng.uniform() < 0.4
                    else None
                )
                machine = VelocityCommand(
                    float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), CommandSource.MACHINE
                )
                state, out, _ = mux_step(state, human, machine, trend, cfg, now)
                if human is not None:
                    assert state.mode == Mode.HUMAN
                    assert (out.linear, out.angular) == (human.linear, human.angular)
                assert out.source == state.mode  # source reflects post-transition mode

    def test_counters_monotone(self):
        rng = np.random.default_rng(7)
        cfg = MuxConfig(priority=LCS_PRIORITY)
        state = initial_state(cfg)
        now, prev_t, prev_r = 0.0, 0, 0
        for _ in range(500):
            now += float(rng.uniform(0.01, 1.0))
            human = HUMAN_CMD if rng.uniform() < 0.3 else None
            trend = list(TrendLabel)[rng.integers(0, 3)]
            state, _, _ = mux_step(state, human, MACHINE_CMD, trend, cfg, now)
            assert state.takeover_count >= prev_t
            assert state.reclaim_count >= prev_r
            prev_t, prev_r = state.takeover_count, state.reclaim_count

    def test_machine_standalone_always_machine(self):
        cfg = MuxConfig(priority=HCS_PRIORITY, initial_mode=Mode.MACHINE)
        state = initial_state(cfg)
        now = 0.0
        for _ in range(200):
            now += 0.05
            state, out, _ = mux_step(state, None, MACHINE_CMD, TrendLabel.NEUTRAL, cfg, now)
            assert state.mode == Mode.MACHINE
            assert (out.linear, out.angular) == (MACHINE_CMD.linear, MACHINE_CMD.angular)
        assert state.reclaim_count == 0

    def test_human_standalone_never_machine_output(self):
        # machine stream suppressed: the priority never lets a takeover fire
        suppressed = LCS_PRIORITY.__class__(
            group=LCS_PRIORITY.group,
            pause_timeout=LCS_PRIORITY.pause_timeout,
            trend_window=LCS_PRIORITY.trend_window,
            worsen_epsilon=LCS_PRIORITY.worsen_epsilon,
            takeover_trends=frozenset(),
        )
        cfg = MuxConfig(priority=suppressed)
        state = initial_state(cfg)
        rng = np.random.default_rng(11)
        now = 0.0
        for _ in range(500):
            now += float(rng.uniform(0.01, 1.0))
            human = HUMAN_CMD if rng.uniform() < 0.3 else None
            trend = list(TrendLabel)[rng.integers(0, 3)]
            state, out, _ = mux_step(state, human, MACHINE_CMD, trend, cfg, now)
            assert state.mode == Mode.HUMAN
            assert (out.linear, out.angular) in {(HUMAN_CMD.linear, HUMAN_CMD.angular), (0.0, 0.0)}
        assert state.takeover_count == 0
