"""Velocity multiplexer and the two-state human/machine arbitration FSM:
need-based takeover from a paused human, unconditional reclaim on any human
input, coast while control stays with an idle human."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .assessment import PriorityConfig
from .heuristics import TrendLabel
from .world import CommandSource, VelocityCommand, zero_command

Mode = CommandSource  # the FSM modes are exactly the command sources


class TransitionCause(Enum):
    TAKEOVER = "TAKEOVER"
    RECLAIM = "RECLAIM"
    INIT = "INIT"


@dataclass(frozen=True)
class ModeAnnouncement:
    mode: Mode
    cause: TransitionCause
    stamp: float = 0.0


@dataclass(frozen=True)
class ArbitrationState:
    mode: Mode
    last_human_cmd_stamp: float
    takeover_count: int = 0
    reclaim_count: int = 0


@dataclass(frozen=True)
class MuxConfig:
    priority: PriorityConfig
    initial_mode: Mode = Mode.HUMAN


def initial_state(cfg: MuxConfig, start_time: float = 0.0) -> ArbitrationState:
    return ArbitrationState(mode=cfg.initial_mode, last_human_cmd_stamp=start_time)


def current_mode(state: ArbitrationState) -> Mode:
    return state.mode


def is_paused(state: ArbitrationState, cfg: MuxConfig, now: float) -> bool:
    return now - state.last_human_cmd_stamp >= cfg.priority.pause_timeout


def mux_step(
    state: ArbitrationState,
    human_cmd: VelocityCommand | None,
    machine_cmd: VelocityCommand,
    trend: TrendLabel,
    cfg: MuxConfig,
    now: float,
) -> tuple[ArbitrationState, VelocityCommand, ModeAnnouncement | None]:
    """One arbitration tick. Human input always wins instantly; a takeover
    needs a pause at least pause_timeout long plus a qualifying trend; a paused
    human who keeps control coasts (zero command). Total over all inputs."""
    announcement: ModeAnnouncement | None = None

    if human_cmd is not None:
        if state.mode == Mode.MACHINE:
            state = replace(
                state,
                mode=Mode.HUMAN,
                reclaim_count=state.reclaim_count + 1,
                last_human_cmd_stamp=now,
            )
            announcement = ModeAnnouncement(Mode.HUMAN, TransitionCause.RECLAIM, now)
        else:
            state = replace(state, last_human_cmd_stamp=now)
        out = replace(human_cmd, source=CommandSource.HUMAN, stamp=now)
        return state, out, announcement

    if state.mode == Mode.HUMAN:
        if is_paused(state, cfg, now) and trend in cfg.priority.takeover_trends:
            state = replace(state, mode=Mode.MACHINE, takeover_count=state.takeover_count + 1)
            announcement = ModeAnnouncement(Mode.MACHINE, TransitionCause.TAKEOVER, now)
            out = replace(machine_cmd, source=CommandSource.MACHINE, stamp=now)
            return state, out, announcement
        return state, zero_command(CommandSource.HUMAN, now), None

    out = replace(machine_cmd, source=CommandSource.MACHINE, stamp=now)
    return state, out, None
