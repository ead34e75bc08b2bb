"""Trial orchestration: one deterministic tick loop wiring the simulated
world, mapping, localization, the machine navigator, the distance heuristics,
the arbitration mux, and the memory store over the interaction bus; plus the
suite runner that sweeps subjects x modes x seeds into a CSV."""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import arbitration, assessment, heuristics, localization, mapping, navigation
from .arbitration import Mode, ModeAnnouncement, MuxConfig, TransitionCause
from .assessment import CognitiveProfile, Group, PriorityConfig, parse_kv_text
from .bus import Bus
from .driver import DriverSession, ScriptedDriver
from .heuristics import DistanceSample, GoalPose, TrendLabel
from .localization import MclConfig, PoseEstimate
from .memory import EpisodeKind, MemoryStore, ProceduralKey, ProceduralRecord, StateAction
from .navigation import GoalLethal, NavigatorConfig, NavigatorState, NoPath, Recovery
from .resources import reference_maze_path
from .world import (
    DT,
    CommandSource,
    GridWorld,
    Pose2D,
    ScanParams,
    VelocityCommand,
    advance,
    cast_scan,
    load_maze,
)

DEFAULT_GOAL_CELL = (33, 33)  # far corner of the reference maze
DEFAULT_TIME_LIMIT = 600.0
STALL_TICKS = 16  # blocked-but-commanded ticks before forcing a recovery spin


class RunMode(Enum):
    HUMAN = "HUMAN"
    MACHINE = "MACHINE"
    COLLABORATIVE = "COLLABORATIVE"


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class SubjectSpec:
    profile: CognitiveProfile
    driver: ScriptedDriver

    @property
    def subject_id(self) -> str:
        return self.profile.subject_id


def subject_to_text(subject: SubjectSpec) -> str:
    d = subject.driver
    return assessment.profile_to_text(subject.profile) + (
        f"attentiveness={d.attentiveness}\n"
        f"heading_noise_sigma={d.heading_noise_sigma}\n"
        f"pause_prob={d.pause_prob}\n"
        f"pause_min={d.pause_duration[0]}\n"
        f"pause_max={d.pause_duration[1]}\n"
        f"wrong_turn_prob={d.wrong_turn_prob}\n"
    )


def subject_from_text(text: str) -> SubjectSpec:
    profile = assessment.profile_from_text(text)
    kv = parse_kv_text(text)
    driver = ScriptedDriver(
        attentiveness=float(kv["attentiveness"]),
        heading_noise_sigma=float(kv["heading_noise_sigma"]),
        pause_prob=float(kv["pause_prob"]),
        pause_duration=(float(kv["pause_min"]), float(kv["pause_max"])),
        wrong_turn_prob=float(kv["wrong_turn_prob"]),
    )
    return SubjectSpec(profile, driver)


def load_subject(path: str | Path) -> SubjectSpec:
    return subject_from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class RunConfig:
    mode: RunMode
    subject: SubjectSpec
    seed: int
    maze_text: str | None = None          # None -> packaged reference maze
    goal_cell: tuple[int, int] = DEFAULT_GOAL_CELL
    time_limit: float = DEFAULT_TIME_LIMIT
    memory_log: str | None = None
    dt: float = DT
    scan_period: float = 0.2
    metric_period: float = 0.5
    state_action_period: float = 0.5      # 2 Hz decimation of the action log
    map_publish_period: float = 1.0
    n_particles: int = 500
    scatter_radius: float = 1.0           # launch uncertainty fed to the filter

    def resolved_maze_text(self) -> str:
        if self.maze_text is not None:
            return self.maze_text
        return reference_maze_path().read_text(encoding="utf-8")


@dataclass
class RunResult:
    manoeuvring_time: float
    timeout: bool
    takeover_count: int
    reclaim_count: int
    path_length: float
    distance_trace: list[DistanceSample]
    replan_count: int
    seed: int
    mode: RunMode
    subject_id: str


def _priority_for_mode(profile: CognitiveProfile, mode: RunMode) -> PriorityConfig:
    priority = assessment.make_priority_config(profile)
    if mode == RunMode.HUMAN:
        # standalone human: the machine stream is suppressed at the mux
        priority = replace(priority, takeover_trends=frozenset())
    return priority


class TrialSession:
    """One live run. run_trial drives it to completion; the bridge server
    drives it tick-by-tick with human commands injected from a client."""

    def __init__(self, config: RunConfig, goal_required: bool = True, scripted: bool = True):
        self.config = config
        self.world: GridWorld = load_maze(config.resolved_maze_text())
        gx, gy = config.goal_cell
        if goal_required:
            if not self.world.is_free(gx, gy):
                raise ConfigInvalid(f"goal cell {config.goal_cell} is not free in the maze")
        if config.time_limit <= 0:
            raise ConfigInvalid("time_limit must be positive")

        seeds = np.random.SeedSequence(config.seed).spawn(2)
        mcl_seed = int(seeds[0].generate_state(1)[0])
        driver_seed = int(seeds[1].generate_state(1)[0])

        self.bus = Bus()
        self.store = MemoryStore(backing=config.memory_log)
        self.scan_params = ScanParams()
        self.nav_cfg = NavigatorConfig()
        self.mcl_cfg = MclConfig(n_particles=config.n_particles)

        self.true_pose = self.world.start_pose
        self.grid_map = mapping.new_map_for_world(self.world)
        self.ternary = mapping.classify(self.grid_map)
        self.dist_field = localization.likelihood_field(self.ternary)
        self.particles = localization.init_scattered(
            mapping.ternary_of_world(self.world),
            config.n_particles,
            mcl_seed,
            center=self.world.start_pose,
            radius=config.scatter_radius,
        )
        self.est_pose = self.world.start_pose
        self._last_mcl_true = self.world.start_pose
        self.nav_state = NavigatorState(lookahead=self.nav_cfg.lookahead)
        self.driver: DriverSession | None = None
        if scripted and config.mode != RunMode.MACHINE:
            self.driver = DriverSession(config.subject.driver, driver_seed)

        priority = _priority_for_mode(config.subject.profile, config.mode)
        initial_mode = Mode.MACHINE if config.mode == RunMode.MACHINE else Mode.HUMAN
        self.mux_cfg = MuxConfig(priority=priority, initial_mode=initial_mode)
        self.mux_state = arbitration.initial_state(self.mux_cfg, start_time=0.0)

        self.goal: GoalPose | None = None
        self.trend = TrendLabel.NEUTRAL
        self.window: list[DistanceSample] = []
        self.distance_trace: list[DistanceSample] = []
        self.latest_scan = cast_scan(self.world, self.true_pose, self.scan_params, stamp=0.0)
        self.path_length = 0.0
        self.tick_index = 0
        self.t = 0.0
        self.done = False
        self.timeout = False
        self._stall_ticks = 0

        # integer tick cadences
        self.scan_every = max(1, round(config.scan_period / config.dt))
        self.metric_every = max(1, round(config.metric_period / config.dt))
        self.sa_every = max(1, round(config.state_action_period / config.dt))
        self.map_pub_every = max(1, round(config.map_publish_period / config.dt))
        self.replan_every = max(1, round(self.nav_cfg.replan_period / config.dt))

        # memory consumes its flows from the bus
        self._sub_state_action = self.bus.subscribe("/state_action")
        self._sub_goal = self.bus.subscribe("/goal")
        self._sub_pose = self.bus.subscribe("/pose_estimate")
        self._last_agent_pos_write = -math.inf

        self.store.put(
            ProceduralRecord(ProceduralKey.COGNITIVE_SCORE, 0.0, config.subject.profile)
        )
        self.bus.publish("/mode", ModeAnnouncement(initial_mode, TransitionCause.INIT, 0.0), 0.0)
        self.bus.publish("/map", self.ternary, 0.0)
        if goal_required:
            self.set_goal(config.goal_cell, stamp=0.0)

    # -- goal handling -------------------------------------------------------

    def set_goal(self, cell: tuple[int, int], stamp: float) -> GoalPose:
        gx, gy = cell
        cx, cy = self.world.cell_center(gx, gy)
        goal = GoalPose(Pose2D(cx, cy, 0.0), (gx, gy), stamp)
        self.goal = goal
        self.bus.publish("/goal", goal, stamp)
        self.store.record_episode(EpisodeKind.GOAL_SET, stamp, stamp)
        self.bus.publish("/episode", self.store.episodes[-1], stamp)
        self._replan(stamp)
        return goal

    # -- internal stages -----------------------------------------------------

    def _sense(self, now: float) -> None:
        self.latest_scan = cast_scan(self.world, self.true_pose, self.scan_params, stamp=now)
        self.bus.publish("/scan", self.latest_scan, now)
        mapping.integrate_scan(self.grid_map, self.true_pose, self.latest_scan)
        self.bus.publish(
            "/pose_truth",
            PoseEstimate(self.true_pose, np.zeros((3, 3)), now),
            now,
        )

    def _localize(self, delta: tuple[float, float, float], now: float) -> None:
        self.particles, est = localization.mcl_step(
            self.particles,
            delta,
            self.latest_scan,
            self.ternary,
            self.mcl_cfg,
            stamp=now,
            dist_field=self.dist_field,
        )
        self.est_pose = est.mean
        self.bus.publish("/pose_estimate", est, now)

    def _refresh_ternary(self, now: float, publish: bool) -> None:
        self.ternary = mapping.classify(self.grid_map)
        self.dist_field = localization.likelihood_field(self.ternary)
        if publish:
            self.bus.publish("/map", self.ternary, now)

    def _replan(self, now: float) -> None:
        if self.goal is None:
            return
        # pad by the half cell diagonal: lethality is judged between cell
        # centers, but the disc must clear the wall cell's whole rectangle
        pad = self.ternary.resolution * math.sqrt(2.0) / 2.0
        costmap = navigation.build_costmap(
            self.ternary,
            robot_radius=self.nav_cfg.robot_radius + pad,
            inflation_radius=self.nav_cfg.inflation_radius + pad,
            decay=self.nav_cfg.inflation_decay,
        )
        start = self._plannable_start(costmap, self.est_pose)
        try:
            plan = navigation.plan_global(costmap, start, self.goal.pose)
        except (NoPath, GoalLethal):
            return  # keep the previous plan; the next cadence retries
        self.nav_state.set_plan(plan, costmap)

    @staticmethod
    def _plannable_start(costmap, pose: Pose2D) -> Pose2D:
        """Nearest non-lethal cell center when the estimate sits in the
        inflated band (the platform itself is still collision-free there)."""
        ix, iy = costmap.world_to_cell(pose.x, pose.y)
        if costmap.in_bounds(ix, iy) and not costmap.is_lethal(ix, iy):
            return pose
        best = None
        best_d = math.inf
        for dy in range(-3, 4):
            for dx in range(-3, 4):
                nx, ny = ix + dx, iy + dy
                if costmap.in_bounds(nx, ny) and not costmap.is_lethal(nx, ny):
                    cx, cy = costmap.cell_center(nx, ny)
                    d = (cx - pose.x) ** 2 + (cy - pose.y) ** 2
                    if d < best_d:
                        best_d = d
                        best = Pose2D(cx, cy, pose.theta)
        return best if best is not None else pose

    def _machine_command(self, now: float) -> VelocityCommand:
        if self.nav_state.active_plan is None:
            return VelocityCommand(0.0, 0.0, CommandSource.MACHINE, now)
        return navigation.plan_local(
            self.nav_state, self.est_pose, self.latest_scan, self.nav_cfg, now
        )

    def _metric(self, now: float) -> None:
        if self.goal is None:
            return
        sample = heuristics.sample_distance(
            self.est_pose, self.goal, self.nav_state.active_plan, now
        )
        self.window.append(sample)
        horizon = now - self.mux_cfg.priority.trend_window - 1.0
        while self.window and self.window[0].t < horizon:
            self.window.pop(0)
        self.distance_trace.append(sample)
        self.trend = heuristics.classify_trend(self.window, self.mux_cfg.priority)
        self.bus.publish("/metric/distance", sample, now)
        self.bus.publish("/metric/trend", self.trend, now)

    def _record_transition(self, ann: ModeAnnouncement, now: float) -> None:
        kind = (
            EpisodeKind.TAKEOVER
            if ann.cause == TransitionCause.TAKEOVER
            else EpisodeKind.RECLAIM
        )
        start = max(0.0, now - self.mux_cfg.priority.trend_window)
        self.store.record_episode(kind, start, now)
        self.bus.publish("/episode", self.store.episodes[-1], now)

    def _drain_memory_subs(self, now: float) -> None:
        for env in self._sub_state_action.drain():
            self.store.put(ProceduralRecord(ProceduralKey.STATE_ACTION, env.stamp, env.payload))
        for env in self._sub_goal.drain():
            self.store.put(ProceduralRecord(ProceduralKey.GOAL, env.stamp, env.payload))
        pose_envs = self._sub_pose.drain()
        if pose_envs and now - self._last_agent_pos_write >= self.config.state_action_period:
            env = pose_envs[-1]
            self.store.put(
                ProceduralRecord(ProceduralKey.AGENT_POSITION, env.stamp, env.payload.mean)
            )
            self._last_agent_pos_write = now

    # -- public stepping -----------------------------------------------------

    def tick(self, external_human_cmd: VelocityCommand | None = None) -> bool:
        """Advance one dt. Returns True while the trial keeps running."""
        if self.done:
            return False
        cfg = self.config
        now = self.t
        k = self.tick_index

        if k % self.scan_every == 0:
            self._sense(now)
            delta = localization.odometry_delta(self._last_mcl_true, self.true_pose)
            self._localize(delta, now)
            self._last_mcl_true = self.true_pose
        if k % self.map_pub_every == 0:
            self._refresh_ternary(now, publish=True)
        if self.goal is not None and (
            k % self.replan_every == 0 or self.nav_state.needs_replan
        ):
            if k % self.map_pub_every != 0:
                self._refresh_ternary(now, publish=False)
            self._replan(now)

        machine_cmd = self._machine_command(now)
        self.bus.publish("/cmd_vel_machine", machine_cmd, now)

        human_cmd: VelocityCommand | None = None
        if cfg.mode == RunMode.MACHINE:
            human_cmd = None
        elif self.driver is not None and external_human_cmd is None:
            if self.nav_state.active_plan is not None:
                human_cmd = self.driver.step(self.est_pose, self.nav_state.active_plan, now)
        else:
            human_cmd = external_human_cmd
        if human_cmd is not None:
            self.bus.publish("/cmd_vel_human", human_cmd, now)

        if k % self.metric_every == 0:
            self._metric(now)

        self.mux_state, out_cmd, ann = arbitration.mux_step(
            self.mux_state, human_cmd, machine_cmd, self.trend, self.mux_cfg, now
        )
        out_cmd = out_cmd.clamped()
        self.bus.publish("/cmd_vel", out_cmd, now)
        if ann is not None:
            self.bus.publish("/mode", ann, now)
            self._record_transition(ann, now)
            if ann.cause == TransitionCause.TAKEOVER and self.driver is not None:
                self.driver.notice_takeover(now)

        prev = self.true_pose
        self.true_pose = advance(self.world, prev, out_cmd, cfg.dt)
        moved = math.hypot(self.true_pose.x - prev.x, self.true_pose.y - prev.y)
        self.path_length += moved
        # wall-contact deadlock: commanded forward motion with no displacement
        if (
            self.mux_state.mode == Mode.MACHINE
            and out_cmd.linear > 0.05
            and moved < 1e-6
        ):
            self._stall_ticks += 1
            if self._stall_ticks >= STALL_TICKS:
                self.nav_state.recovery = Recovery.ROTATE
                self.nav_state.recovery_hold_until = now + 0.9
                self._stall_ticks = 0
        else:
            self._stall_ticks = 0
        # dead-reckon the estimate between filter updates
        dx, dy, dth = localization.odometry_delta(prev, self.true_pose)
        c, s = math.cos(self.est_pose.theta), math.sin(self.est_pose.theta)
        self.est_pose = Pose2D(
            self.est_pose.x + c * dx - s * dy,
            self.est_pose.y + s * dx + c * dy,
            self.est_pose.theta + dth,
        )

        if k % self.sa_every == 0:
            self.bus.publish(
                "/state_action",
                StateAction(self.mux_state.mode, out_cmd, self.est_pose),
                now,
            )
        self._drain_memory_subs(now)

        self.tick_index += 1
        self.t = self.tick_index * cfg.dt

        if self.goal is not None:
            gd = math.hypot(
                self.true_pose.x - self.goal.pose.x, self.true_pose.y - self.goal.pose.y
            )
            if gd <= self.nav_cfg.goal_tolerance:
                self.done = True
                self.store.record_episode(
                    EpisodeKind.GOAL_REACHED,
                    max(0.0, self.t - self.mux_cfg.priority.trend_window),
                    self.t,
                )
                self.bus.publish("/episode", self.store.episodes[-1], self.t)
                return False
        if self.t >= cfg.time_limit:
            self.done = True
            self.timeout = True
            return False
        return True

    def result(self) -> RunResult:
        manoeuvring = min(self.t, self.config.time_limit)
        return RunResult(
            manoeuvring_time=manoeuvring,
            timeout=self.timeout,
            takeover_count=self.mux_state.takeover_count,
            reclaim_count=self.mux_state.reclaim_count,
            path_length=self.path_length,
            distance_trace=list(self.distance_trace),
            replan_count=self.nav_state.replan_count,
            seed=self.config.seed,
            mode=self.config.mode,
            subject_id=self.config.subject.subject_id,
        )


def run_trial(config: RunConfig) -> RunResult:
    session = TrialSession(config)
    while session.tick():
        pass
    session.store.close()
    return session.result()


# --- suites ------------------------------------------------------------------

CSV_COLUMNS = (
    "subject_id",
    "score",
    "group",
    "mode",
    "seed",
    "manoeuvring_time_s",
    "timeout",
    "takeover_count",
    "reclaim_count",
    "path_length_m",
)


def _trial_row(args: tuple[SubjectSpec, RunMode, int, str | None, tuple[int, int], float]) -> dict:
    subject, mode, seed, maze_text, goal_cell, time_limit = args
    result = run_trial(
        RunConfig(
            mode=mode,
            subject=subject,
            seed=seed,
            maze_text=maze_text,
            goal_cell=goal_cell,
            time_limit=time_limit,
        )
    )
    return {
        "subject_id": subject.subject_id,
        "score": subject.profile.score,
        "group": subject.profile.group.value,
        "mode": mode.value,
        "seed": seed,
        "manoeuvring_time_s": f"{result.manoeuvring_time:.3f}",
        "timeout": int(result.timeout),
        "takeover_count": result.takeover_count,
        "reclaim_count": result.reclaim_count,
        "path_length_m": f"{result.path_length:.3f}",
    }


def run_suite(
    subjects: list[SubjectSpec],
    modes: list[RunMode],
    seeds: list[int],
    maze_text: str | None = None,
    goal_cell: tuple[int, int] = DEFAULT_GOAL_CELL,
    time_limit: float = DEFAULT_TIME_LIMIT,
    out_path: str | Path | None = None,
    workers: int | None = None,
) -> str:
    """Cartesian sweep; rows ordered by (subject, mode, seed) regardless of
    completion order, then one median summary row per (subject, mode)."""
    if not subjects or not modes or not seeds:
        raise ConfigInvalid("subjects, modes and seeds must all be non-empty")
    jobs = [
        (subject, mode, seed, maze_text, goal_cell, time_limit)
        for subject in subjects
        for mode in modes
        for seed in seeds
    ]
    if workers is None or workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_trial_row, jobs, chunksize=1))
    else:
        rows = [_trial_row(j) for j in jobs]
    rows.sort(key=lambda r: (r["subject_id"], r["mode"], int(r["seed"])))

    summary = []
    for subject in sorted({s.subject_id for s in subjects}):
        for mode in sorted(m.value for m in modes):
            times = [
                float(r["manoeuvring_time_s"])
                for r in rows
                if r["subject_id"] == subject and r["mode"] == mode
            ]
            lengths = [
                float(r["path_length_m"])
                for r in rows
                if r["subject_id"] == subject and r["mode"] == mode
            ]
            match = next(r for r in rows if r["subject_id"] == subject and r["mode"] == mode)
            summary.append(
                {
                    "subject_id": subject,
                    "score": match["score"],
                    "group": match["group"],
                    "mode": mode,
                    "seed": "median",
                    "manoeuvring_time_s": f"{statistics.median(times):.3f}",
                    "timeout": "",
                    "takeover_count": "",
                    "reclaim_count": "",
                    "path_length_m": f"{statistics.median(lengths):.3f}",
                }
            )

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows + summary:
        writer.writerow(row)
    text = buf.getvalue()
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text
