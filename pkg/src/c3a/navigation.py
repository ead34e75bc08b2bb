"""Machine driver: inflated costmap, A* global planning over 8-connected cells,
pure-pursuit local control with a rotate-in-place recovery, and the
remaining-path-length service used by the distance metric."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage

from .mapping import OCCUPIED, UNKNOWN, TernaryGrid
from .world import (
    ROBOT_RADIUS,
    V_MAX,
    W_MAX,
    CommandSource,
    LaserScan,
    Pose2D,
    VelocityCommand,
    normalize_angle,
)

LETHAL = 255
UNKNOWN_COST = 128
INFLATION_DECAY = 10.0  # 1/m

SQRT2 = math.sqrt(2.0)


class NoPath(RuntimeError):
    pass


class GoalLethal(RuntimeError):
    pass


class NoPlan(RuntimeError):
    pass


class Recovery(Enum):
    NONE = "NONE"
    ROTATE = "ROTATE"


@dataclass
class NavigatorConfig:
    robot_radius: float = ROBOT_RADIUS
    inflation_radius: float = 2.0 * ROBOT_RADIUS
    inflation_decay: float = INFLATION_DECAY
    unknown_cost: int = UNKNOWN_COST
    lookahead: float = 0.6
    k_heading: float = 2.0
    v_max: float = V_MAX
    w_max: float = W_MAX
    w_recovery: float = 0.8
    margin: float = 0.05
    front_arc: float = math.radians(30.0)  # half-angle scanned for obstacles
    goal_tolerance: float = 0.3
    replan_period: float = 2.0


@dataclass
class Costmap:
    width: int
    height: int
    resolution: float
    origin: Pose2D
    cost: np.ndarray  # uint8, shape (height, width)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((x - self.origin.x) / self.resolution)),
            int(math.floor((y - self.origin.y) / self.resolution)),
        )

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin.x + (ix + 0.5) * self.resolution,
            self.origin.y + (iy + 0.5) * self.resolution,
        )

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def is_lethal(self, ix: int, iy: int) -> bool:
        return not self.in_bounds(ix, iy) or self.cost[iy, ix] == LETHAL


@dataclass
class GlobalPlan:
    waypoints: list[Pose2D]          # cell centers, start -> goal
    cells: list[tuple[int, int]]
    cost: float                      # cost-weighted path length, meters


@dataclass
class NavigatorState:
    active_plan: GlobalPlan | None = None
    lookahead: float = 0.6
    recovery: Recovery = Recovery.NONE
    replan_count: int = 0
    needs_replan: bool = False
    recovery_hold_until: float = 0.0  # rotate at least this long once triggered
    active_costmap: Costmap | None = None

    def set_plan(self, plan: GlobalPlan, costmap: Costmap | None = None) -> None:
        self.active_plan = plan
        if costmap is not None:
            self.active_costmap = costmap
        self.replan_count += 1
        self.needs_replan = False


def build_costmap(
    grid: TernaryGrid,
    robot_radius: float = ROBOT_RADIUS,
    inflation_radius: float = 2.0 * ROBOT_RADIUS,
    decay: float = INFLATION_DECAY,
    unknown_cost: int = UNKNOWN_COST,
) -> Costmap:
    """Lethal band within robot_radius of any OCCUPIED cell, exponential decay
    out to inflation_radius, flat unknown_cost floor on UNKNOWN cells."""
    if inflation_radius < robot_radius:
        raise ValueError("inflation_radius must be >= robot_radius")
    occupied = grid.cells == OCCUPIED
    if occupied.any():
        d = ndimage.distance_transform_edt(~occupied) * grid.resolution
    else:
        d = np.full(grid.cells.shape, np.inf)
    eps = 1e-9  # cell-count * resolution may land a hair above the band edges
    cost = np.zeros(grid.cells.shape, dtype=np.float64)
    band = (d > robot_radius + eps) & (d <= inflation_radius + eps)
    cost[band] = np.rint(253.0 * np.exp(-decay * (d[band] - robot_radius)))
    cost[d <= robot_radius + eps] = LETHAL
    unknown = (grid.cells == UNKNOWN) & (cost < unknown_cost)
    cost[unknown] = unknown_cost
    return Costmap(grid.width, grid.height, grid.resolution, grid.origin, cost.astype(np.uint8))


_NEIGHBORS = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
)


def _octile(a: tuple[int, int], b: tuple[int, int], resolution: float) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return resolution * (max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy))


def plan_global(costmap: Costmap, start: Pose2D, goal: Pose2D) -> GlobalPlan:
    """A* over the 8-connected grid. Edge weight is the step length scaled by
    (1 + cost/256); diagonal moves may not cut corners past lethal cells."""
    s = costmap.world_to_cell(start.x, start.y)
    g = costmap.world_to_cell(goal.x, goal.y)
    if not costmap.in_bounds(g[0], g[1]) or costmap.is_lethal(g[0], g[1]):
        raise GoalLethal(f"goal cell {g} is lethal or outside the map")
    if costmap.is_lethal(s[0], s[1]):
        raise NoPath(f"start cell {s} is lethal")
    if s == g:
        cx, cy = costmap.cell_center(*s)
        return GlobalPlan([Pose2D(cx, cy, 0.0)], [s], 0.0)

    res = costmap.resolution
    cost = costmap.cost
    dist: dict[tuple[int, int], float] = {s: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    open_heap: list[tuple[float, int, tuple[int, int]]] = [(_octile(s, g, res), 0, s)]
    closed: set[tuple[int, int]] = set()
    push_order = 0

    while open_heap:
        _, _, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        if cur == g:
            break
        closed.add(cur)
        cx, cy = cur
        base = dist[cur]
        for dx, dy, step in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not costmap.in_bounds(nx, ny) or cost[ny, nx] == LETHAL:
                continue
            if dx != 0 and dy != 0:
                # no corner cutting: both orthogonal cells must be passable
                if cost[cy, nx] == LETHAL or cost[ny, cx] == LETHAL:
                    continue
            cand = base + step * res * (1.0 + cost[ny, nx] / 256.0)
            key = (nx, ny)
            if cand < dist.get(key, math.inf):
                dist[key] = cand
                parent[key] = cur
                push_order += 1
                heapq.heappush(open_heap, (cand + _octile(key, g, res), push_order, key))
    if g not in dist:
        raise NoPath(f"no route from {s} to {g}")

    cells = [g]
    while cells[-1] != s:
        cells.append(parent[cells[-1]])
    cells.reverse()
    waypoints = [Pose2D(*costmap.cell_center(ix, iy), 0.0) for ix, iy in cells]
    return GlobalPlan(waypoints, cells, dist[g])


def remaining_path_length(plan: GlobalPlan | None, pose: Pose2D) -> float:
    """Distance to the nearest plan waypoint plus the tail of the plan after it."""
    if plan is None or not plan.waypoints:
        raise NoPlan("no active plan")
    best_k = 0
    best_d = math.inf
    for k, wp in enumerate(plan.waypoints):
        d = math.hypot(wp.x - pose.x, wp.y - pose.y)
        if d < best_d:
            best_d = d
            best_k = k
    tail = 0.0
    for k in range(best_k, len(plan.waypoints) - 1):
        a, b = plan.waypoints[k], plan.waypoints[k + 1]
        tail += math.hypot(b.x - a.x, b.y - a.y)
    return best_d + tail


def _front_arc_min(scan: LaserScan, half_angle: float) -> float:
    lo = -half_angle
    hi = half_angle
    best = scan.range_max
    for k, r in enumerate(scan.ranges):
        a = scan.beam_angle(k)
        if lo <= a <= hi and r < best:
            best = r
    return best


def _side_means(scan: LaserScan) -> tuple[float, float]:
    left = [r for k, r in enumerate(scan.ranges) if scan.beam_angle(k) > 0.0]
    right = [r for k, r in enumerate(scan.ranges) if scan.beam_angle(k) < 0.0]
    lm = sum(left) / len(left) if left else 0.0
    rm = sum(right) / len(right) if right else 0.0
    return lm, rm


def _segment_clear(costmap: Costmap, a: Pose2D, b: Pose2D) -> bool:
    dist = math.hypot(b.x - a.x, b.y - a.y)
    if dist < 1e-9:
        return True
    n = max(1, int(math.ceil(dist / (costmap.resolution * 0.5))))
    for k in range(1, n + 1):
        f = k / n
        ix, iy = costmap.world_to_cell(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
        if costmap.is_lethal(ix, iy):
            return False
    return True


def _lookahead_target(
    plan: GlobalPlan, pose: Pose2D, lookahead: float, costmap: Costmap | None = None
) -> Pose2D:
    best_k = 0
    best_d = math.inf
    for k, wp in enumerate(plan.waypoints):
        d = math.hypot(wp.x - pose.x, wp.y - pose.y)
        if d < best_d:
            best_d = d
            best_k = k
    visible: Pose2D | None = None
    for k in range(best_k, len(plan.waypoints)):
        wp = plan.waypoints[k]
        if costmap is not None and not _segment_clear(costmap, pose, wp):
            break  # a beeline to anything farther would clip the inflated band
        visible = wp
        if math.hypot(wp.x - pose.x, wp.y - pose.y) >= lookahead:
            return wp
    if visible is not None:
        return visible
    return plan.waypoints[min(best_k + 1, len(plan.waypoints) - 1)]


def plan_local(
    state: NavigatorState,
    pose: Pose2D,
    scan: LaserScan,
    cfg: NavigatorConfig = NavigatorConfig(),
    now: float = 0.0,
) -> VelocityCommand:
    """Pure pursuit toward the lookahead point; linear speed tapers near
    obstacles and drops to a rotate-in-place recovery when the front arc is
    blocked. Exiting recovery flags a replan request."""
    if state.active_plan is None or not state.active_plan.waypoints:
        raise NoPlan("local planner requires an active plan")

    blocked_at = cfg.robot_radius + cfg.margin
    slow_at = 2.0 * cfg.robot_radius + cfg.margin
    front = _front_arc_min(scan, cfg.front_arc)

    if state.recovery == Recovery.ROTATE:
        holding = now < state.recovery_hold_until
        if not holding and front >= blocked_at + cfg.margin:  # hysteresis on exit
            state.recovery = Recovery.NONE
            state.needs_replan = True
        else:
            lm, rm = _side_means(scan)
            w = cfg.w_recovery if lm >= rm else -cfg.w_recovery
            return VelocityCommand(0.0, w, CommandSource.MACHINE, now)
    if state.recovery == Recovery.NONE and front < blocked_at:
        state.recovery = Recovery.ROTATE
        lm, rm = _side_means(scan)
        w = cfg.w_recovery if lm >= rm else -cfg.w_recovery
        return VelocityCommand(0.0, w, CommandSource.MACHINE, now)

    target = _lookahead_target(
        state.active_plan, pose, state.lookahead or cfg.lookahead, state.active_costmap
    )
    heading_error = normalize_angle(math.atan2(target.y - pose.y, target.x - pose.x) - pose.theta)
    angular = max(-cfg.w_max, min(cfg.w_max, cfg.k_heading * heading_error))
    linear = cfg.v_max * max(0.0, math.cos(heading_error))
    if front < slow_at:
        linear *= max(0.0, (front - blocked_at) / (slow_at - blocked_at))
    return VelocityCommand(linear, angular, CommandSource.MACHINE, now)
