"""Deterministic 2D maze world: unicycle kinematics, collision clamping,
simulated planar lidar, and the ASCII maze format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

FREE = 0
WALL = 1

# Platform defaults, powered-wheelchair scale. All overridable per run.
V_MAX = 1.0          # m/s
W_MAX = 1.5          # rad/s
DT = 0.05            # s per tick
ROBOT_RADIUS = 0.3   # m
RESOLUTION = 0.25    # m/cell


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


class CommandSource(Enum):
    HUMAN = "HUMAN"
    MACHINE = "MACHINE"


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class VelocityCommand:
    linear: float
    angular: float
    source: CommandSource
    stamp: float = 0.0

    def clamped(self, v_max: float = V_MAX, w_max: float = W_MAX) -> "VelocityCommand":
        return VelocityCommand(
            linear=min(v_max, max(-v_max, self.linear)),
            angular=min(w_max, max(-w_max, self.angular)),
            source=self.source,
            stamp=self.stamp,
        )


def zero_command(source: CommandSource, stamp: float = 0.0) -> VelocityCommand:
    return VelocityCommand(0.0, 0.0, source, stamp)


@dataclass(frozen=True)
class LaserScan:
    angle_min: float
    angle_max: float
    angle_increment: float
    range_max: float
    ranges: tuple[float, ...]
    stamp: float = 0.0

    @property
    def beam_count(self) -> int:
        return len(self.ranges)

    def beam_angle(self, k: int) -> float:
        """Angle of beam k relative to the robot heading."""
        return self.angle_min + k * self.angle_increment


@dataclass(frozen=True)
class ScanParams:
    """Planar range-finder geometry. Defaults model a 181-beam front scanner."""

    angle_min: float = -math.pi / 2.0
    angle_max: float = math.pi / 2.0
    angle_increment: float = math.pi / 180.0
    range_max: float = 8.0
    noise_sigma: float = 0.0  # Gaussian range noise, off by default

    @property
    def beam_count(self) -> int:
        return int(math.floor((self.angle_max - self.angle_min) / self.angle_increment)) + 1


@dataclass
class SimClock:
    t: float = 0.0
    dt: float = DT

    def tick(self) -> float:
        self.t += self.dt
        return self.t


class MazeFormatError(ValueError):
    """Maze text violates the ASCII format."""


class NonRectangular(MazeFormatError):
    pass


class NoStart(MazeFormatError):
    pass


class OpenBoundary(MazeFormatError):
    pass


@dataclass
class GridWorld:
    """Rectangular cell world. cells[iy, ix] with iy = 0 at the bottom row;
    world coordinates are meters with the origin at the world's lower-left corner."""

    width: int
    height: int
    resolution: float
    cells: np.ndarray
    start_pose: Pose2D
    robot_radius: float = ROBOT_RADIUS

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.resolution, (iy + 0.5) * self.resolution

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def is_free(self, ix: int, iy: int) -> bool:
        return self.in_bounds(ix, iy) and self.cells[iy, ix] == FREE


def load_maze(
    text: str,
    resolution: float = RESOLUTION,
    robot_radius: float = ROBOT_RADIUS,
) -> GridWorld:
    """Parse the ASCII maze format: '#' wall, '.' free, exactly one 'S' start,
    rectangular block with a fully walled boundary."""
    rows = text.splitlines()
    while rows and rows[-1] == "":
        rows.pop()
    if not rows:
        raise NonRectangular("maze text is empty")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise NonRectangular("rows have differing lengths")
    if width < 3 or len(rows) < 3:
        raise OpenBoundary("maze too small to have an interior")

    height = len(rows)
    cells = np.zeros((height, width), dtype=np.uint8)
    start: tuple[int, int] | None = None
    n_starts = 0
    for r, row in enumerate(rows):
        iy = height - 1 - r  # text top row is the top of the world
        for ix, ch in enumerate(row):
            if ch == "#":
                cells[iy, ix] = WALL
            elif ch == ".":
                cells[iy, ix] = FREE
            elif ch == "S":
                cells[iy, ix] = FREE
                start = (ix, iy)
                n_starts += 1
            else:
                raise MazeFormatError(f"invalid character {ch!r} at row {r}, col {ix}")
    if n_starts != 1 or start is None:
        raise NoStart(f"expected exactly one 'S' start marker, found {n_starts}")
    boundary_walled = (
        (cells[0, :] == WALL).all()
        and (cells[-1, :] == WALL).all()
        and (cells[:, 0] == WALL).all()
        and (cells[:, -1] == WALL).all()
    )
    if not boundary_walled:
        raise OpenBoundary("outer boundary must be all '#'")

    cx = (start[0] + 0.5) * resolution
    cy = (start[1] + 0.5) * resolution
    return GridWorld(
        width=width,
        height=height,
        resolution=resolution,
        cells=cells,
        start_pose=Pose2D(cx, cy, 0.0),
        robot_radius=robot_radius,
    )


def dump_maze(world: GridWorld) -> str:
    """Inverse of load_maze (start marker restored)."""
    six, siy = world.world_to_cell(world.start_pose.x, world.start_pose.y)
    lines = []
    for r in range(world.height):
        iy = world.height - 1 - r
        chars = []
        for ix in range(world.width):
            if (ix, iy) == (six, siy):
                chars.append("S")
            else:
                chars.append("#" if world.cells[iy, ix] == WALL else ".")
        lines.append("".join(chars))
    return "\n".join(lines) + "\n"


def step_kinematics(pose: Pose2D, cmd: VelocityCommand, dt: float) -> Pose2D:
    """Exact unicycle integration over one step: straight line for ~zero angular
    rate, otherwise a circular arc of radius linear/angular."""
    v, w = cmd.linear, cmd.angular
    if abs(w) < 1e-9:
        return Pose2D(
            pose.x + v * math.cos(pose.theta) * dt,
            pose.y + v * math.sin(pose.theta) * dt,
            pose.theta,
        )
    radius = v / w
    theta1 = pose.theta + w * dt
    return Pose2D(
        pose.x + radius * (math.sin(theta1) - math.sin(pose.theta)),
        pose.y - radius * (math.cos(theta1) - math.cos(pose.theta)),
        theta1,
    )


def disc_collides(world: GridWorld, x: float, y: float, radius: float) -> bool:
    """True when the disc at (x, y) overlaps a WALL cell or leaves the world."""
    res = world.resolution
    if x - radius < 0.0 or y - radius < 0.0:
        return True
    if x + radius > world.width * res or y + radius > world.height * res:
        return True
    ix0 = max(0, int(math.floor((x - radius) / res)))
    ix1 = min(world.width - 1, int(math.floor((x + radius) / res)))
    iy0 = max(0, int(math.floor((y - radius) / res)))
    iy1 = min(world.height - 1, int(math.floor((y + radius) / res)))
    sub = world.cells[iy0 : iy1 + 1, ix0 : ix1 + 1]
    if not (sub == WALL).any():
        return False
    iys, ixs = np.nonzero(sub == WALL)
    ixs = ixs + ix0
    iys = iys + iy0
    # squared distance from the disc center to each wall cell's rectangle
    nx = np.clip(x, ixs * res, (ixs + 1) * res)
    ny = np.clip(y, iys * res, (iys + 1) * res)
    d2 = (x - nx) ** 2 + (y - ny) ** 2
    return bool((d2 < radius * radius).any())


def advance(world: GridWorld, pose: Pose2D, cmd: VelocityCommand, dt: float) -> Pose2D:
    """Apply kinematics then clamp against walls: a translation whose swept disc
    would touch a WALL cell is rejected wholesale; rotation always goes through."""
    target = step_kinematics(pose, cmd, dt)
    dist = math.hypot(target.x - pose.x, target.y - pose.y)
    if dist > 0.0:
        n_samples = max(1, int(math.ceil(dist / (world.resolution * 0.25))))
        blocked = False
        for k in range(1, n_samples + 1):
            f = k / n_samples
            sx = pose.x + f * (target.x - pose.x)
            sy = pose.y + f * (target.y - pose.y)
            if disc_collides(world, sx, sy, world.robot_radius):
                blocked = True
                break
        if blocked:
            return Pose2D(pose.x, pose.y, target.theta)
    return target


def _raycast(
    cells: np.ndarray,
    resolution: float,
    ox: float,
    oy: float,
    angles: np.ndarray,
    range_max: float,
) -> np.ndarray:
    """Incremental grid traversal for a fan of rays from one origin. Returns the
    distance to the first WALL cell boundary per ray, range_max when nothing is hit."""
    height, width = cells.shape
    n = angles.shape[0]
    dx = np.cos(angles)
    dy = np.sin(angles)

    ix0 = int(math.floor(ox / resolution))
    iy0 = int(math.floor(oy / resolution))
    if not (0 <= ix0 < width and 0 <= iy0 < height):
        return np.full(n, 1e-9)
    if cells[iy0, ix0] == WALL:
        return np.full(n, 1e-9)

    step_x = np.where(dx > 0.0, 1, -1)
    step_y = np.where(dy > 0.0, 1, -1)
    with np.errstate(divide="ignore"):
        inv_dx = np.where(dx != 0.0, 1.0 / dx, np.inf)
        inv_dy = np.where(dy != 0.0, 1.0 / dy, np.inf)
    next_vx = np.where(dx > 0.0, (ix0 + 1) * resolution, ix0 * resolution)
    next_vy = np.where(dy > 0.0, (iy0 + 1) * resolution, iy0 * resolution)
    with np.errstate(invalid="ignore"):
        t_max_x = np.where(dx != 0.0, (next_vx - ox) * inv_dx, np.inf)
        t_max_y = np.where(dy != 0.0, (next_vy - oy) * inv_dy, np.inf)
    t_delta_x = np.abs(resolution * inv_dx)
    t_delta_y = np.abs(resolution * inv_dy)

    cur_ix = np.full(n, ix0, dtype=np.int64)
    cur_iy = np.full(n, iy0, dtype=np.int64)
    ranges = np.full(n, range_max)
    alive = np.ones(n, dtype=bool)

    for _ in range(width + height + 2):
        take_x = alive & (t_max_x <= t_max_y)
        take_y = alive & ~(t_max_x <= t_max_y)
        t_entry = np.where(take_x, t_max_x, t_max_y)
        cur_ix = np.where(take_x, cur_ix + step_x, cur_ix)
        cur_iy = np.where(take_y, cur_iy + step_y, cur_iy)

        over = alive & (t_entry >= range_max)
        alive &= ~over
        oob = alive & ((cur_ix < 0) | (cur_ix >= width) | (cur_iy < 0) | (cur_iy >= height))
        alive &= ~oob
        safe_ix = np.clip(cur_ix, 0, width - 1)
        safe_iy = np.clip(cur_iy, 0, height - 1)
        hit = alive & (cells[safe_iy, safe_ix] == WALL)
        ranges[hit] = t_entry[hit]
        alive &= ~hit
        if not alive.any():
            break
        t_max_x = np.where(take_x, t_max_x + t_delta_x, t_max_x)
        t_max_y = np.where(take_y, t_max_y + t_delta_y, t_max_y)

    return np.maximum(ranges, 1e-9)


def cast_scan(
    world: GridWorld,
    pose: Pose2D,
    params: ScanParams = ScanParams(),
    stamp: float = 0.0,
    rng: np.random.Generator | None = None,
) -> LaserScan:
    """Simulate one planar scan from pose. Beam k points at
    pose.theta + angle_min + k * angle_increment."""
    n = params.beam_count
    angles = pose.theta + params.angle_min + np.arange(n) * params.angle_increment
    ranges = _raycast(world.cells, world.resolution, pose.x, pose.y, angles, params.range_max)
    if params.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        ranges = np.clip(ranges + rng.normal(0.0, params.noise_sigma, n), 1e-9, params.range_max)
    return LaserScan(
        angle_min=params.angle_min,
        angle_max=params.angle_max,
        angle_increment=params.angle_increment,
        range_max=params.range_max,
        ranges=tuple(float(r) for r in ranges),
        stamp=stamp,
    )
