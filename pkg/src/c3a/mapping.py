"""Occupancy-grid mapping from range scans (known-pose) and the on-disk map
format: binary PGM raster plus a YAML metadata sidecar."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .world import FREE as WORLD_FREE
from .world import GridWorld, LaserScan, Pose2D, ScanParams, cast_scan

# Ternary cell classes
FREE = 0
OCCUPIED = 1
UNKNOWN = 2

# Inverse sensor model defaults
P_HIT = 0.7
P_FREE = 0.4
L_OCC = math.log(P_HIT / (1.0 - P_HIT))      # +0.8473
L_FREE = math.log(P_FREE / (1.0 - P_FREE))   # -0.4055
L_MAX = 10.0
L_THRESH = 0.85

# Raster byte values (negate=0 convention: dark is occupied)
RASTER_OCCUPIED = 0
RASTER_FREE = 254
RASTER_UNKNOWN = 205
OCCUPIED_THRESH = 0.65
FREE_THRESH = 0.196


class PoseOutsideMap(ValueError):
    pass


class IoFailure(OSError):
    pass


class MalformedHeader(ValueError):
    pass


class GeometryMismatch(ValueError):
    pass


@dataclass
class OccupancyGridMap:
    width: int
    height: int
    resolution: float
    origin: Pose2D
    logodds: np.ndarray  # float64, shape (height, width), indexed [iy, ix]

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((x - self.origin.x) / self.resolution)),
            int(math.floor((y - self.origin.y) / self.resolution)),
        )

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height


@dataclass
class TernaryGrid:
    width: int
    height: int
    resolution: float
    origin: Pose2D
    cells: np.ndarray  # int8, shape (height, width): FREE / OCCUPIED / UNKNOWN

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


def new_map_for_world(world: GridWorld) -> OccupancyGridMap:
    """Fresh (all-unknown) map with the observed world's geometry."""
    return OccupancyGridMap(
        width=world.width,
        height=world.height,
        resolution=world.resolution,
        origin=Pose2D(0.0, 0.0, 0.0),
        logodds=np.zeros((world.height, world.width)),
    )


def ternary_of_world(world: GridWorld) -> TernaryGrid:
    """Ground-truth ternary view of a simulated world (no UNKNOWN cells)."""
    cells = np.where(world.cells == WORLD_FREE, FREE, OCCUPIED).astype(np.int8)
    return TernaryGrid(world.width, world.height, world.resolution, Pose2D(0, 0, 0), cells)


def _traverse_counts(
    shape: tuple[int, int],
    resolution: float,
    ox: float,
    oy: float,
    angles: np.ndarray,
    limits: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Cell indices entered strictly before each beam's limit distance.
    The origin cell is included once per beam. Returns (ixs, iys) with repeats."""
    height, width = shape
    n = angles.shape[0]
    dx = np.cos(angles)
    dy = np.sin(angles)
    ix0 = int(math.floor(ox / resolution))
    iy0 = int(math.floor(oy / resolution))

    step_x = np.where(dx > 0.0, 1, -1)
    step_y = np.where(dy > 0.0, 1, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_dx = np.where(dx != 0.0, 1.0 / dx, np.inf)
        inv_dy = np.where(dy != 0.0, 1.0 / dy, np.inf)
        next_vx = np.where(dx > 0.0, (ix0 + 1) * resolution, ix0 * resolution)
        next_vy = np.where(dy > 0.0, (iy0 + 1) * resolution, iy0 * resolution)
        t_max_x = np.where(dx != 0.0, (next_vx - ox) * inv_dx, np.inf)
        t_max_y = np.where(dy != 0.0, (next_vy - oy) * inv_dy, np.inf)
    t_delta_x = np.abs(resolution * inv_dx)
    t_delta_y = np.abs(resolution * inv_dy)

    cur_ix = np.full(n, ix0, dtype=np.int64)
    cur_iy = np.full(n, iy0, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    out_ix = [cur_ix.copy()]
    out_iy = [cur_iy.copy()]

    for _ in range(width + height + 2):
        take_x = alive & (t_max_x <= t_max_y)
        take_y = alive & ~(t_max_x <= t_max_y)
        t_entry = np.where(take_x, t_max_x, t_max_y)
        cur_ix = np.where(take_x, cur_ix + step_x, cur_ix)
        cur_iy = np.where(take_y, cur_iy + step_y, cur_iy)
        alive &= t_entry < limits
        alive &= (cur_ix >= 0) & (cur_ix < width) & (cur_iy >= 0) & (cur_iy < height)
        if alive.any():
            out_ix.append(cur_ix[alive])
            out_iy.append(cur_iy[alive])
        else:
            break
        t_max_x = np.where(take_x, t_max_x + t_delta_x, t_max_x)
        t_max_y = np.where(take_y, t_max_y + t_delta_y, t_max_y)

    return np.concatenate(out_ix), np.concatenate(out_iy)


def integrate_scan(
    grid_map: OccupancyGridMap,
    pose: Pose2D,
    scan: LaserScan,
    l_occ: float = L_OCC,
    l_free: float = L_FREE,
    l_max: float = L_MAX,
) -> OccupancyGridMap:
    """Fold one scan taken from a known pose into the map. Per beam, traversed
    cells accumulate l_free, the struck cell accumulates l_occ; beams that saw
    nothing (range_max) only clear. Log-odds are clamped to +/- l_max."""
    ix, iy = grid_map.world_to_cell(pose.x, pose.y)
    if not grid_map.in_bounds(ix, iy):
        raise PoseOutsideMap(f"pose ({pose.x:.3f}, {pose.y:.3f}) outside map")

    n = scan.beam_count
    angles = pose.theta + scan.angle_min + np.arange(n) * scan.angle_increment
    ranges = np.asarray(scan.ranges)
    hit = ranges < scan.range_max - 1e-12
    # the struck cell is entered at exactly t = range; stop free-marking just short
    limits = np.where(hit, ranges - 1e-9, scan.range_max)

    ox = pose.x - grid_map.origin.x
    oy = pose.y - grid_map.origin.y
    fx, fy = _traverse_counts((grid_map.height, grid_map.width), grid_map.resolution, ox, oy, angles, limits)
    np.add.at(grid_map.logodds, (fy, fx), l_free)

    if hit.any():
        # nudge just past the boundary so the endpoint lands inside the struck cell
        hr = ranges[hit] + 1e-6
        hx = np.floor((ox + hr * np.cos(angles[hit])) / grid_map.resolution).astype(np.int64)
        hy = np.floor((oy + hr * np.sin(angles[hit])) / grid_map.resolution).astype(np.int64)
        ok = (hx >= 0) & (hx < grid_map.width) & (hy >= 0) & (hy < grid_map.height)
        np.add.at(grid_map.logodds, (hy[ok], hx[ok]), l_occ)

    np.clip(grid_map.logodds, -l_max, l_max, out=grid_map.logodds)
    return grid_map


def classify(grid_map: OccupancyGridMap, l_thresh: float = L_THRESH) -> TernaryGrid:
    """Threshold log-odds into FREE / OCCUPIED / UNKNOWN (strict inequalities)."""
    cells = np.full((grid_map.height, grid_map.width), UNKNOWN, dtype=np.int8)
    cells[grid_map.logodds > l_thresh] = OCCUPIED
    cells[grid_map.logodds < -l_thresh] = FREE
    return TernaryGrid(grid_map.width, grid_map.height, grid_map.resolution, grid_map.origin, cells)


def survey_world(
    world: GridWorld,
    params: ScanParams = ScanParams(),
    headings: tuple[float, ...] = (0.0, math.pi),
    stride: int = 1,
) -> OccupancyGridMap:
    """Known-pose coverage tour: scan from every free cell center (subsampled by
    stride) at each heading and integrate. Stand-in for an exploration run."""
    grid_map = new_map_for_world(world)
    free_iy, free_ix = np.nonzero(world.cells == WORLD_FREE)
    for k in range(0, free_ix.shape[0], stride):
        cx, cy = world.cell_center(int(free_ix[k]), int(free_iy[k]))
        for th in headings:
            scan = cast_scan(world, Pose2D(cx, cy, th), params)
            integrate_scan(grid_map, Pose2D(cx, cy, th), scan)
    return grid_map


# --- map files -------------------------------------------------------------


def _raster_from_ternary(grid: TernaryGrid) -> np.ndarray:
    values = np.full(grid.cells.shape, RASTER_UNKNOWN, dtype=np.uint8)
    values[grid.cells == FREE] = RASTER_FREE
    values[grid.cells == OCCUPIED] = RASTER_OCCUPIED
    return values


def save_map(grid: TernaryGrid, basename: str | Path) -> tuple[Path, Path]:
    """Write <basename>.pgm (P5 raster, top-left first) and <basename>.yaml."""
    if grid.cells.size == 0:
        raise GeometryMismatch("refusing to save an empty grid")
    base = Path(basename)
    pgm_path = base.with_name(base.name + ".pgm")
    yaml_path = base.with_name(base.name + ".yaml")
    raster = np.flipud(_raster_from_ternary(grid))  # row 0 of the file is the top
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    meta = (
        f"image: {pgm_path.name}\n"
        f"resolution: {grid.resolution}\n"
        f"origin: [{grid.origin.x}, {grid.origin.y}, {grid.origin.theta}]\n"
        "negate: 0\n"
        f"occupied_thresh: {OCCUPIED_THRESH}\n"
        f"free_thresh: {FREE_THRESH}\n"
    )
    try:
        pgm_path.write_bytes(header + raster.tobytes())
        yaml_path.write_text(meta, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write map files at {base}: {exc}") from exc
    return pgm_path, yaml_path


def _read_pgm(path: Path) -> np.ndarray:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    # header: magic, width, height, maxval as whitespace-separated tokens
    pos = 0
    tokens: list[bytes] = []
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedHeader(f"{path}: truncated header")
        tokens.append(blob[start:pos])
    if tokens[0] != b"P5":
        raise MalformedHeader(f"{path}: expected P5 magic, got {tokens[0]!r}")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise MalformedHeader(f"{path}: non-numeric header fields") from exc
    if maxval != 255:
        raise MalformedHeader(f"{path}: expected maxval 255, got {maxval}")
    if width <= 0 or height <= 0:
        raise GeometryMismatch(f"{path}: non-positive dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    raster = blob[pos:]
    if len(raster) != width * height:
        raise MalformedHeader(
            f"{path}: raster has {len(raster)} bytes, expected {width * height}"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def load_map(basename: str | Path) -> TernaryGrid:
    """Exact inverse of save_map for files it wrote; foreign rasters are
    classified by the sidecar's occupancy thresholds."""
    base = Path(basename)
    pgm_path = base.with_name(base.name + ".pgm")
    yaml_path = base.with_name(base.name + ".yaml")
    try:
        meta = yaml.safe_load(yaml_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {yaml_path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise MalformedHeader(f"{yaml_path}: invalid metadata: {exc}") from exc
    if not isinstance(meta, dict) or "resolution" not in meta or "origin" not in meta:
        raise MalformedHeader(f"{yaml_path}: missing resolution/origin keys")
    resolution = float(meta["resolution"])
    if resolution <= 0:
        raise GeometryMismatch(f"{yaml_path}: non-positive resolution {resolution}")
    origin_list = meta["origin"]
    if not isinstance(origin_list, (list, tuple)) or len(origin_list) != 3:
        raise MalformedHeader(f"{yaml_path}: origin must be [x, y, theta]")
    occupied_thresh = float(meta.get("occupied_thresh", OCCUPIED_THRESH))
    free_thresh = float(meta.get("free_thresh", FREE_THRESH))

    raster = np.flipud(_read_pgm(pgm_path))  # back to iy=0 at the bottom
    if bool(meta.get("negate", 0)):
        occ_prob = raster.astype(np.float64) / 255.0
    else:
        occ_prob = (255.0 - raster.astype(np.float64)) / 255.0
    cells = np.full(raster.shape, UNKNOWN, dtype=np.int8)
    cells[occ_prob > occupied_thresh] = OCCUPIED
    cells[occ_prob < free_thresh] = FREE
    height, width = raster.shape
    return TernaryGrid(
        width=width,
        height=height,
        resolution=resolution,
        origin=Pose2D(float(origin_list[0]), float(origin_list[1]), float(origin_list[2])),
        cells=cells,
    )
