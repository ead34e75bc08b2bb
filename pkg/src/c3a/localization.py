"""Monte-Carlo localization: particle filter over a ternary grid map with a
likelihood-field measurement model and low-variance resampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .mapping import FREE, OCCUPIED, TernaryGrid
from .world import LaserScan, Pose2D, normalize_angle


@dataclass
class MclConfig:
    n_particles: int = 500
    sigma_trans: float = 0.02   # m of position noise per step
    sigma_rot: float = 0.01     # rad of heading noise per step
    sigma_hit: float = 0.2      # likelihood-field width, m
    z_hit: float = 0.95
    z_rand: float = 0.05
    beam_stride: int = 10       # weight every k-th beam
    resample_ess_fraction: float = 0.5  # resample when ESS < fraction * N
    out_of_map_distance: float = 1.0    # field value for endpoints off the map


@dataclass
class ParticleSet:
    poses: np.ndarray     # (N, 3): x, y, theta
    weights: np.ndarray   # (N,), non-negative, sums to 1
    rng: np.random.Generator
    rng_seed: int
    rescatter_count: int = 0  # bumped whenever all weights collapsed to zero

    @property
    def count(self) -> int:
        return self.poses.shape[0]


@dataclass(frozen=True)
class PoseEstimate:
    mean: Pose2D
    covariance: np.ndarray  # 3x3, theta row/col uses wrapped residuals
    stamp: float = 0.0


def _free_cells(grid: TernaryGrid) -> tuple[np.ndarray, np.ndarray]:
    iy, ix = np.nonzero(grid.cells == FREE)
    if ix.size == 0:
        raise ValueError("map has no FREE cells to scatter over")
    return ix, iy


def init_scattered(
    grid: TernaryGrid,
    n_particles: int,
    seed: int,
    center: Pose2D | None = None,
    radius: float | None = None,
) -> ParticleSet:
    """Uniform scatter over FREE cells with uniform random headings. With a
    center and radius the scatter is confined to that disc, modelling launch
    uncertainty around a known start (global relocalization is out of scope)."""
    rng = np.random.default_rng(seed)
    ix, iy = _free_cells(grid)
    if center is not None and radius is not None:
        res = grid.resolution
        cx = grid.origin.x + (ix + 0.5) * res
        cy = grid.origin.y + (iy + 0.5) * res
        keep = (cx - center.x) ** 2 + (cy - center.y) ** 2 <= radius * radius
        if keep.any():
            ix, iy = ix[keep], iy[keep]
    pick = rng.integers(0, ix.size, size=n_particles)
    res = grid.resolution
    xs = grid.origin.x + (ix[pick] + rng.uniform(0, 1, n_particles)) * res
    ys = grid.origin.y + (iy[pick] + rng.uniform(0, 1, n_particles)) * res
    thetas = rng.uniform(-math.pi, math.pi, n_particles)
    poses = np.column_stack([xs, ys, thetas])
    weights = np.full(n_particles, 1.0 / n_particles)
    return ParticleSet(poses, weights, rng, seed)


def init_at(pose: Pose2D, n_particles: int, seed: int, spread: float = 0.0) -> ParticleSet:
    rng = np.random.default_rng(seed)
    poses = np.tile([pose.x, pose.y, pose.theta], (n_particles, 1))
    if spread > 0.0:
        poses[:, 0] += rng.normal(0, spread, n_particles)
        poses[:, 1] += rng.normal(0, spread, n_particles)
        poses[:, 2] += rng.normal(0, spread, n_particles)
    weights = np.full(n_particles, 1.0 / n_particles)
    return ParticleSet(poses, weights, rng, seed)


def likelihood_field(grid: TernaryGrid) -> np.ndarray:
    """Distance (m) from each cell center to the nearest OCCUPIED cell."""
    occupied = grid.cells == OCCUPIED
    if not occupied.any():
        diag = math.hypot(grid.width, grid.height) * grid.resolution
        return np.full(grid.cells.shape, diag)
    return ndimage.distance_transform_edt(~occupied) * grid.resolution


def odometry_delta(prev: Pose2D, cur: Pose2D) -> tuple[float, float, float]:
    """Pose increment expressed in the previous body frame (dx fwd, dy left, dtheta)."""
    wx, wy = cur.x - prev.x, cur.y - prev.y
    c, s = math.cos(prev.theta), math.sin(prev.theta)
    return (c * wx + s * wy, -s * wx + c * wy, normalize_angle(cur.theta - prev.theta))


def _motion_update(pset: ParticleSet, delta: tuple[float, float, float], cfg: MclConfig) -> None:
    dx, dy, dth = delta
    n = pset.count
    if cfg.sigma_trans > 0.0:
        dxs = dx + pset.rng.normal(0, cfg.sigma_trans, n)
        dys = dy + pset.rng.normal(0, cfg.sigma_trans, n)
    else:
        dxs = np.full(n, dx)
        dys = np.full(n, dy)
    if cfg.sigma_rot > 0.0:
        dths = dth + pset.rng.normal(0, cfg.sigma_rot, n)
    else:
        dths = np.full(n, dth)
    c = np.cos(pset.poses[:, 2])
    s = np.sin(pset.poses[:, 2])
    pset.poses[:, 0] += c * dxs - s * dys
    pset.poses[:, 1] += s * dxs + c * dys
    pset.poses[:, 2] = np.arctan2(np.sin(pset.poses[:, 2] + dths), np.cos(pset.poses[:, 2] + dths))


def _beam_log_likelihood(
    pset: ParticleSet, scan: LaserScan, grid: TernaryGrid, dist_field: np.ndarray, cfg: MclConfig
) -> np.ndarray:
    idx = np.arange(0, scan.beam_count, cfg.beam_stride)
    ranges = np.asarray(scan.ranges)[idx]
    beam_angles = scan.angle_min + idx * scan.angle_increment
    use = ranges < scan.range_max - 1e-9
    if not use.any():
        return np.zeros(pset.count)
    ranges = ranges[use]
    beam_angles = beam_angles[use]

    ang = pset.poses[:, 2][:, None] + beam_angles[None, :]
    ex = pset.poses[:, 0][:, None] + ranges[None, :] * np.cos(ang)
    ey = pset.poses[:, 1][:, None] + ranges[None, :] * np.sin(ang)
    ix = np.floor((ex - grid.origin.x) / grid.resolution).astype(np.int64)
    iy = np.floor((ey - grid.origin.y) / grid.resolution).astype(np.int64)
    inside = (ix >= 0) & (ix < grid.width) & (iy >= 0) & (iy < grid.height)
    d = np.full(ix.shape, cfg.out_of_map_distance)
    d[inside] = dist_field[iy[inside], ix[inside]]
    p = cfg.z_hit * np.exp(-(d * d) / (2.0 * cfg.sigma_hit * cfg.sigma_hit)) + cfg.z_rand
    with np.errstate(divide="ignore"):  # log(0) -> -inf is the intended score
        return np.sum(np.log(p), axis=1)


def _low_variance_resample(pset: ParticleSet) -> None:
    n = pset.count
    positions = (pset.rng.uniform(0, 1) + np.arange(n)) / n
    cumulative = np.cumsum(pset.weights)
    cumulative[-1] = 1.0
    idx = np.searchsorted(cumulative, positions)
    pset.poses = pset.poses[idx].copy()
    pset.weights = np.full(n, 1.0 / n)


def _estimate(pset: ParticleSet, stamp: float) -> PoseEstimate:
    w = pset.weights
    mx = float(np.dot(w, pset.poses[:, 0]))
    my = float(np.dot(w, pset.poses[:, 1]))
    # circular mean avoids wrap-around bias in the heading
    sin_m = float(np.dot(w, np.sin(pset.poses[:, 2])))
    cos_m = float(np.dot(w, np.cos(pset.poses[:, 2])))
    mth = math.atan2(sin_m, cos_m)
    dx = pset.poses[:, 0] - mx
    dy = pset.poses[:, 1] - my
    dth = np.arctan2(np.sin(pset.poses[:, 2] - mth), np.cos(pset.poses[:, 2] - mth))
    dev = np.column_stack([dx, dy, dth])
    cov = (w[:, None] * dev).T @ dev
    return PoseEstimate(Pose2D(mx, my, mth), cov, stamp)


def _rescatter(pset: ParticleSet, grid: TernaryGrid) -> None:
    ix, iy = _free_cells(grid)
    n = pset.count
    pick = pset.rng.integers(0, ix.size, size=n)
    res = grid.resolution
    pset.poses[:, 0] = grid.origin.x + (ix[pick] + pset.rng.uniform(0, 1, n)) * res
    pset.poses[:, 1] = grid.origin.y + (iy[pick] + pset.rng.uniform(0, 1, n)) * res
    pset.poses[:, 2] = pset.rng.uniform(-math.pi, math.pi, n)
    pset.weights = np.full(n, 1.0 / n)
    pset.rescatter_count += 1


def mcl_step(
    pset: ParticleSet,
    odom_delta: tuple[float, float, float],
    scan: LaserScan,
    grid: TernaryGrid,
    cfg: MclConfig = MclConfig(),
    stamp: float = 0.0,
    dist_field: np.ndarray | None = None,
) -> tuple[ParticleSet, PoseEstimate]:
    """One predict-weight-resample cycle. A total weight collapse (map/scan
    mismatch) re-scatters the particles uniformly over FREE space instead of
    failing; the rescatter_count field records it."""
    if pset.count < 1:
        raise ValueError("particle set is empty")
    if dist_field is None:
        dist_field = likelihood_field(grid)

    _motion_update(pset, odom_delta, cfg)
    log_l = _beam_log_likelihood(pset, scan, grid, dist_field, cfg)
    peak = float(log_l.max())
    if math.isfinite(peak):
        w = pset.weights * np.exp(log_l - peak)  # shift guards against underflow
        total = float(w.sum())
    else:
        total = 0.0  # every particle scored impossible
    if total <= 0.0 or not math.isfinite(total):
        _rescatter(pset, grid)
    else:
        pset.weights = w / total
        ess = 1.0 / float(np.dot(pset.weights, pset.weights))
        if ess < cfg.resample_ess_fraction * pset.count:
            _low_variance_resample(pset)
    return pset, _estimate(pset, stamp)
