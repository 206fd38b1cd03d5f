"""Stationary location density of random-waypoint nodes and expectations over it.

A node's long-run location density mixes three parts: the initial placement
(weight ``p_static``), a uniform pause part (pauses happen at uniformly drawn
waypoints) and the movement density of the RWP process on the unit square.
Point-mass initial placements are kept as atoms so that expectations never
integrate a delta function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from .errors import DomainError, QuadratureError

# expected distance between two uniform points of the unit square, rounded
MEAN_TRAJECTORY = 0.52
# exact value, (2 + sqrt(2) + 5 asinh(1)) / 15
MEAN_TRAJECTORY_EXACT = (2 + math.sqrt(2) + 5 * math.asinh(1)) / 15

DEFAULT_GRID = 24
MASS_TOL = 5e-3


@dataclass(frozen=True)
class MobilityProfile:
    p_static: float = 1.0
    velocity: float = 1.0
    expected_pause: float = 0.0
    init: tuple[float, float] | None = None  # None means uniform over the region

    def __post_init__(self):
        if not 0 <= self.p_static <= 1:
            raise DomainError(f"p_static must lie in [0, 1], got {self.p_static}")
        if self.p_static < 1 and not self.velocity > 0:
            raise DomainError("a node that may move needs velocity > 0")
        if self.expected_pause < 0:
            raise DomainError("expected pause must be >= 0")
        if self.init is not None:
            x, y = self.init
            if not (0 <= x <= 1 and 0 <= y <= 1):
                raise DomainError(f"initial location {self.init} lies outside [0,1]^2")
            object.__setattr__(self, "init", (float(x), float(y)))

    @classmethod
    def static(cls, x: float, y: float) -> "MobilityProfile":
        return cls(p_static=1.0, init=(x, y))

    def pinned(self) -> "MobilityProfile":
        """The same node assumed static at its initial place (region centre if uniform)."""
        return MobilityProfile(p_static=1.0, init=self.init if self.init is not None else (0.5, 0.5))


def pause_probability(profile: MobilityProfile) -> float:
    pause = profile.expected_pause
    if pause == 0:
        return 0.0
    return pause / (pause + MEAN_TRAJECTORY / profile.velocity)


def _core(x, y):
    # closed-form movement density on 0 < y <= x <= 1/2; unchecked, vectorised
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = 1 - 2 * x + 2 * x * x
        rational = 0.75 * a * (y / (y - 1) + y * y / ((x - 1) * x))
        logs = 1.5 * y * ((2 * x - 1) * (y + 1) * np.log((1 - x) / x) + (a + y) * np.log((1 - y) / y))
        f = 6 * y + rational + logs
    return np.where(np.isfinite(f), f, 0.0)


def rwp_core_density(x: float, y: float) -> float:
    if not (0 < x <= 0.5 and 0 < y <= x):
        raise DomainError(f"({x}, {y}) lies outside 0 < y <= x <= 1/2")
    return float(_core(np.float64(x), np.float64(y)))


def rwp_mobility_density(x, y):
    """Movement density anywhere in the square, folded onto the fundamental triangle.

    Reflecting into [0, 1/2]^2 and sorting the coordinates selects the same
    argument as the eight-case table. Zero outside the open unit square.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x > 0) & (x < 1) & (y > 0) & (y < 1)
    u = np.minimum(x, 1 - x)
    v = np.minimum(y, 1 - y)
    hi = np.maximum(u, v)
    lo = np.minimum(u, v)
    safe_hi = np.where(inside, hi, 0.5)
    safe_lo = np.where(inside, lo, 0.25)
    out = np.where(inside, _core(safe_hi, safe_lo), 0.0)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# mixture components and their quadrature supports
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    x: float
    y: float

    def support(self, grid):
        return np.array([[self.x, self.y]]), np.ones(1)


@dataclass(frozen=True)
class Uniform:
    def support(self, grid):
        return _uniform_support(grid)


@dataclass(frozen=True)
class RwpMovement:
    def support(self, grid):
        return _rwp_support(grid)


UNIFORM = Uniform()
RWP = RwpMovement()


def midpoints(grid: int) -> np.ndarray:
    return (np.arange(grid) + 0.5) / grid


@lru_cache(maxsize=16)
def _uniform_support(grid):
    m = midpoints(grid)
    xx, yy = np.meshgrid(m, m, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts, np.full(grid * grid, 1.0 / (grid * grid))


@lru_cache(maxsize=16)
def _rwp_support(grid, tol=MASS_TOL):
    pts, _ = _uniform_support(grid)
    w = rwp_mobility_density(pts[:, 0], pts[:, 1]) / (grid * grid)
    mass = w.sum()
    if abs(mass - 1.0) > tol:
        raise QuadratureError(f"movement density integrates to {mass:.5f} on a {grid}x{grid} grid")
    return pts, w / mass


@dataclass(frozen=True)
class LocationDensity:
    """Stationary location density of one node, as weighted mixture components."""

    profile: MobilityProfile

    @cached_property
    def p_pause(self) -> float:
        return pause_probability(self.profile) if self.profile.p_static < 1 else 0.0

    @cached_property
    def components(self) -> tuple[tuple[float, object], ...]:
        p = self.profile
        parts: dict[object, float] = {}
        init = Atom(*p.init) if p.init is not None else UNIFORM
        parts[init] = parts.get(init, 0.0) + p.p_static
        moving = 1.0 - p.p_static
        parts[UNIFORM] = parts.get(UNIFORM, 0.0) + moving * self.p_pause
        parts[RWP] = parts.get(RWP, 0.0) + moving * (1.0 - self.p_pause)
        return tuple((w, c) for c, w in parts.items() if w > 0)

    @property
    def atoms(self) -> list[tuple[float, tuple[float, float]]]:
        return [(w, (c.x, c.y)) for w, c in self.components if isinstance(c, Atom)]

    def __call__(self, x, y):
        """Continuous part of the density at (x, y); atoms are reported separately."""
        total = 0.0
        for w, c in self.components:
            if c is UNIFORM or isinstance(c, Uniform):
                total = total + w * np.ones_like(np.asarray(x, dtype=float))
            elif isinstance(c, RwpMovement):
                total = total + w * rwp_mobility_density(x, y)
        return total

    def support(self, grid: int = DEFAULT_GRID) -> tuple[np.ndarray, np.ndarray]:
        pts, ws = [], []
        for w, c in self.components:
            p, q = c.support(grid)
            pts.append(p)
            ws.append(w * q)
        return np.concatenate(pts), np.concatenate(ws)


def as_density(d) -> LocationDensity:
    return d if isinstance(d, LocationDensity) else LocationDensity(d)


def location_density(profile: MobilityProfile, x, y):
    """Continuous part of the stationary density of ``profile`` at (x, y).

    A point-mass initial placement contributes an atom that is not visible
    pointwise; see ``LocationDensity.atoms``.
    """
    return LocationDensity(profile)(x, y)


# --------------------------------------------------------------------------
# expectations
# --------------------------------------------------------------------------

Metric = Callable[[np.ndarray, np.ndarray], np.ndarray]


def expected_pair_metric(density_n, density_m, metric_fn: Metric, *, grid: int = DEFAULT_GRID,
                         memo: dict | None = None, key=None) -> float:
    """E[metric(X, Y)] with X ~ density_n and Y ~ density_m independent.

    ``metric_fn`` receives broadcastable arrays of shape (..., 2). When ``memo``
    and ``key`` are given, component-pair integrals are cached under ``key``.
    """
    dn, dm = as_density(density_n), as_density(density_m)
    total = 0.0
    for wn, cn in dn.components:
        for wm, cm in dm.components:
            total += wn * wm * _component_pair(cn, cm, metric_fn, grid, memo, key)
    return total


def _component_pair(cn, cm, metric_fn, grid, memo, key):
    if memo is not None:
        k = (key, cn, cm, grid)
        if k in memo:
            return memo[k]
    p, wp = cn.support(grid)
    q, wq = cm.support(grid)
    vals = metric_fn(p[:, None, :], q[None, :, :])
    value = float(wp @ np.broadcast_to(vals, (len(wp), len(wq))) @ wq)
    if memo is not None:
        memo[k] = value
    return value


def expected_user_metric(density_n, user_location, metric_fn: Metric, *,
                         grid: int = DEFAULT_GRID) -> float:
    """E[metric(X, Z)] for X ~ density_n and a fixed location Z."""
    pts, w = as_density(density_n).support(grid)
    z = np.asarray(user_location, dtype=float)[None, :]
    return float(w @ np.broadcast_to(metric_fn(pts, z), w.shape))


def euclidean(a, b):
    return np.sqrt(((a - b) ** 2).sum(axis=-1))


# --------------------------------------------------------------------------
# Monte Carlo oracle
# --------------------------------------------------------------------------

@dataclass
class RwpSamples:
    positions: np.ndarray  # (n, 2) time-weighted location samples
    leg_lengths: np.ndarray  # lengths of the simulated movement legs

    def histogram(self, bins: int = 32) -> np.ndarray:
        h, _, _ = np.histogram2d(self.positions[:, 0], self.positions[:, 1],
                                 bins=bins, range=[[0, 1], [0, 1]])
        return h / len(self.positions)


def simulate_rwp(profile: MobilityProfile, n_trajectories: int, seed: int, *,
                 legs: int = 40, samples_per_trajectory: int = 20, warmup: float = 0.2,
                 chunk: int = 50_000) -> RwpSamples:
    """Simulate independent RWP traces and sample locations at uniform random times.

    Each trace is static with probability ``p_static``; otherwise it starts from
    the initial distribution, repeatedly travels to a uniform waypoint at the
    profile velocity and pauses for an exponential time with the profile mean.
    The first ``warmup`` fraction of each trace's time is discarded.
    """
    if n_trajectories < 1:
        raise DomainError("n_trajectories must be >= 1")
    rng = np.random.default_rng(seed)
    k = samples_per_trajectory
    total = n_trajectories * k
    # a static node never moves, so its samples are independent draws of the initial place
    n_static = int(rng.binomial(total, profile.p_static))
    positions = [_draw_init(profile, n_static, rng)]
    lengths = []
    remaining = total - n_static
    while remaining > 0:
        n = min(chunk, -(-remaining // k))
        pos, leg = _simulate_moving(profile, n, rng, legs, k, warmup)
        positions.append(pos[:remaining])
        lengths.append(leg)
        remaining -= min(len(pos), remaining)
    return RwpSamples(np.concatenate(positions),
                      np.concatenate(lengths) if lengths else np.empty(0))


def _draw_init(profile, n, rng):
    if profile.init is not None:
        return np.tile(np.asarray(profile.init, dtype=float), (n, 1))
    return rng.random((n, 2))


def _simulate_moving(profile, n, rng, legs, k, warmup):
    way = np.empty((n, legs + 1, 2))
    way[:, 0] = _draw_init(profile, n, rng)
    way[:, 1:] = rng.random((n, legs, 2))
    dist = np.sqrt(((way[:, 1:] - way[:, :-1]) ** 2).sum(axis=-1))
    travel = dist / profile.velocity
    if profile.expected_pause > 0:
        pause = rng.exponential(profile.expected_pause, size=(n, legs))
    else:
        pause = np.zeros((n, legs))
    # leg l: move during [start, arrive), pause during [arrive, end)
    end = np.cumsum(travel + pause, axis=1)
    start = end - travel - pause
    arrive = start + travel
    horizon = end[:, -1]
    t = horizon[:, None] * (warmup + (1 - warmup) * rng.random((n, k)))

    offset = np.concatenate([[0.0], np.cumsum(horizon)[:-1]])
    flat_end = (end + offset[:, None]).ravel()
    idx = np.searchsorted(flat_end, (t + offset[:, None]).ravel(), side="right")
    row = np.repeat(np.arange(n), k)
    leg = np.clip(idx - row * legs, 0, legs - 1)

    src = way[row, leg]
    dst = way[row, leg + 1]
    t = t.ravel()
    tr = travel[row, leg]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        frac = np.where(tr > 0, (t - start[row, leg]) / tr, 1.0)
    frac = np.clip(frac, 0.0, 1.0)[:, None]
    # the first leg may start from a biased initial point
    return src + frac * (dst - src), dist[:, 1:].ravel()


def analytic_cell_masses(profile: MobilityProfile, bins: int = 32, sub: int = 8) -> np.ndarray:
    """Probability mass of each cell of a bins x bins partition under the stationary density."""
    dens = LocationDensity(profile)
    fine = midpoints(bins * sub)
    xx, yy = np.meshgrid(fine, fine, indexing="ij")
    vals = np.asarray(dens(xx, yy), dtype=float) / (bins * sub) ** 2
    masses = vals.reshape(bins, sub, bins, sub).sum(axis=(1, 3))
    for w, (x, y) in dens.atoms:
        i = min(int(x * bins), bins - 1)
        j = min(int(y * bins), bins - 1)
        masses[i, j] += w
    return masses
