"""Brownian paths on dyadic grids, bridge loops, and dyadic event scans."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import CapacityError, InvalidArgument
from .geom import PolyCurve
from .stats import Estimate, binomial_estimate

MAX_DEPTH = 26
MEMORY_BUDGET_BYTES = 1 << 30


@dataclass(frozen=True)
class BrownianPath:
    """Standard Brownian motion sampled at k * horizon / 2**depth, k = 0..2**depth."""

    dims: int
    depth: int
    horizon: float
    values: np.ndarray
    seed: int

    @property
    def spacing(self) -> float:
        return self.horizon / 2**self.depth

    @property
    def times(self) -> np.ndarray:
        return np.arange(2**self.depth + 1) * self.spacing

    def restrict(self, depth: int) -> "BrownianPath":
        """The same path seen on the coarser grid of the given depth."""
        if not 0 <= depth <= self.depth:
            raise InvalidArgument(f"cannot restrict depth {self.depth} path to depth {depth}")
        step = 2 ** (self.depth - depth)
        return BrownianPath(self.dims, depth, self.horizon, self.values[::step].copy(), self.seed)

    def trace_curve(self) -> PolyCurve:
        return PolyCurve(self.values, self.times)


@dataclass(frozen=True)
class BridgeLoop:
    center: np.ndarray
    duration: float
    values: np.ndarray


@dataclass(frozen=True)
class DyadicEventHit:
    level: int
    index: int
    increment_norm: float
    max_excursion: float


def _check_capacity(rows: int, dims: int):
    need = rows * dims * 8
    if need > MEMORY_BUDGET_BYTES:
        raise CapacityError(
            f"path needs {need / 2**20:.0f} MiB, budget is {MEMORY_BUDGET_BYTES / 2**20:.0f} MiB; "
            "lower depth or dims"
        )


def sample_bm(dims: int, depth: int, horizon: float = 1.0, seed: int = 0) -> BrownianPath:
    if dims < 1:
        raise InvalidArgument("dims must be >= 1")
    if depth < 1:
        raise InvalidArgument("depth must be >= 1")
    if horizon <= 0:
        raise InvalidArgument("horizon must be positive")
    if depth > MAX_DEPTH:
        raise CapacityError(f"depth {depth} exceeds the supported maximum {MAX_DEPTH}")
    n = 2**depth
    _check_capacity(n + 1, dims)
    inc = rng.normals(rng.stream(seed, "bm"), (n, dims))
    inc *= math.sqrt(horizon / n)
    values = np.empty((n + 1, dims))
    values[0] = 0.0
    np.cumsum(inc, axis=0, out=values[1:])
    return BrownianPath(dims, depth, float(horizon), values, int(seed))


def refine_bm(path: BrownianPath, target_depth: int) -> BrownianPath:
    """Insert bridge midpoints level by level until ``target_depth``.

    Level L+1 midpoints are drawn from stream (seed, "refine", L+1), so the
    result does not depend on how the refinement is split into calls.
    """
    if target_depth <= path.depth:
        raise InvalidArgument("target_depth must exceed the path depth")
    if target_depth > MAX_DEPTH:
        raise CapacityError(f"depth {target_depth} exceeds the supported maximum {MAX_DEPTH}")
    _check_capacity(2**target_depth + 1, path.dims)
    v = path.values
    for level in range(path.depth, target_depth):
        dt = path.horizon / 2**level
        z = rng.normals(rng.stream(path.seed, "refine", level + 1), (v.shape[0] - 1, path.dims))
        mid = 0.5 * (v[:-1] + v[1:]) + math.sqrt(dt / 4.0) * z
        out = np.empty((2 * v.shape[0] - 1, path.dims))
        out[0::2] = v
        out[1::2] = mid
        v = out
    return BrownianPath(path.dims, target_depth, path.horizon, v, path.seed)


def bridge_values(gen: np.random.Generator, duration: float, mesh_points: int, dims: int = 2) -> np.ndarray:
    """Brownian bridge B_s - (s/t) B_t from 0 to 0 on ``mesh_points`` equal steps."""
    z = rng.normals(gen, (mesh_points, dims)) * math.sqrt(duration / mesh_points)
    b = np.empty((mesh_points + 1, dims))
    b[0] = 0.0
    np.cumsum(z, axis=0, out=b[1:])
    s = np.linspace(0.0, 1.0, mesh_points + 1)[:, None]
    b -= s * b[-1]
    b[-1] = 0.0
    return b


def sample_bridge_loop(center, duration: float, mesh_points: int, seed: int = 0) -> BridgeLoop:
    if duration <= 0:
        raise InvalidArgument("duration must be positive")
    if mesh_points < 8:
        raise InvalidArgument("mesh_points must be >= 8")
    c = np.asarray(center, dtype=float).reshape(2)
    values = c + bridge_values(rng.stream(seed, "bridge"), duration, mesh_points)
    values[0] = c
    values[-1] = c
    return BridgeLoop(c, float(duration), values)


def _scan_arrays(path: BrownianPath, level: int):
    n_int = 2**level
    stride = 2 ** (path.depth - level)
    v = path.values
    starts = v[:-1:stride]
    ends = v[stride::stride]
    inc = np.sqrt(((ends - starts) ** 2).sum(-1))
    block = v[:-1].reshape(n_int, stride, path.dims)
    exc = np.sqrt(((block - starts[:, None, :]) ** 2).sum(-1)).max(axis=1)
    exc = np.maximum(exc, inc)  # right endpoint belongs to the closed interval
    return inc, exc


def dyadic_event_scan(path: BrownianPath, a: float, level: int) -> list[DyadicEventHit]:
    """Dyadic intervals of the given level with a small increment and a large excursion.

    Interval i qualifies when |B((i+1)/2^j) - B(i/2^j)| <= 2 / sqrt(2^j) and
    the grid maximum of |B(t) - B(i/2^j)| over the interval is >= a / sqrt(2^j).
    """
    if path.horizon != 1.0:
        raise InvalidArgument("dyadic scans assume horizon 1; rescale the path first")
    if not 0 <= level <= path.depth:
        raise InvalidArgument(f"level {level} outside [0, {path.depth}]")
    if a < 0:
        raise InvalidArgument("a must be nonnegative")
    inc, exc = _scan_arrays(path, level)
    root = math.sqrt(2**level)
    hits = np.nonzero((inc <= 2.0 / root) & (exc >= a / root))[0]
    return [DyadicEventHit(level, int(i), float(inc[i]), float(exc[i])) for i in hits]


def joint_event_probability(dims: int, a: float, grid_depth: int, replicates: int, seed: int = 0) -> Estimate:
    """P(|B(1)| <= 2 and max_[0,1] |B| >= a), grid maxima at ``grid_depth``.

    Replicate r uses stream (seed, "joint", r).
    """
    if replicates < 100:
        raise InvalidArgument("need at least 100 replicates")
    n = 2**grid_depth
    hits = 0
    scale = math.sqrt(1.0 / n)
    for r in range(replicates):
        z = rng.normals(rng.stream(seed, "joint", r), (n, dims))
        b = np.cumsum(z, axis=0) * scale
        norms = np.sqrt((b**2).sum(-1))
        if norms[-1] <= 2.0 and norms.max() >= a:
            hits += 1
    return binomial_estimate(hits, replicates)


def levy_modulus_ratio(path: BrownianPath, h: float) -> float:
    """max over grid t <= horizon - h of |B(t+h) - B(t)| / sqrt(2 h log(1/h))."""
    if path.dims != 1:
        raise InvalidArgument("Levy modulus ratio is defined for 1-d paths")
    if not 0 < h < 1:
        raise InvalidArgument("h must lie in (0, 1)")
    lag = int(round(h / path.spacing))
    if h < path.spacing * (1 - 1e-12) or lag < 1:
        raise InvalidArgument("h is below the grid spacing")
    v = path.values[:, 0]
    if lag >= v.size:
        raise InvalidArgument("h exceeds the path horizon")
    top = float(np.abs(v[lag:] - v[:-lag]).max())
    return top / math.sqrt(2.0 * h * math.log(1.0 / h))


def graph_curve(path: BrownianPath) -> PolyCurve:
    """The graph t -> (t, B(t)) as a curve in R^(1+dims)."""
    t = path.times
    return PolyCurve(np.column_stack([t, path.values]), t)


def rescale_to_unit(path: BrownianPath) -> BrownianPath:
    """Brownian scaling B(T s) / sqrt(T): same law as a horizon-1 path."""
    return BrownianPath(path.dims, path.depth, 1.0, path.values / math.sqrt(path.horizon), path.seed)
