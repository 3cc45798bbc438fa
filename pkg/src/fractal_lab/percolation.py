"""Mandelbrot fractal percolation on the unit cube.

Cells of level k are stored as integer coordinate vectors in [0, l^k)^n;
the base-l digits of the coordinates are the cell's address.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.stats import binom

from . import rng
from .errors import CapacityError, InvalidArgument
from .geom import ScalingFit, fit_scaling, point_set_diameter
from .stats import Estimate, binomial_estimate

MEMORY_BUDGET_BYTES = 1 << 30


@dataclass(frozen=True)
class CellIndex:
    level: int
    digits: tuple  # one length-n tuple of base-l digits per level

    @classmethod
    def from_coords(cls, coords, level: int, l: int) -> "CellIndex":
        c = np.asarray(coords, dtype=np.int64)
        digits = []
        for j in range(level - 1, -1, -1):
            digits.append(tuple(int(v) for v in (c // l**j) % l))
        return cls(level, tuple(digits))

    def coords(self, l: int) -> tuple:
        n = len(self.digits[0]) if self.digits else 0
        out = [0] * n
        for vec in self.digits:
            out = [o * l + d for o, d in zip(out, vec)]
        return tuple(out)

    def label(self) -> str:
        return "/".join(",".join(str(d) for d in vec) for vec in self.digits)


@dataclass(frozen=True)
class PercTree:
    n: int
    l: int
    p: float
    depth: int
    kept: tuple  # kept[k]: (count, n) int64 coordinates of kept level-k cells
    seed: int

    def counts(self) -> np.ndarray:
        return np.array([k.shape[0] for k in self.kept], dtype=np.int64)

    @property
    def survived(self) -> bool:
        return self.kept[-1].shape[0] > 0

    def cells(self, level: int) -> list[CellIndex]:
        return [CellIndex.from_coords(c, level, self.l) for c in self.kept[level]]


def _check_params(n, l, p, depth):
    if n < 1:
        raise InvalidArgument("ambient dimension must be >= 1")
    if l < 2:
        raise InvalidArgument("branching l must be >= 2")
    if not 0 < p <= 1:
        raise InvalidArgument("retain probability must lie in (0, 1]")
    if depth < 1:
        raise InvalidArgument("depth must be >= 1")


def _child_offsets(n: int, l: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(l)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def sample_percolation(n: int, l: int, p: float, depth: int, seed: int = 0) -> PercTree:
    """Keep each child of each kept cell independently with probability p.

    Level k retention uses stream (seed, "perc", k) with one uniform per
    candidate child in parent order.
    """
    _check_params(n, l, p, depth)
    per_cell = n * 8
    expected = (p * l**n) ** depth
    if expected * per_cell > MEMORY_BUDGET_BYTES:
        raise CapacityError(
            f"expected {expected:.3g} cells at depth {depth} exceed the memory budget; "
            "lower depth, p or l"
        )
    offsets = _child_offsets(n, l)
    kept = [np.zeros((1, n), dtype=np.int64)]
    for k in range(1, depth + 1):
        parents = kept[-1]
        m = parents.shape[0] * offsets.shape[0]
        if m * per_cell * 2 > MEMORY_BUDGET_BYTES:
            raise CapacityError(f"{m} candidate cells at level {k} exceed the memory budget")
        u = rng.uniforms(rng.stream(seed, "perc", k), m)
        children = (parents[:, None, :] * l + offsets[None, :, :]).reshape(m, n)
        kept.append(children[u < p])
    return PercTree(n, l, float(p), depth, tuple(kept), int(seed))


def survival_curve(n: int, l: int, p: float, depth: int, replicates: int, seed: int = 0) -> list[Estimate]:
    """Survival estimates for every depth 1..``depth`` from one set of replicates.

    Only the cell count matters for survival, and the number of kept children
    of N kept cells is Binomial(N l^n, p); level k draws it by inverse CDF
    from uniform k of stream (seed, "survival", r), which keeps the estimate
    monotone in p under a fixed seed. Entry d - 1 equals
    ``survival_probability(n, l, p, d, replicates, seed)``.
    """
    _check_params(n, l, p, depth)
    if replicates < 100:
        raise InvalidArgument("need at least 100 replicates")
    alive = np.zeros(depth, dtype=np.int64)
    fan = l**n
    for r in range(replicates):
        u = rng.uniforms(rng.stream(seed, "survival", r), depth)
        count = 1
        for k in range(depth):
            count = int(binom.ppf(u[k], count * fan, p)) if p < 1 else count * fan
            if count == 0:
                break
            alive[k] += 1
    return [binomial_estimate(int(a), replicates) for a in alive]


def survival_probability(n: int, l: int, p: float, depth: int, replicates: int, seed: int = 0) -> Estimate:
    """Fraction of replicates with a kept cell at ``depth`` (see ``survival_curve``)."""
    return survival_curve(n, l, p, depth, replicates, seed)[-1]


def extinction_threshold(n: int, l: int) -> float:
    """Largest p with mean offspring p l^n <= 1 (almost sure extinction)."""
    return float(l) ** (-n)


def level_count_moments(n: int, l: int, p: float, level: int) -> tuple[float, float]:
    """Exact mean and variance of the number of kept cells at ``level``.

    The counts form a Galton-Watson process with Binomial(l^n, p) offspring,
    so with m = p l^n and s2 = l^n p (1 - p) the level-k count has mean m^k and
    variance s2 m^(k-1) (m^k - 1) / (m - 1), or k s2 when m = 1.
    """
    m = p * float(l) ** n
    s2 = float(l) ** n * p * (1.0 - p)
    if level == 0:
        return 1.0, 0.0
    if abs(m - 1.0) < 1e-12:
        return 1.0, level * s2
    return m**level, s2 * m ** (level - 1) * (m**level - 1.0) / (m - 1.0)


def reference_dimension(n: int, l: int, p: float) -> float:
    return n + math.log(p) / math.log(l)


@dataclass(frozen=True)
class DimensionCheck:
    fit: ScalingFit
    reference: float

    def to_dict(self) -> dict:
        return {"slope": self.fit.slope, "reference": self.reference, "r_squared": self.fit.r_squared}


def dimension_check(tree: PercTree, levels=None) -> DimensionCheck:
    """Level-count regression: boxes of side l^-k are exactly the kept level-k cells.

    ``levels`` defaults to 2..depth.
    """
    if not tree.survived:
        raise InvalidArgument("tree is extinct at its final depth")
    levels = list(range(2, tree.depth + 1)) if levels is None else sorted(int(k) for k in levels)
    if len(levels) < 2 or levels[0] < 0 or levels[-1] > tree.depth:
        raise InvalidArgument("need at least 2 levels inside [0, depth]")
    counts = tree.counts()[levels]
    scales = float(tree.l) ** -np.asarray(levels, dtype=float)
    return DimensionCheck(fit_scaling(scales, counts), reference_dimension(tree.n, tree.l, tree.p))


@dataclass(frozen=True)
class DisconnectionStats:
    largest_component_cells: int
    component_count: int
    perfectness_min_gap: float
    disconnectedness_modulus: float

    def to_dict(self) -> dict:
        return {
            "largest_component_cells": self.largest_component_cells,
            "component_count": self.component_count,
            "perfectness_min_gap": self.perfectness_min_gap,
            "disconnectedness_modulus": self.disconnectedness_modulus,
        }


def _neighbour_offsets(n: int, corners: bool) -> np.ndarray:
    if not corners:
        return np.eye(n, dtype=np.int64)
    offs = _child_offsets(n, 3) - 1
    # keep one of each +-pair
    first = np.array([o[np.nonzero(o)[0][0]] > 0 if o.any() else False for o in offs])
    return offs[first]


def cell_components(tree: PercTree, corners: bool = False) -> np.ndarray:
    """Component label of each deepest-level kept cell (face adjacency by default)."""
    cells = tree.kept[-1]
    N = cells.shape[0]
    if N == 0:
        return np.zeros(0, dtype=np.int64)
    side = tree.l**tree.depth + 2
    weights = side ** np.arange(tree.n, dtype=np.int64)
    keys = (cells + 1) @ weights
    order = np.argsort(keys)
    sk = keys[order]
    rows, cols = [], []
    for off in _neighbour_offsets(tree.n, corners):
        nk = (cells + 1 + off) @ weights
        pos = np.searchsorted(sk, nk)
        pos = np.minimum(pos, N - 1)
        hit = sk[pos] == nk
        rows.append(np.nonzero(hit)[0])
        cols.append(order[pos[hit]])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    graph = sparse.coo_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(N, N))
    _, labels = connected_components(graph, directed=False)
    return labels.astype(np.int64)


def _component_gaps(centers: np.ndarray, labels: np.ndarray, ncomp: int) -> np.ndarray:
    """Distance from each component to the nearest cell of another component."""
    tree = cKDTree(centers)
    N = centers.shape[0]
    cell_gap = np.full(N, np.inf)
    pending = np.arange(N)
    k = 8
    while pending.size:
        kk = min(k, N)
        d, j = tree.query(centers[pending], k=kk)
        other = labels[j] != labels[pending][:, None]
        found = other.any(1)
        first = np.argmax(other, axis=1)
        cell_gap[pending[found]] = d[found, first[found]]
        if kk == N:
            break
        # a cell whose k-th neighbour is already farther than its component's
        # best gap cannot improve it
        comp_best = np.full(ncomp, np.inf)
        np.minimum.at(comp_best, labels, cell_gap)
        rest = ~found
        pending = pending[rest][d[rest, -1] < comp_best[labels[pending[rest]]]]
        k *= 4
    gap = np.full(ncomp, np.inf)
    np.minimum.at(gap, labels, cell_gap)
    return gap


def disconnection_stats(tree: PercTree, corners: bool = False) -> DisconnectionStats:
    """Connectivity statistics of the deepest level, in units of the cell side.

    perfectness_min_gap is the minimum over kept cells of 1 / (distance from
    the cell's centre to the nearest other kept cell's centre); it is 1 when
    every cell has an adjacent kept cell and small when some cell is isolated
    at a scale much larger than itself (0 for a single cell).
    disconnectedness_modulus is the maximum over components of
    (diameter + 1) / (centre distance to the nearest other component), or 0
    when there is a single component.
    """
    if not tree.survived:
        raise InvalidArgument("tree is extinct at its final depth")
    cells = tree.kept[-1]
    N = cells.shape[0]
    labels = cell_components(tree, corners)
    ncomp = int(labels.max()) + 1
    sizes = np.bincount(labels, minlength=ncomp)
    centers = cells.astype(float) + 0.5
    if N == 1:
        return DisconnectionStats(1, 1, 0.0, 0.0)
    d, _ = cKDTree(centers).query(centers, k=2)
    perfect = float((1.0 / d[:, 1]).min())
    if ncomp == 1:
        return DisconnectionStats(int(N), 1, perfect, 0.0)
    gaps = _component_gaps(centers, labels, ncomp)
    order = np.argsort(labels, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    modulus = 0.0
    for c in range(ncomp):
        pts = centers[order[bounds[c] : bounds[c + 1]]]
        diam = point_set_diameter(pts) if pts.shape[0] > 1 else 0.0
        modulus = max(modulus, (diam + 1.0) / gaps[c])
    return DisconnectionStats(int(sizes.max()), ncomp, perfect, float(modulus))


def deepest_raster(tree: PercTree) -> np.ndarray:
    """uint8 raster of the deepest level (255 kept, 0 removed).

    n = 1 gives a single row; n = 3 stacks the z-slices vertically.
    """
    L = tree.l**tree.depth
    c = tree.kept[-1]
    if tree.n == 1:
        img = np.zeros((1, L), dtype=np.uint8)
        img[0, c[:, 0]] = 255
    elif tree.n == 2:
        img = np.zeros((L, L), dtype=np.uint8)
        img[L - 1 - c[:, 1], c[:, 0]] = 255
    elif tree.n == 3:
        img = np.zeros((L * L, L), dtype=np.uint8)
        img[c[:, 2] * L + (L - 1 - c[:, 1]), c[:, 0]] = 255
    else:
        raise InvalidArgument("raster export supports n <= 3")
    return img


def cell_rows(tree: PercTree):
    """(level, address) rows for every kept cell, in level then storage order."""
    for k, cells in enumerate(tree.kept):
        if k == 0:
            yield 0, ""
            continue
        powers = tree.l ** np.arange(k - 1, -1, -1, dtype=np.int64)
        digits = (cells[:, None, :] // powers[None, :, None]) % tree.l  # (N, k, n)
        for row in digits.tolist():
            yield k, "/".join(",".join(map(str, vec)) for vec in row)
