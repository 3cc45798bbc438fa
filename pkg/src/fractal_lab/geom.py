"""Metric-geometry measurements on sampled curves and point clouds.

Everything here works on the sampled points only: diameters are maxima over
sample pairs, turning constants compare sample pairs, and box counts are
taken over the samples. Refining the sample can only increase a turning
constant, which is what the divergence statistics rely on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import pdist

from .errors import DegenerateCurveError, InvalidArgument

MAX_BRUTE_POINTS = 4096
BINS_PER_DECADE = 32
_MAX_COINCIDENT = 1000


@dataclass(frozen=True)
class PolyCurve:
    """Time-ordered sample of a curve in R^d.

    ``closed`` marks a loop whose last sample connects back to the first;
    the first point must not be repeated at the end.
    """

    points: np.ndarray
    times: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim == 1:
            pts = pts[:, None]
        t = np.asarray(self.times, dtype=float)
        if pts.shape[0] < 2:
            raise InvalidArgument("a PolyCurve needs at least 2 points")
        if t.shape != (pts.shape[0],):
            raise InvalidArgument("times must have one entry per point")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("curve coordinates must be finite")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgument("times must be strictly increasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "times", t)

    @classmethod
    def from_points(cls, points, closed=False) -> "PolyCurve":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.arange(len(pts), dtype=float), closed)

    @classmethod
    def from_complex(cls, z, times=None, closed=False) -> "PolyCurve":
        z = np.asarray(z)
        t = np.arange(len(z), dtype=float) if times is None else times
        return cls(np.column_stack([z.real, z.imag]), t, closed)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subsample(self, stride: int) -> tuple["PolyCurve", np.ndarray]:
        """Every ``stride``-th sample; open curves always keep their last point."""
        n = len(self)
        idx = np.arange(0, n, stride)
        if not self.closed and idx[-1] != n - 1:
            idx = np.append(idx, n - 1)
        return PolyCurve(self.points[idx], self.times[idx], self.closed), idx

    def transformed(self, matrix=None, scale=1.0, shift=0.0) -> "PolyCurve":
        pts = self.points if matrix is None else self.points @ np.asarray(matrix).T
        return PolyCurve(scale * pts + shift, self.times, self.closed)


@dataclass(frozen=True)
class TurningReport:
    constant: float
    witness: tuple[int, int]
    scale: float
    coincident: tuple[tuple[int, int], ...] = ()
    n_points: int = 0

    @property
    def infinite(self) -> bool:
        return len(self.coincident) > 0

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "witness": list(self.witness),
            "scale": self.scale,
            "coincident": [list(p) for p in self.coincident],
            "n_points": self.n_points,
        }


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of log(count) against log(1/scale).

    ``used`` flags the scales that entered the fit after trimming.
    """

    scales: np.ndarray
    counts: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    used: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        return {
            "scales": [float(s) for s in self.scales],
            "counts": [int(c) for c in self.counts],
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "used": [bool(u) for u in self.used],
        }


# ---------------------------------------------------------------- diameters


def point_set_diameter(points) -> float:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n == 0:
        raise InvalidArgument("diameter of an empty set")
    if n == 1:
        return 0.0
    if n > 1500 and pts.shape[1] in (2, 3):
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:
            # flat or collinear input: hull fails, fall back to brute force
            pass
    if pts.shape[1] == 1:
        return float(pts.max() - pts.min())
    if pts.shape[0] > 6000:
        return float(_diameter_brute(np.ascontiguousarray(pts)))
    return float(pdist(pts).max())


@njit(cache=True, nogil=True)
def _diameter_brute(P):
    n, d = P.shape
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                t = P[i, k] - P[j, k]
                s += t * t
            if s > best:
                best = s
    return math.sqrt(best)


def curve_diameter(curve: PolyCurve, start: int = 0, stop: int | None = None) -> float:
    """Diameter of the samples ``start..stop`` (both inclusive)."""
    n = len(curve)
    stop = n - 1 if stop is None else stop
    if start < 0 or stop >= n or start > stop:
        raise InvalidArgument(f"index range [{start}, {stop}] invalid for {n} points")
    return point_set_diameter(curve.points[start : stop + 1])


# ------------------------------------------------------------------ turning


@njit(cache=True, nogil=True)
def _turning_open(P, max_coincident):
    # Sub-diameters by diagonals: diam(i..i+g) = max(diam(i..i+g-1), diam(i+1..i+g), |p_i - p_{i+g}|)
    n, d = P.shape
    D = np.zeros(n)
    best = -1.0
    best_dist = 0.0
    bi = 0
    bj = 0
    coinc = np.empty((max_coincident, 2), dtype=np.int64)
    nc = 0
    for g in range(1, n):
        for i in range(n - g):
            j = i + g
            s = 0.0
            for k in range(d):
                t = P[i, k] - P[j, k]
                s += t * t
            dist = math.sqrt(s)
            dd = D[i]
            if D[i + 1] > dd:
                dd = D[i + 1]
            if dist > dd:
                dd = dist
            D[i] = dd
            if dist == 0.0:
                if nc < max_coincident:
                    coinc[nc, 0] = i
                    coinc[nc, 1] = j
                nc += 1
                continue
            r = dd / dist
            if r > best or (r == best and dist > best_dist):
                best = r
                best_dist = dist
                bi = i
                bj = j
    return best, bi, bj, best_dist, coinc[: min(nc, max_coincident)], nc


@njit(cache=True, nogil=True)
def _turning_closed(P, max_coincident):
    # cur[i] is the diameter of the arc running forward g steps from sample i
    # (cyclically), rolled over g. Arcs of length <= n/2 are kept in L; when
    # g >= n/2 the pair (j, j + g) has short arc L[j + g, n - g] and long arc
    # cur[j], so each pair is scored once its longer arc is known.
    n, d = P.shape
    half = n // 2
    L = np.zeros((n, half + 1))
    cur = np.zeros(n)
    nxt = np.zeros(n)
    best = -1.0
    best_dist = 0.0
    bi = 0
    bj = 0
    coinc = np.empty((max_coincident, 2), dtype=np.int64)
    nc = 0
    for g in range(1, n):
        for i in range(n):
            j = i + g
            if j >= n:
                j -= n
            s = 0.0
            for k in range(d):
                t = P[i, k] - P[j, k]
                s += t * t
            dist = math.sqrt(s)
            i1 = i + 1 if i + 1 < n else 0
            dd = cur[i]
            if cur[i1] > dd:
                dd = cur[i1]
            if dist > dd:
                dd = dist
            nxt[i] = dd
            if g <= half:
                L[i, g] = dd
            if g >= n - half:
                # pair (j, i) with short step count n - g from j
                gs = n - g
                if gs * 2 == n and i < j:
                    continue
                if dist == 0.0:
                    if nc < max_coincident:
                        coinc[nc, 0] = min(i, j)
                        coinc[nc, 1] = max(i, j)
                    nc += 1
                    continue
                arc = L[j, gs]
                if dd < arc:
                    arc = dd
                r = arc / dist
                if r > best or (r == best and dist > best_dist):
                    best = r
                    best_dist = dist
                    bi = min(i, j)
                    bj = max(i, j)
        tmp = cur
        cur = nxt
        nxt = tmp
    return best, bi, bj, best_dist, coinc[: min(nc, max_coincident)], nc


def _power_of_two_stride(n: int, closed: bool, max_points: int) -> int:
    s = 1
    while True:
        m = -(-n // s) if closed else -(-(n - 1) // s) + 1
        if m <= max_points:
            return s
        s *= 2


def turning_constant(curve: PolyCurve, max_points: int = MAX_BRUTE_POINTS) -> TurningReport:
    """Largest ratio diam(subcurve between p_i and p_j) / |p_i - p_j| over sample pairs.

    For closed curves the smaller of the two arcs joining the pair is used.
    Curves longer than ``max_points`` are stride-subsampled first; witness
    indices always refer to the original curve. Pairs of distinct indices
    landing on the same point are returned in ``coincident``.
    """
    stride = _power_of_two_stride(len(curve), curve.closed, max_points)
    idx = np.arange(len(curve))
    if stride > 1:
        curve, idx = curve.subsample(stride)
    P = np.ascontiguousarray(curve.points)
    if np.all(P == P[0]):
        raise DegenerateCurveError("all curve points coincide")
    if curve.closed and len(curve) < 3:
        raise InvalidArgument("a closed curve needs at least 3 points")
    kernel = _turning_closed if curve.closed else _turning_open
    best, i, j, dist, coinc, _ = kernel(P, _MAX_COINCIDENT)
    return TurningReport(
        constant=float(best),
        witness=(int(idx[i]), int(idx[j])),
        scale=float(dist),
        coincident=tuple((int(idx[a]), int(idx[b])) for a, b in coinc),
        n_points=len(curve),
    )


def turning_profile(curve: PolyCurve, levels: int, max_points: int = MAX_BRUTE_POINTS) -> list[TurningReport]:
    """Turning constants on nested subsamples, coarse to fine.

    Report k (1-based) uses stride ``base * 2**(levels - k)``, where ``base``
    is the smallest power of two keeping the finest level within
    ``max_points``. Index sets are nested, so the constants are nondecreasing.
    """
    if levels < 1:
        raise InvalidArgument("levels must be positive")
    if len(curve) < 2**levels:
        raise InvalidArgument(f"curve of {len(curve)} points too short for {levels} levels")
    base = _power_of_two_stride(len(curve), curve.closed, max_points)
    reports = []
    for k in range(1, levels + 1):
        stride = base * 2 ** (levels - k)
        sub, idx = curve.subsample(stride) if stride > 1 else (curve, np.arange(len(curve)))
        if curve.closed and len(sub) < 3:
            raise InvalidArgument(f"closed curve too short for {levels} levels")
        rep = turning_constant(sub, max_points=max(max_points, len(sub)))
        reports.append(
            TurningReport(
                rep.constant,
                (int(idx[rep.witness[0]]), int(idx[rep.witness[1]])),
                rep.scale,
                tuple((int(idx[a]), int(idx[b])) for a, b in rep.coincident),
                rep.n_points,
            )
        )
    return reports


# --------------------------------------------------------- quasisymmetry


@dataclass(frozen=True)
class TripleDistortion:
    """Relative-distance ratios for every ordered triple (x, y, z), x != z."""

    input_ratio: np.ndarray
    output_ratio: np.ndarray
    infinite: bool

    def envelope(self, bins_per_decade: int = BINS_PER_DECADE):
        """Upper envelope of output ratio over logarithmic input-ratio bins.

        Returns ``(lower_edges, upper_edges, max_output)`` for nonempty bins;
        triples with zero input ratio (y = x) are left out.
        """
        x = self.input_ratio
        keep = x > 0
        x, y = x[keep], self.output_ratio[keep]
        if x.size == 0:
            return np.empty(0), np.empty(0), np.empty(0)
        b = np.floor(np.log10(x) * bins_per_decade + 1e-9).astype(np.int64)
        order = np.argsort(b, kind="stable")
        b, y = b[order], y[order]
        uniq, start = np.unique(b, return_index=True)
        env = np.maximum.reduceat(y, start)
        lo = 10.0 ** (uniq / bins_per_decade)
        hi = 10.0 ** ((uniq + 1) / bins_per_decade)
        return lo, hi, env


def qs_triple_distortion(domain_pts, image_pts) -> TripleDistortion:
    X = np.asarray(domain_pts, dtype=float)
    Y = np.asarray(image_pts, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    n = X.shape[0]
    if n < 3 or Y.shape[0] != n:
        raise InvalidArgument("need equal-length point sequences of length >= 3")
    DX = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    DY = np.sqrt(((Y[:, None, :] - Y[None, :, :]) ** 2).sum(-1))
    off = ~np.eye(n, dtype=bool)
    if np.any(DX[off] == 0):
        raise InvalidArgument("domain points must be pairwise distinct")
    # axis order: x, y, z
    num_x = np.broadcast_to(DX[:, :, None], (n, n, n))
    den_x = np.broadcast_to(DX[:, None, :], (n, n, n))
    num_y = np.broadcast_to(DY[:, :, None], (n, n, n))
    den_y = np.broadcast_to(DY[:, None, :], (n, n, n))
    valid = np.broadcast_to(off[:, None, :], (n, n, n))
    inp = num_x[valid] / den_x[valid]
    dy = den_y[valid]
    ny = num_y[valid]
    infinite = bool(np.any(dy == 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(dy == 0, np.inf, ny / np.where(dy == 0, 1.0, dy))
    return TripleDistortion(inp, out, infinite)


# ----------------------------------------------------------- box counting


def fit_scaling(scales, counts, used=None) -> ScalingFit:
    s = np.asarray(scales, dtype=float)
    c = np.asarray(counts, dtype=np.int64)
    used = np.ones(s.shape, dtype=bool) if used is None else np.asarray(used, dtype=bool)
    if used.sum() < 2:
        raise InvalidArgument("fewer than 2 scales left for the fit")
    x = np.log(1.0 / s[used])
    y = np.log(c[used].astype(float))
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if used.sum() < 3:
        r2 = math.nan
    elif ss_tot == 0.0:
        r2 = 1.0
    else:
        r2 = max(0.0, 1.0 - float((resid**2).sum()) / ss_tot)
    return ScalingFit(s, c, float(slope), float(intercept), r2, used)


def point_resolution(points) -> float:
    """Median nearest-neighbour spacing of the sample (0 for fewer than 2 distinct points)."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.shape[0] < 2:
        return 0.0
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(np.median(d[:, 1]))


def _trim_mask(scales: np.ndarray, resolution: float) -> np.ndarray:
    used = scales >= 4.0 * resolution
    used[np.argmax(scales)] = False
    return used


def box_counting_dimension(points, scales, resolution: float | None = None, trim: bool = True) -> ScalingFit:
    """Box-counting slope of a point sample.

    Boxes are axis-aligned cubes anchored at the coordinate-wise minimum;
    the last box along each axis is closed on its far side.
    With ``trim`` the largest scale and every scale below four times the
    point resolution are dropped from the fit (counts are still reported).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    s = np.asarray(scales, dtype=float)
    if s.size < 3:
        raise InvalidArgument("box counting needs at least 3 scales")
    if pts.shape[0] == 0:
        raise InvalidArgument("box counting needs a nonempty sample")
    if np.any(s <= 0):
        raise InvalidArgument("scales must be positive")
    origin = pts.min(axis=0)
    extent = pts.max(axis=0) - origin
    counts = np.empty(s.size, dtype=np.int64)
    for k, scale in enumerate(s):
        # the last box along each axis is closed, so a sample on the far
        # edge of the bounding box does not open a box of its own
        last = np.maximum(np.ceil(extent / scale - 1e-9).astype(np.int64) - 1, 0)
        cells = np.minimum(np.floor((pts - origin) / scale).astype(np.int64), last)
        counts[k] = np.unique(cells, axis=0).shape[0]
    if not trim:
        return fit_scaling(s, counts)
    res = point_resolution(pts) if resolution is None else resolution
    return fit_scaling(s, counts, _trim_mask(s, res))


def raster_box_counting(mask, pixel_size: float, sizes=None, trim: bool = True) -> ScalingFit:
    """Box-counting slope of the True pixels of a 2-d raster.

    ``sizes`` are box sides in pixels (default powers of two up to half the
    raster); the pixel itself is the resolution used for trimming.
    """
    m = np.asarray(mask, dtype=bool)
    if sizes is None:
        top = max(1, int(2 ** math.floor(math.log2(max(m.shape) / 2))))
        sizes = [2**k for k in range(int(math.log2(top)) + 1)]
    sizes = np.asarray(sizes, dtype=np.int64)
    counts = np.empty(sizes.size, dtype=np.int64)
    for k, b in enumerate(sizes):
        ny = -(-m.shape[0] // b)
        nx = -(-m.shape[1] // b)
        padded = np.zeros((ny * b, nx * b), dtype=bool)
        padded[: m.shape[0], : m.shape[1]] = m
        counts[k] = int(padded.reshape(ny, b, nx, b).any(axis=(1, 3)).sum())
    scales = sizes * float(pixel_size)
    if np.any(counts == 0):
        raise InvalidArgument("raster has no set pixels")
    if not trim:
        return fit_scaling(scales, counts)
    return fit_scaling(scales, counts, _trim_mask(scales, float(pixel_size)))


# ---------------------------------------------------------------- doubling


def doubling_count(points, center, r: float) -> int:
    """Greedy (farthest-point) cover of ``points`` within ``r`` of ``center`` by r/2-balls.

    The farthest-point cover starts at the sample point nearest ``center``.
    A second greedy cover sweeps the points along their principal axis, and
    the smaller count is returned. Either is a valid cover size, hence an
    upper bound for the optimum (the sweep is optimal for collinear points).
    """
    if r <= 0:
        raise InvalidArgument("radius must be positive")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    c = np.asarray(center, dtype=float).reshape(1, -1)
    dc = np.sqrt(((pts - c) ** 2).sum(1))
    inside = pts[dc <= r]
    if inside.shape[0] == 0:
        raise InvalidArgument("no sample points inside the ball")
    first = int(np.argmin(dc[dc <= r]))
    return min(_greedy_cover(inside, first, r / 2), _sweep_cover(inside, r / 2))


def _sweep_cover(pts: np.ndarray, half: float) -> int:
    # Walk the points in order along their principal axis; the first
    # uncovered point is covered by the ball around the sample point that
    # lies farthest ahead among those within ``half`` of it.
    if pts.shape[0] == 1:
        return 1
    centred = pts - pts.mean(0)
    axis = np.linalg.svd(centred, full_matrices=False)[2][0]
    proj = centred @ axis
    covered = np.zeros(pts.shape[0], dtype=bool)
    count = 0
    for i in np.argsort(proj, kind="stable"):
        if covered[i]:
            continue
        near = np.sqrt(((pts - pts[i]) ** 2).sum(1)) <= half
        q = int(np.argmax(np.where(near, proj, -np.inf)))
        covered |= np.sqrt(((pts - pts[q]) ** 2).sum(1)) <= half
        count += 1
    return count


def _greedy_cover(pts: np.ndarray, first: int, half: float) -> int:
    mind = np.sqrt(((pts - pts[first]) ** 2).sum(1))
    count = 1
    while True:
        far = int(np.argmax(mind))
        if mind[far] <= half:
            return count
        count += 1
        mind = np.minimum(mind, np.sqrt(((pts - pts[far]) ** 2).sum(1)))


# ------------------------------------------------------ self-intersection


@njit(cache=True, nogil=True)
def _orient(ax, ay, bx, by, cx, cy):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


@njit(cache=True, nogil=True)
def _on_segment(ax, ay, bx, by, cx, cy):
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


@njit(cache=True, nogil=True)
def segments_intersect(ax, ay, bx, by, cx, cy, dx, dy):
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if o2 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    if o3 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if o4 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    return False


@njit(cache=True, nogil=True)
def _arc_extent(P, i, j):
    # larger bounding-box side of vertices i..j (inclusive, i <= j)
    x0 = x1 = P[i, 0]
    y0 = y1 = P[i, 1]
    for k in range(i + 1, j + 1):
        x0 = min(x0, P[k, 0])
        x1 = max(x1, P[k, 0])
        y0 = min(y0, P[k, 1])
        y1 = max(y1, P[k, 1])
    return max(x1 - x0, y1 - y0)


@njit(cache=True, nogil=True)
def _count_crossings(P, closed, min_loop):
    n = P.shape[0]
    m = n if closed else n - 1
    xlo = np.empty(m)
    xhi = np.empty(m)
    ylo = np.empty(m)
    yhi = np.empty(m)
    for s in range(m):
        a = P[s]
        b = P[(s + 1) % n]
        xlo[s] = min(a[0], b[0])
        xhi[s] = max(a[0], b[0])
        ylo[s] = min(a[1], b[1])
        yhi[s] = max(a[1], b[1])
    count = 0
    for s in range(m):
        for t in range(s + 2, m):
            if closed and s == 0 and t == m - 1:
                continue
            if xhi[t] < xlo[s] or xhi[s] < xlo[t] or yhi[t] < ylo[s] or yhi[s] < ylo[t]:
                continue
            a = P[s]
            b = P[(s + 1) % n]
            c = P[t]
            d = P[(t + 1) % n]
            if not segments_intersect(a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]):
                continue
            if min_loop > 0.0:
                ext = _arc_extent(P, s + 1, t)
                if closed:
                    # the other arc runs from t+1 around to s
                    other = max(_arc_extent(P, t + 1, n - 1), _arc_extent(P, 0, s)) if t + 1 <= n - 1 else _arc_extent(P, 0, s)
                    ext = min(ext, other)
                if ext <= min_loop:
                    continue
            count += 1
    return count


def raster_self_intersections(points, resolution: float, closed: bool = False, min_loop: float = 2.0) -> int:
    """Count self-crossings of a planar polyline visible at a raster resolution.

    Vertices are rounded to the ``resolution`` lattice and consecutive
    duplicates merged. A crossing (or touching) of two non-adjacent segments
    is counted only when the stretch of curve between them leaves a box of
    ``min_loop`` lattice cells; shorter excursions are wiggles below the
    resolution and do not separate the two segments at that scale.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise InvalidArgument("self-intersection test is planar")
    if resolution <= 0:
        raise InvalidArgument("resolution must be positive")
    Q = np.round(P / resolution)
    keep = np.ones(len(Q), dtype=bool)
    keep[1:] = np.any(Q[1:] != Q[:-1], axis=1)
    Q = Q[keep]
    if closed and len(Q) > 1 and np.all(Q[-1] == Q[0]):
        Q = Q[:-1]
    if len(Q) < 4:
        return 0
    return int(_count_crossings(np.ascontiguousarray(Q), closed, float(min_loop)))
