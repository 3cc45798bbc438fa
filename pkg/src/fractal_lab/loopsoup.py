"""Brownian loop soups at finite cutoffs, their clusters, and the CLE carpet.

The loop measure restricted to loops of duration t in [t_min, t_max] that
stay in the domain D and have diameter at least delta has finite mass

    Lambda = int_D int 1/(2 pi t^2) P^t_z(loop in D, diam >= delta) dt dz,

where P^t_z is the law of a Brownian bridge of duration t rooted at z.
Proposals draw t with density proportional to 1/t^2 and z uniform in D, so
Lambda is the proposal mass times the acceptance probability, and accepted
proposals are exact draws from the normalised truncated measure.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import ndimage
from scipy.spatial import cKDTree
from scipy.stats import poisson
from skimage import measure

from . import rng
from .brownian import bridge_values
from .errors import ContourError, DegenerateCutoffError, InvalidArgument, UnsupportedParameter
from .geom import PolyCurve, ScalingFit, point_set_diameter, raster_box_counting, turning_constant, turning_profile
from .stats import Estimate

DOMAINS = ("square", "disk")
KAPPA_MIN = 8.0 / 3.0
MIN_BRIDGE_POINTS = 8
MAX_BRIDGE_POINTS = 1 << 18
FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def intensity_for_kappa(kappa: float) -> float:
    """Loop-soup intensity c = (3 kappa - 8)(6 - kappa) / (2 kappa) for kappa in (8/3, 4]."""
    if not KAPPA_MIN < kappa <= 4.0:
        raise UnsupportedParameter(f"kappa={kappa} outside (8/3, 4]")
    return (3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa)


@dataclass(frozen=True)
class SoupConfig:
    domain: str = "square"
    kappa: float | None = 4.0
    intensity: float | None = None
    t_min: float = 1e-3
    t_max: float = 0.25
    diam_min: float = 0.02
    mesh: float = 1.0 / 512
    mc_mass_samples: int = 20000
    seed: int = 0
    mass_seed: int = 0

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise InvalidArgument(f"domain must be one of {DOMAINS}")
        if (self.kappa is None) == (self.intensity is None):
            raise InvalidArgument("give exactly one of kappa and intensity")
        if self.kappa is not None:
            intensity_for_kappa(self.kappa)
        elif not 0 < self.intensity <= 1:
            raise InvalidArgument("intensity must lie in (0, 1]")
        if not 0 < self.t_min < self.t_max:
            raise InvalidArgument("need 0 < t_min < t_max")
        if self.diam_min <= 0:
            raise InvalidArgument("diam_min must be positive")
        if not 0 < self.mesh <= self.diam_min / 4:
            raise InvalidArgument("mesh must be positive and at most diam_min / 4")
        if self.mc_mass_samples < 100:
            raise InvalidArgument("mc_mass_samples must be >= 100")

    @property
    def c(self) -> float:
        return intensity_for_kappa(self.kappa) if self.kappa is not None else float(self.intensity)

    @property
    def area(self) -> float:
        return 1.0 if self.domain == "square" else math.pi

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (0.0, 1.0, 0.0, 1.0) if self.domain == "square" else (-1.0, 1.0, -1.0, 1.0)

    @property
    def domain_diameter(self) -> float:
        return math.sqrt(2.0) if self.domain == "square" else 2.0

    def proposal_mass(self) -> float:
        return self.area * (1.0 / self.t_min - 1.0 / self.t_max) / (2.0 * math.pi)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class LoopSet:
    loops: tuple  # closed polylines, last vertex equal to the first
    durations: np.ndarray
    roots: np.ndarray
    config: SoupConfig
    candidates: int = 0

    def __len__(self):
        return len(self.loops)


# ----------------------------------------------------------------- sampling


def bridge_points(t: float, mesh: float) -> int:
    """Bridge resolution: 2 t / mesh^2 steps, so the rms planar step is at most one mesh.

    Clamped to [8, 2^18]; the cap only binds for loops whose typical size is
    comparable to the whole domain.
    """
    return int(min(MAX_BRIDGE_POINTS, max(MIN_BRIDGE_POINTS, math.ceil(2.0 * t / mesh**2))))


def _propose(gen, cfg: SoupConfig):
    u = rng.uniforms(gen, 3)
    inv = 1.0 / cfg.t_min - u[0] * (1.0 / cfg.t_min - 1.0 / cfg.t_max)
    t = 1.0 / inv
    if cfg.domain == "square":
        z = np.array([u[1], u[2]])
    else:
        r, th = math.sqrt(u[1]), 2.0 * math.pi * u[2]
        z = np.array([r * math.cos(th), r * math.sin(th)])
    pts = z + bridge_values(gen, t, bridge_points(t, cfg.mesh))
    return t, z, pts


def _accept(pts: np.ndarray, cfg: SoupConfig) -> bool:
    if cfg.domain == "square":
        if pts.min() < 0.0 or pts.max() > 1.0:
            return False
    elif float((pts**2).sum(1).max()) > 1.0:
        return False
    lo = pts.min(0)
    hi = pts.max(0)
    side = hi - lo
    if math.hypot(side[0], side[1]) < cfg.diam_min:
        return False
    if side.max() >= cfg.diam_min:
        return True
    return point_set_diameter(pts) >= cfg.diam_min


@functools.lru_cache(maxsize=64)
def _mass_cached(domain, t_min, t_max, diam_min, mesh, samples, mass_seed) -> Estimate:
    cfg = SoupConfig(domain, 4.0, None, t_min, t_max, diam_min, mesh, samples, 0, mass_seed)
    hits = 0
    for i in range(samples):
        _, _, pts = _propose(rng.stream(mass_seed, "mass", i), cfg)
        hits += _accept(pts, cfg)
    if hits == 0:
        raise DegenerateCutoffError(
            f"no proposal out of {samples} was accepted; lower diam_min or raise t_max/mc_mass_samples"
        )
    Z = cfg.proposal_mass()
    p = hits / samples
    return Estimate(Z * p, 3.0 * Z * math.sqrt(p * (1.0 - p) / samples), samples)


def truncated_loop_mass(config: SoupConfig) -> Estimate:
    """Monte Carlo mass of the truncated loop measure (3 standard errors).

    Proposal i uses stream (mass_seed, "mass", i); results are cached per
    cutoff set. A diameter cutoff above the domain diameter gives 0 exactly.
    """
    if config.diam_min > config.domain_diameter:
        return Estimate(0.0, 0.0, config.mc_mass_samples)
    return _mass_cached(
        config.domain, config.t_min, config.t_max, config.diam_min, config.mesh, config.mc_mass_samples, config.mass_seed
    )


def sample_soup(config: SoupConfig, mass: Estimate | None = None) -> LoopSet:
    """Poisson(c * Lambda) loops from the truncated measure.

    The count uses stream (seed, "count"); proposal j uses (seed, "loop", j)
    and proposals are tried in order until the count is reached.
    """
    mass = truncated_loop_mass(config) if mass is None else mass
    mean = config.c * mass.value
    u = rng.uniforms(rng.stream(config.seed, "count"), 1)[0]
    N = int(poisson.ppf(u, mean)) if mean > 0 else 0
    loops, durations, roots = [], [], []
    j = 0
    limit = max(1000, 1000 * N) * max(1.0, config.proposal_mass() / max(mass.value, 1e-300))
    while len(loops) < N:
        if j > limit:
            raise DegenerateCutoffError("acceptance rate too low to reach the Poisson count")
        t, z, pts = _propose(rng.stream(config.seed, "loop", j), config)
        j += 1
        if _accept(pts, config):
            loops.append(pts)
            durations.append(t)
            roots.append(z)
    return LoopSet(
        tuple(loops),
        np.array(durations, dtype=float),
        np.array(roots, dtype=float).reshape(-1, 2),
        config,
        j,
    )


def restrict_soup(loops: LoopSet, diam_min: float) -> LoopSet:
    """The loops of ``loops`` with diameter at least ``diam_min``.

    Restricting a Poisson process to a subset of its space gives the Poisson
    process of the restricted intensity, so this is a sample of the soup at
    the larger cutoff, coupled to the original one.
    """
    if diam_min < loops.config.diam_min:
        raise InvalidArgument("can only raise the diameter cutoff")
    keep = [i for i, P in enumerate(loops.loops) if point_set_diameter(P) >= diam_min]
    cfg = replace(loops.config, diam_min=float(diam_min))
    return LoopSet(
        tuple(loops.loops[i] for i in keep),
        loops.durations[keep],
        loops.roots[keep].reshape(-1, 2),
        cfg,
        loops.candidates,
    )


# --------------------------------------------------------------- clustering


@njit(cache=True, nogil=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True, nogil=True)
def _point_seg(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    L2 = dx * dx + dy * dy
    s = 0.0
    if L2 > 0.0:
        s = ((px - ax) * dx + (py - ay) * dy) / L2
        s = min(1.0, max(0.0, s))
    qx = ax + s * dx
    qy = ay + s * dy
    return math.hypot(px - qx, py - qy), qx, qy


@njit(cache=True, nogil=True)
def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


@njit(cache=True, nogil=True)
def _seg_gap(ax, ay, bx, by, cx, cy, dx, dy):
    """Distance between segments ab and cd and a witness pair of points."""
    d1 = _cross(ax, ay, bx, by, cx, cy)
    d2 = _cross(ax, ay, bx, by, dx, dy)
    d3 = _cross(cx, cy, dx, dy, ax, ay)
    d4 = _cross(cx, cy, dx, dy, bx, by)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        s = d3 / (d3 - d4)
        px = ax + s * (bx - ax)
        py = ay + s * (by - ay)
        return 0.0, px, py, px, py
    best, qx, qy = _point_seg(ax, ay, cx, cy, dx, dy)
    w = (ax, ay, qx, qy)
    d, qx, qy = _point_seg(bx, by, cx, cy, dx, dy)
    if d < best:
        best = d
        w = (bx, by, qx, qy)
    d, qx, qy = _point_seg(cx, cy, ax, ay, bx, by)
    if d < best:
        best = d
        w = (qx, qy, cx, cy)
    d, qx, qy = _point_seg(dx, dy, ax, ay, bx, by)
    if d < best:
        best = d
        w = (qx, qy, dx, dy)
    return best, w[0], w[1], w[2], w[3]


@njit(cache=True, nogil=True)
def _link_loops(seg, owner, n_loops, tol, cell):
    # Each segment is bucketed by its midpoint on a grid of side ``cell``,
    # which is at least the longest segment plus tol, so linked segments
    # sit in the same or adjacent buckets. Within a bucket the segments are
    # grouped into runs of one loop; a pair of runs is only scanned while
    # their loops are still in different sets.
    S = seg.shape[0]
    mx = np.empty(S)
    my = np.empty(S)
    for s in range(S):
        mx[s] = 0.5 * (seg[s, 0] + seg[s, 2])
        my[s] = 0.5 * (seg[s, 1] + seg[s, 3])
    x0 = mx.min()
    y0 = my.min()
    ncx = int((mx.max() - x0) / cell) + 1
    ncy = int((my.max() - y0) / cell) + 1
    key = np.empty(S, dtype=np.int64)
    for s in range(S):
        gx = int((mx[s] - x0) / cell)
        gy = int((my[s] - y0) / cell)
        key[s] = (gx * ncy + gy) * n_loops + owner[s]
    order = np.argsort(key)
    key = key[order]
    # runs of equal (cell, loop)
    run_start = [0]
    for i in range(1, S):
        if key[i] != key[i - 1]:
            run_start.append(i)
    R = len(run_start)
    rs = np.empty(R + 1, dtype=np.int64)
    for r in range(R):
        rs[r] = run_start[r]
    rs[R] = S
    run_cell = np.empty(R, dtype=np.int64)
    run_loop = np.empty(R, dtype=np.int64)
    for r in range(R):
        run_cell[r] = key[rs[r]] // n_loops
        run_loop[r] = key[rs[r]] % n_loops
    parent = np.arange(n_loops)
    wit = np.empty((n_loops, 4))
    wloop = np.empty((n_loops, 2), dtype=np.int64)
    nw = 0
    for r in range(R):
        c = run_cell[r]
        gx = c // ncy
        gy = c % ncy
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                nx_ = gx + dx
                ny_ = gy + dy
                if nx_ < 0 or ny_ < 0 or nx_ >= ncx or ny_ >= ncy:
                    continue
                c2 = nx_ * ncy + ny_
                if c2 < c:
                    continue
                lo = np.searchsorted(run_cell, c2)
                if c2 == c:
                    lo = r + 1
                q = lo
                while q < R and run_cell[q] == c2:
                    la = run_loop[r]
                    lb = run_loop[q]
                    q += 1
                    if la == lb:
                        continue
                    ra = _find(parent, la)
                    rb = _find(parent, lb)
                    if ra == rb:
                        continue
                    hit = False
                    for i in range(rs[r], rs[r + 1]):
                        a = order[i]
                        for j in range(rs[q - 1], rs[q]):
                            b = order[j]
                            d, px, py, qx, qy = _seg_gap(
                                seg[a, 0], seg[a, 1], seg[a, 2], seg[a, 3],
                                seg[b, 0], seg[b, 1], seg[b, 2], seg[b, 3],
                            )
                            if d <= tol:
                                if ra < rb:
                                    parent[rb] = ra
                                else:
                                    parent[ra] = rb
                                wit[nw, 0] = px
                                wit[nw, 1] = py
                                wit[nw, 2] = qx
                                wit[nw, 3] = qy
                                wloop[nw, 0] = la
                                wloop[nw, 1] = lb
                                nw += 1
                                hit = True
                                break
                        if hit:
                            break
    roots = np.empty(n_loops, dtype=np.int64)
    for i in range(n_loops):
        roots[i] = _find(parent, i)
    return roots, wit[:nw], wloop[:nw]


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple  # tuple of int arrays of loop indices, ordered by smallest member
    labels: np.ndarray  # cluster id of each loop
    links: np.ndarray  # (k, 4) witness point pairs of the links that merged clusters
    link_loops: np.ndarray  # (k, 2) the two loops joined by each link
    outermost: tuple = ()
    boundaries: tuple = ()  # closed polylines, first vertex not repeated
    boundary_clusters: tuple = ()  # outermost cluster ids inside each boundary
    mesh: float | None = None

    def __len__(self):
        return len(self.clusters)

    def partition(self) -> set:
        return {frozenset(int(i) for i in c) for c in self.clusters}


def _loop_segments(loops):
    segs, owner = [], []
    for i, P in enumerate(loops):
        P = np.asarray(P, dtype=float)
        segs.append(np.hstack([P[:-1], P[1:]]))
        owner.append(np.full(P.shape[0] - 1, i, dtype=np.int64))
    if not segs:
        return np.zeros((0, 4)), np.zeros(0, dtype=np.int64)
    return np.ascontiguousarray(np.vstack(segs)), np.concatenate(owner)


def cluster_soup(loops, tol: float) -> ClusterSet:
    """Clusters of loops under the chain relation 'polylines cross or come within tol'."""
    polys = loops.loops if isinstance(loops, LoopSet) else tuple(loops)
    if tol < 0:
        raise InvalidArgument("tol must be nonnegative")
    n = len(polys)
    if n == 0:
        return ClusterSet((), np.zeros(0, dtype=np.int64), np.zeros((0, 4)), np.zeros((0, 2), dtype=np.int64))
    seg, owner = _loop_segments(polys)
    lengths = np.hypot(seg[:, 2] - seg[:, 0], seg[:, 3] - seg[:, 1])
    cell = max(float(lengths.max()) + tol, 1e-12) * (1.0 + 1e-9)
    roots, wit, wloop = _link_loops(seg, owner, n, float(tol), cell)
    _, labels = np.unique(roots, return_inverse=True)
    # roots are the smallest member of each set, so ids follow first appearance
    clusters = tuple(np.nonzero(labels == k)[0] for k in range(labels.max() + 1))
    return ClusterSet(clusters, labels.astype(np.int64), wit, wloop)


# ------------------------------------------------------------ rasterisation


@njit(cache=True, nogil=True)
def _supercover(seg, tag, x0, y0, mesh, nx, ny):
    # Grid walk through every pixel a segment passes; diagonal moves are
    # split into an x move then a y move so the trace is 4-connected.
    out_pix = []
    out_tag = []
    for s in range(seg.shape[0]):
        ax = (seg[s, 0] - x0) / mesh
        ay = (seg[s, 1] - y0) / mesh
        bx = (seg[s, 2] - x0) / mesh
        by = (seg[s, 3] - y0) / mesh
        cx = min(max(int(math.floor(ax)), 0), nx - 1)
        cy = min(max(int(math.floor(ay)), 0), ny - 1)
        ex = min(max(int(math.floor(bx)), 0), nx - 1)
        ey = min(max(int(math.floor(by)), 0), ny - 1)
        dx = bx - ax
        dy = by - ay
        sx = 1 if dx > 0 else -1
        sy = 1 if dy > 0 else -1
        tdx = abs(1.0 / dx) if dx != 0 else math.inf
        tdy = abs(1.0 / dy) if dy != 0 else math.inf
        if dx > 0:
            tmx = (math.floor(ax) + 1 - ax) * tdx
        elif dx < 0:
            tmx = (ax - math.floor(ax)) * tdx
        else:
            tmx = math.inf
        if dy > 0:
            tmy = (math.floor(ay) + 1 - ay) * tdy
        elif dy < 0:
            tmy = (ay - math.floor(ay)) * tdy
        else:
            tmy = math.inf
        out_pix.append(cy * nx + cx)
        out_tag.append(tag[s])
        guard = abs(ex - cx) + abs(ey - cy) + 2
        while (cx != ex or cy != ey) and guard > 0:
            guard -= 1
            if tmx <= tmy:
                if (sx > 0 and cx < nx - 1) or (sx < 0 and cx > 0):
                    cx += sx
                tmx += tdx
            else:
                if (sy > 0 and cy < ny - 1) or (sy < 0 and cy > 0):
                    cy += sy
                tmy += tdy
            out_pix.append(cy * nx + cx)
            out_tag.append(tag[s])
        if cx != ex or cy != ey:
            # numerical drift at the very end: finish with axis moves
            while cx != ex:
                cx += 1 if ex > cx else -1
                out_pix.append(cy * nx + cx)
                out_tag.append(tag[s])
            while cy != ey:
                cy += 1 if ey > cy else -1
                out_pix.append(cy * nx + cx)
                out_tag.append(tag[s])
    return np.array(out_pix, dtype=np.int64), np.array(out_tag, dtype=np.int64)


@dataclass(frozen=True)
class Grid:
    x0: float
    y0: float
    mesh: float
    nx: int
    ny: int

    @classmethod
    def for_domain(cls, domain: str, mesh: float) -> "Grid":
        x0, x1, y0, y1 = SoupConfig(domain=domain, mesh=mesh, diam_min=4 * mesh).bounds
        return cls(x0, y0, mesh, int(math.ceil((x1 - x0) / mesh - 1e-9)), int(math.ceil((y1 - y0) / mesh - 1e-9)))

    def centers(self):
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.mesh
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.mesh
        return xs, ys

    def domain_mask(self, domain: str) -> np.ndarray:
        if domain == "square":
            return np.ones((self.ny, self.nx), dtype=bool)
        xs, ys = self.centers()
        return xs[None, :] ** 2 + ys[:, None] ** 2 <= 1.0

    def to_world(self, rc: np.ndarray) -> np.ndarray:
        """(row, col) pixel coordinates, possibly fractional, to (x, y)."""
        return np.column_stack([self.x0 + (rc[:, 1] + 0.5) * self.mesh, self.y0 + (rc[:, 0] + 0.5) * self.mesh])

    def to_pixel(self, xy: np.ndarray) -> np.ndarray:
        """(x, y) to fractional (row, col)."""
        return np.column_stack([(xy[:, 1] - self.y0) / self.mesh - 0.5, (xy[:, 0] - self.x0) / self.mesh - 0.5])


def _rasterise(polys, tags, grid: Grid, closed: bool = False):
    segs, owner = [], []
    for P, tag in zip(polys, tags):
        P = np.asarray(P, dtype=float)
        if P.shape[0] == 1:
            P = np.vstack([P, P])
        Q = np.vstack([P, P[:1]]) if closed else P
        segs.append(np.hstack([Q[:-1], Q[1:]]))
        owner.append(np.full(Q.shape[0] - 1, tag, dtype=np.int64))
    if not segs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return _supercover(np.ascontiguousarray(np.vstack(segs)), np.concatenate(owner), grid.x0, grid.y0, grid.mesh, grid.nx, grid.ny)


def _outer_contour(region_mask: np.ndarray) -> np.ndarray:
    """Outer marching-squares contour (row, col) of a filled, hole-free pixel set."""
    padded = np.pad(region_mask.astype(float), 1)
    contours = measure.find_contours(padded, 0.5, fully_connected="high")
    if not contours:
        raise ContourError("contour tracing found no boundary; use a finer mesh")
    c = max(contours, key=len) - 1.0
    if np.allclose(c[0], c[-1]):
        c = c[:-1]
    if c.shape[0] < 3:
        raise ContourError("degenerate contour; use a finer mesh")
    return c


def outermost_boundaries(clusters: ClusterSet, loops, mesh: float, domain: str | None = None) -> ClusterSet:
    """Outer boundaries of the clusters not enclosed by another cluster.

    Loops and the link witnesses between them are drawn with 4-connected
    grid walks. The exterior is the 4-connected background component of the
    frame around the raster; everything else is filled, and each 4-connected
    filled region yields one boundary, traced by marching squares. Clusters
    with a pixel next to the exterior are outermost. Clusters whose rasters
    touch fall into a single region and share its boundary.
    """
    polys = loops.loops if isinstance(loops, LoopSet) else tuple(loops)
    if domain is None:
        domain = loops.config.domain if isinstance(loops, LoopSet) else "square"
    grid = Grid.for_domain(domain, mesh)
    if len(polys) == 0:
        return replace(clusters, outermost=(), boundaries=(), boundary_clusters=(), mesh=mesh)
    pix, tag = _rasterise(polys, clusters.labels, grid)
    if clusters.links.shape[0]:
        link_tags = clusters.labels[clusters.link_loops[:, 0]]
        lp, lt = _rasterise([l.reshape(2, 2) for l in clusters.links], link_tags, grid)
        pix = np.concatenate([pix, lp])
        tag = np.concatenate([tag, lt])
    occ = np.zeros(grid.ny * grid.nx, dtype=bool)
    occ[pix] = True
    occ = np.pad(occ.reshape(grid.ny, grid.nx), 1)
    bg, _ = ndimage.label(~occ, structure=FOUR)
    exterior = bg == bg[0, 0]
    near_ext = ndimage.binary_dilation(exterior, structure=FOUR)[1:-1, 1:-1].ravel()
    outer_ids = np.unique(tag[near_ext[pix]])
    filled = ~exterior[1:-1, 1:-1]
    regions, nreg = ndimage.label(filled, structure=FOUR)
    region_of_cluster = {}
    flat_regions = regions.ravel()
    first_pix = {}
    for p, t in zip(pix.tolist(), tag.tolist()):
        if t not in first_pix:
            first_pix[t] = p
    for cid in outer_ids.tolist():
        region_of_cluster[cid] = int(flat_regions[first_pix[cid]])
    boundaries, members = [], []
    slices = ndimage.find_objects(regions)
    for r in sorted(set(region_of_cluster.values())):
        sl = slices[r - 1]
        c = _outer_contour(regions[sl] == r)
        c[:, 0] += sl[0].start
        c[:, 1] += sl[1].start
        boundaries.append(grid.to_world(c))
        members.append(tuple(k for k, v in sorted(region_of_cluster.items()) if v == r))
    return replace(
        clusters,
        outermost=tuple(int(i) for i in outer_ids),
        boundaries=tuple(boundaries),
        boundary_clusters=tuple(members),
        mesh=mesh,
    )


# ------------------------------------------------------------------- carpet


@dataclass(frozen=True)
class CarpetMask:
    grid: np.ndarray  # uint8: 1 carpet, 0 hole or outside the domain
    domain: np.ndarray  # bool: pixel centre inside the domain
    mesh: float
    boundary_diams: np.ndarray
    origin: tuple = (0.0, 0.0)
    cutoffs: dict = field(default_factory=dict)

    def area_fraction(self) -> float:
        return float(self.grid[self.domain].mean())

    def pgm_image(self) -> np.ndarray:
        """255 carpet, 0 elsewhere, top row first."""
        return (self.grid[::-1] * 255).astype(np.uint8)


@njit(cache=True, nogil=True)
def _scanline_fill(rows, cols, out):
    # Even-odd fill of the pixels whose centres lie inside the closed polygon
    # given in fractional (row, col) pixel coordinates.
    ny, nx = out.shape
    n = rows.shape[0]
    r_lo = max(0, int(math.ceil(rows.min())))
    r_hi = min(ny - 1, int(math.floor(rows.max())))
    xs = np.empty(n)
    for y in range(r_lo, r_hi + 1):
        m = 0
        for i in range(n):
            j = i + 1 if i + 1 < n else 0
            r0 = rows[i]
            r1 = rows[j]
            if (r0 <= y < r1) or (r1 <= y < r0):
                xs[m] = cols[i] + (y - r0) * (cols[j] - cols[i]) / (r1 - r0)
                m += 1
        xs[:m].sort()
        for k in range(0, m - 1, 2):
            a = max(0, int(math.ceil(xs[k])))
            b = min(nx - 1, int(math.floor(xs[k + 1])))
            for x in range(a, b + 1):
                out[y, x] = True


def fill_polygon(poly_world: np.ndarray, grid: "Grid", out: np.ndarray | None = None) -> np.ndarray:
    """Mark the grid pixels whose centres lie inside a closed polyline."""
    out = np.zeros((grid.ny, grid.nx), dtype=bool) if out is None else out
    rc = grid.to_pixel(np.asarray(poly_world, dtype=float))
    _scanline_fill(np.ascontiguousarray(rc[:, 0]), np.ascontiguousarray(rc[:, 1]), out)
    return out


def carpet_mask(boundaries, config: SoupConfig | None = None, domain: str = "square", mesh: float | None = None) -> CarpetMask:
    """Domain raster minus the filled interiors of the boundary polylines."""
    if isinstance(boundaries, ClusterSet):
        polys = boundaries.boundaries
        mesh = boundaries.mesh if mesh is None else mesh
    else:
        polys = tuple(boundaries)
    if config is not None:
        domain = config.domain
        mesh = config.mesh if mesh is None else mesh
    if mesh is None:
        raise InvalidArgument("mesh is required")
    grid = Grid.for_domain(domain, mesh)
    dom = grid.domain_mask(domain)
    holes = np.zeros_like(dom)
    for P in polys:
        fill_polygon(P, grid, holes)
    mask = dom & ~holes
    diams = np.array(sorted((point_set_diameter(P) for P in polys), reverse=True), dtype=float)
    cut = {} if config is None else {"t_min": config.t_min, "t_max": config.t_max, "diam_min": config.diam_min}
    return CarpetMask(mask.astype(np.uint8), dom, float(mesh), diams, (grid.x0, grid.y0), cut)


@dataclass(frozen=True)
class WhyburnReport:
    min_boundary_distance: float
    disjoint: bool
    diam_threshold: float
    count_above_diam: int
    boundary_count: int
    density_eps: float
    density_fraction: float
    cutoffs: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def whyburn_check(mask: CarpetMask, boundaries, eps_density: float, eps_diam: float) -> WhyburnReport:
    """Finite-scale surrogates of the three carpet conditions.

    Disjointness: the closest vertices of two different boundaries are more
    than a quarter mesh apart. Diameter decay: number of boundaries with
    diameter above ``eps_diam``. Density: fraction of the ``eps_density``
    squares meeting the domain that contain a hole pixel.
    """
    polys = boundaries.boundaries if isinstance(boundaries, ClusterSet) else tuple(boundaries)
    if eps_density <= 0 or eps_diam <= 0:
        raise InvalidArgument("eps values must be positive")
    if len(polys) >= 2:
        verts = np.vstack(polys)
        owner = np.concatenate([np.full(len(p), i) for i, p in enumerate(polys)])
        tree = cKDTree(verts)
        best = math.inf
        k = 2
        # grow k until every vertex has a neighbour from another boundary, or give up on
        # the remaining vertices (their nearest foreign vertex is farther than all found)
        pending = np.arange(verts.shape[0])
        while pending.size and k <= 64:
            d, j = tree.query(verts[pending], k=min(k, verts.shape[0]))
            other = owner[j] != owner[pending][:, None]
            found = other.any(1)
            if found.any():
                best = min(best, float(np.where(other, d, np.inf)[found].min()))
            pending = pending[~found]
            pending = pending[d[~found, -1] < best] if np.isfinite(best) else pending
            k *= 4
        if pending.size:
            for i in np.unique(owner[pending]):
                mine = owner == i
                dd, _ = cKDTree(verts[~mine]).query(verts[mine & np.isin(np.arange(len(owner)), pending)], k=1)
                best = min(best, float(dd.min()))
        min_dist = best
    else:
        min_dist = math.inf
    disjoint = bool(min_dist > 0.25 * mask.mesh)
    diams = mask.boundary_diams if len(mask.boundary_diams) == len(polys) else np.array([point_set_diameter(P) for P in polys])
    above = int(np.sum(diams > eps_diam))
    holes = (mask.grid == 0) & mask.domain
    ny, nx = mask.grid.shape
    ys = ((np.arange(ny) + 0.5) * mask.mesh // eps_density).astype(np.int64)
    xs = ((np.arange(nx) + 0.5) * mask.mesh // eps_density).astype(np.int64)
    key = ys[:, None] * (xs.max() + 1) + xs[None, :]
    in_dom = np.unique(key[mask.domain])
    with_hole = np.unique(key[holes])
    frac = float(with_hole.size / in_dom.size) if in_dom.size else 0.0
    return WhyburnReport(min_dist, disjoint, float(eps_diam), above, len(polys), float(eps_density), frac, dict(mask.cutoffs))


def carpet_dimension(mask: CarpetMask) -> ScalingFit:
    return raster_box_counting((mask.grid == 1) & mask.domain, mask.mesh)


# ------------------------------------------------------------------ turning


@dataclass(frozen=True)
class BoundaryTurning:
    n_vertices: np.ndarray
    max_constants: np.ndarray
    baselines: np.ndarray
    profiles: tuple

    @property
    def ratios(self) -> np.ndarray:
        return self.max_constants / self.baselines

    def growth(self) -> np.ndarray:
        """Per-loop flag: constant grew from the coarsest to the finest level."""
        return np.array([p[-1] > p[0] for p in self.profiles], dtype=bool)


@functools.lru_cache(maxsize=256)
def circle_baseline(n: int) -> float:
    th = 2.0 * math.pi * np.arange(n) / n
    return turning_constant(PolyCurve.from_points(np.column_stack([np.cos(th), np.sin(th)]), closed=True)).constant


def boundary_turning_stats(boundaries, levels: int = 3, min_vertices: int = 64) -> BoundaryTurning:
    """Turning profiles of every boundary with at least ``min_vertices`` vertices."""
    polys = boundaries.boundaries if isinstance(boundaries, ClusterSet) else tuple(boundaries)
    nv, mx, base, prof = [], [], [], []
    for P in polys:
        P = np.asarray(P, dtype=float)
        if P.shape[0] < min_vertices:
            continue
        curve = PolyCurve.from_points(P, closed=True)
        reps = turning_profile(curve, levels)
        consts = [r.constant if not r.infinite else math.inf for r in reps]
        nv.append(P.shape[0])
        mx.append(max(consts))
        base.append(circle_baseline(P.shape[0]))
        prof.append(tuple(consts))
    return BoundaryTurning(np.array(nv, dtype=np.int64), np.array(mx), np.array(base), tuple(prof))
