import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fractal_lab import geom
from fractal_lab import loopsoup as S
from fractal_lab.errors import InvalidArgument, UnsupportedParameter

# cheap cutoffs for unit tests
CHEAP = dict(t_min=1e-2, t_max=0.25, diam_min=0.05, mesh=1 / 128, mc_mass_samples=4000)


def circle(c, r, n=256):
    th = 2 * np.pi * np.arange(n + 1) / n
    return np.column_stack([c[0] + r * np.cos(th), c[1] + r * np.sin(th)])


def square_hole(x0, y0, side):
    return np.array([[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side]])


def sierpinski_holes(depth):
    holes = []

    def rec(x0, y0, side, d):
        s = side / 3
        holes.append(square_hole(x0 + s, y0 + s, s))
        if d > 1:
            for i in range(3):
                for j in range(3):
                    if (i, j) != (1, 1):
                        rec(x0 + i * s, y0 + j * s, s, d - 1)

    rec(0.0, 0.0, 1.0, depth)
    return holes


def hausdorff(A, B):
    from scipy.spatial import cKDTree

    return max(cKDTree(B).query(A)[0].max(), cKDTree(A).query(B)[0].max())


# ---------------------------------------------------------------- intensity


def test_intensity_values():
    assert S.intensity_for_kappa(8 / 3 + 1e-12) == pytest.approx(0.0, abs=1e-10)
    assert S.intensity_for_kappa(4.0) == 1.0
    assert S.intensity_for_kappa(10 / 3) == pytest.approx(0.8)
    for bad in (8 / 3, 4.5, 2.0):
        with pytest.raises(UnsupportedParameter):
            S.intensity_for_kappa(bad)


def test_intensity_strictly_increasing():
    ks = np.linspace(8 / 3, 4.0, 101)[1:]
    c = np.array([S.intensity_for_kappa(k) for k in ks])
    assert np.all(np.diff(c) > 0)
    assert np.all((c > 0) & (c <= 1))


def test_config_validation():
    with pytest.raises(InvalidArgument):
        S.SoupConfig(mesh=0.02, diam_min=0.02)
    with pytest.raises(InvalidArgument):
        S.SoupConfig(t_min=0.3, t_max=0.25)
    with pytest.raises(InvalidArgument):
        S.SoupConfig(kappa=4.0, intensity=0.5)
    with pytest.raises(InvalidArgument):
        S.SoupConfig(domain="triangle")
    assert S.SoupConfig(kappa=None, intensity=0.3).c == 0.3


def test_bridge_points_keep_steps_below_mesh():
    mesh = 1 / 1024
    for t in (1e-4, 1e-3, 1e-2):
        m = S.bridge_points(t, mesh)
        assert math.sqrt(2 * t / m) <= mesh * (1 + 1e-12)
    assert S.bridge_points(1e-9, mesh) == S.MIN_BRIDGE_POINTS
    assert S.bridge_points(10.0, mesh) == S.MAX_BRIDGE_POINTS


# --------------------------------------------------------------------- mass


def test_mass_zero_for_huge_cutoff():
    cfg = S.SoupConfig(diam_min=2.0, mesh=0.1)
    assert S.truncated_loop_mass(cfg).value == 0.0


def test_mass_monotone_in_diameter_cutoff():
    vals = [S.truncated_loop_mass(S.SoupConfig(**{**CHEAP, "diam_min": d, "mesh": 1 / 256, "mc_mass_samples": 2000})).value for d in (0.2, 0.1, 0.05, 0.03)]
    assert vals == sorted(vals)


def test_mass_reproducible_across_seeds():
    cfg = dict(t_min=0.01, t_max=0.25, diam_min=0.05, mesh=1 / 128, mc_mass_samples=4000)
    a = S.truncated_loop_mass(S.SoupConfig(**cfg, mass_seed=1))
    b = S.truncated_loop_mass(S.SoupConfig(**cfg, mass_seed=2))
    assert abs(a.value - b.value) <= a.radius + b.radius
    assert a == S.truncated_loop_mass(S.SoupConfig(**cfg, mass_seed=1))


# ----------------------------------------------------------------- sampling


def test_tiny_intensity_gives_no_loops():
    mass = S.truncated_loop_mass(S.SoupConfig(**CHEAP))
    counts = [len(S.sample_soup(S.SoupConfig(**CHEAP, kappa=None, intensity=1e-6, seed=s), mass)) for s in range(200)]
    assert sum(counts) == 0


@given(st.integers(0, 2**40), st.sampled_from(S.DOMAINS))
def test_loops_satisfy_acceptance(seed, domain):
    cfg = S.SoupConfig(domain, **CHEAP, seed=seed)
    soup = S.sample_soup(cfg)
    for P in soup.loops:
        assert np.array_equal(P[0], P[-1])
        assert geom.point_set_diameter(P) >= cfg.diam_min
        if domain == "square":
            assert P.min() >= 0 and P.max() <= 1
        else:
            assert (P**2).sum(1).max() <= 1
    assert soup.durations.shape == (len(soup),) and np.all(soup.durations >= cfg.t_min)


def test_counts_are_poisson_with_mass_mean():
    mass = S.truncated_loop_mass(S.SoupConfig(**CHEAP))
    counts = np.array([len(S.sample_soup(S.SoupConfig(**CHEAP, seed=s), mass)) for s in range(200)])
    mean = mass.value
    assert abs(counts.mean() - mean) <= 3 * math.sqrt(mean / counts.size)
    assert 0.8 <= counts.var(ddof=1) / counts.mean() <= 1.2


def test_soup_deterministic():
    a = S.sample_soup(S.SoupConfig(**CHEAP, seed=5))
    b = S.sample_soup(S.SoupConfig(**CHEAP, seed=5))
    assert len(a) == len(b) and all(np.array_equal(p, q) for p, q in zip(a.loops, b.loops))


def test_restrict_soup():
    soup = S.sample_soup(S.SoupConfig(**CHEAP, seed=2))
    sub = S.restrict_soup(soup, 0.2)
    assert sub.config.diam_min == 0.2
    assert all(geom.point_set_diameter(P) >= 0.2 for P in sub.loops)
    assert len(sub) == sum(geom.point_set_diameter(P) >= 0.2 for P in soup.loops)
    with pytest.raises(InvalidArgument):
        S.restrict_soup(soup, 0.01)


# --------------------------------------------------------------- clustering


def test_cluster_examples():
    tol = 1e-3
    far = [circle((0.2, 0.2), 0.1), circle((0.8, 0.8), 0.1)]
    assert len(S.cluster_soup(far, tol)) == 2
    conc = [circle((0, 0), 1.0, 2048), circle((0, 0), 1 + tol / 2, 2048)]
    assert len(S.cluster_soup(conc, tol)) == 1
    chain = [circle((0.15 * i, 0.5), 0.1) for i in range(5)]
    assert len(S.cluster_soup(chain, tol)) == 1
    cs = S.cluster_soup(chain[:2] + chain[3:], tol)
    assert cs.partition() == {frozenset({0, 1}), frozenset({2, 3})}
    assert len(S.cluster_soup([], tol)) == 0


def _seg_dist(a, b, c, d):
    def orient(p, q, r):
        return np.sign((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))

    if orient(a, b, c) * orient(a, b, d) < 0 and orient(c, d, a) * orient(c, d, b) < 0:
        return 0.0

    def pt(p, u, v):
        w = v - u
        s = np.clip(np.dot(p - u, w) / max(np.dot(w, w), 1e-300), 0, 1)
        return np.linalg.norm(p - (u + s * w))

    return min(pt(a, c, d), pt(b, c, d), pt(c, a, b), pt(d, a, b))


def _brute_partition(loops, tol):
    n = len(loops)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            P, Q = loops[i], loops[j]
            if any(
                _seg_dist(P[a], P[a + 1], Q[b], Q[b + 1]) <= tol
                for a in range(len(P) - 1)
                for b in range(len(Q) - 1)
            ):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(i)
    return {frozenset(g) for g in groups.values()}


@given(st.integers(0, 2**32), st.integers(2, 7), st.sampled_from([0.0, 0.01, 0.05]))
def test_clustering_matches_brute_force(seed, n, tol):
    r = np.random.default_rng(seed)
    loops = []
    for _ in range(n):
        k = int(r.integers(3, 9))
        P = r.random(2) + 0.15 * r.standard_normal((k, 2))
        loops.append(np.vstack([P, P[:1]]))
    assert S.cluster_soup(loops, tol).partition() == _brute_partition(loops, tol)


def test_clustering_permutation_invariant():
    soup = S.sample_soup(S.SoupConfig(**CHEAP, seed=4))
    base = S.cluster_soup(soup, 1 / 128).partition()
    perm = np.random.default_rng(0).permutation(len(soup))
    shuffled = S.cluster_soup([soup.loops[i] for i in perm], 1 / 128).partition()
    assert {frozenset(int(perm[i]) for i in g) for g in shuffled} == base


# --------------------------------------------------------------- boundaries


def test_single_circle_boundary():
    mesh = 1 / 512
    C = circle((0.5, 0.5), 0.3, 4096)
    cs = S.outermost_boundaries(S.cluster_soup([C], mesh), [C], mesh)
    assert len(cs.boundaries) == 1 and cs.outermost == (0,)
    assert hausdorff(cs.boundaries[0], C) <= 2 * mesh


def test_figure_eight_single_contour():
    mesh = 1 / 512
    loops = [circle((0.38, 0.5), 0.15, 2048), circle((0.62, 0.5), 0.15, 2048)]
    cs = S.outermost_boundaries(S.cluster_soup(loops, mesh), loops, mesh)
    assert len(cs.clusters) == 1 and len(cs.boundaries) == 1
    B = cs.boundaries[0]
    assert geom.raster_self_intersections(B, mesh / 4, closed=True) == 0
    inside = S.fill_polygon(B, S.Grid.for_domain("square", mesh))
    grid = S.Grid.for_domain("square", mesh)
    for L in loops:
        rc = np.rint(grid.to_pixel(L[::16] * 0.98 + 0.02 * np.array([[L[:, 0].mean(), 0.5]]))).astype(int)
        assert inside[rc[:, 0], rc[:, 1]].all()


def test_nested_circle_not_outermost():
    mesh = 1 / 512
    loops = [circle((0.5, 0.5), 0.3, 2048), circle((0.5, 0.5), 0.1, 1024)]
    cs = S.outermost_boundaries(S.cluster_soup(loops, mesh), loops, mesh)
    assert len(cs.clusters) == 2
    assert cs.outermost == (int(cs.labels[0]),)
    assert len(cs.boundaries) == 1


# ------------------------------------------------------------------- carpet


def test_empty_carpet():
    m = S.carpet_mask([], domain="square", mesh=1 / 64)
    assert m.area_fraction() == 1.0
    rep = S.whyburn_check(m, [], 0.125, 0.05)
    assert rep.density_fraction == 0.0 and rep.boundary_count == 0 and rep.disjoint


def test_disk_hole_area():
    m = S.carpet_mask([circle((0.5, 0.5), 1 / 3, 4096)[:-1]], domain="square", mesh=1 / 512)
    assert abs(m.area_fraction() - (1 - math.pi / 9)) <= 0.02


def test_disk_domain_mask():
    m = S.carpet_mask([], domain="disk", mesh=1 / 256)
    assert abs(m.domain.sum() * m.mesh**2 - math.pi) < 0.01


def test_sierpinski_carpet_oracle():
    holes = sierpinski_holes(4)
    m = S.carpet_mask(holes, domain="square", mesh=1 / 729)
    rep = S.whyburn_check(m, holes, 1 / 9, 0.06)
    assert rep.disjoint and rep.density_fraction == 1.0
    assert rep.count_above_diam == 1 + 8  # diagonals 0.47 and 0.16; the next is 0.052
    assert np.all(np.diff(m.boundary_diams) <= 0)
    assert m.area_fraction() == pytest.approx((8 / 9) ** 4, abs=1e-12)
    assert abs(S.carpet_dimension(m).slope - math.log(8) / math.log(3)) <= 0.1


def test_carpet_partition_and_determinism():
    cfg = S.SoupConfig(**CHEAP, seed=7)

    def build():
        soup = S.sample_soup(cfg)
        cs = S.outermost_boundaries(S.cluster_soup(soup, cfg.mesh), soup, cfg.mesh)
        return cs, S.carpet_mask(cs, cfg)

    cs, m = build()
    assert np.array_equal(m.grid, build()[1].grid)
    grid = S.Grid.for_domain("square", cfg.mesh)
    cover = sum(S.fill_polygon(B, grid).astype(int) for B in cs.boundaries) if cs.boundaries else 0
    assert np.all(cover <= 1)
    assert np.array_equal((m.grid == 1) | (np.asarray(cover) == 1), m.domain)
    rep = S.whyburn_check(m, cs, 0.125, 0.05)
    assert rep.disjoint and rep.cutoffs["diam_min"] == cfg.diam_min


def test_smaller_cutoff_never_grows_carpet():
    for seed in range(3):
        cfg = S.SoupConfig(**{**CHEAP, "diam_min": 0.03, "mesh": 1 / 256}, seed=seed)
        fine = S.sample_soup(cfg)
        areas = []
        for d in (0.03, 0.06, 0.12):
            soup = S.restrict_soup(fine, d)
            cs = S.outermost_boundaries(S.cluster_soup(soup, cfg.mesh), soup, cfg.mesh)
            areas.append(S.carpet_mask(cs, cfg).area_fraction())
        assert areas[0] <= areas[1] <= areas[2]


def test_pgm_image_orientation():
    m = S.carpet_mask([square_hole(0.0, 0.0, 0.5)], domain="square", mesh=1 / 8)
    img = m.pgm_image()
    assert img[-1, 0] == 0 and img[0, 0] == 255 and img.dtype == np.uint8


# ------------------------------------------------------------------ turning


def koch_like(depth, sharpen=0.0):
    """Koch construction whose generation-g spikes are (1 + sharpen * g) times taller."""
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    for g in range(depth):
        h = math.sqrt(3) / 2 * (1 + sharpen * g)
        out = [pts[0]]
        for a, b in zip(pts[:-1], pts[1:]):
            d = (b - a) / 3
            n = np.array([-d[1], d[0]])
            out += [a + d, a + 1.5 * d + h * n, a + 2 * d, b]
        pts = np.array(out)
    return pts


def test_circle_turning_baseline():
    C = circle((0, 0), 1.0, 512)[:-1]
    st_ = S.boundary_turning_stats([C], levels=3)
    assert all(c <= 1.1 for c in st_.profiles[0])
    assert S.circle_baseline(512) <= 1.1


def test_koch_profiles():
    exact = geom.turning_profile(geom.PolyCurve.from_points(koch_like(6)), 3)
    vals = [r.constant for r in exact]
    assert max(vals) - min(vals) <= 1e-9  # self-similar: the ratio is scale free
    P = koch_like(6, 0.1)
    assert geom.raster_self_intersections(P, 1e-4) == 0
    vals = [r.constant for r in geom.turning_profile(geom.PolyCurve.from_points(P), 3)]
    assert vals[0] < vals[1] < vals[2]


def test_soup_boundary_turning_exceeds_circle():
    cfg = S.SoupConfig(t_min=1e-3, t_max=0.25, diam_min=0.02, mesh=1 / 512, mc_mass_samples=4000, seed=1)
    soup = S.sample_soup(cfg)
    cs = S.outermost_boundaries(S.cluster_soup(soup, cfg.mesh), soup, cfg.mesh)
    st_ = S.boundary_turning_stats(cs)
    assert st_.n_vertices.size > 0 and np.all(st_.n_vertices >= 64)
    assert np.median(st_.ratios) >= 2.0
