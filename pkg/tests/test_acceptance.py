"""Acceptance criteria at full tolerance.

Each test prints one PASS/FAIL line (collected again in the terminal
summary). Criteria that cannot be met are left failing; the analysis is in
the project notes.
"""
import math
import time

import numpy as np
import pytest

from fractal_lab import harness, loopsoup, percolation, rng, validation

pytestmark = pytest.mark.acceptance


def run(name, config, seed=0, out=None, threads=1):
    return harness.run_experiment(name, config, seed, out, threads)


def test_c01_lemma31_signature(tmp_path, acceptance):
    t0 = time.perf_counter()
    r = run("bm-lemma31", dict(dims="1,2", a=3.0, level=12, depth=20, replicates=200), out=tmp_path)
    dt = time.perf_counter() - t0
    m = r.metrics
    ok = r.passed and dt <= 120
    acceptance(
        1, ok,
        f"hit fractions d1={m['hit_fraction_dims1']:.3f} d2={m['hit_fraction_dims2']:.3f} (need 0.95), "
        f"min trace ratio {m['min_trace_ratio']:.3f} (>= 1.5), min graph ratio {m['min_graph_ratio']:.3f} (>= 1.0), {dt:.0f}s",
    )
    assert ok


def test_c02_turning_divergence(tmp_path, acceptance):
    t0 = time.perf_counter()
    bm = run("bm-turning", dict(dims=2, mode="trace", replicates=50), out=tmp_path / "a")
    graph = run("bm-turning", dict(dims=1, mode="graph", replicates=50), out=tmp_path / "b")
    sle = run("sle-turning", dict(kappa=3.0, dt=1e-4, replicates=50), out=tmp_path / "c")
    dt = time.perf_counter() - t0

    def med(r):
        return ", ".join(f"{r.metrics[f'median_level_{k}']:.2f}" for k in (1, 2, 3))

    ok = bm.passed and graph.passed and sle.passed and dt <= 600
    acceptance(2, ok, f"medians BM trace [{med(bm)}], BM graph [{med(graph)}], SLE k=3 [{med(sle)}], {dt:.0f}s")
    assert ok


def test_c03_loewner_correctness(acceptance):
    t0 = time.perf_counter()
    trace = validation.zero_driver_trace_error(1e-4)
    fwd = validation.forward_map_error(2j, 1.0, 1e-4)
    hydro = max(validation.hydrodynamic_ratio(2.0, 1e-4, rng.derive_seed(0, "hydro", s)) for s in range(3))
    dt = time.perf_counter() - t0
    ok = trace <= 1e-9 and fwd <= 1e-8 and hydro <= 1.0 and dt <= 60
    acceptance(3, ok, f"trace err {trace:.1e} (1e-9), forward rel err {fwd:.1e} (1e-8), "
                      f"hydrodynamic residual/bound {hydro:.2f} (<= 1), {dt:.0f}s")
    assert ok


def test_c04_sle_simplicity(tmp_path, acceptance):
    t0 = time.perf_counter()
    r = run("sle-trace", dict(kappa=2.0, dt=1e-4, horizon=1.0, replicates=100, resolution=1e-3), out=tmp_path)
    dt = time.perf_counter() - t0
    frac = r.metrics["simple_fraction"]
    ok = frac >= 0.95 and dt <= 300
    acceptance(4, ok, f"simple fraction {frac:.2f} over 100 seeds (need 0.95), {dt:.0f}s")
    assert ok


def test_c05_sle_dimension(tmp_path, acceptance):
    t0 = time.perf_counter()
    r = run("sle-trace", dict(kappa=2.0, dt=1e-5, horizon=1.0, replicates=20, tip_stride=25), out=tmp_path)
    dt = time.perf_counter() - t0
    d = r.metrics["box_dimension_mean"]
    ok = abs(d - 1.25) <= 0.15 and dt <= 600
    acceptance(5, ok, f"mean box dimension {d:.3f} (1.25 +- 0.15) over 20 seeds, {dt:.0f}s")
    assert ok


def test_c06_sle_rho_reductions(acceptance):
    t0 = time.perf_counter()
    pc = validation.rho_zero_ks_pvalue(2.0, "chordal", 1000, 1e-2, 0)
    pr = validation.rho_zero_ks_pvalue(2.0, "radial", 1000, 1e-2, 0)
    gc = validation.gap_error_chordal(1.0, 1e-3)
    gr = validation.gap_error_radial(1.0, 1e-3)
    dt = time.perf_counter() - t0
    ok = pc >= 0.01 and pr >= 0.01 and gc <= 1e-6 and gr <= 1e-6 and dt <= 120
    acceptance(6, ok, f"KS p chordal {pc:.3f} radial {pr:.3f} (>= 0.01), gap err chordal {gc:.1e} "
                      f"radial {gr:.1e} (<= 1e-6), {dt:.0f}s")
    assert ok


def test_c07_percolation(acceptance):
    t0 = time.perf_counter()
    n, l, p, depth = 2, 3, 0.7, 6
    counts = np.array([percolation.sample_percolation(n, l, p, depth, rng.derive_seed(0, "c7", s)).counts()
                       for s in range(1000)])
    mean = p * l**n
    se = counts.std(axis=0, ddof=1) / math.sqrt(counts.shape[0])
    z = np.abs(counts.mean(0)[1:] - mean ** np.arange(1, depth + 1)) / se[1:]
    surv = percolation.survival_probability(2, 3, 1 / 9, 12, 1000, rng.derive_seed(0, "c7s"))
    slopes = []
    for s in range(40):
        t = percolation.sample_percolation(2, 3, 0.7, 7, rng.derive_seed(0, "c7d", s))
        if t.survived and t.counts()[-1] > 1:
            slopes.append(percolation.dimension_check(t).fit.slope)
    dim = float(np.mean(slopes))
    dt = time.perf_counter() - t0
    ok = bool(np.all(z <= 3)) and surv.value <= 0.05 and abs(dim - 1.675) <= 0.1 and dt <= 300
    acceptance(7, ok, f"max count z-score {z.max():.2f} (<= 3), critical survival {surv.value:.3f} (<= 0.05), "
                      f"dimension {dim:.3f} (1.675 +- 0.1), {dt:.0f}s")
    assert ok


def test_c08_loop_soup_poisson(acceptance):
    t0 = time.perf_counter()
    base = dict(t_min=1e-2, t_max=0.25, diam_min=0.05, mesh=1 / 256, mc_mass_samples=20000)
    mass = loopsoup.truncated_loop_mass(loopsoup.SoupConfig(**base))
    counts = np.array([len(loopsoup.sample_soup(loopsoup.SoupConfig(**base, seed=rng.derive_seed(0, "c8", s)), mass))
                       for s in range(200)])
    disp = counts.var(ddof=1) / counts.mean()
    ks = np.linspace(8 / 3, 4, 101)[1:]
    c = np.array([loopsoup.intensity_for_kappa(k) for k in ks])
    dt = time.perf_counter() - t0
    ok = 0.8 <= disp <= 1.2 and loopsoup.intensity_for_kappa(4.0) == 1.0 and bool(np.all(np.diff(c) > 0)) and dt <= 300
    acceptance(8, ok, f"dispersion {disp:.3f} (0.8..1.2), mean count {counts.mean():.1f} vs c*Lambda {mass.value:.1f}, "
                      f"c(4) = {loopsoup.intensity_for_kappa(4.0)}, c increasing, {dt:.0f}s")
    assert ok


CLE_SEEDS = 50


@pytest.fixture(scope="module")
def cle_soups():
    """Outermost boundaries and carpets of 50 kappa = 4 soups at the reference cutoffs."""
    t0 = time.perf_counter()
    base = dict(t_min=1e-4, t_max=0.25, diam_min=0.02, mesh=1 / 1024)
    mass_seed = rng.derive_seed(0, "cle-mass")
    out = []
    for s in range(CLE_SEEDS):
        cfg = loopsoup.SoupConfig(**base, seed=rng.derive_seed(0, "cle", s), mass_seed=mass_seed)
        _, cs = harness.build_soup(cfg)
        out.append((cfg, cs))
    return out, time.perf_counter() - t0


def test_c09_whyburn(cle_soups, acceptance):
    soups, build = cle_soups
    t0 = time.perf_counter()
    disjoint, dens, dims = [], [], []
    for cfg, cs in soups:
        mask = loopsoup.carpet_mask(cs, cfg)
        rep = loopsoup.whyburn_check(mask, cs, 0.125, 0.05)
        disjoint.append(rep.disjoint)
        dens.append(rep.density_fraction)
        dims.append(loopsoup.carpet_dimension(mask).slope)
    dt = build + time.perf_counter() - t0
    dens, dims = np.array(dens), np.array(dims)
    rate = float(np.mean(dens >= 0.95))
    ok = all(disjoint) and rate >= 0.9 and bool(np.all((dims >= 1.6) & (dims <= 2.0))) and dt <= 600
    acceptance(9, ok, f"disjoint {np.mean(disjoint):.0%}, density >= 0.95 in {rate:.0%} (need 90%), "
                      f"carpet dimension {dims.mean():.3f} [{dims.min():.3f}, {dims.max():.3f}] (band 1.6..2.0), {dt:.0f}s")
    assert ok


def test_c10_non_quasicircle(cle_soups, acceptance):
    soups, build = cle_soups
    t0 = time.perf_counter()
    per_seed = []
    for _, cs in soups:
        bt = loopsoup.boundary_turning_stats(cs, levels=3, min_vertices=64)
        if bt.ratios.size:
            per_seed.append(float(np.median(bt.ratios)))
    dt = time.perf_counter() - t0
    med = float(np.median(per_seed))
    ok = len(per_seed) == len(soups) and med >= 2.0 and dt <= 300
    acceptance(10, ok, f"median max-turning / circle baseline {med:.2f} (>= 2) over {len(per_seed)} seeds, "
                       f"{dt:.0f}s plus shared soups")
    assert ok


def test_c11_determinism(tmp_path, acceptance):
    t0 = time.perf_counter()
    bad = []
    for info in harness.list_experiments():
        digests = []
        for threads in (1, 4, 8):
            out = tmp_path / f"{info.name}-{threads}"
            r = run(info.name, {}, seed=11, out=out, threads=threads)
            digests.append({f: harness.sha256_file(out / f) for f in r.artifacts})
        if not digests[0] == digests[1] == digests[2]:
            bad.append(info.name)
    dt = time.perf_counter() - t0
    ok = not bad
    acceptance(11, ok, f"{len(harness.REGISTRY)} experiments x threads 1/4/8 byte-identical"
                       + (f"; differing: {', '.join(bad)}" if bad else "") + f", {dt:.0f}s")
    assert ok
