"""Loewner solver checks against closed forms.

With a zero driver the chordal trace is the vertical segment 2i sqrt(t) and
g_t(z) = sqrt(z^2 + 4t). Any driver satisfies g_t(z) = z + 2t/z + O(|z|^-2)
at infinity. With kappa = 0 the SLE(rho) gap X = W - V solves
dX = (rho + 2)/X dt in the chordal case, so X_t^2 = X_0^2 + 2 (rho + 2) t,
and d(theta) = (rho/2 + 1) cot(theta/2) dt in the radial case, so
cos(theta_t/2) = cos(theta_0/2) exp(-(rho + 2) t / 4). With rho = 0 the
SLE(rho) driver has the law of the plain driver.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp

from . import loewner, rng


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    passed: bool


def _zero_driver(horizon: float, dt: float) -> loewner.Driver:
    n = max(1, int(round(horizon / dt)))
    return loewner.Driver("chordal-BM", 0.0, horizon / n, np.zeros(n + 1), 0)


def zero_driver_trace_error(dt: float = 1e-4, horizon: float = 1.0, slit: str = "tilted") -> float:
    drv = _zero_driver(horizon, dt)
    tr = loewner.chordal_trace(drv, loewner.SolverConfig(slit=slit))
    exact = 2j * np.sqrt(tr.curve.times)
    return float(np.abs(tr.z - exact).max())


def upper_sqrt(w: complex) -> complex:
    r = cmath.sqrt(w)
    return -r if r.imag < 0 or (r.imag == 0 and r.real < 0) else r


def forward_map_error(z: complex = 2j, t: float = 1.0, dt: float = 1e-4, slit: str = "tilted") -> float:
    """|g_t(z) - sqrt(z^2 + 4t)| / max(1, |sqrt(z^2 + 4t)|) for the zero driver."""
    drv = _zero_driver(max(t, dt), dt)
    g = loewner.forward_map(drv, z, t, loewner.SolverConfig(slit=slit)).value
    exact = upper_sqrt(z * z + 4.0 * t)
    return abs(g - exact) / max(1.0, abs(exact))


def hydrodynamic_ratio(kappa: float, dt: float, seed: int, radius: float = 1e3, t: float = 1.0) -> float:
    """max over three directions of |g_t(z) - z - 2t/z| / (10 t |z|^-2)."""
    drv = loewner.drive_brownian(kappa, t, dt, seed)
    worst = 0.0
    for angle in (math.pi / 4, math.pi / 2, 3 * math.pi / 4):
        z = radius * cmath.exp(1j * angle)
        g = loewner.forward_map(drv, z, t).value
        worst = max(worst, abs(g - z - 2.0 * t / z) / (10.0 * t / radius**2))
    return worst


def rho_zero_ks_pvalue(kappa: float, geometry: str, seeds: int, dt: float, seed: int, horizon: float = 1.0) -> float:
    """Two-sample KS p-value of W(horizon) - W(0): SLE(0) drivers against plain drivers.

    The two samples use disjoint seed families.
    """
    a, b = np.empty(seeds), np.empty(seeds)
    for r in range(seeds):
        s_rho = rng.derive_seed(seed, "rho", geometry, r)
        s_bm = rng.derive_seed(seed, "plain", geometry, r)
        if geometry == "chordal":
            d = loewner.drive_sle_rho_chordal(kappa, 0.0, 0.0, -1.0, horizon, dt, s_rho)
        else:
            d = loewner.drive_sle_rho_radial(kappa, 0.0, 0.0, -math.pi, horizon, dt, s_rho)
        a[r] = d.W[-1] - d.W[0]
        b[r] = loewner.drive_brownian(kappa, horizon, dt, s_bm, geometry=geometry).W[-1]
    return float(ks_2samp(a, b).pvalue)


def gap_error_chordal(rho: float, dt: float, x0: float = 1.0, horizon: float = 1.0) -> float:
    d = loewner.drive_sle_rho_chordal(0.0, rho, x0, 0.0, horizon, dt)
    exact = np.sqrt(x0**2 + 2.0 * (rho + 2.0) * d.times)
    return float(np.abs((d.W - d.V) - exact).max())


def gap_error_radial(rho: float, dt: float, theta0: float = math.pi / 2, horizon: float = 1.0) -> float:
    d = loewner.drive_sle_rho_radial(0.0, rho, 0.0, -theta0, horizon, dt)
    exact = 2.0 * np.arccos(math.cos(theta0 / 2) * np.exp(-(rho + 2.0) * d.times / 4.0))
    return float(np.abs((d.W - d.V) - exact).max())


def run_all(dt=1e-4, kappa=2.0, ks_seeds=1000, ks_dt=1e-2, gap_dt=1e-3, rho=1.0, seed=0, ks_level=0.01) -> list[Check]:
    checks = []
    e = zero_driver_trace_error(dt)
    checks.append(Check("zero_driver_trace_error", e, 1e-9, e <= 1e-9))
    e = max(forward_map_error(z, 1.0, dt) for z in (2j, 1 + 1j, -0.5 + 0.25j))
    checks.append(Check("forward_map_rel_error", e, 1e-8, e <= 1e-8))
    e = hydrodynamic_ratio(kappa, dt, rng.derive_seed(seed, "hydro"))
    checks.append(Check("hydrodynamic_residual_over_bound", e, 1.0, e <= 1.0))
    for geometry in ("chordal", "radial"):
        pv = rho_zero_ks_pvalue(kappa, geometry, ks_seeds, ks_dt, seed)
        checks.append(Check(f"rho0_ks_pvalue_{geometry}", pv, ks_level, pv >= ks_level))
    e = gap_error_chordal(rho, gap_dt)
    checks.append(Check("kappa0_gap_error_chordal", e, 1e-6, e <= 1e-6))
    e = gap_error_radial(rho, gap_dt)
    checks.append(Check("kappa0_gap_error_radial", e, 1e-6, e <= 1e-6))
    return checks
