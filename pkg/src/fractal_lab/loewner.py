"""Loewner driving functions and trace extraction.

Chordal traces are built by the zipper method: the tip at time t_k is
H_1^{-1} o ... o H_k^{-1}(W[k]), where H_m is the exact Loewner flow over
step m for a simple model of the driver on that step.

``slit="tilted"`` (default) models the driver on step m as
W[m-1] + (W[m] - W[m-1]) * sqrt((t - t_{m-1}) / dt). Its hull is a straight
slit at angle alpha*pi, with alpha = 1/2 - c / (2 sqrt(16 + c^2)) and
c = (W[m] - W[m-1]) / sqrt(dt), and the inverse map has the closed form

    H^{-1}(z) = W[m-1] + (u + x_l)**(1 - alpha) * (u - x_r)**alpha,  u = z - W[m]

with x_l = 2 sqrt(dt (1-alpha)/alpha), x_r = 2 sqrt(dt alpha/(1-alpha)).
The driver model is continuous, so each slit starts at the previous tip and
the traced polyline is a connected chain.

``slit="vertical"`` holds the driver at W[m] over step m (vertical slit,
H(z) = W[m] + sqrt((z - W[m])**2 + 4 dt)). It is several times faster but
each driver jump re-roots the next slit on the side of the previous one.

Radial traces use the piecewise-constant model only; with the driving point
rotated to 1 a step of duration h solves

    G(z) / (1 + G(z))**2 = e^h * z / (1 + z)**2.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp

from . import rng
from .errors import InvalidArgument, SolverFailure, UnsupportedParameter
from .geom import PolyCurve, ScalingFit, box_counting_dimension

CHORDAL_KINDS = ("chordal-BM", "chordal-rho")
RADIAL_KINDS = ("radial-BM", "radial-rho")
SLIT_MODELS = ("tilted", "vertical")
MAX_SUBSTEPS = 4096


@dataclass(frozen=True)
class Driver:
    kind: str
    kappa: float
    dt: float
    W: np.ndarray
    seed: int
    rho: float | None = None
    V: np.ndarray | None = None
    flagged: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in CHORDAL_KINDS + RADIAL_KINDS:
            raise InvalidArgument(f"unknown driver kind {self.kind!r}")
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 1 or W.size < 2 or not np.all(np.isfinite(W)):
            raise InvalidArgument("driver values must be a finite sequence of length >= 2")
        if self.dt <= 0:
            raise InvalidArgument("dt must be positive")
        object.__setattr__(self, "W", W)

    @property
    def geometry(self) -> str:
        return "chordal" if self.kind in CHORDAL_KINDS else "radial"

    @property
    def steps(self) -> int:
        return self.W.size - 1

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.W.size) * self.dt

    def shifted(self, theta: float) -> "Driver":
        V = None if self.V is None else self.V + theta
        return replace(self, W=self.W + theta, V=V)


@dataclass(frozen=True)
class SolverConfig:
    """Trace solver settings.

    ``offset`` is the height above the driving value (chordal) or the inward
    distance from the driving point (radial) of the point that is pulled back
    to give the tip; None pulls back the driving value itself, which is the
    exact tip of the discretised chain. ``tip_stride`` > 1 evaluates the tip
    only every that many steps. ``eps`` is the singularity floor used for
    swallowing checks.
    """

    eps: float = 1e-9
    offset: float | None = None
    tip_stride: int = 1
    slit: str = "tilted"

    def __post_init__(self):
        if self.eps <= 0:
            raise InvalidArgument("eps must be positive")
        if self.offset is not None and self.offset <= 0:
            raise InvalidArgument("offset must be positive")
        if self.tip_stride < 1:
            raise InvalidArgument("tip_stride must be >= 1")
        if self.slit not in SLIT_MODELS:
            raise InvalidArgument(f"slit must be one of {SLIT_MODELS}")


@dataclass(frozen=True)
class TraceCurve:
    curve: PolyCurve
    max_step: float
    swallowed: int
    step_index: np.ndarray = field(default=None)

    @property
    def z(self) -> np.ndarray:
        return self.curve.points[:, 0] + 1j * self.curve.points[:, 1]


# ------------------------------------------------------------------ drivers


def _n_steps(horizon: float, dt: float) -> int:
    if dt <= 0 or horizon <= 0:
        raise InvalidArgument("horizon and dt must be positive")
    if dt > horizon * (1 + 1e-12):
        raise InvalidArgument("dt must not exceed the horizon")
    return max(1, int(round(horizon / dt)))


def _brownian_increments(seed: int, n: int, dt: float) -> np.ndarray:
    return rng.normals(rng.stream(seed, "driver"), n) * math.sqrt(dt)


def drive_brownian(kappa: float, horizon: float, dt: float, seed: int = 0, geometry: str = "chordal") -> Driver:
    """W = sqrt(kappa) * B on the grid k*dt; radial drivers store the angle."""
    if kappa < 0:
        raise InvalidArgument("kappa must be nonnegative")
    if geometry not in ("chordal", "radial"):
        raise InvalidArgument("geometry must be 'chordal' or 'radial'")
    n = _n_steps(horizon, dt)
    W = np.empty(n + 1)
    W[0] = 0.0
    np.cumsum(math.sqrt(kappa) * _brownian_increments(seed, n, dt), out=W[1:])
    kind = "chordal-BM" if geometry == "chordal" else "radial-BM"
    return Driver(kind, float(kappa), float(dt), W, int(seed))


def _bridge_split(total: float, h: float, m: int, gen) -> np.ndarray:
    # m equal-duration pieces of a Brownian increment conditioned on its sum
    z = rng.normals(gen, m)
    out = np.empty(m)
    rest = total
    for j in range(m - 1):
        left = m - j
        out[j] = rest / left + math.sqrt(h * (left - 1) / left) * z[j]
        rest -= out[j]
    out[m - 1] = rest
    return out


def _rho_driver(kappa, rho, w0, v0, horizon, dt, seed, eps, geometry):
    if rho <= -2:
        raise UnsupportedParameter("rho <= -2 is not supported (force point absorbs the driver)")
    if kappa < 0:
        raise InvalidArgument("kappa must be nonnegative")
    n = _n_steps(horizon, dt)
    dB = _brownian_increments(seed, n, dt)
    sub_gen = rng.stream(seed, "substeps")
    sk = math.sqrt(kappa)
    two_pi = 2.0 * math.pi

    if geometry == "chordal":
        if w0 == v0:
            raise InvalidArgument("w0 and v0 must differ")
        side = 1.0 if w0 > v0 else -1.0
        lo, hi = eps, math.inf
        drift_scale = max(abs(rho), 2.0)

        def drifts(gap):
            return rho / gap, -2.0 / gap

        def room(gap):
            return abs(gap)

        gap0 = w0 - v0
    else:
        gap0 = (w0 - v0) % two_pi
        if gap0 == 0.0:
            raise InvalidArgument("w0 and v0 must differ modulo 2*pi")
        side = 1.0
        lo, hi = eps, two_pi - eps
        drift_scale = max(abs(rho) / 2.0, 1.0)

        def drifts(gap):
            c = 1.0 / math.tan(gap / 2.0)
            return 0.5 * rho * c, -c

        def room(gap):
            return min(gap, two_pi - gap)

    W = np.empty(n + 1)
    V = np.empty(n + 1)
    w = float(w0)
    v = w - gap0 if geometry == "radial" else float(v0)
    W[0], V[0] = w, v
    flagged = []

    for k in range(n):
        # gap measured on the side of the force point fixed at the start
        g = side * (w - v) if geometry == "chordal" else w - v
        r = room(g)
        m = 1
        while m < MAX_SUBSTEPS and drift_scale / max(r, eps) * dt / m > 0.1 * r:
            m *= 2
        incs = (dB[k],) if m == 1 else _bridge_split(dB[k], dt / m, m, sub_gen)
        h = dt / m
        hit = False
        for inc in incs:
            g = side * (w - v) if geometry == "chordal" else w - v
            fw, fv = drifts(g if geometry == "radial" else side * g)
            wp = w + fw * h + sk * inc
            vp = v + fv * h
            gp = side * (wp - vp) if geometry == "chordal" else wp - vp
            if lo < gp < hi:
                fw2, fv2 = drifts(gp if geometry == "radial" else side * gp)
                w = w + 0.5 * (fw + fw2) * h + sk * inc
                v = v + 0.5 * (fv + fv2) * h
            else:
                w, v = wp, vp
            g = side * (w - v) if geometry == "chordal" else w - v
            if not lo <= g <= hi:
                # push the force point, leaving the driver itself untouched
                g = lo if g < lo else hi
                v = w - side * g if geometry == "chordal" else w - g
                hit = True
        if hit:
            flagged.append(k + 1)
        W[k + 1], V[k + 1] = w, v
    return W, V, tuple(flagged)


def drive_sle_rho_chordal(kappa, rho, w0, v0, horizon, dt, seed=0, eps=1e-9) -> Driver:
    """SLE_kappa(rho) driver: dW = sqrt(kappa) dB + rho/(W-V) dt, dV = 2/(V-W) dt.

    Stochastic Heun steps on the Brownian grid of ``drive_brownian`` (same
    stream), substepped so each substep moves the drift by at most a tenth
    of the gap. A gap falling below ``eps`` is reset to ``eps`` by moving V,
    and the step is flagged.
    """
    W, V, flagged = _rho_driver(kappa, rho, w0, v0, horizon, dt, seed, eps, "chordal")
    return Driver("chordal-rho", float(kappa), float(dt), W, int(seed), float(rho), V, flagged)


def drive_sle_rho_radial(kappa, rho, w0, v0, horizon, dt, seed=0, eps=1e-9) -> Driver:
    """Radial SLE_kappa(rho) driver (angles): drift (rho/2) cot((W-V)/2), dV = -cot((W-V)/2) dt.

    The gap W - V is kept in (0, 2*pi).
    """
    W, V, flagged = _rho_driver(kappa, rho, w0, v0, horizon, dt, seed, eps, "radial")
    return Driver("radial-rho", float(kappa), float(dt), W, int(seed), float(rho), V, flagged)


# ------------------------------------------------------------------ kernels

def _tilted_params(W: np.ndarray, dt: float):
    """Per-step slit angle fraction alpha and prong lengths x_l, x_r (stable forms)."""
    c = np.diff(W) / math.sqrt(dt)
    S = np.sqrt(16.0 + c * c)
    big = S + np.abs(c)  # no cancellation
    small = 16.0 / big  # equals S - |c|
    pos = c >= 0
    alpha = np.where(pos, small, big) / (2.0 * S)
    beta = np.where(pos, big, small) / (2.0 * S)
    root = math.sqrt(dt)
    xl = 0.5 * root * np.where(pos, big, small)
    xr = 0.5 * root * np.where(pos, small, big)
    return alpha, beta, xl, xr


@njit(cache=True, nogil=True)
def _zip_vertical(W, four_h, offset, steps):
    # Sweep the maps from the newest down, applying map m to every tip born
    # at or after step m. Real arithmetic keeps the inner loop vectorisable;
    # the root taken is the one in the closed upper half-plane, on the same
    # side of the slit as the input point.
    n = steps.size
    zr = np.empty(n)
    zi = np.empty(n)
    for a in range(n):
        zr[a] = W[steps[a]]
        zi[a] = offset if steps[a] > 0 else 0.0
    lo = n
    for m in range(steps[n - 1], 0, -1):
        while lo > 0 and steps[lo - 1] >= m:
            lo -= 1
        x = W[m]
        for a in range(lo, n):
            ur = zr[a] - x
            ui = zi[a]
            wa = ur * ur - ui * ui - four_h
            wb = 2.0 * ur * ui
            r = math.sqrt(wa * wa + wb * wb)
            if wa >= 0.0:
                p = math.sqrt(0.5 * (r + wa))
                q = abs(wb) / (2.0 * p) if p > 0.0 else 0.0
            else:
                q = math.sqrt(0.5 * (r - wa))
                p = abs(wb) / (2.0 * q)
            zr[a] = x + math.copysign(p, ur)
            zi[a] = q
    return zr + 1j * zi


@njit(cache=True, nogil=True)
def _zip_tilted(W, alpha, beta, xl, xr, offset, steps):
    # f(u) = (u - x_r) * ((u + x_l) / (u - x_r))**beta; the ratio has
    # argument in [-pi, 0] for u in the closed upper half-plane, so the
    # principal power is the right branch (with -0.0 forced onto the
    # lower edge, which is where the slit base maps).
    n = steps.size
    zr = np.empty(n)
    zi = np.empty(n)
    for a in range(n):
        zr[a] = W[steps[a]]
        zi[a] = offset if steps[a] > 0 else 0.0
    lo = n
    for m in range(steps[n - 1], 0, -1):
        while lo > 0 and steps[lo - 1] >= m:
            lo -= 1
        x0 = W[m - 1]
        x1 = W[m]
        be = beta[m - 1]
        l = xl[m - 1]
        r = xr[m - 1]
        for a in range(lo, n):
            ur = zr[a] - x1
            ui = zi[a] if zi[a] > 0.0 else 0.0
            a1 = ur + l
            a2 = ur - r
            den = a2 * a2 + ui * ui
            rr = (a1 * a2 + ui * ui) / den
            ri = -(ui * (l + r)) / den
            mod = math.exp(0.5 * be * math.log(rr * rr + ri * ri))
            ph = be * math.atan2(ri, rr)
            p = mod * math.cos(ph)
            q = mod * math.sin(ph)
            zr[a] = x0 + a2 * p - ui * q
            zi[a] = a2 * q + ui * p
    return zr + 1j * zi


@njit(cache=True, nogil=True)
def _upper(u):
    return complex(u.real, u.imag if u.imag > 0.0 else 0.0)


@njit(cache=True, nogil=True)
def _vertical_forward(w, four_h):
    # inverse of u -> sqrt(u^2 - 4h) on the upper half-plane
    s = cmath.sqrt(w * w + four_h)
    if s.imag < 0.0 or (s.imag == 0.0 and s.real * w.real < 0.0):
        s = -s
    return s


@njit(cache=True, nogil=True)
def _tilted_slit(u, alpha, beta, l, r):
    u = _upper(u)
    return cmath.exp(beta * cmath.log(u + l) + alpha * cmath.log(u - r))


@njit(cache=True, nogil=True)
def _tilted_forward(w, alpha, beta, l, r):
    # solve f(u) = w by damped Newton from the vertical-slit guess
    if alpha == 0.5:
        return _vertical_forward(w, l * r), True
    shift = beta * l - alpha * r  # f(u) = u + shift + O(1/u)
    u = _vertical_forward(w - shift, l * r)
    scale = 1.0 + abs(w)
    for _ in range(100):
        f = _tilted_slit(u, alpha, beta, l, r)
        res = f - w
        if abs(res) <= 1e-15 * scale:
            return u, True
        d = f * (beta / (_upper(u) + l) + alpha / (_upper(u) - r))
        if d == 0.0:
            return u, False
        step = res / d
        lam = 1.0
        nu = u - step
        while nu.imag < 0.0 and lam > 1e-6:
            lam *= 0.5
            nu = u - lam * step
        if nu.imag < 0.0:
            nu = complex(nu.real, 0.0)
        if abs(nu - u) <= 1e-16 * (1.0 + abs(u)):
            return nu, True
        u = nu
    return u, abs(_tilted_slit(u, alpha, beta, l, r) - w) <= 1e-12 * scale


@njit(cache=True, nogil=True)
def _flow_chordal(z, W, alpha, beta, xl, xr, tilted, dt, m0, k_full, frac, eps):
    # returns (value, step, status): status 0 done, 1 swallowed, 2 no convergence.
    # Runs of steps with a constant driver are merged into one vertical-slit
    # step (the flows form a semigroup), which is exact and avoids rounding
    # build-up near the slit.
    last = k_full + 1 if frac > 0.0 else k_full
    m = m0
    while m <= last:
        part = frac if m == k_full + 1 else 1.0
        x0 = W[m - 1] if tilted else W[m]
        if abs(z - x0) < eps:
            return z, m, 1
        if tilted and W[m] != x0:
            s = math.sqrt(part)
            u, ok = _tilted_forward(z - x0, alpha[m - 1], beta[m - 1], xl[m - 1] * s, xr[m - 1] * s)
            if not ok:
                return z, m, 2
            z = x0 + (W[m] - x0) * s + u
            m += 1
            continue
        h = part
        e = m
        while e + 1 <= last and W[e + 1] == x0:
            e += 1
            h += frac if e == k_full + 1 else 1.0
        z = x0 + _vertical_forward(z - x0, 4.0 * dt * h)
        m = e + 1
    return z, -1, 0


@njit(cache=True, nogil=True)
def _inner_root(c):
    # root inside the unit disk of c z^2 + (2c - 1) z + c = 0
    b = 1.0 - 2.0 * c
    s = cmath.sqrt(1.0 - 4.0 * c)
    den = b + s
    alt = b - s
    if abs(alt) > abs(den):
        den = alt
    if den == 0.0:
        return 1.0 + 0.0j
    return 2.0 * c / den


@njit(cache=True, nogil=True)
def _radial_map(z, xi, growth):
    # growth = e^{+h} for the forward step, e^{-h} for the inverse
    u = z / xi
    return xi * _inner_root(growth * u / ((1.0 + u) * (1.0 + u)))


@njit(cache=True, nogil=True)
def _zip_radial(W, shrink, radius, steps):
    n = steps.size
    z = np.empty(n, dtype=np.complex128)
    for a in range(n):
        z[a] = cmath.exp(1j * W[steps[a]]) * (radius if steps[a] > 0 else 1.0)
    lo = n
    for m in range(steps[n - 1], 0, -1):
        while lo > 0 and steps[lo - 1] >= m:
            lo -= 1
        xi = cmath.exp(1j * W[m])
        for a in range(lo, n):
            z[a] = _radial_map(z[a], xi, shrink)
    return z


@njit(cache=True, nogil=True)
def _flow_radial(z, W, dt, k_full, frac, eps):
    grow = math.exp(dt)
    for m in range(1, k_full + 2):
        if m == k_full + 1:
            if frac <= 0.0:
                break
            grow = math.exp(dt * frac)
        xi = cmath.exp(1j * W[m])
        if abs(z - xi) < eps:
            return z, m, 1
        z = _radial_map(z, xi, grow)
    return z, -1, 0


# ------------------------------------------------------------------- traces


def _tip_steps(n: int, stride: int) -> np.ndarray:
    steps = np.arange(0, n + 1, stride, dtype=np.int64)
    if steps[-1] != n:
        steps = np.append(steps, n)
    return steps


def _finish(z, steps, driver, radial):
    bad = ~np.isfinite(z)
    if np.any(bad):
        raise SolverFailure("trace composition overflowed", int(steps[np.argmax(bad)]))
    swallowed = int(np.sum(np.abs(z) > 1 + 1e-12)) if radial else int(np.sum(z.imag < 0))
    t = steps * driver.dt
    step = float(np.abs(np.diff(z)).max()) if z.size > 1 else 0.0
    return TraceCurve(PolyCurve.from_complex(z, times=t), step, swallowed, steps)


def chordal_trace(driver: Driver, config: SolverConfig = SolverConfig()) -> TraceCurve:
    """Zipper trace for a chordal driver; starts at (W_0, 0)."""
    if driver.geometry != "chordal":
        raise InvalidArgument("chordal_trace needs a chordal driver")
    offset = 0.0 if config.offset is None else config.offset
    steps = _tip_steps(driver.steps, config.tip_stride)
    if config.slit == "vertical":
        z = _zip_vertical(driver.W, 4.0 * driver.dt, offset, steps)
    else:
        alpha, beta, xl, xr = _tilted_params(driver.W, driver.dt)
        z = _zip_tilted(driver.W, alpha, beta, xl, xr, offset, steps)
    return _finish(z, steps, driver, radial=False)


def radial_slit_tip(h: float) -> float:
    """Distance from 0 of the tip of a radial slit grown from 1 for time h."""
    return float(_inner_root(math.exp(-h) / 4.0).real)


def radial_trace(driver: Driver, config: SolverConfig = SolverConfig()) -> TraceCurve:
    """Zipper trace for a radial driver in the unit disk, from e^{i W_0} towards 0.

    The driver is held at W[m] over step m (the ``slit`` option applies to
    chordal traces only).
    """
    if driver.geometry != "radial":
        raise InvalidArgument("radial_trace needs a radial driver")
    radius = 1.0 if config.offset is None else 1.0 - config.offset
    steps = _tip_steps(driver.steps, config.tip_stride)
    z = _zip_radial(driver.W, math.exp(-driver.dt), radius, steps)
    return _finish(z, steps, driver, radial=True)


def whole_plane_trace(
    kappa: float,
    rho: float | None = None,
    cutoff_a: float = 0.125,
    horizon: float = 0.0,
    dt: float = 1e-3,
    seed: int = 0,
    config: SolverConfig = SolverConfig(),
    force_gap: float = math.pi,
) -> TraceCurve:
    """Approximate whole-plane SLE from 0 to infinity by inverting radial SLE.

    Radial SLE in the disk of radius ``cutoff_a`` from ``cutoff_a`` to 0 is
    mapped by w -> cutoff_a**2 / w, which sends the start point to itself and
    the target to infinity. Curve times are whole-plane capacity times
    (log conformal radius); the curve is run until time ``horizon``, i.e. for
    radial time ``horizon + log(1/cutoff_a)``. For SLE(rho) the force point
    starts ``force_gap`` radians behind the driver.
    """
    if not 0 < cutoff_a <= 0.25:
        raise InvalidArgument("cutoff_a must lie in (0, 1/4]")
    duration = horizon + math.log(1.0 / cutoff_a)
    if duration <= 0:
        raise InvalidArgument("horizon must exceed log(cutoff_a)")
    if rho is None:
        drv = drive_brownian(kappa, duration, dt, seed, geometry="radial")
    else:
        drv = drive_sle_rho_radial(kappa, rho, 0.0, -force_gap, duration, dt, seed, eps=config.eps)
    tr = radial_trace(drv, config)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = cutoff_a / tr.z
    if not np.all(np.isfinite(w)):
        raise SolverFailure("radial trace reached the origin", int(np.argmax(~np.isfinite(w))))
    t = tr.curve.times + math.log(cutoff_a)
    step = float(np.abs(np.diff(w)).max())
    return TraceCurve(PolyCurve.from_complex(w, times=t), step, tr.swallowed, tr.step_index)


# -------------------------------------------------------------- forward map


@dataclass(frozen=True)
class ForwardResult:
    value: complex
    swallowed: bool
    swallow_step: int | None = None


def _ode_step(z, x0, x1, h, dt_full):
    """Integrate one tilted step of the chordal Loewner ODE numerically."""
    c = (x1 - x0) / math.sqrt(dt_full)

    def rhs(s, y):
        d = 2.0 / (complex(y[0], y[1]) - (x0 + c * math.sqrt(s)))
        return [d.real, d.imag]

    sol = solve_ivp(rhs, (0.0, h), [z.real, z.imag], method="DOP853", rtol=1e-12, atol=1e-14)
    if not sol.success:
        return None
    return complex(sol.y[0, -1], sol.y[1, -1])


def forward_map(driver: Driver, z: complex, t: float, config: SolverConfig = SolverConfig()) -> ForwardResult:
    """g_t(z) for the discretised driver.

    Each step is flowed exactly with the same driver model the trace uses
    (closed form for vertical and radial steps, a Newton solve of the slit
    map for tilted steps, with a numerical ODE step as fallback). A point is
    reported swallowed when it comes within ``config.eps`` of the driving
    value at the start of a step.
    """
    if t < 0 or t > driver.horizon * (1 + 1e-12):
        raise InvalidArgument(f"t={t} outside [0, {driver.horizon}]")
    z = complex(z)
    if driver.geometry == "chordal" and z.imag < 0:
        raise InvalidArgument("chordal forward map needs z in the closed upper half-plane")
    if driver.geometry == "radial" and abs(z) > 1:
        raise InvalidArgument("radial forward map needs z in the closed unit disk")
    if t == 0:
        return ForwardResult(z, False)
    k_full = min(int(math.floor(t / driver.dt + 1e-9)), driver.steps)
    frac = max(0.0, t / driver.dt - k_full)
    if frac < 1e-12 or k_full == driver.steps:
        frac = 0.0
    if driver.geometry == "radial":
        value, hit, status = _flow_radial(z, driver.W, driver.dt, k_full, frac, config.eps)
        return ForwardResult(complex(value), status == 1, int(hit) if status == 1 else None)
    tilted = config.slit == "tilted"
    if tilted:
        alpha, beta, xl, xr = _tilted_params(driver.W, driver.dt)
    else:
        alpha = beta = xl = xr = np.zeros(1)
    m0 = 1
    while True:
        value, hit, status = _flow_chordal(
            z, driver.W, alpha, beta, xl, xr, tilted, driver.dt, m0, k_full, frac, config.eps
        )
        if status == 0:
            return ForwardResult(complex(value), False)
        if status == 1:
            return ForwardResult(complex(value), True, int(hit))
        m = int(hit)
        part = frac if m == k_full + 1 else 1.0
        h = driver.dt * part
        x1 = driver.W[m - 1] + (driver.W[m] - driver.W[m - 1]) * math.sqrt(part)
        nz = _ode_step(complex(value), driver.W[m - 1], x1, h, h)
        if nz is None:
            raise SolverFailure("forward step did not converge", m)
        z = nz
        m0 = m + 1


def trace_dimension(trace: TraceCurve, scales=None) -> ScalingFit:
    """Box-counting slope of the trace samples over dyadic scales 1 .. 2^-11.

    Scales below four times the median sample spacing are left out of the
    fit, as is the largest one.
    """
    scales = 2.0 ** -np.arange(0, 12) if scales is None else scales
    return box_counting_dimension(trace.curve.points, scales)
