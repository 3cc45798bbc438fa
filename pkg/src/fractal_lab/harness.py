"""Experiment registry, config handling and artifact emission.

An experiment is a function of (validated config, master seed) that writes
data files into an output directory and returns flat metrics plus one
verdict per acceptance predicate. ``run_experiment`` adds ``result.json``
and, last, ``manifest.json`` with a SHA-256 digest of every file, which is
verified by reading the files back.

Replicate r of an experiment draws its module seed from
``rng.derive_seed(master_seed, name, ..., r)``, and replicates are mapped in
order, so artifacts do not depend on the number of worker threads
(``FRACTAL_LAB_THREADS``, 0 or unset = one per CPU).
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, brownian, geom, io, loewner, loopsoup, percolation, rng, validation
from .errors import FractalLabError, InvalidArgument

THREADS_ENV = "FRACTAL_LAB_THREADS"


class InvalidConfig(FractalLabError, ValueError):
    """Config failed schema validation; ``errors`` maps field -> message."""

    def __init__(self, errors: dict):
        self.errors = dict(errors)
        super().__init__("; ".join(f"{k}: {v}" for k, v in sorted(self.errors.items())))


class UnknownExperiment(FractalLabError, KeyError):
    def __str__(self):
        return f"unknown experiment {self.args[0]!r}; see `fractal-lab list`"


# ------------------------------------------------------------------ schema


@dataclass(frozen=True)
class Field:
    kind: str  # "int", "float", "str", "bool" or "ints"
    default: Any
    help: str = ""
    low: float | None = None
    high: float | None = None
    choices: tuple | None = None
    optional: bool = False

    def parse(self, value):
        if value is None or (isinstance(value, str) and value.strip().lower() in ("none", "")):
            if self.optional:
                return None
            raise ValueError("a value is required")
        if self.kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value) if not isinstance(value, str) else int(value.strip())
        if self.kind == "float":
            if isinstance(value, str):
                v = value.strip()
                if "/" in v:
                    num, den = v.split("/", 1)
                    return float(num) / float(den)
                return float(v)
            return float(value)
        if self.kind == "bool":
            if isinstance(value, (bool, np.bool_)):
                return bool(value)
            if isinstance(value, (int, np.integer)) and value in (0, 1):
                return bool(value)
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {value!r}")
        if self.kind == "ints":
            parts = value.split(",") if isinstance(value, str) else list(np.atleast_1d(value))
            out = tuple(int(str(p).strip()) for p in parts if str(p).strip())
            if not out:
                raise ValueError("expected a comma-separated list of integers")
            return out
        return str(value)

    def check(self, v) -> str | None:
        if v is None:
            return None
        values = v if self.kind == "ints" else (v,)
        for x in values:
            if self.kind in ("int", "float", "ints"):
                if not math.isfinite(x):
                    return "must be finite"
                if self.low is not None and x < self.low:
                    return f"must be >= {self.low}"
                if self.high is not None and x > self.high:
                    return f"must be <= {self.high}"
            if self.choices is not None and x not in self.choices:
                return f"must be one of {', '.join(map(str, self.choices))}"
        return None

    def render(self, v) -> str:
        if v is None:
            return "none"
        if self.kind == "ints":
            return ",".join(str(x) for x in v)
        if self.kind == "bool":
            return "1" if v else "0"
        if self.kind == "float":
            return repr(float(v))
        return str(v)


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    schema: dict
    runner: Callable
    budget_seconds: float = 600.0

    def defaults(self) -> dict:
        return {k: f.default for k, f in self.schema.items()}

    def validate(self, config=None) -> dict:
        """Defaults overlaid with ``config`` (strings or values), type-checked field by field."""
        config = dict(config or {})
        errors = {}
        params = {}
        for key in config:
            if key.replace("-", "_") not in self.schema:
                errors[key] = "unknown field"
        raw = {k.replace("-", "_"): v for k, v in config.items()}
        for key, f in self.schema.items():
            try:
                params[key] = f.parse(raw.get(key, f.default))
            except (TypeError, ValueError) as exc:
                errors[key] = str(exc) or "invalid value"
                continue
            msg = f.check(params[key])
            if msg:
                errors[key] = msg
        if not errors and self.name in _CROSS_CHECKS:
            errors.update(_CROSS_CHECKS[self.name](params))
        if errors:
            raise InvalidConfig(errors)
        return params


REGISTRY: dict[str, Experiment] = {}
_CROSS_CHECKS: dict[str, Callable[[dict], dict]] = {}


def experiment(name: str, description: str, budget_seconds: float = 600.0, **schema: Field):
    def register(fn):
        REGISTRY[name] = Experiment(name, description, schema, fn, budget_seconds)
        return fn

    return register


def get_experiment(name: str) -> Experiment:
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownExperiment(name) from None


@dataclass(frozen=True)
class ExperimentInfo:
    name: str
    description: str
    defaults: dict
    budget_seconds: float


def list_experiments() -> list[ExperimentInfo]:
    """Registered experiments, sorted by name, with their default configs."""
    return [
        ExperimentInfo(e.name, e.description, e.defaults(), e.budget_seconds)
        for e in (REGISTRY[k] for k in sorted(REGISTRY))
    ]


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise InvalidArgument(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def load_config_file(path) -> dict:
    return parse_config_text(Path(path).read_text(), str(path))


# -------------------------------------------------------------- execution


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        text = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            threads = int(text)
        except ValueError:
            raise InvalidArgument(f"{THREADS_ENV} must be an integer, got {text!r}") from None
    if threads < 0:
        raise InvalidArgument("thread count must be >= 0")
    return threads if threads > 0 else (os.cpu_count() or 1)


@dataclass
class RunContext:
    name: str
    params: dict
    seed: int
    out: Path
    threads: int
    artifacts: list = field(default_factory=list)

    def replicate_seed(self, *keys) -> int:
        return rng.derive_seed(self.seed, self.name, *keys)

    def map(self, fn, items) -> list:
        items = list(items)
        if self.threads <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=min(self.threads, len(items))) as pool:
            return list(pool.map(fn, items))

    def path(self, filename: str) -> Path:
        self.artifacts.append(filename)
        return self.out / filename


@dataclass(frozen=True)
class ExperimentResult:
    name: str
    metrics: dict
    verdicts: dict
    artifacts: tuple
    out_dir: Path
    params: dict = field(default_factory=dict)
    seed: int = 0
    elapsed_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 2


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_experiment(name: str, config=None, master_seed: int = 0, out_dir=None, threads: int | None = None) -> ExperimentResult:
    """Validate, run, and write artifacts, result.json and (last) manifest.json."""
    exp = get_experiment(name)
    params = exp.validate(config)
    if not 0 <= int(master_seed) < 2**64:
        raise InvalidArgument("master seed must lie in [0, 2^64)")
    seed = int(master_seed)
    out = Path(out_dir) if out_dir is not None else Path("runs") / f"{name}-seed{seed}"
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(name, params, seed, out, resolve_threads(threads))
    started = _now()
    t0 = time.perf_counter()
    metrics, verdicts = exp.runner(ctx)
    elapsed = time.perf_counter() - t0
    verdicts = {k: bool(v) for k, v in sorted(verdicts.items())}
    metrics = {k: metrics[k] for k in sorted(metrics)}
    record = {
        "experiment": name,
        "params": {k: exp.schema[k].render(v) for k, v in params.items()},
        "master_seed": seed,
        "tool_version": __version__,
        "metrics": metrics,
        "verdicts": verdicts,
        "passed": all(verdicts.values()),
        "artifacts": sorted(ctx.artifacts),
    }
    io.write_json(ctx.path("result.json"), record)
    files = sorted(set(ctx.artifacts))
    manifest = {
        "experiment": name,
        "params": record["params"],
        "master_seed": seed,
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "elapsed_seconds": round(elapsed, 3),
        "budget_seconds": exp.budget_seconds,
        "threads": ctx.threads,
        "files": [{"path": f, "sha256": sha256_file(out / f), "bytes": (out / f).stat().st_size} for f in files],
    }
    mpath = io.write_json(out / "manifest.json", manifest)
    verify_manifest(mpath)
    return ExperimentResult(name, metrics, verdicts, tuple(files), out, params, seed, elapsed)


def verify_manifest(path) -> None:
    """Re-read a manifest and check every listed digest against the file on disk."""
    path = Path(path)
    manifest = io.read_json(path)
    for entry in manifest["files"]:
        f = path.parent / entry["path"]
        if not f.exists():
            raise FractalLabError(f"manifest lists missing file {entry['path']}")
        if sha256_file(f) != entry["sha256"]:
            raise FractalLabError(f"digest mismatch for {entry['path']}")


# ------------------------------------------------------------ experiments


def _strictly_increasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) > 0))


def _profile_rows(profiles, tag_cols):
    for tag, reps in zip(tag_cols, profiles):
        for k, rep in enumerate(reps, 1):
            yield (*tag, k, rep.n_points, rep.constant, int(rep.infinite))


@experiment(
    "bm-turning",
    "Turning constants of Brownian traces or graphs on nested refinements",
    budget_seconds=600,
    dims=Field("int", 2, "spatial dimension", low=1, high=3),
    mode=Field("str", "trace", "trace (t -> B_t) or graph (t -> (t, B_t))", choices=("trace", "graph")),
    depth=Field("int", 14, "dyadic sampling depth", low=4, high=brownian.MAX_DEPTH),
    levels=Field("int", 3, "refinement levels", low=2, high=8),
    replicates=Field("int", 50, "number of independent paths", low=1),
    max_points=Field("int", 2048, "points at the finest level", low=16, high=8192),
)
def _bm_turning(ctx: RunContext):
    p = ctx.params

    def one(r):
        path = brownian.sample_bm(p["dims"], p["depth"], 1.0, ctx.replicate_seed(r))
        curve = path.trace_curve() if p["mode"] == "trace" else brownian.graph_curve(path)
        return geom.turning_profile(curve, p["levels"], p["max_points"])

    profiles = ctx.map(one, range(p["replicates"]))
    io.write_csv(
        ctx.path("turning_profile.csv"),
        ["replicate", "level", "n_points", "constant", "infinite"],
        _profile_rows(profiles, [(r,) for r in range(p["replicates"])]),
    )
    consts = np.array([[rep.constant for rep in reps] for reps in profiles])
    med = np.median(consts, axis=0)
    metrics = {f"median_level_{k + 1}": float(m) for k, m in enumerate(med)}
    metrics["growth_fraction"] = float(np.mean(consts[:, -1] > consts[:, 0]))
    return metrics, {"median_profile_strictly_increasing": _strictly_increasing(med)}


def lemma31_ratios(path: brownian.BrownianPath, hit: brownian.DyadicEventHit) -> tuple[float, float]:
    """Trace and graph turning ratios at the endpoints of a dyadic hit interval."""
    stride = 2 ** (path.depth - hit.level)
    lo, hi = hit.index * stride, (hit.index + 1) * stride
    seg = path.values[lo : hi + 1]
    trace_ratio = geom.point_set_diameter(seg) / float(np.linalg.norm(seg[-1] - seg[0]))
    g = np.column_stack([path.times[lo : hi + 1], seg])
    graph_ratio = geom.point_set_diameter(g) / float(np.linalg.norm(g[-1] - g[0]))
    return trace_ratio, graph_ratio


@experiment(
    "bm-lemma31",
    "Dyadic small-increment/large-excursion events and the turning ratios they force",
    budget_seconds=120,
    dims=Field("ints", (1, 2), "comma-separated spatial dimensions", low=1, high=3),
    a=Field("float", 3.0, "excursion factor", low=2.0),
    level=Field("int", 12, "dyadic scan level", low=1, high=brownian.MAX_DEPTH),
    depth=Field("int", 20, "path depth", low=2, high=brownian.MAX_DEPTH),
    replicates=Field("int", 50, "paths per dimension", low=1),
    hit_rate=Field("float", 0.95, "required fraction of paths with a hit", low=0.0, high=1.0),
)
def _bm_lemma31(ctx: RunContext):
    p = ctx.params
    rows, metrics, verdicts = [], {}, {}
    tr_min = gr_min = math.inf
    for d in p["dims"]:

        def one(r, d=d):
            path = brownian.sample_bm(d, p["depth"], 1.0, ctx.replicate_seed(d, r))
            hits = brownian.dyadic_event_scan(path, p["a"], p["level"])
            return [(h, *lemma31_ratios(path, h)) for h in hits]

        per_path = ctx.map(one, range(p["replicates"]))
        for r, hits in enumerate(per_path):
            for h, tr, gr in hits:
                rows.append((d, r, h.level, h.index, h.increment_norm, h.max_excursion, tr, gr))
                tr_min, gr_min = min(tr_min, tr), min(gr_min, gr)
        frac = float(np.mean([len(h) > 0 for h in per_path]))
        metrics[f"hit_fraction_dims{d}"] = frac
        metrics[f"hits_total_dims{d}"] = int(sum(len(h) for h in per_path))
        verdicts[f"hit_fraction_dims{d}"] = frac >= p["hit_rate"]
    io.write_csv(
        ctx.path("dyadic_hits.csv"),
        ["dims", "replicate", "level", "index", "increment_norm", "max_excursion", "trace_ratio", "graph_ratio"],
        rows,
    )
    metrics["min_trace_ratio"] = tr_min
    metrics["min_graph_ratio"] = gr_min
    verdicts["trace_ratio_at_least_a_over_2"] = tr_min >= p["a"] / 2
    verdicts["graph_ratio_at_least_a_over_3"] = gr_min >= p["a"] / 3
    return metrics, verdicts


_SLE_FIELDS = dict(
    kappa=Field("float", 2.0, "SLE parameter", low=0.0, high=8.0),
    rho=Field("float", None, "force-point weight (none = plain SLE)", low=-2.0, optional=True),
    force_gap=Field("float", 1.0, "initial driver-to-force-point gap", low=1e-6),
    horizon=Field("float", 1.0, "capacity time horizon", low=1e-6),
    dt=Field("float", 1e-4, "driver time step", low=1e-8),
    slit=Field("str", "tilted", "chordal slit model", choices=loewner.SLIT_MODELS),
    tip_stride=Field("int", 1, "evaluate the tip every this many steps", low=1),
)


def _sle_driver(p, seed):
    if p["geometry"] == "chordal":
        if p["rho"] is None:
            return loewner.drive_brownian(p["kappa"], p["horizon"], p["dt"], seed)
        return loewner.drive_sle_rho_chordal(p["kappa"], p["rho"], 0.0, -p["force_gap"], p["horizon"], p["dt"], seed)
    if p["rho"] is None:
        return loewner.drive_brownian(p["kappa"], p["horizon"], p["dt"], seed, geometry="radial")
    return loewner.drive_sle_rho_radial(p["kappa"], p["rho"], 0.0, -p["force_gap"], p["horizon"], p["dt"], seed)


def sle_trace_for(p: dict, seed: int):
    """(driver or None, trace) for an experiment parameter record."""
    cfg = loewner.SolverConfig(tip_stride=p["tip_stride"], slit=p["slit"])
    if p["geometry"] == "whole-plane":
        tr = loewner.whole_plane_trace(
            p["kappa"], p["rho"], p["cutoff_a"], p["horizon"], p["dt"], seed, cfg, p["force_gap"]
        )
        return None, tr
    drv = _sle_driver(p, seed)
    tr = loewner.chordal_trace(drv, cfg) if p["geometry"] == "chordal" else loewner.radial_trace(drv, cfg)
    return drv, tr


def _sle_cross_check(p):
    if p["dt"] > p["horizon"]:
        return {"dt": "must not exceed horizon"}
    return {}


@experiment(
    "sle-trace",
    "SLE traces by the zipper method with box-counting dimension and simplicity checks",
    budget_seconds=600,
    geometry=Field("str", "chordal", "chordal, radial or whole-plane", choices=("chordal", "radial", "whole-plane")),
    cutoff_a=Field("float", 0.125, "whole-plane inversion radius", low=1e-6, high=0.25),
    replicates=Field("int", 4, "independent traces", low=1),
    resolution=Field("float", 1e-3, "raster resolution of the self-intersection test", low=1e-9),
    **_SLE_FIELDS,
)
def _sle_trace(ctx: RunContext):
    p = ctx.params

    def one(r):
        return sle_trace_for(p, ctx.replicate_seed(r))

    results = ctx.map(one, range(p["replicates"]))
    slopes, crossings, swallowed, steps = [], [], [], []
    for r, (drv, tr) in enumerate(results):
        io.write_points_csv(ctx.path(f"trace_{r:03d}.csv"), tr.curve.points, tr.curve.times)
        if drv is not None:
            io.write_driver_csv(ctx.path(f"driver_{r:03d}.csv"), drv)
        slopes.append(loewner.trace_dimension(tr).slope)
        crossings.append(geom.raster_self_intersections(tr.curve.points, p["resolution"]))
        swallowed.append(tr.swallowed)
        steps.append(tr.max_step)
    io.write_csv(
        ctx.path("trace_summary.csv"),
        ["replicate", "box_dimension", "self_intersections", "swallowed", "max_step"],
        zip(range(len(slopes)), slopes, crossings, swallowed, steps),
    )
    ref = 1.0 + min(p["kappa"], 8.0) / 8.0
    dim = float(np.mean(slopes))
    simple = float(np.mean(np.asarray(crossings) == 0))
    metrics = {
        "box_dimension_mean": dim,
        "box_dimension_reference": ref,
        "simple_fraction": simple,
        "swallowed_total": int(sum(swallowed)),
        "max_step": float(max(steps)),
    }
    verdicts = {"box_dimension_within_0.15": abs(dim - ref) <= 0.15}
    if p["kappa"] <= 4 and p["rho"] is None:
        verdicts["simple_fraction_at_least_0.95"] = simple >= 0.95
    return metrics, verdicts


_CROSS_CHECKS["sle-trace"] = _sle_cross_check


@experiment(
    "sle-turning",
    "Turning profiles of chordal SLE traces on nested refinements",
    budget_seconds=600,
    levels=Field("int", 3, "refinement levels", low=2, high=8),
    replicates=Field("int", 4, "independent traces", low=1),
    max_points=Field("int", 4096, "points at the finest level", low=16, high=8192),
    **{**_SLE_FIELDS, "kappa": Field("float", 3.0, "SLE parameter", low=0.0, high=8.0)},
)
def _sle_turning(ctx: RunContext):
    p = dict(ctx.params, geometry="chordal")

    def one(r):
        _, tr = sle_trace_for(p, ctx.replicate_seed(r))
        return geom.turning_profile(tr.curve, p["levels"], p["max_points"])

    profiles = ctx.map(one, range(p["replicates"]))
    io.write_csv(
        ctx.path("turning_profile.csv"),
        ["replicate", "level", "n_points", "constant", "infinite"],
        _profile_rows(profiles, [(r,) for r in range(p["replicates"])]),
    )
    consts = np.array([[rep.constant for rep in reps] for reps in profiles])
    med = np.median(consts, axis=0)
    metrics = {f"median_level_{k + 1}": float(m) for k, m in enumerate(med)}
    metrics["growth_fraction"] = float(np.mean(consts[:, -1] > consts[:, 0]))
    return metrics, {"median_profile_strictly_increasing": _strictly_increasing(med)}


_CROSS_CHECKS["sle-turning"] = _sle_cross_check


@experiment(
    "sle-validate",
    "Loewner solver checks against closed forms and SLE(rho) reductions",
    budget_seconds=180,
    dt=Field("float", 1e-4, "step for the zero-driver and forward-map checks", low=1e-7, high=0.1),
    kappa=Field("float", 2.0, "kappa of the random drivers", low=0.0, high=8.0),
    ks_seeds=Field("int", 1000, "drivers per sample in the KS tests", low=50),
    ks_dt=Field("float", 1e-2, "step of the KS-test drivers", low=1e-5, high=0.5),
    ks_level=Field("float", 0.01, "KS significance level", low=1e-6, high=0.5),
    gap_dt=Field("float", 1e-3, "step of the kappa = 0 gap checks", low=1e-6, high=0.1),
    rho=Field("float", 1.0, "rho of the kappa = 0 gap checks", low=-1.99),
)
def _sle_validate(ctx: RunContext):
    p = ctx.params
    checks = validation.run_all(
        dt=p["dt"],
        kappa=p["kappa"],
        ks_seeds=p["ks_seeds"],
        ks_dt=p["ks_dt"],
        gap_dt=p["gap_dt"],
        rho=p["rho"],
        seed=ctx.replicate_seed("checks"),
        ks_level=p["ks_level"],
    )
    io.write_csv(
        ctx.path("checks.csv"),
        ["check", "value", "bound", "passed"],
        ((c.name, c.value, c.bound, c.passed) for c in checks),
    )
    metrics = {c.name: c.value for c in checks}
    verdicts = {c.name: c.passed for c in checks}
    return metrics, verdicts


_PERC_FIELDS = dict(
    n=Field("int", 2, "ambient dimension", low=1, high=4),
    l=Field("int", 3, "subdivision factor", low=2, high=16),
)


@experiment(
    "perc-dim",
    "Fractal percolation level counts, dimension and connectivity",
    budget_seconds=300,
    p=Field("float", 0.7, "retention probability", low=1e-9, high=1.0),
    depth=Field("int", 6, "levels", low=2, high=24),
    replicates=Field("int", 20, "independent trees", low=1),
    **_PERC_FIELDS,
)
def _perc_dim(ctx: RunContext):
    q = ctx.params

    def one(r):
        tree = percolation.sample_percolation(q["n"], q["l"], q["p"], q["depth"], ctx.replicate_seed(r))
        dim = percolation.dimension_check(tree).fit if tree.survived and tree.counts()[-1] > 1 else None
        conn = percolation.disconnection_stats(tree) if tree.survived else None
        return tree if r == 0 else None, tree.counts(), dim, conn

    out = ctx.map(one, range(q["replicates"]))
    counts = np.array([o[1] for o in out])
    io.write_csv(
        ctx.path("level_counts.csv"),
        ["replicate", "level", "count"],
        ((r, k, int(c)) for r, row in enumerate(counts) for k, c in enumerate(row)),
    )
    io.write_csv(
        ctx.path("replicates.csv"),
        ["replicate", "survived", "dim_estimate", "largest_component_cells", "component_count",
         "perfectness_min_gap", "disconnectedness_modulus"],
        (
            (r, int(c is not None), d.slope if d else math.nan,
             *(c.to_dict().values() if c else (0, 0, math.nan, math.nan)))
            for r, (_, _, d, c) in enumerate(out)
        ),
    )
    tree0 = out[0][0]
    io.write_csv(ctx.path("cells_000.csv"), ["level", "address"], percolation.cell_rows(tree0))
    if tree0.n <= 3:
        io.write_pgm(ctx.path("cells_000.pgm"), percolation.deepest_raster(tree0))
    ref = percolation.reference_dimension(q["n"], q["l"], q["p"])
    slopes = [d.slope for _, _, d, _ in out if d is not None]
    dim = float(np.mean(slopes)) if slopes else math.nan
    metrics = {"dim_estimate": dim, "reference": ref, "survivors": len(slopes)}
    # The band uses the exact Galton-Watson variance, which stays honest for
    # a handful of replicates where the sample variance would not.
    inside = True
    for k in range(1, q["depth"] + 1):
        m_k, var_k = percolation.level_count_moments(q["n"], q["l"], q["p"], k)
        value = float(counts[:, k].mean())
        metrics[f"mean_count_level_{k}"] = value
        inside &= abs(value - m_k) <= 3.0 * math.sqrt(var_k / len(counts))
    verdicts = {"dim_within_0.1": bool(slopes) and abs(dim - ref) <= 0.1,
                "mean_counts_within_3sigma": inside}
    return metrics, verdicts


@experiment(
    "perc-survival",
    "Survival probability of fractal percolation by depth",
    budget_seconds=300,
    p=Field("float", 1.0 / 9.0, "retention probability", low=1e-9, high=1.0),
    depth=Field("int", 12, "levels", low=1, high=64),
    replicates=Field("int", 1000, "independent trees", low=100),
    max_survival=Field("float", 0.05, "bound on survival at or below the threshold", low=0.0, high=1.0),
    **_PERC_FIELDS,
)
def _perc_survival(ctx: RunContext):
    q = ctx.params
    curve = percolation.survival_curve(q["n"], q["l"], q["p"], q["depth"], q["replicates"], ctx.replicate_seed("survival"))
    io.write_csv(
        ctx.path("survival.csv"),
        ["depth", "survival", "radius", "replicates"],
        ((d, e.value, e.radius, e.samples) for d, e in enumerate(curve, 1)),
    )
    thr = percolation.extinction_threshold(q["n"], q["l"])
    metrics = {"survival": curve[-1].value, "radius": curve[-1].radius, "threshold": thr}
    verdicts = {"survival_monotone_in_depth": bool(np.all(np.diff([e.value for e in curve]) <= 0))}
    if q["p"] <= thr * (1 + 1e-12):
        verdicts["survival_below_bound"] = curve[-1].value <= q["max_survival"]
    return metrics, verdicts


_SOUP_FIELDS = dict(
    domain=Field("str", "square", "square or disk", choices=loopsoup.DOMAINS),
    kappa=Field("float", 4.0, "CLE parameter in (8/3, 4]", low=8.0 / 3.0, high=4.0),
    t_min=Field("float", 1e-4, "minimum loop duration", low=1e-9),
    t_max=Field("float", 0.25, "maximum loop duration", low=1e-9),
    diam_min=Field("float", 0.02, "minimum loop diameter", low=1e-6),
    mesh=Field("float", 1.0 / 1024, "raster mesh", low=1e-5),
    mc_mass_samples=Field("int", 20000, "Monte Carlo samples for the loop mass", low=100),
    replicates=Field("int", 2, "independent soups", low=1),
)


def _soup_cross_check(p):
    errors = {}
    if not p["t_min"] < p["t_max"]:
        errors["t_min"] = "must be below t_max"
    if p["mesh"] > p["diam_min"] / 4:
        errors["mesh"] = "must be at most diam_min / 4"
    if p["kappa"] <= 8.0 / 3.0:
        errors["kappa"] = "must exceed 8/3"
    return errors


def soup_config(p: dict, seed: int, mass_seed: int) -> loopsoup.SoupConfig:
    return loopsoup.SoupConfig(
        p["domain"], p["kappa"], None, p["t_min"], p["t_max"], p["diam_min"], p["mesh"], p["mc_mass_samples"], seed, mass_seed
    )


def build_soup(cfg: loopsoup.SoupConfig):
    """Sample, cluster (tol = mesh) and extract outermost boundaries."""
    loops = loopsoup.sample_soup(cfg)
    clusters = loopsoup.cluster_soup(loops, cfg.mesh)
    return loops, loopsoup.outermost_boundaries(clusters, loops, cfg.mesh)


@experiment(
    "cle-carpet",
    "Loop-soup CLE carpet raster with Whyburn-condition diagnostics",
    budget_seconds=600,
    eps_density=Field("float", 0.125, "square side of the density check", low=1e-6),
    eps_diam=Field("float", 0.05, "diameter threshold of the decay check", low=1e-6),
    density_min=Field("float", 0.95, "required density fraction", low=0.0, high=1.0),
    density_rate=Field("float", 0.9, "required fraction of soups meeting density_min", low=0.0, high=1.0),
    export_loops=Field("bool", False, "also write every loop polyline (large)"),
    **_SOUP_FIELDS,
)
def _cle_carpet(ctx: RunContext):
    p = ctx.params
    mass_seed = ctx.replicate_seed("mass")

    def one(r):
        cfg = soup_config(p, ctx.replicate_seed(r), mass_seed)
        loops, cs = build_soup(cfg)
        mask = loopsoup.carpet_mask(cs, cfg)
        report = loopsoup.whyburn_check(mask, cs, p["eps_density"], p["eps_diam"])
        return loops, cs, mask, report, loopsoup.carpet_dimension(mask).slope

    out = ctx.map(one, range(p["replicates"]))
    rows = []
    for r, (loops, cs, mask, rep, dim) in enumerate(out):
        if p["export_loops"]:
            io.write_polylines_csv(ctx.path(f"loops_{r:03d}.csv"), loops.loops)
        io.write_polylines_csv(ctx.path(f"boundaries_{r:03d}.csv"), cs.boundaries, id_name="boundary_id")
        io.write_pgm(ctx.path(f"carpet_{r:03d}.pgm"), mask.pgm_image())
        io.write_json(ctx.path(f"whyburn_{r:03d}.json"), dict(rep.to_dict(), carpet_dimension=dim))
        rows.append((r, len(loops), len(cs), len(cs.boundaries), rep.min_boundary_distance, int(rep.disjoint),
                     rep.count_above_diam, rep.density_fraction, mask.area_fraction(), dim))
    io.write_csv(
        ctx.path("carpet_summary.csv"),
        ["replicate", "loops", "clusters", "boundaries", "min_boundary_distance", "disjoint",
         "count_above_diam", "density_fraction", "area_fraction", "carpet_dimension"],
        rows,
    )
    dens = np.array([r[7] for r in rows])
    dims = np.array([r[9] for r in rows])
    metrics = {
        "disjoint_fraction": float(np.mean([r[5] for r in rows])),
        "density_fraction_mean": float(dens.mean()),
        "density_pass_fraction": float(np.mean(dens >= p["density_min"])),
        "carpet_dimension_mean": float(dims.mean()),
        "carpet_dimension_reference": 2.0 - (3 * p["kappa"] - 8) * (8 - p["kappa"]) / (32 * p["kappa"]),
        "loops_mean": float(np.mean([r[1] for r in rows])),
        "loop_mass": loopsoup.truncated_loop_mass(soup_config(p, 0, mass_seed)).value,
    }
    verdicts = {
        "boundaries_disjoint_all": metrics["disjoint_fraction"] == 1.0,
        "density_rate_met": metrics["density_pass_fraction"] >= p["density_rate"],
        "carpet_dimension_in_1.6_2.0": bool(np.all((dims >= 1.6) & (dims <= 2.0))),
    }
    return metrics, verdicts


_CROSS_CHECKS["cle-carpet"] = _soup_cross_check


@experiment(
    "cle-turning",
    "Turning constants of outermost loop-soup cluster boundaries against circles",
    budget_seconds=300,
    levels=Field("int", 3, "refinement levels", low=2, high=6),
    min_vertices=Field("int", 64, "skip boundaries with fewer vertices", low=8),
    ratio_min=Field("float", 2.0, "required median ratio to the circle baseline", low=0.0),
    **_SOUP_FIELDS,
)
def _cle_turning(ctx: RunContext):
    p = ctx.params
    mass_seed = ctx.replicate_seed("mass")

    def one(r):
        cfg = soup_config(p, ctx.replicate_seed(r), mass_seed)
        _, cs = build_soup(cfg)
        return loopsoup.boundary_turning_stats(cs, p["levels"], p["min_vertices"])

    out = ctx.map(one, range(p["replicates"]))
    rows = []
    for r, bt in enumerate(out):
        for b in range(len(bt.n_vertices)):
            rows.append((r, b, int(bt.n_vertices[b]), *bt.profiles[b], bt.max_constants[b], bt.baselines[b], bt.ratios[b]))
    io.write_csv(
        ctx.path("boundary_turning.csv"),
        ["replicate", "boundary", "n_vertices", *[f"level_{k + 1}" for k in range(p["levels"])],
         "max_constant", "circle_baseline", "ratio"],
        rows,
    )
    ratios = np.concatenate([bt.ratios for bt in out]) if out else np.zeros(0)
    growth = np.concatenate([bt.growth() for bt in out]) if out else np.zeros(0, dtype=bool)
    med = float(np.median(ratios)) if ratios.size else math.nan
    metrics = {
        "median_ratio": med,
        "boundaries": int(ratios.size),
        "growth_fraction": float(growth.mean()) if growth.size else math.nan,
    }
    return metrics, {"median_ratio_at_least_min": bool(ratios.size) and med >= p["ratio_min"]}


_CROSS_CHECKS["cle-turning"] = _soup_cross_check
