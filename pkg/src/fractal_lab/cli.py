"""Command-line entry point: ``fractal-lab <experiment> [--key value]... [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__, harness
from .errors import FractalLabError

log = logging.getLogger("fractal_lab")

EXIT_OK, EXIT_ERROR, EXIT_PREDICATE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fractal-lab",
        description="Run reproducible random-fractal experiments and write CSV/PGM/JSON artifacts.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", metavar="<experiment>")
    sub.required = True
    sub.add_parser("list", help="list experiments with their default configs")
    for exp in (harness.REGISTRY[k] for k in sorted(harness.REGISTRY)):
        p = sub.add_parser(exp.name, help=exp.description, description=exp.description)
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out", default=None, help="output directory (default runs/<experiment>-seed<N>)")
        p.add_argument("--config", default=None, help="flat key = value file; command-line keys override it")
        p.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${harness.THREADS_ENV}, 0 = auto)")
        p.add_argument("-q", "--quiet", action="store_true", help="only print the verdict line")
        group = p.add_argument_group("experiment parameters")
        for key, f in exp.schema.items():
            shown = f.render(f.default)
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            group.add_argument(*flags, dest=f"param_{key}", default=None, metavar=f.kind.upper(),
                               help=f"{f.help} (default {shown})")
    return parser


def _print_listing() -> None:
    for info in harness.list_experiments():
        print(f"{info.name}: {info.description}")
        exp = harness.get_experiment(info.name)
        for key, value in info.defaults.items():
            print(f"    {key} = {exp.schema[key].render(value)}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if args.experiment == "list":
        _print_listing()
        return EXIT_OK
    try:
        config = harness.load_config_file(args.config) if args.config else {}
        for key, value in vars(args).items():
            if key.startswith("param_") and value is not None:
                config[key[len("param_"):]] = value
        result = harness.run_experiment(args.experiment, config, args.seed, args.out, args.threads)
    except harness.InvalidConfig as exc:
        for key, msg in sorted(exc.errors.items()):
            log.error("invalid config: %s: %s", key, msg)
        return EXIT_ERROR
    except (FractalLabError, OSError, ValueError) as exc:
        log.error("error: %s", exc)
        return EXIT_ERROR
    if not args.quiet:
        for key, value in result.metrics.items():
            print(f"{key} = {value}")
        for key, ok in result.verdicts.items():
            print(f"[{'PASS' if ok else 'FAIL'}] {key}")
    print(f"{result.name}: {'PASS' if result.passed else 'FAIL'} ({result.elapsed_seconds:.1f}s) -> {result.out_dir}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
