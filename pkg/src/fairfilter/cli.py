"""Command line entry point: ``run``, ``report``, ``gradcheck`` and ``synth``."""
from __future__ import annotations

import argparse
import inspect
import logging
import sys
import time
from pathlib import Path

from .data import save_dataset, synth_biased_graph
from .experiment import ConfigError, RunConfig, report_file, run
from .nsgff import gradient_suite

GRAD_TOLERANCE = 1e-4


def _parse_params(items) -> dict:
    """``key=value`` pairs for the synthetic generator, values cast to int or float where they parse."""
    params = {}
    for item in items:
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        key, raw = item.split("=", 1)
        for cast in (int, float):
            try:
                params[key] = cast(raw)
                break
            except ValueError:
                continue
        else:
            raise ValueError(f"{key}: not a number: {raw!r}")
    return params


def cmd_run(args) -> int:
    config = RunConfig.load(args.config)
    path = run(config, workers=args.workers)
    print(path)
    return 0


def cmd_report(args) -> int:
    sys.stdout.write(report_file(args.results))
    return 0


def cmd_gradcheck(args) -> int:
    start = time.perf_counter()
    records = gradient_suite(configs=args.configs, depths=tuple(args.depths), seed=args.seed)
    worst = max(r.error for r in records)
    for r in records:
        if args.verbose or r.error >= GRAD_TOLERANCE:
            print(f"trial={r.trial} mode={r.mode} depth={r.depth} filter={r.filter} delta0={r.delta0:g} rel_err={r.error:.3e}")
    ok = worst < GRAD_TOLERANCE
    print(f"{len(records)} checks, max relative error {worst:.3e}, {time.perf_counter() - start:.1f}s: {'ok' if ok else 'FAILED'}")
    return 0 if ok else 1


def cmd_synth(args) -> int:
    params = _parse_params(args.params)
    allowed = set(inspect.signature(synth_biased_graph).parameters)
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ValueError(f"unknown generator parameters {unknown}; expected some of {sorted(allowed)}")
    ds = synth_biased_graph(**params)
    prefix = Path(args.out) if args.out else Path(ds.name)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    edges, attrs = (prefix.parent / (prefix.name + ext) for ext in (".edges", ".attrs"))
    save_dataset(ds, edges, attrs)
    print(f"{edges}\n{attrs}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairfilter", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute an experiment config (JSON)")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None, help="override the config's worker count")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="Markdown table from a results CSV")
    p.add_argument("results")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gradcheck", help="compare hand-derived gradients with finite differences")
    p.add_argument("--configs", type=int, default=20)
    p.add_argument("--depths", type=int, nargs="+", default=[3, 6, 9])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write a synthetic biased dataset as edge and attribute files")
    p.add_argument("params", nargs="*", help="generator arguments as key=value, e.g. n_per_group=100 p_inter=0.01")
    p.add_argument("--out", help="output path prefix (default: the dataset name)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
