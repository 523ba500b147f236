"""Command line entry point.

Exit codes: 0 when every check passed, 2 when a statistical threshold was
breached, 1 on any error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace

import numpy as np

from .config import KINDS, ConfigError, ExperimentConfig, ResultRecord, default_config, load_config, output_dir
from .io import write_csv, write_results
from .render import plot_outcome, render_svg

__all__ = ["main", "build_parser", "selftest"]

OK, ERROR, BREACH = 0, 1, 2


def _set_threads(n: int) -> int:
    import warnings

    import numba

    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    with warnings.catch_warnings():
        # numba reports unusable threading layers on first use
        warnings.simplefilter("ignore")
        numba.set_num_threads(n)
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critperc", description="Critical site percolation on the hexagonal lattice.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--out", default=None, help="output directory (default: $CRITPERC_OUT or ./critperc-out)")
    common.add_argument("--threads", type=int, default=1, help="worker processes and numba threads")
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, parents=[common], help=f"run the {kind} experiment")
        s.add_argument("--config", default=None, help="JSON config file")
        s.add_argument("-n", "--samples", type=int, default=None, help="sample count (overrides the config)")
        s.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    r = sub.add_parser("render", parents=[common], help="SVG of the loops of one colouring of the unit disk")
    r.add_argument("--mesh", type=float, default=1 / 16)
    r.add_argument("--min-diameter", type=float, default=0.0, help="only draw loops at least this large")
    sub.add_parser("selftest", parents=[common], help="fast end-to-end checks")
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config, args.command) if args.config else default_config(args.command)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.samples is not None:
        cfg = replace(cfg, n=args.samples)
    return cfg


def _report(records) -> None:
    for r in records:
        flag = {True: "PASS", False: "FAIL", None: "    "}[r.passed]
        extra = "" if np.isnan(r.stderr) else f" +- {r.stderr:.4g}"
        print(f"{flag} {r.experiment:24s} {json.dumps(r.params, sort_keys=True)} {r.estimate:.6g}{extra}")


def run_kind(args) -> int:
    from .experiments import run_experiment

    cfg = _config(args)
    out = output_dir(args.out or cfg.out) / cfg.kind
    workers = _set_threads(args.threads)
    t0 = time.perf_counter()
    res = run_experiment(cfg, workers)
    write_results(out, cfg, res.records, res.tables, res.passed)
    if not args.no_figures:
        plot_outcome(cfg.kind, res.tables, out)
    _report(res.records)
    print(f"{'passed' if res.passed else 'threshold breach'} in {time.perf_counter() - t0:.1f} s; output in {out}")
    return OK if res.passed else BREACH


def run_render(args) -> int:
    from ..hexlattice import DomainSpec, delta_approximation
    from ..loopbuilder import run
    from ..percolation import sample

    spec = DomainSpec.disk(radius=1.0)
    D = delta_approximation(spec, args.mesh)
    seed = 0 if args.seed is None else args.seed
    loops = run(D, sample(D.hexes, seed, mesh=D.mesh).as_dict())
    keep = [l for l in loops if l.diameter >= args.min_diameter]
    out = output_dir(args.out)
    path = out / f"loops_seed{seed}.svg"
    render_svg(keep, domain=spec, path=path)
    write_csv(out / f"loops_seed{seed}.csv",
              [{"loop": i, "orientation": l.orientation, "vertices": len(l), "diameter": l.diameter}
               for i, l in enumerate(keep)])
    print(f"{len(keep)} loops written to {path}")
    return OK


def selftest(seed: int = 0, workers: int = 1) -> list[ResultRecord]:
    """Small, fast versions of the main checks."""
    from ..cardy import CardyQuery, cardy_phi
    from ..hexlattice import DomainSpec, delta_approximation
    from ..loopbuilder import run
    from ..percolation import BLUE, sample, trace_contours
    from .engine import QuadGrid
    from .experiments import crossing_samples, rectangle_phi_quadrature

    recs = []
    D = delta_approximation(DomainSpec.disk(radius=8.0), 1.0)
    bad = 0
    for k in range(20):
        col = sample(D.hexes, seed, k).as_dict()
        bad += run(D, col).keys() != trace_contours(col, D.hexes, BLUE).keys()
    recs.append(ResultRecord("selftest-contours", {"runs": 20}, float(bad), oracle=0.0, passed=bad == 0))
    x = crossing_samples(QuadGrid.rhombus(20), 4000, seed, workers)
    m, se = float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x)))
    recs.append(ResultRecord("selftest-rhombus", {"n": len(x)}, m, se, 0.5, (m - 0.5) / se, passed=abs(m - 0.5) < 4 * se))
    a = cardy_phi(CardyQuery(DomainSpec.rectangle(0, 2, 0, 1), 1j, 0j, 2 + 0j, 2 + 1j))
    b = rectangle_phi_quadrature(2.0)
    recs.append(ResultRecord("selftest-cardy-oracle", {"aspect": 2.0}, a, oracle=b, statistic=abs(a - b),
                             passed=abs(a - b) < 1e-6))
    return recs


def run_selftest(args) -> int:
    workers = _set_threads(args.threads)
    recs = selftest(0 if args.seed is None else args.seed, workers)
    _report(recs)
    out = output_dir(args.out) / "selftest"
    write_csv(out / "results.csv", [r.row() for r in recs])
    return OK if all(r.passed for r in recs) else BREACH


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors are errors, not threshold breaches
        return OK if exc.code in (0, None) else ERROR
    try:
        if args.command in KINDS:
            return run_kind(args)
        if args.command == "render":
            return run_render(args)
        return run_selftest(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"critperc: error: {exc}", file=sys.stderr)
        return ERROR
    except Exception as exc:  # noqa: BLE001
        print(f"critperc: unexpected error: {exc!r}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
