"""Command line interface: ``techrank {ingest,rank,compare,bench}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 walker did
not converge (only with ``--strict``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .exceptions import ConfigError, TechRankError
from .ingestion import write_edges_csv, write_investments_csv
from .pipeline import (
    bench,
    compare_rankings,
    ingest,
    load_config,
    rank,
    read_external_ranks,
    read_ranking_csv,
    write_bench_csv,
    write_report,
)

log = logging.getLogger("techrank")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="YAML or JSON run configuration")
    p.add_argument("--seed", type=int, help="seed for company subset sampling")
    p.add_argument("--subset", type=int, help="rank a random subset of N companies")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--grid", help='calibration grid "amin,amax,bmin,bmax,step"')
    p.add_argument("--tolerance", type=float, help="walker convergence tolerance")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="walker iteration cap")
    p.add_argument("--n-jobs", type=int, dest="n_jobs", help="parallel workers for the grid search")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="techrank", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse CSV exports and write the graphs")
    _common(p)

    p = sub.add_parser("rank", help="calibrate (alpha, beta) and rank both layers")
    _common(p)
    p.add_argument("--trajectory", action="store_true", default=None,
                   help="also write per-iteration normalized weights")
    p.add_argument("--strict", action="store_true", help="exit 3 if the final walk does not converge")

    p = sub.add_parser("compare", help="Spearman rho between our ranking and an external one")
    p.add_argument("ours", type=Path, help="companies.csv or technologies.csv from 'rank'")
    p.add_argument("external", type=Path, help="CSV with columns id,rank")

    p = sub.add_parser("bench", help="time calibration and walk on nested company subsets")
    _common(p)
    p.add_argument("--sizes", required=True, help="comma separated company counts, e.g. 10,100")
    return parser


def _config(args):
    return load_config(
        args.config,
        seed=args.seed,
        subset=args.subset,
        output=args.out,
        grid=args.grid,
        tolerance=args.tolerance,
        max_iterations=args.max_iter,
        n_jobs=args.n_jobs,
        trajectory=getattr(args, "trajectory", None),
    )


def _cmd_ingest(args) -> int:
    cfg = _config(args)
    ds = ingest(cfg)
    cfg.output.mkdir(parents=True, exist_ok=True)
    write_edges_csv(cfg.output / "edges.csv", ds.graph)
    write_investments_csv(cfg.output / "investments.csv", ds.investments)
    (cfg.output / "ingest.json").write_text(json.dumps(ds.counts, indent=2, sort_keys=True) + "\n")
    print(f"{ds.graph.n_companies} companies, {ds.graph.n_technologies} technologies, "
          f"{ds.investments.n_investors} investors -> {cfg.output}")
    return EXIT_OK


def _cmd_rank(args) -> int:
    cfg = _config(args)
    report = rank(cfg)
    write_report(report, cfg.output, trajectory=cfg.trajectory)
    for layer in (report.companies, report.technologies):
        meta = report.metadata[layer.target.value]
        print(f"{layer.target.value}: alpha*={meta['alpha']:.2f} beta*={meta['beta']:.2f} "
              f"rho*={meta['rho']:.4f} iterations={meta['iterations']} converged={meta['converged']}")
        for pos, name in enumerate(layer.top(5), start=1):
            print(f"  {pos}. {name}")
    if args.strict and not report.converged:
        log.error("final walk did not converge within %d iterations", cfg.walker.max_iterations)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_compare(args) -> int:
    try:
        ours = {row[0]: row[1] for row in read_ranking_csv(args.ours)}
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read ranking {args.ours}: {exc}") from exc
    rho, n = compare_rankings(ours, read_external_ranks(args.external))
    print(f"spearman_rho={rho:.6f} n_overlap={n}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _config(args)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--sizes: {exc}") from exc
    rows = bench(cfg, sizes)
    cfg.output.mkdir(parents=True, exist_ok=True)
    write_bench_csv(cfg.output / "bench.csv", rows)
    for row in rows:
        print("n_c={} n_t={} calib={:.3f}s walk={:.3f}s it_c={} it_t={}".format(*row))
    return EXIT_OK


COMMANDS = {"ingest": _cmd_ingest, "rank": _cmd_rank, "compare": _cmd_compare, "bench": _cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TechRankError as exc:
        print(f"data error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
