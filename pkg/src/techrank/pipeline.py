"""End-to-end run: ingest, build factors, calibrate both layers, walk, report."""
from __future__ import annotations

import csv
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .calibration import CalibrationResult, GridSpec, Target, calibrate, write_surface_csv
from .exceptions import ConfigError, DataError
from .factors import (
    GeoPoint,
    PreferenceProfile,
    compose_ground_truth,
    investment_factor_companies,
    investment_factor_technologies,
    load_locations,
    location_factor,
)
from .graph import BipartiteGraph, InvestmentGraph, normalize_name
from .ingestion import (
    SectorFilter,
    build_graphs,
    filter_sector,
    load_crunchbase_rounds,
    load_funding_rounds,
    load_organizations,
)
from .stats import competition_rank, normalize_minmax, spearman
from .walker import WalkerParams, WalkerState, run

__all__ = [
    "RunConfig",
    "Dataset",
    "LayerReport",
    "RankingReport",
    "load_config",
    "ingest",
    "sample_companies",
    "ground_truths",
    "rank",
    "write_report",
    "read_ranking_csv",
    "read_trajectory_csv",
    "compare_rankings",
    "read_external_ranks",
    "bench",
    "write_bench_csv",
    "read_bench_csv",
]

log = logging.getLogger(__name__)

COMPANY_FEATURES = ("previous_investments", "location")
TECHNOLOGY_FEATURES = ("previous_investments",)


@dataclass
class RunConfig:
    organizations: Path
    funding_rounds: Optional[Path] = None
    investments: Optional[Path] = None
    locations: Optional[Path] = None
    delimiter: str = ","
    category_delimiter: str = ","
    technology_column: Optional[str] = None
    sector: Optional[SectorFilter] = None
    company_profile: PreferenceProfile = field(
        default_factory=lambda: PreferenceProfile((("previous_investments", 1.0),), "companies"))
    technology_profile: PreferenceProfile = field(
        default_factory=lambda: PreferenceProfile((("previous_investments", 1.0),), "technologies"))
    investor_location: Optional[GeoPoint] = None
    grid: GridSpec = field(default_factory=GridSpec)
    walker: WalkerParams = field(default_factory=WalkerParams)
    output: Path = Path("techrank-out")
    seed: int = 0
    subset: Optional[int] = None
    trajectory: bool = False
    n_jobs: int = 1

    def validate(self) -> "RunConfig":
        for label in ("organizations", "funding_rounds", "investments", "locations"):
            path = getattr(self, label)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{label} file not found: {path}")
        if self.investments is not None and self.funding_rounds is None:
            raise ConfigError("investments file given without funding_rounds")
        for profile, allowed in ((self.company_profile, COMPANY_FEATURES),
                                 (self.technology_profile, TECHNOLOGY_FEATURES)):
            unknown = set(profile.names) - set(allowed)
            if unknown:
                raise ConfigError(f"unknown {profile.target} features {sorted(unknown)}; allowed {list(allowed)}")
        if "location" in self.company_profile.names:
            if self.investor_location is None or self.locations is None:
                raise ConfigError("location preference needs investor_location and a locations file")
        if self.subset is not None and self.subset < 1:
            raise ConfigError("subset must be a positive integer")
        return self


def _profile(raw, target) -> PreferenceProfile:
    try:
        return PreferenceProfile.from_mapping(raw, target)
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad {target} profile {raw!r}: {exc}") from exc


def load_config(path, **overrides) -> RunConfig:
    """Read a YAML (or JSON) run configuration; paths are relative to the file.

    Keyword overrides with a value of None are ignored.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    base = path.parent
    data = raw.get("data") or {}

    def p(key):
        value = data.get(key)
        return None if value is None else (base / value)

    if p("organizations") is None:
        raise ConfigError("data.organizations is required")
    try:
        sector = raw.get("sector")
        sector_filter = None
        if sector:
            min_matches = int(sector.get("min_matches", 2))
            if "keywords" in sector:
                sector_filter = SectorFilter(frozenset(sector["keywords"]), min_matches)
            elif "keywords_file" in sector:
                sector_filter = SectorFilter.from_file(base / sector["keywords_file"], sector.get("name"), min_matches)
            else:
                sector_filter = SectorFilter.builtin(sector["name"], min_matches)

        profiles = raw.get("profiles") or {}
        grid = raw.get("grid")
        if isinstance(grid, str):
            grid = GridSpec.parse(grid)
        elif isinstance(grid, dict):
            grid = GridSpec(**grid)
        else:
            grid = GridSpec()
        walker = WalkerParams(**{k: v for k, v in (raw.get("walker") or {}).items()})
        inv = raw.get("investor_location")
        cfg = RunConfig(
            organizations=p("organizations"),
            funding_rounds=p("funding_rounds"),
            investments=p("investments"),
            locations=p("locations"),
            delimiter=data.get("delimiter", ","),
            category_delimiter=data.get("category_delimiter", ","),
            technology_column=data.get("technology_column"),
            sector=sector_filter,
            company_profile=_profile(profiles.get("companies", {"previous_investments": 1.0}), "companies"),
            technology_profile=_profile(profiles.get("technologies", {"previous_investments": 1.0}), "technologies"),
            investor_location=GeoPoint(*inv) if inv is not None else None,
            grid=grid,
            walker=walker,
            output=base / raw.get("output", "techrank-out"),
            seed=int(raw.get("seed", 0)),
            subset=raw.get("subset"),
            trajectory=bool(raw.get("trajectory", False)),
            n_jobs=int(raw.get("n_jobs", 1)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    overrides = {k: v for k, v in overrides.items() if v is not None}
    walker_over = {k: overrides.pop(k) for k in ("tolerance", "max_iterations") if k in overrides}
    if walker_over:
        try:
            cfg.walker = replace(cfg.walker, **walker_over)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if isinstance(overrides.get("grid"), str):
        try:
            overrides["grid"] = GridSpec.parse(overrides["grid"])
        except ValueError as exc:
            raise ConfigError(f"--grid: {exc}") from exc
    if "output" in overrides:
        overrides["output"] = Path(overrides["output"])
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg.validate()


@dataclass
class Dataset:
    graph: BipartiteGraph
    investments: InvestmentGraph
    locations: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)


def ingest(cfg: RunConfig) -> Dataset:
    """Load and filter organizations, then build both graphs."""
    orgs = load_organizations(cfg.organizations, cfg.delimiter, cfg.category_delimiter, cfg.technology_column)
    kept = filter_sector(orgs, cfg.sector) if cfg.sector is not None else list(orgs)
    if cfg.funding_rounds is None:
        rounds = []
        skipped_rounds = 0
    elif cfg.investments is not None:
        rounds = load_crunchbase_rounds(cfg.funding_rounds, cfg.investments, cfg.delimiter)
        skipped_rounds = rounds.skipped
    else:
        rounds = load_funding_rounds(cfg.funding_rounds, cfg.delimiter)
        skipped_rounds = rounds.skipped
    bundle = build_graphs(kept, rounds)

    locations = {}
    if cfg.locations is not None:
        locations = load_locations(cfg.locations, cfg.delimiter)
    for org in kept:
        name = normalize_name(org.name)
        if name not in locations and org.latitude is not None and org.longitude is not None:
            locations[name] = GeoPoint(org.latitude, org.longitude)
    counts = {
        "organizations_read": len(orgs),
        "organizations_skipped": orgs.skipped,
        "organizations_in_sector": len(kept),
        "organizations_without_categories": bundle.excluded_orgs,
        "rounds_read": len(rounds),
        "rounds_skipped": skipped_rounds,
        "rounds_dropped": bundle.dropped_rounds,
        "companies": bundle.graph.n_companies,
        "technologies": bundle.graph.n_technologies,
        "investors": bundle.investments.n_investors,
    }
    return Dataset(bundle.graph, bundle.investments, locations, counts)


def sample_companies(ds: Dataset, n: Optional[int], seed: int) -> Dataset:
    """Seeded uniform subset of ``n`` companies with the induced technologies.

    For a fixed seed the subsets are nested: the first ``n`` entries of one
    permutation, restored to registry order.
    """
    if n is None or n >= ds.graph.n_companies:
        return ds
    order = np.random.default_rng(seed).permutation(ds.graph.n_companies)
    ids = np.sort(order[:n])
    graph = ds.graph.subgraph(ids)
    return Dataset(graph, ds.investments.restrict(graph.companies), ds.locations,
                   {**ds.counts, "companies": graph.n_companies, "technologies": graph.n_technologies})


def ground_truths(ds: Dataset, cfg: RunConfig) -> dict:
    """Normalized ground truth per layer, composed from the configured profiles."""
    g = ds.graph
    company_features = []
    if "previous_investments" in cfg.company_profile.names:
        company_features.append(investment_factor_companies(ds.investments.restrict(g.companies)))
    if "location" in cfg.company_profile.names:
        located = {name: ds.locations.get(name) for name in g.companies}
        feature = location_factor(located, cfg.investor_location)
        if feature.excluded:
            log.warning("%d companies have no coordinates; their location factor is 0",
                        len(feature.excluded))
        company_features.append(feature.align(g.companies, fill=0.0))
    tech_features = [investment_factor_technologies(ds.investments.restrict(g.companies), g)]
    return {
        Target.COMPANIES: compose_ground_truth(cfg.company_profile, company_features),
        Target.TECHNOLOGIES: compose_ground_truth(cfg.technology_profile, tech_features),
    }


@dataclass
class LayerReport:
    target: Target
    names: tuple
    weights: np.ndarray
    degrees: np.ndarray
    calibration: CalibrationResult
    state: WalkerState

    @property
    def ranks(self) -> np.ndarray:
        return competition_rank(self.weights)

    @property
    def degree_ranks(self) -> np.ndarray:
        return competition_rank(self.degrees)

    def rows(self):
        ranks, degree_ranks = self.ranks, self.degree_ranks
        for k in np.argsort(ranks, kind="stable"):
            yield (self.names[k], float(self.weights[k]), int(ranks[k]), int(self.degrees[k]),
                   int(degree_ranks[k]), int(degree_ranks[k] - ranks[k]))

    def top(self, n: int = 5) -> list:
        return [row[0] for row in list(self.rows())[:n]]


@dataclass
class RankingReport:
    companies: LayerReport
    technologies: LayerReport
    metadata: dict
    timings: dict

    @property
    def converged(self) -> bool:
        return self.companies.state.converged and self.technologies.state.converged


@contextmanager
def _phase(timings: dict, name: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def _layer_report(ds, target, result, params) -> LayerReport:
    state = run(ds.graph, replace(params, alpha=result.alpha_star, beta=result.beta_star))
    if target is Target.COMPANIES:
        names, weights, deg = ds.graph.companies.names, state.w_c, ds.graph.company_degrees
    else:
        names, weights, deg = ds.graph.technologies.names, state.w_t, ds.graph.technology_degrees
    return LayerReport(target, names, normalize_minmax(weights), np.asarray(deg), result, state)


def rank(cfg: RunConfig, dataset: Optional[Dataset] = None) -> RankingReport:
    """Calibrate each layer on its own ground truth and rank at the optimum."""
    timings: dict = {}
    with _phase(timings, "ingest"):
        ds = dataset if dataset is not None else ingest(cfg)
        ds = sample_companies(ds, cfg.subset, cfg.seed)
    with _phase(timings, "factors"):
        truths = ground_truths(ds, cfg)
    results = {}
    with _phase(timings, "calibration"):
        for target in Target:
            results[target] = calibrate(ds.graph, truths[target], target, cfg.grid, cfg.walker, n_jobs=cfg.n_jobs)
    params = replace(cfg.walker, record_trajectory=cfg.trajectory)
    with _phase(timings, "walk"):
        layers = {t: _layer_report(ds, t, results[t], params) for t in Target}

    def layer_meta(layer: LayerReport) -> dict:
        res, st = layer.calibration, layer.state
        return {
            "alpha": res.alpha_star, "beta": res.beta_star, "rho": res.rho_star,
            "grid_points_missing": res.n_missing,
            "iterations": st.iteration, "iterations_c": st.iterations_c,
            "iterations_t": st.iterations_t, "converged": st.converged,
        }

    metadata = {
        "n_companies": ds.graph.n_companies,
        "n_technologies": ds.graph.n_technologies,
        "n_edges": ds.graph.n_edges,
        "seed": cfg.seed,
        "subset": cfg.subset,
        "grid": [cfg.grid.alpha_min, cfg.grid.alpha_max, cfg.grid.beta_min, cfg.grid.beta_max, cfg.grid.step],
        "tolerance": cfg.walker.tolerance,
        "max_iterations": cfg.walker.max_iterations,
        "profiles": {"companies": dict(cfg.company_profile.entries),
                     "technologies": dict(cfg.technology_profile.entries)},
        "counts": ds.counts,
        "companies": layer_meta(layers[Target.COMPANIES]),
        "technologies": layer_meta(layers[Target.TECHNOLOGIES]),
    }
    return RankingReport(layers[Target.COMPANIES], layers[Target.TECHNOLOGIES], metadata, timings)


RANKING_HEADER = ["id", "weight", "rank", "degree", "degree_rank", "rank_delta"]


def _write_ranking(path: Path, layer: LayerReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RANKING_HEADER)
        for name, weight, r, deg, dr, delta in layer.rows():
            writer.writerow([name, repr(weight), r, deg, dr, delta])


def read_ranking_csv(path) -> list:
    """Rows of a companies/technologies file as typed tuples."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [(row["id"], float(row["weight"]), int(row["rank"]), int(row["degree"]),
                 int(row["degree_rank"]), int(row["rank_delta"])) for row in csv.DictReader(fh)]


def _write_trajectory(path: Path, report: RankingReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", "iteration", "id", "weight"])
        for layer in (report.companies, report.technologies):
            pos = 0 if layer.target is Target.COMPANIES else 1
            for it, pair in enumerate(layer.state.trajectory or ()):
                for name, w in zip(layer.names, pair[pos]):
                    writer.writerow([layer.target.value, it, name, repr(float(w))])


def read_trajectory_csv(path) -> dict:
    """``{layer: array of shape (iterations, entities)}`` plus entity order."""
    series: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            series.setdefault(row["layer"], {}).setdefault(int(row["iteration"]), []).append(
                (row["id"], float(row["weight"])))
    out = {}
    for layer, by_iter in series.items():
        iters = [by_iter[k] for k in sorted(by_iter)]
        out[layer] = ([name for name, _ in iters[0]], np.array([[w for _, w in it] for it in iters]))
    return out


def write_report(report: RankingReport, out_dir, trajectory: bool = False) -> list:
    """Write the ranking files; returns the written paths.

    ``timings.json`` is kept apart from ``run.json`` so that every other file
    is byte-identical across reruns with the same inputs and seed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "companies.csv", out / "technologies.csv", out / "surface.csv", out / "run.json"]
    _write_ranking(paths[0], report.companies)
    _write_ranking(paths[1], report.technologies)
    write_surface_csv(paths[2], [report.companies.calibration, report.technologies.calibration])
    paths[3].write_text(json.dumps(report.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if trajectory:
        paths.append(out / "trajectory.csv")
        _write_trajectory(paths[-1], report)
    timings = out / "timings.json"
    timings.write_text(json.dumps({k: round(v, 6) for k, v in report.timings.items()}, indent=2) + "\n",
                       encoding="utf-8")
    return paths + [timings]


def read_external_ranks(path) -> dict:
    """``id,rank`` CSV into ``{normalized id: rank}``."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"id", "rank"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected columns id,rank")
        try:
            return {normalize_name(r["id"]): float(r["rank"]) for r in reader}
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc


def compare_rankings(ours: dict, external: dict) -> tuple:
    """Spearman rho between our weights and an external ranking on shared ids.

    ``ours`` maps id to weight (higher is better); ``external`` maps id to
    rank (1 is best).  Returns ``(rho, n_overlap)``.
    """
    ours = {normalize_name(k): v for k, v in ours.items()}
    external = {normalize_name(k): v for k, v in external.items()}
    names = list(ours)
    our_ranks = dict(zip(names, competition_rank([ours[n] for n in names])))
    shared = [n for n in names if n in external]
    if len(shared) < 2:
        raise DataError(f"only {len(shared)} identifiers overlap; need at least 2")
    rho = spearman([our_ranks[n] for n in shared], [external[n] for n in shared])
    return rho, len(shared)


BENCH_HEADER = ["n_companies", "n_technologies", "calib_seconds", "walk_seconds", "iterations_c", "iterations_t"]


def bench(cfg: RunConfig, sizes, dataset: Optional[Dataset] = None) -> list:
    """Time calibration and the final walk on nested seeded company subsets."""
    full = dataset if dataset is not None else ingest(cfg)
    rows = []
    for n in sizes:
        if n > full.graph.n_companies:
            raise DataError(f"size {n} exceeds the {full.graph.n_companies} available companies")
        ds = sample_companies(full, n, cfg.seed)
        truths = ground_truths(ds, cfg)
        start = time.perf_counter()
        results = {t: calibrate(ds.graph, truths[t], t, cfg.grid, cfg.walker, n_jobs=cfg.n_jobs) for t in Target}
        calib = time.perf_counter() - start
        start = time.perf_counter()
        st_c = run(ds.graph, replace(cfg.walker, alpha=results[Target.COMPANIES].alpha_star,
                                     beta=results[Target.COMPANIES].beta_star))
        st_t = run(ds.graph, replace(cfg.walker, alpha=results[Target.TECHNOLOGIES].alpha_star,
                                     beta=results[Target.TECHNOLOGIES].beta_star))
        walk = time.perf_counter() - start
        rows.append((ds.graph.n_companies, ds.graph.n_technologies, calib, walk,
                     st_c.iterations_c, st_t.iterations_t))
    return rows


def write_bench_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        for n_c, n_t, calib, walk, it_c, it_t in rows:
            writer.writerow([n_c, n_t, f"{calib:.6f}", f"{walk:.6f}",
                             "" if it_c is None else it_c, "" if it_t is None else it_t])


def read_bench_csv(path) -> list:
    def opt_int(s):
        return int(s) if s else None

    with open(path, newline="", encoding="utf-8") as fh:
        return [(int(r["n_companies"]), int(r["n_technologies"]), float(r["calib_seconds"]),
                 float(r["walk_seconds"]), opt_int(r["iterations_c"]), opt_int(r["iterations_t"]))
                for r in csv.DictReader(fh)]
