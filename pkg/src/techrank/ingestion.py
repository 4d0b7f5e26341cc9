"""Crunchbase-style CSV ingestion: organizations, funding rounds, sector filter.

Column names follow the public daily CSV export, with a few plainer
aliases accepted (``id`` for ``uuid``, ``amount`` for ``raised_amount_usd``
and so on).
"""
from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from datetime import date
from importlib import resources
from typing import Iterable, NamedTuple, Optional, Sequence

from .exceptions import DataError
from .graph import (
    BipartiteGraph,
    InvestmentGraph,
    build_bipartite,
    build_investment_graph,
    normalize_name,
)

__all__ = [
    "OrganizationRecord",
    "FundingRoundRecord",
    "SectorFilter",
    "Loaded",
    "GraphBundle",
    "builtin_sectors",
    "load_organizations",
    "load_funding_rounds",
    "load_crunchbase_rounds",
    "filter_sector",
    "build_graphs",
    "parse_amount",
    "write_edges_csv",
    "read_edges_csv",
    "write_investments_csv",
    "read_investments_csv",
]

log = logging.getLogger(__name__)

ORG_COLUMNS = {
    "id": ("id", "uuid"),
    "name": ("name",),
    "description": ("description", "short_description"),
    "category_list": ("category_list", "categories"),
    "latitude": ("latitude", "lat"),
    "longitude": ("longitude", "lon", "lng"),
    "country": ("country", "country_code"),
}
ROUND_COLUMNS = {
    "round_id": ("round_id", "funding_round_uuid", "uuid"),
    "investor_id": ("investor_id", "investor_uuid"),
    "company_id": ("company_id", "org_uuid"),
    "amount": ("amount", "raised_amount_usd", "raised_amount"),
    "announced_on": ("announced_on", "date"),
}

_AMOUNT = re.compile(r"^[+]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class OrganizationRecord:
    id: str
    name: str
    description: str = ""
    category_list: tuple = ()
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    country: Optional[str] = None


@dataclass(frozen=True)
class FundingRoundRecord:
    round_id: str
    investor_id: str
    company_id: str
    amount: float = 0.0
    announced_on: Optional[date] = None

    def __post_init__(self):
        if self.amount < 0:
            raise ValueError("funding amount must be >= 0")


class Loaded(list):
    """List of parsed records that remembers how many rows were skipped."""

    def __init__(self, records=(), skipped: int = 0):
        super().__init__(records)
        self.skipped = skipped


class GraphBundle(NamedTuple):
    graph: BipartiteGraph
    investments: InvestmentGraph
    dropped_rounds: int
    excluded_orgs: int


def builtin_sectors() -> dict:
    """Keyword lists shipped with the package, keyed by sector name."""
    text = resources.files("techrank").joinpath("data/sectors.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class SectorFilter:
    """Keep organizations whose description mentions enough sector keywords.

    Matching is case-insensitive and whole-word; multi-word keywords match
    across any run of whitespace.  Only distinct keywords are counted.
    """

    keywords: frozenset
    min_matches: int = 2

    def __post_init__(self):
        words = frozenset(" ".join(str(k).lower().split()) for k in self.keywords)
        words = frozenset(w for w in words if w)
        if not words:
            raise ValueError("sector filter needs at least one keyword")
        if self.min_matches < 1:
            raise ValueError("min_matches must be a positive integer")
        object.__setattr__(self, "keywords", words)
        patterns = tuple(
            (w, re.compile(r"(?<!\w)" + r"\s+".join(map(re.escape, w.split())) + r"(?!\w)"))
            for w in sorted(words)
        )
        object.__setattr__(self, "_patterns", patterns)

    @classmethod
    def builtin(cls, sector: str, min_matches: int = 2) -> "SectorFilter":
        sectors = builtin_sectors()
        if sector not in sectors:
            raise KeyError(f"unknown sector {sector!r}; available: {sorted(sectors)}")
        return cls(frozenset(sectors[sector]), min_matches)

    @classmethod
    def from_file(cls, path, sector: Optional[str] = None, min_matches: int = 2) -> "SectorFilter":
        """Load keywords from JSON: a list, or a ``{sector: [...]}`` mapping."""
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if isinstance(data, dict):
            if sector is None:
                if len(data) != 1:
                    raise ValueError("keyword file has several sectors; pick one")
                sector = next(iter(data))
            data = data[sector]
        return cls(frozenset(data), min_matches)

    def matches(self, description: str) -> set:
        text = (description or "").lower()
        return {w for w, pat in self._patterns if pat.search(text)}

    def keep(self, description: str) -> bool:
        return len(self.matches(description)) >= self.min_matches


def parse_amount(text) -> float:
    """Plain non-negative decimal; blank means 0.  Thousands separators are rejected."""
    text = (text or "").strip()
    if not text:
        return 0.0
    if not _AMOUNT.match(text):
        raise ValueError(f"not a plain non-negative decimal: {text!r}")
    return float(text)


def _parse_date(text) -> Optional[date]:
    text = (text or "").strip()
    if not text:
        return None
    return date.fromisoformat(text[:10])


def _optional_float(text) -> Optional[float]:
    text = (text or "").strip()
    return float(text) if text else None


def _resolve(fieldnames, aliases: dict, required: Sequence[str], path) -> dict:
    if not fieldnames:
        raise DataError(f"{path}: missing header row")
    present = {f.strip().lower(): f for f in fieldnames if f is not None}
    mapping = {}
    for key, names in aliases.items():
        for name in names:
            if name in present:
                mapping[key] = present[name]
                break
    missing = [k for k in required if k not in mapping]
    if missing:
        raise DataError(f"{path}: malformed header, no column for {missing} (found {list(fieldnames)})")
    return mapping


def _open_csv(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_organizations(
    path,
    delimiter: str = ",",
    category_delimiter: str = ",",
    technology_column: Optional[str] = None,
) -> Loaded:
    """Parse an organizations CSV.

    Technology labels come from ``category_list`` unless ``technology_column``
    names another column.  Rows without an id or a name are skipped; the
    count is kept on the returned list as ``.skipped``.
    """
    records, skipped = [], 0
    aliases = ORG_COLUMNS
    if technology_column:
        aliases = {**ORG_COLUMNS, "category_list": (technology_column.strip().lower(),)}
    with _open_csv(path) as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        required = ("id", "name", "category_list") if technology_column else ("id", "name")
        cols = _resolve(reader.fieldnames, aliases, required, path)
        get = lambda row, key: (row.get(cols[key]) or "").strip() if key in cols else ""  # noqa: E731
        for lineno, row in enumerate(reader, start=2):
            org_id, name = get(row, "id"), get(row, "name")
            if not org_id or not name:
                skipped += 1
                continue
            cats = tuple(c.strip() for c in get(row, "category_list").split(category_delimiter) if c.strip())
            try:
                lat, lon = _optional_float(get(row, "latitude")), _optional_float(get(row, "longitude"))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad coordinate ({exc})") from exc
            records.append(OrganizationRecord(
                id=org_id,
                name=name,
                description=get(row, "description"),
                category_list=cats,
                latitude=lat,
                longitude=lon,
                country=get(row, "country") or None,
            ))
    if skipped:
        log.info("%s: skipped %d rows without id or name", path, skipped)
    return Loaded(records, skipped)


def load_funding_rounds(path, delimiter: str = ",") -> Loaded:
    """Parse a flat rounds file with one investor per row.

    Missing amounts count as 0; rows without investor or company are skipped.
    """
    records, skipped = [], 0
    with _open_csv(path) as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        cols = _resolve(reader.fieldnames, ROUND_COLUMNS, ("investor_id", "company_id"), path)
        get = lambda row, key: (row.get(cols[key]) or "").strip() if key in cols else ""  # noqa: E731
        for lineno, row in enumerate(reader, start=2):
            investor, company = get(row, "investor_id"), get(row, "company_id")
            if not investor or not company:
                skipped += 1
                continue
            try:
                amount = parse_amount(get(row, "amount"))
                announced = _parse_date(get(row, "announced_on"))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            records.append(FundingRoundRecord(
                round_id=get(row, "round_id") or f"row{lineno}",
                investor_id=investor,
                company_id=company,
                amount=amount,
                announced_on=announced,
            ))
    return Loaded(records, skipped)


def load_crunchbase_rounds(funding_rounds_path, investments_path, delimiter: str = ",") -> Loaded:
    """Join the export's ``funding_rounds`` and ``investments`` files.

    Each investor taking part in a round is credited with the full round
    amount.  Investments pointing at unknown rounds are skipped.
    """
    rounds = {}
    with _open_csv(funding_rounds_path) as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        cols = _resolve(reader.fieldnames,
                        {"uuid": ("uuid", "round_id"), **{k: ROUND_COLUMNS[k] for k in ("company_id", "amount", "announced_on")}},
                        ("uuid", "company_id"), funding_rounds_path)
        for lineno, row in enumerate(reader, start=2):
            get = lambda key: (row.get(cols[key]) or "").strip() if key in cols else ""  # noqa: E731
            try:
                rounds[get("uuid")] = (get("company_id"), parse_amount(get("amount")), _parse_date(get("announced_on")))
            except ValueError as exc:
                raise DataError(f"{funding_rounds_path}:{lineno}: {exc}") from exc
    records, skipped = [], 0
    with _open_csv(investments_path) as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        cols = _resolve(reader.fieldnames,
                        {"round": ("funding_round_uuid", "round_id"), "investor": ("investor_uuid", "investor_id")},
                        ("round", "investor"), investments_path)
        for row in reader:
            rid = (row.get(cols["round"]) or "").strip()
            investor = (row.get(cols["investor"]) or "").strip()
            if rid not in rounds or not investor or not rounds[rid][0]:
                skipped += 1
                continue
            company, amount, announced = rounds[rid]
            records.append(FundingRoundRecord(rid, investor, company, amount, announced))
    return Loaded(records, skipped)


def filter_sector(orgs: Iterable[OrganizationRecord], sector: SectorFilter) -> list:
    """Organizations whose description has at least ``min_matches`` distinct keywords."""
    return [org for org in orgs if sector.keep(org.description)]


def build_graphs(
    orgs: Sequence[OrganizationRecord],
    rounds: Iterable[FundingRoundRecord],
) -> GraphBundle:
    """Company-technology graph from categories, investor-company graph from rounds.

    Organizations without categories are excluded (a company needs at least
    one technology).  Rounds aimed at companies outside the graph are
    dropped; amounts of repeated investor-company rounds are summed.
    """
    pairs, id_to_company, excluded = [], {}, 0
    for org in orgs:
        if not org.category_list:
            excluded += 1
            continue
        company = normalize_name(org.name)
        id_to_company[org.id.strip()] = company
        pairs.extend((company, cat) for cat in org.category_list)
    if not pairs:
        raise DataError("no company with at least one technology survived ingestion")
    graph = build_bipartite(pairs)

    kept, dropped = [], 0
    for r in rounds:
        company = id_to_company.get(r.company_id.strip())
        if company is None:
            dropped += 1
            continue
        kept.append((r.investor_id, company, r.amount))
    if dropped:
        log.info("dropped %d funding rounds referencing companies outside the graph", dropped)
    investments = build_investment_graph(kept, graph.companies)
    return GraphBundle(graph, investments, dropped, excluded)


def write_edges_csv(path, graph: BipartiteGraph) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["company", "technology"])
        writer.writerows(graph.pairs())


def read_edges_csv(path) -> BipartiteGraph:
    with _open_csv(path) as fh:
        return build_bipartite((row["company"], row["technology"]) for row in csv.DictReader(fh))


def write_investments_csv(path, ig: InvestmentGraph) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["investor", "company", "amount"])
        for investor, company, amount in ig.records():
            writer.writerow([investor, company, repr(amount)])


def read_investments_csv(path, companies) -> InvestmentGraph:
    with _open_csv(path) as fh:
        rows = [(r["investor"], r["company"], parse_amount(r["amount"])) for r in csv.DictReader(fh)]
    return build_investment_graph(rows, companies)
