"""Exogenous features used as ground truth when calibrating the walker.

Features are per-entity scores in [0, 1]: previous investments into each
company, the same amounts pushed through the company-technology graph onto
technologies, and geographic proximity to an investor.  An investor profile
mixes them with signed weights into a single target ranking.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .exceptions import AlignmentError, DataError, DegenerateFactorError
from .graph import BipartiteGraph, EntityRegistry, InvestmentGraph, normalize_name
from .stats import normalize_minmax

__all__ = [
    "EARTH_RADIUS_KM",
    "GeoPoint",
    "FeatureVector",
    "PreferenceProfile",
    "investment_factor_companies",
    "investment_factor_technologies",
    "haversine",
    "location_factor",
    "compose_ground_truth",
    "load_locations",
]

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        lat, lon = float(self.latitude), float(self.longitude)
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon} outside [-180, 180]")
        if lon == -180.0:
            lon = 180.0
        object.__setattr__(self, "latitude", lat)
        object.__setattr__(self, "longitude", lon)


@dataclass(frozen=True)
class FeatureVector:
    """A named [0, 1] score per entity.

    ``entities`` names the entity behind each value when known; ``excluded``
    lists entities that could not be scored (e.g. missing coordinates).
    """

    name: str
    values: np.ndarray
    entities: Optional[tuple] = None
    excluded: tuple = field(default=(), repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size and (not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1):
            raise ValueError(f"feature {self.name!r} has values outside [0, 1]")
        object.__setattr__(self, "values", values)
        if self.entities is not None:
            entities = tuple(self.entities)
            if len(entities) != values.size:
                raise AlignmentError(f"feature {self.name!r}: {len(entities)} names for {values.size} values")
            object.__setattr__(self, "entities", entities)

    def __len__(self):
        return self.values.size

    def align(self, registry: EntityRegistry, fill: float = 0.0) -> "FeatureVector":
        """Reorder onto ``registry``; entities without a value get ``fill``."""
        if self.entities is None:
            if self.values.size != len(registry):
                raise AlignmentError(f"feature {self.name!r} cannot be aligned without entity names")
            return FeatureVector(self.name, self.values, tuple(registry.names), self.excluded)
        lookup = dict(zip(self.entities, self.values))
        values = np.array([lookup.get(name, fill) for name in registry], dtype=np.float64)
        return FeatureVector(self.name, values, tuple(registry.names), self.excluded)


@dataclass(frozen=True)
class PreferenceProfile:
    """Signed interest weights over named features.

    The absolute weights must sum to one; a negative weight marks a feature
    the investor is pushed away by.
    """

    entries: tuple
    target: str = "companies"

    def __post_init__(self):
        entries = tuple((str(name), float(p)) for name, p in self.entries)
        names = [name for name, _ in entries]
        if not entries:
            raise ValueError("preference profile is empty")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate feature names in profile: {names}")
        total = sum(abs(p) for _, p in entries)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"sum of |weights| must be 1, got {total}")
        if self.target not in ("companies", "technologies"):
            raise ValueError(f"unknown target {self.target!r}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_mapping(cls, weights: Mapping[str, float], target: str = "companies") -> "PreferenceProfile":
        return cls(tuple(weights.items()), target)

    @property
    def names(self) -> list:
        return [name for name, _ in self.entries]

    @property
    def weights(self) -> np.ndarray:
        return np.array([p for _, p in self.entries])


def _max_normalize(totals: np.ndarray, what: str) -> np.ndarray:
    top = totals.max() if totals.size else 0.0
    if not top > 0:
        raise DegenerateFactorError(f"{what}: no positive investment amount")
    return totals / top


def investment_factor_companies(ig: InvestmentGraph) -> FeatureVector:
    """Total funding per company divided by the largest company total."""
    totals = ig.company_totals()
    values = _max_normalize(totals, "company investment factor")
    return FeatureVector("previous_investments", values, tuple(ig.companies.names))


def investment_factor_technologies(ig: InvestmentGraph, g: BipartiteGraph) -> FeatureVector:
    """Company funding totals summed over each technology's companies, max-normalized."""
    if ig.companies.names != g.companies.names:
        if set(ig.companies.names) != set(g.companies.names):
            raise AlignmentError("investment graph and company-technology graph list different companies")
        ig = ig.restrict(g.companies)
    company_totals = ig.company_totals()
    tech_totals = g.adjacency.T @ company_totals
    values = _max_normalize(np.asarray(tech_totals).ravel(), "technology investment factor")
    return FeatureVector("previous_investments", values, tuple(g.technologies.names))


def haversine(a: GeoPoint, b: GeoPoint, radius: float = EARTH_RADIUS_KM) -> float:
    """Great-circle distance in kilometres.

    Uses the atan2 form of the central angle.  It equals the haversine
    formula in exact arithmetic but, unlike ``asin(sqrt(h))``, keeps full
    precision for nearly antipodal points as well as for tiny separations.
    """
    # fixed argument order makes the result exactly symmetric
    if (b.latitude, b.longitude) < (a.latitude, a.longitude):
        a, b = b, a
    phi1 = math.radians(a.latitude)
    phi2 = math.radians(b.latitude)
    dlam = math.radians(b.longitude - a.longitude)
    s1, c1 = math.sin(phi1), math.cos(phi1)
    s2, c2 = math.sin(phi2), math.cos(phi2)
    sd, cd = math.sin(dlam), math.cos(dlam)
    across = math.hypot(c2 * sd, c1 * s2 - s1 * c2 * cd)
    along = s1 * s2 + c1 * c2 * cd
    return radius * math.atan2(across, along)


def location_factor(
    locations: Mapping[str, Optional[GeoPoint]],
    investor: GeoPoint,
) -> FeatureVector:
    """Proximity of each company to the investor: ``1 - h / h_max``.

    Companies mapped to ``None`` are left out and listed in ``excluded``.
    """
    located = [(name, point) for name, point in locations.items() if point is not None]
    excluded = tuple(name for name, point in locations.items() if point is None)
    if not located:
        raise DegenerateFactorError("no company has coordinates")
    dist = np.array([haversine(investor, point) for _, point in located])
    h_max = dist.max()
    if not h_max > 0:
        raise DegenerateFactorError("every company is collocated with the investor")
    values = np.clip(1.0 - dist / h_max, 0.0, 1.0)
    return FeatureVector("location", values, tuple(name for name, _ in located), excluded)


def compose_ground_truth(
    profile: PreferenceProfile,
    features: Sequence[FeatureVector],
    normalize: bool = True,
) -> np.ndarray:
    """Weighted sum of feature vectors, min-max normalized by default."""
    by_name = {f.name: f for f in features}
    if len(by_name) != len(features):
        raise AlignmentError("duplicate feature names")
    if set(by_name) != set(profile.names):
        raise AlignmentError(
            f"profile features {sorted(profile.names)} do not match supplied {sorted(by_name)}"
        )
    sizes = {len(f) for f in features}
    if len(sizes) != 1:
        raise AlignmentError(f"features have different lengths: {sorted(sizes)}")
    entity_sets = {f.entities for f in features if f.entities is not None}
    if len(entity_sets) > 1:
        raise AlignmentError("features are indexed by different entities")
    total = np.zeros(sizes.pop())
    for name, weight in profile.entries:
        total += weight * by_name[name].values
    return normalize_minmax(total) if normalize else total


def load_locations(path, delimiter: str = ",") -> dict:
    """Read ``entity_id,latitude,longitude`` rows; blank coordinates map to None."""
    out: dict = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read location file {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        missing = {"entity_id", "latitude", "longitude"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            name = normalize_name(row["entity_id"])
            lat, lon = (row["latitude"] or "").strip(), (row["longitude"] or "").strip()
            if not lat or not lon:
                out[name] = None
                continue
            try:
                out[name] = GeoPoint(float(lat), float(lon))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad coordinates ({exc})") from exc
    return out
