"""Immutable company-technology and investor-company graph containers.

Both graphs keep entity registries (ordered, unique identifiers with a dense
integer index) next to a CSR matrix.  They are never mutated after
construction, so they can be shared freely between threads or worker
processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import AlignmentError, GraphConstructionError

__all__ = [
    "EntityRegistry",
    "BipartiteGraph",
    "InvestmentGraph",
    "normalize_name",
    "build_bipartite",
    "build_investment_graph",
    "degrees",
]


def normalize_name(name) -> str:
    """Canonical entity identifier: stripped and lowercased."""
    return str(name).strip().lower()


@dataclass(frozen=True)
class EntityRegistry:
    """Ordered unique identifiers with their dense ids (0..n-1)."""

    names: tuple[str, ...]
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.names)
        index = {name: i for i, name in enumerate(names)}
        if len(index) != len(names):
            raise GraphConstructionError("entity identifiers must be unique")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "index", index)

    @classmethod
    def from_iterable(cls, names: Iterable[str]) -> "EntityRegistry":
        """Registry in first-seen order, duplicates ignored."""
        return cls(tuple(dict.fromkeys(names)))

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name):
        return name in self.index

    def __getitem__(self, i: int) -> str:
        return self.names[i]

    def id_of(self, name: str) -> int:
        return self.index[name]

    def subset(self, ids: Sequence[int]) -> "EntityRegistry":
        return EntityRegistry(tuple(self.names[i] for i in ids))


def _freeze(matrix: sp.csr_matrix) -> sp.csr_matrix:
    matrix.sort_indices()
    for arr in (matrix.data, matrix.indices, matrix.indptr):
        arr.flags.writeable = False
    return matrix


@dataclass(frozen=True)
class BipartiteGraph:
    """Binary company x technology adjacency with entity registries.

    Every company and every technology must have at least one edge: the
    transition probabilities raise degrees to arbitrary real powers, which
    has no meaning at degree zero.
    """

    companies: EntityRegistry
    technologies: EntityRegistry
    adjacency: sp.csr_matrix

    def __post_init__(self):
        adj = sp.csr_matrix(self.adjacency, dtype=np.float64)
        shape = (len(self.companies), len(self.technologies))
        if adj.shape != shape:
            raise GraphConstructionError(
                f"adjacency shape {adj.shape} does not match registries {shape}"
            )
        adj.sum_duplicates()
        adj.eliminate_zeros()
        if not np.all(adj.data == 1.0):
            raise GraphConstructionError("adjacency entries must be exactly 0 or 1")
        k_c = np.asarray(adj.sum(axis=1)).ravel()
        k_t = np.asarray(adj.sum(axis=0)).ravel()
        if shape[0] == 0 or shape[1] == 0:
            raise GraphConstructionError("graph has no companies or no technologies")
        if np.any(k_c == 0):
            bad = [self.companies[i] for i in np.flatnonzero(k_c == 0)[:5]]
            raise GraphConstructionError(f"isolated companies: {bad}")
        if np.any(k_t == 0):
            bad = [self.technologies[i] for i in np.flatnonzero(k_t == 0)[:5]]
            raise GraphConstructionError(f"isolated technologies: {bad}")
        object.__setattr__(self, "adjacency", _freeze(adj))
        k_c = k_c.astype(np.int64)
        k_t = k_t.astype(np.int64)
        k_c.flags.writeable = False
        k_t.flags.writeable = False
        object.__setattr__(self, "_k_c", k_c)
        object.__setattr__(self, "_k_t", k_t)

    @classmethod
    def from_matrix(cls, matrix, companies=None, technologies=None) -> "BipartiteGraph":
        """Wrap a dense or sparse 0/1 matrix; default names are ``c0``, ``t0``..."""
        adj = sp.csr_matrix(matrix, dtype=np.float64)
        n_c, n_t = adj.shape
        if companies is None:
            companies = [f"c{i}" for i in range(n_c)]
        if technologies is None:
            technologies = [f"t{j}" for j in range(n_t)]
        return cls(EntityRegistry(tuple(companies)), EntityRegistry(tuple(technologies)), adj)

    @property
    def shape(self) -> tuple[int, int]:
        return self.adjacency.shape

    @property
    def n_companies(self) -> int:
        return len(self.companies)

    @property
    def n_technologies(self) -> int:
        return len(self.technologies)

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.nnz)

    @property
    def company_degrees(self) -> np.ndarray:
        return self._k_c

    @property
    def technology_degrees(self) -> np.ndarray:
        return self._k_t

    def neighbors_of_company(self, c: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[c]:a.indptr[c + 1]]

    def pairs(self) -> list[tuple[str, str]]:
        """Edge list as (company, technology) names, row-major order."""
        coo = self.adjacency.tocoo()
        return [(self.companies[i], self.technologies[j]) for i, j in zip(coo.row, coo.col)]

    def toarray(self) -> np.ndarray:
        return self.adjacency.toarray()

    def subgraph(self, company_ids: Sequence[int]) -> "BipartiteGraph":
        """Graph induced by a subset of companies; unlinked technologies are dropped."""
        ids = np.asarray(company_ids, dtype=np.int64)
        if ids.size == 0:
            raise GraphConstructionError("empty company subset")
        rows = self.adjacency[ids]
        keep = np.flatnonzero(np.asarray(rows.sum(axis=0)).ravel() > 0)
        return BipartiteGraph(
            self.companies.subset(ids), self.technologies.subset(keep), rows[:, keep]
        )

    def reorder(self, companies: Sequence[str], technologies: Sequence[str]) -> "BipartiteGraph":
        """Same graph with registries permuted to the given name orders."""
        rows = [self.companies.index[n] for n in companies]
        cols = [self.technologies.index[n] for n in technologies]
        if len(rows) != self.n_companies or len(cols) != self.n_technologies:
            raise GraphConstructionError("reorder needs a full permutation of both registries")
        return BipartiteGraph(
            EntityRegistry(tuple(companies)), EntityRegistry(tuple(technologies)),
            self.adjacency[rows][:, cols],
        )

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (
            self.companies.names == other.companies.names
            and self.technologies.names == other.technologies.names
            and (self.adjacency != other.adjacency).nnz == 0
        )

    __hash__ = None


def build_bipartite(pairs: Iterable[tuple[str, str]]) -> BipartiteGraph:
    """Build the binary company-technology graph from (company, technology) pairs.

    Identifiers are normalized (trimmed, lowercased).  Registries follow
    first-seen order and duplicate pairs collapse to a single edge.
    """
    edges = [(normalize_name(c), normalize_name(t)) for c, t in pairs]
    if not edges:
        raise GraphConstructionError("cannot build a graph from an empty pair list")
    companies = EntityRegistry.from_iterable(c for c, _ in edges)
    technologies = EntityRegistry.from_iterable(t for _, t in edges)
    unique = sorted({(companies.index[c], technologies.index[t]) for c, t in edges})
    rows, cols = zip(*unique)
    adj = sp.csr_matrix(
        (np.ones(len(unique)), (rows, cols)), shape=(len(companies), len(technologies))
    )
    return BipartiteGraph(companies, technologies, adj)


def degrees(g: BipartiteGraph) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(k_c, k_t)``: row and column sums of the adjacency."""
    return g.company_degrees.copy(), g.technology_degrees.copy()


@dataclass(frozen=True)
class InvestmentGraph:
    """Investor x company matrix of total invested amounts.

    ``edge_amounts[i, c]`` is the sum of every round amount from investor
    ``i`` to company ``c``.  Companies without funding simply have an empty
    column.
    """

    investors: EntityRegistry
    companies: EntityRegistry
    edge_amounts: sp.csr_matrix

    def __post_init__(self):
        amounts = sp.csr_matrix(self.edge_amounts, dtype=np.float64)
        shape = (len(self.investors), len(self.companies))
        if amounts.shape != shape:
            raise GraphConstructionError(
                f"amount matrix shape {amounts.shape} does not match registries {shape}"
            )
        amounts.sum_duplicates()
        if amounts.nnz and (np.any(amounts.data < 0) or not np.all(np.isfinite(amounts.data))):
            raise GraphConstructionError("investment amounts must be finite and >= 0")
        object.__setattr__(self, "edge_amounts", _freeze(amounts))

    @property
    def n_investors(self) -> int:
        return len(self.investors)

    def company_totals(self) -> np.ndarray:
        """Total amount received by each company, summed over investors."""
        return np.asarray(self.edge_amounts.sum(axis=0)).ravel()

    def restrict(self, companies: EntityRegistry) -> "InvestmentGraph":
        """Re-index onto another company registry (subset or reordering)."""
        try:
            cols = [self.companies.index[name] for name in companies]
        except KeyError as exc:
            raise AlignmentError(f"company {exc.args[0]!r} unknown to investment graph") from None
        return InvestmentGraph(self.investors, companies, self.edge_amounts[:, cols])

    def records(self) -> list[tuple[str, str, float]]:
        coo = self.edge_amounts.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [
            (self.investors[coo.row[k]], self.companies[coo.col[k]], float(coo.data[k]))
            for k in order
        ]


def build_investment_graph(
    rounds: Iterable[tuple[str, str, float]],
    companies: EntityRegistry,
) -> InvestmentGraph:
    """Aggregate (investor, company, amount) rounds onto a fixed company registry.

    Company identifiers must already be registered; amounts of repeated
    investor-company rounds are summed.
    """
    rows, cols, vals = [], [], []
    investors: dict[str, int] = {}
    for investor, company, amount in rounds:
        investor = normalize_name(investor)
        company = normalize_name(company)
        if company not in companies:
            raise AlignmentError(f"round references unknown company {company!r}")
        amount = float(amount)
        if amount < 0 or not np.isfinite(amount):
            raise GraphConstructionError(f"invalid amount {amount!r} for {investor}->{company}")
        rows.append(investors.setdefault(investor, len(investors)))
        cols.append(companies.index[company])
        vals.append(amount)
    amounts = sp.csr_matrix(
        (np.asarray(vals, dtype=np.float64), (rows, cols)),
        shape=(len(investors), len(companies)),
    )
    return InvestmentGraph(EntityRegistry(tuple(investors)), companies, amounts)
