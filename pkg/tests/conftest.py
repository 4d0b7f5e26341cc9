import csv
import math
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from techrank.graph import BipartiteGraph


def random_biadjacency(rng, n_c, n_t, n_edges=None, p=None):
    """0/1 matrix with no isolated rows or columns.

    Every technology is first attached to a random company, then every
    empty company gets one technology; remaining edges are spread
    uniformly (``n_edges`` total, or each cell with probability ``p``).
    """
    m = np.zeros((n_c, n_t))
    m[rng.integers(0, n_c, n_t), np.arange(n_t)] = 1
    for c in np.flatnonzero(m.sum(axis=1) == 0):
        m[c, rng.integers(n_t)] = 1
    if p is not None:
        m[rng.random((n_c, n_t)) < p] = 1
    elif n_edges is not None:
        free = np.flatnonzero(m.ravel() == 0)
        extra = n_edges - int(m.sum())
        if extra > 0:
            m.ravel()[rng.choice(free, size=min(extra, free.size), replace=False)] = 1
    return m


def is_connected(m):
    n_c, n_t = m.shape
    full = sp.bmat([[None, sp.csr_matrix(m)], [sp.csr_matrix(m).T, None]])
    return connected_components(full, directed=False)[0] == 1


def random_graph(rng, n_c, n_t, n_edges=None, p=None, connected=False):
    while True:
        m = random_biadjacency(rng, n_c, n_t, n_edges, p)
        if not connected or is_connected(m):
            return BipartiteGraph.from_matrix(m)


def tolerant_ranks(x, atol=1e-9):
    """Average ranks where values within ``atol`` of their sorted neighbour tie."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    start = 0
    for k in range(1, x.size + 1):
        if k == x.size or x[order[k]] - x[order[k - 1]] > atol:
            ranks[order[start:k]] = (start + 1 + k) / 2.0
            start = k
    return ranks


def pearson_oracle(a, b):
    n = len(a)
    ma = math.fsum(a) / n
    mb = math.fsum(b) / n
    num = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    da = math.fsum((x - ma) ** 2 for x in a)
    db = math.fsum((y - mb) ** 2 for y in b)
    return num / math.sqrt(da * db)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


SECTOR_TERMS = ["security", "privacy", "secure", "cybersecurity", "confidential", "safe", "integrity"]
CATEGORIES = ["security", "cyber security", "software", "cloud security", "saas", "privacy",
              "network security", "identity management", "compliance", "fraud detection",
              "analytics", "iot", "blockchain", "cloud management", "marketing"]


def make_dataset(root: Path, n_orgs=40, seed=0):
    """Synthetic Crunchbase-style export: organizations, flat rounds, locations, config."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    pop = 1.0 / np.arange(1, len(CATEGORIES) + 1)
    pop /= pop.sum()
    orgs, locs, rounds = [], [], []
    for i in range(n_orgs):
        k = 1 + rng.poisson(2)
        cats = rng.choice(CATEGORIES, size=min(k, len(CATEGORIES)), replace=False, p=pop)
        terms = rng.choice(SECTOR_TERMS, size=2 if i % 7 else 1, replace=False)
        desc = f"Company {i} builds {' and '.join(terms)} products"
        lat, lon = rng.uniform(25, 60), rng.uniform(-120, 20)
        orgs.append([f"id{i}", f"Org {i}", desc, ",".join(cats), f"{lat:.4f}", f"{lon:.4f}", "USA"])
        locs.append([f"org {i}", f"{lat:.4f}", f"{lon:.4f}"])
    orgs.append(["", "Nameless", "secure privacy", "software", "", "", ""])
    for r in range(3 * n_orgs):
        c = rng.integers(n_orgs)
        amount = "" if r % 11 == 0 else f"{rng.integers(1, 50) * 100000}"
        rounds.append([f"r{r}", f"inv{rng.integers(8)}", f"id{c}", amount, f"2020-01-{1 + r % 28:02d}"])
    rounds.append(["rx", "inv0", "unknown-company", "1000", "2020-02-01"])
    write_csv(root / "organizations.csv",
              ["uuid", "name", "short_description", "category_list", "latitude", "longitude", "country_code"], orgs)
    write_csv(root / "funding_rounds.csv",
              ["round_id", "investor_id", "company_id", "amount", "announced_on"], rounds)
    write_csv(root / "locations.csv", ["entity_id", "latitude", "longitude"], locs)
    (root / "config.yaml").write_text(
        "data:\n"
        "  organizations: organizations.csv\n"
        "  funding_rounds: funding_rounds.csv\n"
        "  locations: locations.csv\n"
        "sector:\n"
        "  name: cybersecurity\n"
        "  min_matches: 2\n"
        "profiles:\n"
        "  companies: {previous_investments: 0.8, location: 0.2}\n"
        "  technologies: {previous_investments: 1.0}\n"
        "investor_location: [40.7128, -74.0060]\n"
        'grid: "-2,2,-2,2,0.4"\n'
        "walker: {tolerance: 1.0e-8, max_iterations: 5000}\n"
        "output: out\n"
        "seed: 7\n",
        encoding="utf-8",
    )
    return root / "config.yaml"


@pytest.fixture
def dataset(tmp_path):
    return make_dataset(tmp_path / "data")


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the summary is printed at the end of the run."""
    def record(number, name, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        print(line)
        _VERDICTS.append((number, line))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
