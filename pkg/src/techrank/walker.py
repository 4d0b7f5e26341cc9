"""The TechRank random walker on a company-technology graph.

Weights start at the node degrees.  Each step moves technology weight onto
companies through a column-stochastic matrix whose entries are damped by
``k_c ** -beta``, and company weight onto technologies through a
row-stochastic matrix damped by ``k_t ** -alpha``.  Both layers are updated
from the previous state (Jacobi style).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .exceptions import ParameterRangeError
from .graph import BipartiteGraph
from .stats import normalize_minmax

__all__ = [
    "WalkerParams",
    "WalkerState",
    "TransitionMatrices",
    "init_weights",
    "transition_matrices",
    "step",
    "run",
    "DEFAULT_TOLERANCE",
    "DEFAULT_MAX_ITERATIONS",
]

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 5000
# graphs with at most this many matrix cells use dense matvecs
DENSE_LIMIT = 40_000


@dataclass(frozen=True)
class WalkerParams:
    alpha: float = 0.0
    beta: float = 0.0
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    record_trajectory: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ParameterRangeError("alpha and beta must be finite")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations}")


@dataclass(frozen=True)
class WalkerState:
    """Paired company/technology weights plus convergence bookkeeping.

    ``iterations_c``/``iterations_t`` hold the first iteration at which the
    layer's normalized weights moved by less than the tolerance (``None``
    while that has not happened).  ``trajectory`` holds one
    ``(companies, technologies)`` pair of min-max normalized vectors per
    iteration, starting with the degree initialization.
    """

    w_c: np.ndarray
    w_t: np.ndarray
    iteration: int = 0
    iterations_c: Optional[int] = None
    iterations_t: Optional[int] = None
    converged: bool = False
    trajectory: Optional[list] = field(default=None, repr=False)

    @property
    def companies_normalized(self) -> np.ndarray:
        return normalize_minmax(self.w_c)

    @property
    def technologies_normalized(self) -> np.ndarray:
        return normalize_minmax(self.w_t)

    @property
    def companies_share(self) -> np.ndarray:
        """Company weights divided by their sum."""
        return self.w_c / self.w_c.sum()

    @property
    def technologies_share(self) -> np.ndarray:
        return self.w_t / self.w_t.sum()


@dataclass(frozen=True)
class TransitionMatrices:
    """``g_ct`` is column-stochastic, ``g_tc`` row-stochastic; both (n_c, n_t)."""

    g_ct: sp.csr_matrix
    g_tc: sp.csr_matrix
    alpha: float
    beta: float
    # operators used by step(): transpose cached, small graphs held dense
    to_companies: object = field(init=False, repr=False, compare=False)
    to_technologies: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g_tc_t = sp.csr_matrix(self.g_tc.T)
        if self.g_ct.shape[0] * self.g_ct.shape[1] <= DENSE_LIMIT:
            object.__setattr__(self, "to_companies", self.g_ct.toarray())
            object.__setattr__(self, "to_technologies", g_tc_t.toarray())
        else:
            object.__setattr__(self, "to_companies", self.g_ct)
            object.__setattr__(self, "to_technologies", g_tc_t)


def init_weights(g: BipartiteGraph) -> WalkerState:
    """Initial state: every node weighted by its degree."""
    return WalkerState(
        w_c=g.company_degrees.astype(np.float64),
        w_t=g.technology_degrees.astype(np.float64),
    )


def _degree_power(k: np.ndarray, exponent: float) -> np.ndarray:
    # k >= 1, so log k >= 0 and exp stays finite unless the exponent is extreme
    with np.errstate(over="ignore", under="ignore"):
        out = np.exp(-exponent * np.log(k.astype(np.float64)))
    if not np.all(np.isfinite(out)) or np.any(out == 0):
        raise ParameterRangeError(
            f"degree power k**{-exponent:g} over/underflows for max degree {k.max()}"
        )
    return out


def transition_matrices(g: BipartiteGraph, alpha: float, beta: float) -> TransitionMatrices:
    """Degree-damped transition probabilities of the walker.

    ``g_ct[c, t] = M[c, t] k_c**-beta / sum_c' M[c', t] k_c'**-beta``
    ``g_tc[c, t] = M[c, t] k_t**-alpha / sum_t' M[c, t'] k_t'**-alpha``
    """
    m = g.adjacency
    damp_c = _degree_power(g.company_degrees, beta)
    damp_t = _degree_power(g.technology_degrees, alpha)

    weighted_c = sp.diags(damp_c) @ m
    col_norm = np.asarray(weighted_c.sum(axis=0)).ravel()
    weighted_t = m @ sp.diags(damp_t)
    row_norm = np.asarray(weighted_t.sum(axis=1)).ravel()
    if not (np.all(np.isfinite(col_norm)) and np.all(np.isfinite(row_norm))):
        raise ParameterRangeError(f"normalizers overflow at alpha={alpha}, beta={beta}")

    g_ct = sp.csr_matrix(weighted_c @ sp.diags(1.0 / col_norm))
    g_tc = sp.csr_matrix(sp.diags(1.0 / row_norm) @ weighted_t)
    return TransitionMatrices(g_ct=g_ct, g_tc=g_tc, alpha=float(alpha), beta=float(beta))


def step(state: WalkerState, tm: TransitionMatrices) -> WalkerState:
    """One walker step; both layers are computed from ``state``."""
    if tm.g_ct.shape != (state.w_c.size, state.w_t.size):
        raise ValueError(
            f"state sizes ({state.w_c.size}, {state.w_t.size}) do not match "
            f"transition matrices {tm.g_ct.shape}"
        )
    w_c = tm.to_companies @ state.w_t
    w_t = tm.to_technologies @ state.w_c
    return replace(state, w_c=w_c, w_t=w_t, iteration=state.iteration + 1)


def _normalized_change(new: np.ndarray, prev: np.ndarray) -> tuple[np.ndarray, float]:
    lo = new.min()
    spread = new.max() - lo
    norm = (new - lo) / spread if spread > 0 else np.zeros_like(new)
    return norm, float(np.abs(norm - prev).max())


def run(g: BipartiteGraph, params: WalkerParams, tm: Optional[TransitionMatrices] = None) -> WalkerState:
    """Iterate the walker until both normalized layers stop moving.

    Convergence means the L-infinity change of the min-max normalized weights
    falls below ``params.tolerance`` for companies and technologies at the
    same iteration, and the following step (computed but not counted)
    stays below it too.  Without that confirmation the two interleaved
    chains of each layer can pass the test on a quiet step and jump on the
    next one.  Hitting ``max_iterations`` first returns the last state with
    ``converged=False``.
    """
    if tm is None:
        tm = transition_matrices(g, params.alpha, params.beta)
    init = init_weights(g)
    w_c, w_t = init.w_c, init.w_t
    to_c, to_t = tm.to_companies, tm.to_technologies
    tol = params.tolerance
    cap = int(params.max_iterations)
    norm_c = normalize_minmax(w_c)
    norm_t = normalize_minmax(w_t)
    trajectory = [(norm_c, norm_t)] if params.record_trajectory else None
    first_c = first_t = None
    converged = pending = False

    n = 0
    while True:
        cand_c, cand_t = to_c @ w_t, to_t @ w_c
        cand_norm_c, delta_c = _normalized_change(cand_c, norm_c)
        cand_norm_t, delta_t = _normalized_change(cand_t, norm_t)
        below = delta_c < tol and delta_t < tol
        if pending and below:
            converged = True
            break
        if n == cap:
            break
        n += 1
        w_c, w_t, norm_c, norm_t = cand_c, cand_t, cand_norm_c, cand_norm_t
        if first_c is None and delta_c < tol:
            first_c = n
        if first_t is None and delta_t < tol:
            first_t = n
        if trajectory is not None:
            trajectory.append((norm_c, norm_t))
        pending = below

    return WalkerState(
        w_c=np.asarray(w_c, dtype=np.float64),
        w_t=np.asarray(w_t, dtype=np.float64),
        iteration=n,
        iterations_c=first_c,
        iterations_t=first_t,
        converged=converged,
        trajectory=trajectory,
    )
