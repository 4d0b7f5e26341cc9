"""scikit-learn style wrappers around the walker and the grid search.

``X`` is a company x technology biadjacency matrix (dense, sparse, or a
:class:`~techrank.graph.BipartiteGraph`); ``y`` is a ground-truth score for
the target layer.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .calibration import GridSpec, Target, calibrate
from .graph import BipartiteGraph
from .stats import normalize_minmax, spearman
from .walker import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, WalkerParams, run

__all__ = ["TechRank", "TechRankSearch", "check_biadjacency"]


def check_biadjacency(X) -> BipartiteGraph:
    """Validate ``X`` and wrap it as a :class:`BipartiteGraph`."""
    if isinstance(X, BipartiteGraph):
        return X
    X = check_array(X, accept_sparse=("csr", "csc", "coo"), dtype=np.float64, ensure_min_samples=1)
    data = X.data if sp.issparse(X) else X[X != 0]
    if not np.all(data == 1):
        raise ValueError("biadjacency matrix must contain only 0 and 1")
    return BipartiteGraph.from_matrix(X)


class TechRank(BaseEstimator):
    """Score companies and technologies with the TechRank walker.

    Parameters
    ----------
    alpha, beta : float
        Degree exponents of the technology and company damping.
    tol : float
        Convergence threshold on the change of min-max normalized weights.
    max_iter : int
        Iteration cap; reaching it leaves ``converged_`` False.
    target : {"companies", "technologies"}
        Layer used by :meth:`score` and :meth:`fit_transform`.
    record_trajectory : bool
        Keep every iteration's normalized weights in ``trajectory_``.

    Attributes
    ----------
    company_scores_, technology_scores_ : ndarray
        Min-max normalized final weights.
    n_iter_ : int
        Iterations performed.
    converged_ : bool
    state_ : WalkerState
    """

    def __init__(self, alpha=0.0, beta=0.0, tol=DEFAULT_TOLERANCE,
                 max_iter=DEFAULT_MAX_ITERATIONS, target="companies", record_trajectory=False):
        self.alpha = alpha
        self.beta = beta
        self.tol = tol
        self.max_iter = max_iter
        self.target = target
        self.record_trajectory = record_trajectory

    def _params(self) -> WalkerParams:
        return WalkerParams(self.alpha, self.beta, self.tol, self.max_iter, self.record_trajectory)

    def fit(self, X, y=None):
        graph = check_biadjacency(X)
        Target(self.target)
        state = run(graph, self._params())
        self.graph_ = graph
        self.state_ = state
        self.company_scores_ = normalize_minmax(state.w_c)
        self.technology_scores_ = normalize_minmax(state.w_t)
        self.n_iter_ = state.iteration
        self.converged_ = state.converged
        self.trajectory_ = state.trajectory
        return self

    def transform(self, X=None):
        """Normalized scores of the target layer from the fitted walk."""
        check_is_fitted(self, "state_")
        if Target(self.target) is Target.COMPANIES:
            return self.company_scores_
        return self.technology_scores_

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform()

    def score(self, X, y):
        """Spearman correlation between the target layer scores and ``y``."""
        return spearman(self.fit(X).transform(), y)


class TechRankSearch(BaseEstimator):
    """Grid search over (alpha, beta) maximizing Spearman correlation with ``y``.

    After :meth:`fit`, ``best_params_``, ``best_score_``, ``surface_`` and a
    refitted ``best_estimator_`` are available.
    """

    def __init__(self, target="companies", grid=None, tol=DEFAULT_TOLERANCE,
                 max_iter=DEFAULT_MAX_ITERATIONS, n_jobs=1):
        self.target = target
        self.grid = grid
        self.tol = tol
        self.max_iter = max_iter
        self.n_jobs = n_jobs

    def fit(self, X, y):
        graph = check_biadjacency(X)
        grid = self.grid if self.grid is not None else GridSpec()
        if isinstance(grid, str):
            grid = GridSpec.parse(grid)
        result = calibrate(
            graph, np.asarray(y, dtype=np.float64), self.target, grid,
            WalkerParams(tolerance=self.tol, max_iterations=self.max_iter),
            n_jobs=self.n_jobs,
        )
        self.result_ = result
        self.best_params_ = {"alpha": result.alpha_star, "beta": result.beta_star}
        self.best_score_ = result.rho_star
        self.surface_ = result.surface
        self.best_estimator_ = TechRank(
            alpha=result.alpha_star, beta=result.beta_star, tol=self.tol,
            max_iter=self.max_iter, target=self.target,
        ).fit(graph)
        return self

    def transform(self, X=None):
        check_is_fitted(self, "best_estimator_")
        return self.best_estimator_.transform()

    def score(self, X, y):
        check_is_fitted(self, "best_estimator_")
        return spearman(self.best_estimator_.transform(), y)
