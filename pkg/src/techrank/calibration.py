"""Grid-search calibration of (alpha, beta) against an exogenous ranking."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .exceptions import CalibrationError, ParameterRangeError, UndefinedCorrelationError
from .graph import BipartiteGraph
from .stats import normalize_minmax, spearman
from .walker import WalkerParams, run

__all__ = [
    "Target",
    "GridSpec",
    "CalibrationResult",
    "calibrate",
    "evaluate_point",
    "spearman",
    "normalize_minmax",
    "write_surface_csv",
    "read_surface_csv",
]

log = logging.getLogger(__name__)


class Target(str, Enum):
    COMPANIES = "companies"
    TECHNOLOGIES = "technologies"


@dataclass(frozen=True)
class GridSpec:
    alpha_min: float = -2.0
    alpha_max: float = 2.0
    beta_min: float = -2.0
    beta_max: float = 2.0
    step: float = 0.04

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        for lo, hi, axis in ((self.alpha_min, self.alpha_max, "alpha"),
                             (self.beta_min, self.beta_max, "beta")):
            if not lo < hi:
                raise ValueError(f"{axis}: min must be < max")
            n = (hi - lo) / self.step
            if abs(n - round(n)) > 1e-9:
                raise ValueError(f"{axis}: step {self.step} does not divide [{lo}, {hi}]")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"amin,amax,bmin,bmax,step"``."""
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 5:
            raise ValueError(f"expected 5 comma separated numbers, got {text!r}")
        return cls(*parts)

    def _axis(self, lo: float, hi: float) -> np.ndarray:
        n = int(round((hi - lo) / self.step))
        # rounding keeps grid values such as 0.52 exact in decimal
        return np.round(lo + self.step * np.arange(n + 1), 10) + 0.0

    @property
    def alphas(self) -> np.ndarray:
        return self._axis(self.alpha_min, self.alpha_max)

    @property
    def betas(self) -> np.ndarray:
        return self._axis(self.beta_min, self.beta_max)


@dataclass(frozen=True)
class CalibrationResult:
    """Best grid point plus the full correlation surface.

    ``surface[i, j]`` is rho at ``(alphas[i], betas[j])``; NaN marks points
    where the walker did not converge or the correlation was undefined.
    """

    alpha_star: float
    beta_star: float
    rho_star: float
    surface: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    target: Target

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.surface).sum())

    def rows(self):
        """Yield ``(alpha, beta, rho)`` for every grid point, alpha-major."""
        for i, a in enumerate(self.alphas):
            for j, b in enumerate(self.betas):
                yield float(a), float(b), float(self.surface[i, j])


def evaluate_point(
    g: BipartiteGraph,
    truth: np.ndarray,
    target: Target,
    params: WalkerParams,
) -> float:
    """Spearman rho between the walker's target layer and ``truth``; NaN if unusable."""
    try:
        state = run(g, params)
    except ParameterRangeError:
        return float("nan")
    if not state.converged:
        return float("nan")
    weights = state.w_c if target is Target.COMPANIES else state.w_t
    try:
        return spearman(normalize_minmax(weights), truth)
    except UndefinedCorrelationError:
        return float("nan")


def _evaluate_row(g, truth, target, base, alpha, betas):
    return [
        evaluate_point(g, truth, target, replace(base, alpha=float(alpha), beta=float(b), record_trajectory=False))
        for b in betas
    ]


def _argmax(surface, alphas, betas, atol=1e-12):
    best = np.nanmax(surface)
    ii, jj = np.nonzero(surface >= best - atol)
    candidates = sorted(
        (abs(alphas[i]), abs(betas[j]), alphas[i], betas[j], i, j) for i, j in zip(ii, jj)
    )
    *_, i, j = candidates[0]
    return i, j


def calibrate(
    g: BipartiteGraph,
    ground_truth,
    target="companies",
    grid: Optional[GridSpec] = None,
    walker_defaults: Optional[WalkerParams] = None,
    n_jobs: Optional[int] = 1,
) -> CalibrationResult:
    """Find the grid point whose walker ranking best matches ``ground_truth``.

    Every (alpha, beta) on the grid is run independently; points that do not
    converge score NaN and are ignored.  Ties on the best rho go to the
    smallest ``|alpha|``, then the smallest ``|beta|``, then the smallest
    (alpha, beta) pair, so the answer does not depend on evaluation order.

    ``n_jobs`` is forwarded to joblib for parallel evaluation of grid rows.
    """
    target = Target(target)
    grid = grid or GridSpec()
    base = walker_defaults or WalkerParams()
    truth = np.asarray(ground_truth, dtype=np.float64).ravel()
    expected = g.n_companies if target is Target.COMPANIES else g.n_technologies
    if truth.size != expected:
        raise CalibrationError(
            f"ground truth has {truth.size} entries, {target.value} layer has {expected}"
        )
    if not np.all(np.isfinite(truth)):
        raise CalibrationError("ground truth contains non-finite values")
    if truth.size < 2 or np.ptp(truth) == 0:
        raise UndefinedCorrelationError("ground truth is constant; Spearman correlation undefined")
    truth = normalize_minmax(truth)

    alphas, betas = grid.alphas, grid.betas
    if n_jobs == 1:
        rows = [_evaluate_row(g, truth, target, base, a, betas) for a in alphas]
    else:
        rows = Parallel(n_jobs=n_jobs)(
            delayed(_evaluate_row)(g, truth, target, base, a, betas) for a in alphas
        )
    surface = np.asarray(rows, dtype=np.float64)
    if np.all(np.isnan(surface)):
        raise CalibrationError("walker failed to converge at every grid point")
    missing = int(np.isnan(surface).sum())
    if missing:
        log.info("%d of %d grid points excluded (no convergence or undefined rho)",
                 missing, surface.size)
    i, j = _argmax(surface, alphas, betas)
    return CalibrationResult(
        alpha_star=float(alphas[i]),
        beta_star=float(betas[j]),
        rho_star=float(surface[i, j]),
        surface=surface,
        alphas=alphas,
        betas=betas,
        target=target,
    )


def write_surface_csv(path, results) -> None:
    """Write one or more calibration surfaces as ``target,alpha,beta,rho`` rows.

    Missing points are written with an empty rho field.
    """
    if isinstance(results, CalibrationResult):
        results = [results]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["target", "alpha", "beta", "rho"])
        for res in results:
            for a, b, rho in res.rows():
                writer.writerow([res.target.value, repr(a), repr(b),
                                 "" if np.isnan(rho) else repr(rho)])


def read_surface_csv(path) -> dict:
    """Read a surface file back into ``{target: [(alpha, beta, rho), ...]}``."""
    out: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rho = float(row["rho"]) if row["rho"] else float("nan")
            out.setdefault(row["target"], []).append((float(row["alpha"]), float(row["beta"]), rho))
    return out
