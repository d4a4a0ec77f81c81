"""Soft-threshold robust regression with an L1 penalty on per-row shifts.

Minimizes 0.5 ||y - X b - a||^2 + psi ||a||_1 by alternating the
closed-form update of the shift vector `a` (soft-thresholding of the
residuals at psi) with least squares of y - a on X. The profiled
objective coincides with the Huber loss at cutoff psi, which the fit
cross-checks at convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classic import fit_lad, huber_objective
from .errors import AllFitsFailed, NotConverged
from .linalg import Dataset, lstsq_qr

MAX_ITER = 2000
BETA_TOL = 1e-8
PSI_GRID_SIZE = 30
# MAD-to-sigma factor for the default grid scale
MAD_SCALE = 1.4826
# complexity charge per flagged row when selecting psi, as a multiple of
# log N; the plain value 1 flags most of the sample (see l0 module note)
BIC_SELECTION_MULT = 2.75


@dataclass(frozen=True)
class L1Solution:
    """Fit of the penalized problem at a fixed threshold psi."""

    beta: np.ndarray
    alpha: np.ndarray
    psi: float
    objective: float
    n_outliers: int


def soft_threshold_alpha(r: np.ndarray, psi: float) -> np.ndarray:
    """Closed-form shift update: shrink residuals toward zero by psi.

    Entries with |r| < psi map to exactly zero; the two outer branches
    meet the middle one continuously at +-psi.
    """
    if psi <= 0:
        raise ValueError("psi must be positive")
    r = np.asarray(r, dtype=np.float64)
    return np.where(r >= psi, r - psi, np.where(r <= -psi, r + psi, 0.0))


def _penalized_objective(r_adj: np.ndarray, alpha: np.ndarray, psi: float) -> float:
    return 0.5 * float(r_adj @ r_adj) + psi * float(np.sum(np.abs(alpha)))


def fit_l1(
    data: Dataset,
    psi: float,
    max_iter: int = MAX_ITER,
    beta0: np.ndarray | None = None,
) -> L1Solution:
    """Alternating minimization at fixed psi, started from the LAD fit."""
    if psi <= 0:
        raise ValueError("psi must be positive")
    X, y = data.design, data.y
    beta = fit_lad(data).beta if beta0 is None else np.asarray(beta0, dtype=np.float64)
    alpha = soft_threshold_alpha(y - X @ beta, psi)
    obj = _penalized_objective(y - X @ beta - alpha, alpha, psi)
    converged = False
    for _ in range(max_iter):
        beta_new = lstsq_qr(X, y - alpha)
        alpha = soft_threshold_alpha(y - X @ beta_new, psi)
        obj_new = _penalized_objective(y - X @ beta_new - alpha, alpha, psi)
        assert obj_new <= obj + 1e-12 * max(1.0, obj), (
            "alternating update increased the penalized objective"
        )
        obj = obj_new
        if np.max(np.abs(beta_new - beta)) < BETA_TOL:
            beta = beta_new
            converged = True
            break
        beta = beta_new
    if not converged:
        raise NotConverged(f"fit_l1 did not converge in {max_iter} iterations")
    # profile identity: the penalized objective at the alpha-argmin equals
    # the Huber loss of the residuals at cutoff psi
    profile = huber_objective(y - X @ beta, psi)
    assert abs(obj - profile) <= 1e-8 * (1.0 + abs(profile)), (
        "penalized objective disagrees with its profiled form"
    )
    return L1Solution(
        beta=beta,
        alpha=alpha,
        psi=psi,
        objective=obj,
        n_outliers=int(np.count_nonzero(alpha)),
    )


def default_psi_grid(
    data: Dataset, size: int = PSI_GRID_SIZE, lad_beta: np.ndarray | None = None
) -> np.ndarray:
    """Log-spaced grid from 0.1*s to 10*s, s = 1.4826 * MAD of LAD residuals."""
    if lad_beta is None:
        lad_beta = fit_lad(data).beta
    r = data.y - data.design @ lad_beta
    mad = float(np.median(np.abs(r - np.median(r))))
    scale = MAD_SCALE * mad
    if scale <= 0:
        scale = max(float(np.max(np.abs(r))), 1e-8)
    return np.geomspace(0.1 * scale, 10.0 * scale, size)


def bic_l1(data: Dataset, sol: L1Solution, mult: float = 1.0) -> float:
    """BIC score with the detected-outlier count as the complexity term."""
    n = data.n_obs
    r = data.y - data.design @ sol.beta - sol.alpha
    rss = max(float(r @ r), 1e-300)
    return n * np.log(rss / n) + mult * sol.n_outliers * np.log(n)


def select_psi_bic(
    data: Dataset, grid=None, penalty_mult: float = BIC_SELECTION_MULT
) -> L1Solution:
    """Fit every psi on the grid, score by BIC, return the minimizer.

    Ties break toward larger psi (fewer flagged rows). Non-convergent grid
    points are skipped; if none converge, raises AllFitsFailed. All grid
    points share one LAD starting point, so they stay order-independent.
    """
    beta0 = fit_lad(data).beta
    if grid is None:
        grid = default_psi_grid(data, lad_beta=beta0)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("psi grid is empty")
    if np.any(grid <= 0):
        raise ValueError("psi grid must be positive")
    best: L1Solution | None = None
    best_score = np.inf
    for psi in np.sort(grid):
        try:
            sol = fit_l1(data, float(psi), beta0=beta0)
        except NotConverged:
            continue
        score = bic_l1(data, sol, penalty_mult)
        if score <= best_score:  # ties favor the larger psi scanned later
            best, best_score = sol, score
    if best is None:
        raise AllFitsFailed("no psi on the grid produced a converged fit")
    return best


__all__ = [
    "L1Solution",
    "soft_threshold_alpha",
    "fit_l1",
    "default_psi_grid",
    "bic_l1",
    "select_psi_bic",
]
