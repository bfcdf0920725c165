"""Unpenalized fitting of the model restricted to an index set.

Least squares for the linear family, IRLS for binary and Poisson.
The restricted design X_A always carries a leading intercept column;
the residual standard deviation uses the maximum-likelihood divisor n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import (
    DegenerateSigmaError,
    NonConvergenceError,
    RankDeficientError,
    SeparationError,
)
from .families import Family, mean_from_linpred

RANK_RTOL = 1e-10
IRLS_TOL = 1e-10
IRLS_MAX_ITER = 50
SEPARATION_CAP = 30.0


@dataclass(frozen=True)
class RestrictedFit:
    """MLE of the model restricted to A (intercept first in beta_A)."""

    A: tuple[int, ...]
    beta_A: np.ndarray
    family: Family
    sigma_A: float | None = None
    converged: bool = True
    n_irls_iters: int = 0


def restricted_design(dataset: Dataset, A) -> np.ndarray:
    """[1 | X_A] with columns in the order given by A."""
    A = tuple(A)
    return np.column_stack([np.ones(dataset.n)] + [dataset.X[:, j] for j in A])


def _check_rank(XA: np.ndarray) -> None:
    s = np.linalg.svd(XA, compute_uv=False)
    if s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficientError(
            f"restricted design is rank deficient (cond={s[0] / max(s[-1], 1e-300):.2e})"
        )


def _fit_linear(XA: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    beta, _, _, _ = np.linalg.lstsq(XA, y, rcond=None)
    resid = y - XA @ beta
    sigma = float(np.sqrt(np.mean(resid**2)))
    return beta, sigma


def _glm_deviance(y: np.ndarray, mu: np.ndarray, family: Family) -> float:
    if family is Family.BINARY:
        mu = np.clip(mu, 1e-12, 1.0 - 1e-12)
        return float(-2.0 * np.sum(y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu)))
    mu = np.maximum(mu, 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def _fit_glm(
    XA: np.ndarray,
    y: np.ndarray,
    family: Family,
    beta_start: np.ndarray | None = None,
) -> tuple[np.ndarray, bool, int]:
    n, k = XA.shape
    if beta_start is not None and beta_start.shape == (k,):
        beta = beta_start.astype(float).copy()
    else:
        beta = np.zeros(k)
        # start from the intercept-only MLE
        ybar = float(np.mean(y))
        if family is Family.BINARY:
            ybar = min(max(ybar, 1e-6), 1.0 - 1e-6)
            beta[0] = np.log(ybar / (1.0 - ybar))
        else:
            beta[0] = np.log(max(ybar, 1e-6))

    eta = XA @ beta
    mu = mean_from_linpred(np.clip(eta, -700, 700), family)
    dev = _glm_deviance(y, mu, family)
    converged = False
    it = 0
    for it in range(1, IRLS_MAX_ITER + 1):
        if family is Family.BINARY:
            w = mu * (1.0 - mu)
        else:
            w = mu
        w = np.maximum(w, 1e-10)
        z = eta + (y - mu) / w
        sw = np.sqrt(w)
        beta_new, _, _, _ = np.linalg.lstsq(XA * sw[:, None], z * sw, rcond=None)
        if family is Family.BINARY and np.max(np.abs(beta_new)) > SEPARATION_CAP:
            raise SeparationError(
                f"logistic IRLS diverging: max|beta| = {np.max(np.abs(beta_new)):.3g}"
            )
        beta = beta_new
        eta = XA @ beta
        mu = mean_from_linpred(np.clip(eta, -700, 700), family)
        dev_new = _glm_deviance(y, mu, family)
        if abs(dev_new - dev) <= IRLS_TOL * (abs(dev) + 1e-30):
            dev = dev_new
            converged = True
            break
        dev = dev_new
    return beta, converged, it


def fit_restricted(
    dataset: Dataset,
    A,
    beta_start: np.ndarray | None = None,
    require_convergence: bool = False,
) -> RestrictedFit:
    """MLE of the model restricted to A plus intercept.

    Raises RankDeficientError when X_A is singular beyond tolerance,
    SeparationError for diverging logistic fits, and (optionally)
    NonConvergenceError when IRLS hits its iteration cap.
    """
    A = dataset.resolve_indices(A)
    if len(A) + 1 > dataset.n:
        raise RankDeficientError("more restricted parameters than observations")
    XA = restricted_design(dataset, A)
    _check_rank(XA)
    if dataset.family is Family.LINEAR:
        beta, sigma = _fit_linear(XA, dataset.y)
        return RestrictedFit(A, beta, dataset.family, sigma_A=sigma)
    beta, converged, iters = _fit_glm(XA, dataset.y, dataset.family, beta_start)
    if require_convergence and not converged:
        raise NonConvergenceError(f"IRLS did not converge in {IRLS_MAX_ITER} iterations")
    return RestrictedFit(
        A, beta, dataset.family, converged=converged, n_irls_iters=iters
    )


def predict_mean(fit: RestrictedFit, dataset: Dataset) -> np.ndarray:
    """Mean vector e = f(X_A beta_A) under the fit's family."""
    XA = restricted_design(dataset, fit.A)
    return mean_from_linpred(XA @ fit.beta_A, fit.family)


def simulate_response(
    dataset: Dataset, fit: RestrictedFit, rng: np.random.Generator
) -> np.ndarray:
    """Draw a response from the fitted restricted model."""
    XA = restricted_design(dataset, fit.A)
    eta = XA @ fit.beta_A
    if fit.family is Family.LINEAR:
        if fit.sigma_A is None or fit.sigma_A <= 0.0:
            raise DegenerateSigmaError(
                "sigma_A = 0: conditional distribution collapses"
            )
        return eta + rng.normal(0.0, fit.sigma_A, size=dataset.n)
    e = mean_from_linpred(eta, fit.family)
    if fit.family is Family.BINARY:
        return (rng.random(dataset.n) < e).astype(float)
    return rng.poisson(e).astype(float)


class LinearRestrictedSolver:
    """Cached QR factorization for repeated restricted least squares.

    Used by the Monte Carlo loop, which refits the same X_A against
    thousands of simulated responses.
    """

    def __init__(self, dataset: Dataset, A):
        self.A = dataset.resolve_indices(A)
        self.XA = restricted_design(dataset, self.A)
        _check_rank(self.XA)
        self.n = dataset.n
        self._q, self._r = np.linalg.qr(self.XA)

    def fit(self, y: np.ndarray) -> tuple[np.ndarray, float]:
        beta = np.linalg.solve(self._r, self._q.T @ y)
        resid = y - self.XA @ beta
        return beta, float(np.sqrt(np.mean(resid**2)))
