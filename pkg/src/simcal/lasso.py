"""Pathwise Lasso solver and entry-point localization.

Covariate columns are centered and scaled to unit variance (divisor n)
internally; penalties, covariances and reported coefficients live on
this standardized scale. The intercept is never penalized. The fitted
gradient is the (1/n)-scaled negative log-likelihood partial derivative,
so for the linear family lambda_max = max_j |(1/n) X~_j' (y - ybar)|.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .data import Dataset
from .errors import NonConvergenceError
from .families import Family, mean_from_linpred


@dataclass(frozen=True)
class LassoConfig:
    kkt_tol: float = 1e-7
    bisect_rtol: float = 1e-6
    tie_rtol: float = 1e-6
    n_grid: int = 100
    lambda_min_ratio: float = 1e-3
    max_sweeps: int = 200
    max_outer: int = 200
    cd_tol: float = 1e-12


DEFAULT_CONFIG = LassoConfig()


@dataclass(frozen=True)
class LassoSolution:
    lam: float
    beta0: float
    beta: np.ndarray
    active_set: tuple[int, ...]
    kkt_residual: float


@dataclass(frozen=True)
class LassoEntryEvent:
    """The (lambda, entering set) pair where the path leaves A."""

    lambda_entry: float
    entering: tuple[int, ...]
    step: int = 1


@njit(cache=True, nogil=True)
def _cd_linear(Xs, y, lam, beta, beta0, colnrm, max_sweeps, tol):
    n, p = Xs.shape
    r = y - beta0
    for j in range(p):
        if beta[j] != 0.0:
            r -= Xs[:, j] * beta[j]
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        maxd = 0.0
        d0 = np.mean(r)
        beta0 += d0
        r -= d0
        if abs(d0) > maxd:
            maxd = abs(d0)
        for j in range(p):
            cn = colnrm[j]
            if cn <= 0.0:
                continue
            bj = beta[j]
            g = cn * bj + np.dot(Xs[:, j], r) / n
            if g > lam:
                bn = (g - lam) / cn
            elif g < -lam:
                bn = (g + lam) / cn
            else:
                bn = 0.0
            d = bn - bj
            if d != 0.0:
                r -= Xs[:, j] * d
                beta[j] = bn
                if abs(d) > maxd:
                    maxd = abs(d)
        if maxd < tol:
            break
    return beta0, sweeps


@njit(cache=True, nogil=True)
def _cd_weighted(Xs, z, w, lam, beta, beta0, max_sweeps, tol):
    n, p = Xs.shape
    wsum = np.sum(w)
    colnrm = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += w[i] * Xs[i, j] * Xs[i, j]
        colnrm[j] = s / n
    r = z - beta0
    for j in range(p):
        if beta[j] != 0.0:
            r -= Xs[:, j] * beta[j]
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        maxd = 0.0
        d0 = np.dot(w, r) / wsum
        beta0 += d0
        r -= d0
        if abs(d0) > maxd:
            maxd = abs(d0)
        for j in range(p):
            cn = colnrm[j]
            if cn <= 0.0:
                continue
            bj = beta[j]
            s = 0.0
            for i in range(n):
                s += w[i] * Xs[i, j] * r[i]
            g = cn * bj + s / n
            if g > lam:
                bn = (g - lam) / cn
            elif g < -lam:
                bn = (g + lam) / cn
            else:
                bn = 0.0
            d = bn - bj
            if d != 0.0:
                r -= Xs[:, j] * d
                beta[j] = bn
                if abs(d) > maxd:
                    maxd = abs(d)
        if maxd < tol:
            break
    return beta0, sweeps


def standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale columns to unit variance with divisor n.

    Constant columns get scale 1 and become all-zero (they can never
    enter the path).
    """
    mu = X.mean(axis=0)
    sd = np.sqrt(np.mean((X - mu) ** 2, axis=0))
    sd = np.where(sd > 0.0, sd, 1.0)
    return (X - mu) / sd, mu, sd


class EntrySolver:
    """Shared standardized workspace for repeated solves on one design."""

    def __init__(self, X: np.ndarray, family: Family, config: LassoConfig = DEFAULT_CONFIG):
        Xs, self.col_mean, self.col_scale = standardize(np.asarray(X, dtype=float))
        # column-major so per-coordinate column slices are contiguous
        self.Xs = np.asfortranarray(Xs)
        self.colnrm = np.mean(self.Xs**2, axis=0)
        self.family = family
        self.cfg = config
        self.n, self.p = self.Xs.shape

    # -- elementary solves ------------------------------------------------

    def _null_mean(self, y: np.ndarray) -> np.ndarray:
        if self.family is Family.LINEAR:
            return np.full(self.n, np.mean(y))
        ybar = float(np.mean(y))
        if self.family is Family.BINARY:
            ybar = min(max(ybar, 1e-10), 1.0 - 1e-10)
        else:
            ybar = max(ybar, 1e-10)
        return np.full(self.n, ybar)

    def lambda_max(self, y: np.ndarray) -> float:
        g = self.Xs.T @ (y - self._null_mean(y)) / self.n
        return float(np.max(np.abs(g)))

    def solve(self, y, lam, beta=None, beta0=None):
        """Solve at one lambda, warm-started in place. Returns (beta0, beta)."""
        cfg = self.cfg
        if beta is None:
            beta = np.zeros(self.p)
        if self.family is Family.LINEAR:
            if beta0 is None:
                beta0 = float(np.mean(y))
            tol = cfg.cd_tol * max(1.0, float(np.std(y)))
            beta0, _ = _cd_linear(
                self.Xs, y, lam, beta, beta0, self.colnrm, cfg.max_sweeps, tol
            )
            return beta0, beta
        if beta0 is None:
            mu0 = self._null_mean(y)[0]
            beta0 = (
                float(np.log(mu0 / (1.0 - mu0)))
                if self.family is Family.BINARY
                else float(np.log(mu0))
            )
        tol = cfg.cd_tol * 10 * max(1.0, float(np.std(y)))
        converged = False
        for _ in range(cfg.max_outer):
            eta = np.clip(beta0 + self.Xs @ beta, -700, 700)
            mu = mean_from_linpred(eta, self.family)
            w = mu * (1.0 - mu) if self.family is Family.BINARY else mu
            w = np.maximum(w, 1e-10)
            z = eta + (y - mu) / w
            old0, old = beta0, beta.copy()
            beta0, _ = _cd_weighted(
                self.Xs, z, w, lam, beta, beta0, cfg.max_sweeps, tol
            )
            delta = max(abs(beta0 - old0), float(np.max(np.abs(beta - old))))
            if delta < 1e-9 * max(1.0, abs(beta0)):
                converged = True
                break
        if not converged:
            raise NonConvergenceError(
                f"penalized IRLS did not converge at lambda={lam:.3g}"
            )
        return beta0, beta

    def gradient(self, y, beta0, beta):
        """(1/n)-scaled negative log-likelihood gradient for penalized coords."""
        if self.family is Family.LINEAR:
            r = y - beta0 - self.Xs @ beta
        else:
            eta = np.clip(beta0 + self.Xs @ beta, -700, 700)
            r = y - mean_from_linpred(eta, self.family)
        return self.Xs.T @ r / self.n

    def kkt_residual(self, y, beta0, beta, lam):
        g = self.gradient(y, beta0, beta)
        active = beta != 0.0
        res = 0.0
        if np.any(active):
            res = float(np.max(np.abs(g[active] - lam * np.sign(beta[active]))))
        if np.any(~active):
            res = max(res, float(np.max(np.maximum(np.abs(g[~active]) - lam, 0.0))))
        return res

    def objective(self, y, beta0, beta, lam):
        if self.family is Family.LINEAR:
            r = y - beta0 - self.Xs @ beta
            nll = 0.5 * np.mean(r**2)
        else:
            eta = np.clip(beta0 + self.Xs @ beta, -700, 700)
            if self.family is Family.BINARY:
                nll = float(np.mean(np.log1p(np.exp(-np.abs(eta))) + np.maximum(eta, 0) - y * eta))
            else:
                nll = float(np.mean(np.exp(eta) - y * eta))
        return float(nll + lam * np.sum(np.abs(beta)))

    # -- entry localization ----------------------------------------------

    def lambda_entry(self, y, A, need_entering: bool = True) -> LassoEntryEvent:
        cfg = self.cfg
        A = tuple(A)
        outside = np.ones(self.p, dtype=bool)
        outside[list(A)] = False
        lmax = self.lambda_max(y)
        if lmax <= 0.0:
            return LassoEntryEvent(0.0, ())

        k = np.arange(cfg.n_grid)
        grid = lmax * cfg.lambda_min_ratio ** (k / (cfg.n_grid - 1))

        beta = np.zeros(self.p)
        if self.family is Family.LINEAR:
            beta0 = float(np.mean(y))
        else:
            mu0 = self._null_mean(y)[0]
            beta0 = (
                float(np.log(mu0 / (1.0 - mu0)))
                if self.family is Family.BINARY
                else float(np.log(mu0))
            )
        prev_lam = lmax * (1.0 + 1e-9)
        prev_state = (np.zeros(self.p), beta0)
        bracket = None
        for lam in grid:
            beta0, beta = self.solve(y, float(lam), beta, beta0)
            if np.any(beta[outside] != 0.0):
                bracket = (float(lam), (beta.copy(), beta0), prev_lam, prev_state)
                break
            prev_lam = float(lam)
            prev_state = (beta.copy(), beta0)
        if bracket is None:
            return LassoEntryEvent(0.0, ())

        lo, lo_state, hi, hi_state = bracket
        while hi - lo > cfg.bisect_rtol * hi:
            mid = 0.5 * (lo + hi)
            b, b0 = hi_state[0].copy(), hi_state[1]
            b0, b = self.solve(y, mid, b, b0)
            if np.any(b[outside] != 0.0):
                lo, lo_state = mid, (b.copy(), b0)
            else:
                hi, hi_state = mid, (b.copy(), b0)

        # polish: at the crossing, lambda equals the largest outside
        # gradient of the just-above solution; exact when that gradient
        # is flat in lambda (e.g. A = empty, or orthogonal designs)
        g = self.gradient(y, hi_state[1], hi_state[0])
        lam_entry = float(np.max(np.abs(g[outside])))
        lam_entry = min(max(lam_entry, lo), hi)

        if not need_entering:
            return LassoEntryEvent(lam_entry, ())

        b, b0 = lo_state[0].copy(), lo_state[1]
        b0, b = self.solve(y, lam_entry * (1.0 - cfg.bisect_rtol), b, b0)
        g = np.abs(self.gradient(y, b0, b))
        gout = np.where(outside, g, -np.inf)
        thresh = (1.0 - cfg.tie_rtol) * float(np.max(gout))
        entering = np.flatnonzero((gout >= thresh) | (outside & (b != 0.0)))
        return LassoEntryEvent(lam_entry, tuple(int(j) for j in entering))


# -- public operations ----------------------------------------------------


def lasso_fit(
    dataset: Dataset,
    lam: float,
    warm_start: LassoSolution | None = None,
    config: LassoConfig = DEFAULT_CONFIG,
) -> LassoSolution:
    """Coordinate-descent Lasso solution at one penalty value.

    Coefficients are reported on the standardized-covariate scale.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    ws = EntrySolver(dataset.X, dataset.family, config)
    beta = warm_start.beta.copy() if warm_start is not None else None
    beta0 = warm_start.beta0 if warm_start is not None else None
    beta0, beta = ws.solve(dataset.y, lam, beta, beta0)
    kkt = ws.kkt_residual(dataset.y, beta0, beta, lam)
    if kkt > config.kkt_tol:
        raise NonConvergenceError(
            f"KKT residual {kkt:.3e} exceeds tolerance {config.kkt_tol:.1e}"
        )
    return LassoSolution(
        lam=float(lam),
        beta0=float(beta0),
        beta=beta,
        active_set=tuple(int(j) for j in np.flatnonzero(beta)),
        kkt_residual=kkt,
    )


def lambda_entry(
    dataset: Dataset, A, config: LassoConfig = DEFAULT_CONFIG
) -> LassoEntryEvent:
    """Largest lambda at which any variable outside A is active.

    Located by descending a log-spaced grid and bisecting the bracketing
    interval to relative width ``config.bisect_rtol``; returns lambda 0
    and an empty entering set if nothing outside A activates down to
    lambda_min.
    """
    A = dataset.resolve_indices(A)
    if len(A) >= dataset.p:
        raise ValueError("A must be a proper subset of the columns")
    ws = EntrySolver(dataset.X, dataset.family, config)
    return ws.lambda_entry(dataset.y, A)


def path_entry_order(
    dataset: Dataset,
    max_steps: int,
    lambda_min_ratio: float = 1e-3,
    config: LassoConfig = DEFAULT_CONFIG,
) -> list[LassoEntryEvent]:
    """No-reentry entry ordering of the full path.

    Repeatedly locates the next entry outside the accumulated set; ties
    (entries within relative ``tie_rtol`` in lambda) arrive as one event.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    cfg = LassoConfig(**{**config.__dict__, "lambda_min_ratio": lambda_min_ratio})
    ws = EntrySolver(dataset.X, dataset.family, cfg)
    events: list[LassoEntryEvent] = []
    A: list[int] = []
    for step in range(1, max_steps + 1):
        if len(A) >= dataset.p:
            break
        ev = ws.lambda_entry(dataset.y, A)
        if ev.lambda_entry <= 0.0 or not ev.entering:
            break
        events.append(LassoEntryEvent(ev.lambda_entry, ev.entering, step))
        A.extend(ev.entering)
    return events
