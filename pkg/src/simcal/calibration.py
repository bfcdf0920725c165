"""Response calibration toward a target restricted-model estimate.

Linear calibration is an exact affine map. Binary and Poisson responses
are calibrated stochastically: a one-step integer-preserving resampling,
wrapped in an iterative accept/reject loop that tracks the squared
distance of the refit linear predictor from its target.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import (
    DegenerateSigmaError,
    DomainViolationError,
    NumericalError,
)
from .families import Family, mean_from_linpred
from .restricted import _fit_glm

_Z_SLACK = 1e-12


class CalibrationStop(str, enum.Enum):
    THREE_CONSECUTIVE_REJECTIONS = "three_consecutive_rejections"
    ITERATION_CAP = "iteration_cap"


@dataclass(frozen=True)
class CalibrationTrace:
    iterations: int
    mse_history: tuple[float, ...]
    rejected_steps: int
    terminated_by: CalibrationStop


def calibrate_linear(
    y_sim: np.ndarray,
    beta_from: np.ndarray,
    sigma_from: float,
    beta_to: np.ndarray,
    sigma_to: float,
    X_A: np.ndarray,
) -> np.ndarray:
    """Affine map sending restricted-estimate (beta_from, sigma_from) to
    (beta_to, sigma_to): X_A b2 + (s2/s1) (y - X_A b1)."""
    if sigma_from <= 0.0:
        raise DegenerateSigmaError("source sigma must be positive")
    return X_A @ beta_to + (sigma_to / sigma_from) * (y_sim - X_A @ beta_from)


def calibrate_onestep(
    y1: np.ndarray,
    e1: np.ndarray,
    e2: np.ndarray,
    family: Family,
    rng: np.random.Generator,
) -> np.ndarray:
    """One stochastic calibration step; componentwise, E[out | y1] = Z.

    Binary: Z scales y1 down by e2/e1 or (1-y1) down by (1-e2)/(1-e1),
    then draws Bernoulli(Z). Poisson: Z = (e2/e1) y1, output is floor(Z)
    plus a Bernoulli on the fractional part.
    """
    y1 = np.asarray(y1, dtype=float)
    if family is Family.BINARY:
        down = e2 <= e1
        z = np.where(
            down,
            (e2 / e1) * y1,
            1.0 - ((1.0 - e2) / (1.0 - e1)) * (1.0 - y1),
        )
        if np.any(z < -_Z_SLACK) or np.any(z > 1.0 + _Z_SLACK):
            raise DomainViolationError(
                "one-step calibration probability outside [0, 1]"
            )
        z = np.clip(z, 0.0, 1.0)
        return (rng.random(y1.shape) < z).astype(float)
    if family is Family.POISSON:
        z = (e2 / e1) * y1
        base = np.floor(z)
        return base + (rng.random(y1.shape) < (z - base)).astype(float)
    raise ValueError("one-step calibration applies to binary and poisson only")


def calibrate_iterative(
    y1: np.ndarray,
    beta_target: np.ndarray,
    X_A: np.ndarray,
    family: Family,
    rng: np.random.Generator,
    iter_cap: int = 100,
) -> tuple[np.ndarray, CalibrationTrace]:
    """Repeat one-step calibration toward beta_target with accept/reject.

    Each proposal is refit by IRLS; steps that increase
    ||X_A beta - X_A beta_target||^2 are rejected (a refit failure counts
    as a rejection). Halts after 3 consecutive rejections or iter_cap
    iterations.
    """
    e_target = mean_from_linpred(X_A @ beta_target, family)
    eta_target = X_A @ beta_target

    beta_cur, _, _ = _fit_glm(X_A, np.asarray(y1, dtype=float), family)
    y_cur = np.asarray(y1, dtype=float)
    mse_cur = float(np.sum((X_A @ beta_cur - eta_target) ** 2))
    mse_history = [mse_cur]

    rejected = 0
    consecutive_rejections = 0
    terminated_by = CalibrationStop.ITERATION_CAP
    iterations = 0
    for iterations in range(1, iter_cap + 1):
        e_cur = mean_from_linpred(X_A @ beta_cur, family)
        y_prop = calibrate_onestep(y_cur, e_cur, e_target, family, rng)
        try:
            beta_prop, _, _ = _fit_glm(X_A, y_prop, family, beta_start=beta_cur)
            mse_prop = float(np.sum((X_A @ beta_prop - eta_target) ** 2))
            ok = np.isfinite(mse_prop) and mse_prop <= mse_cur
        except NumericalError:
            ok = False
        if ok:
            y_cur, beta_cur, mse_cur = y_prop, beta_prop, mse_prop
            mse_history.append(mse_cur)
            consecutive_rejections = 0
        else:
            rejected += 1
            consecutive_rejections += 1
            if consecutive_rejections >= 3:
                terminated_by = CalibrationStop.THREE_CONSECUTIVE_REJECTIONS
                break
    trace = CalibrationTrace(
        iterations=iterations,
        mse_history=tuple(mse_history),
        rejected_steps=rejected,
        terminated_by=terminated_by,
    )
    return y_cur, trace
