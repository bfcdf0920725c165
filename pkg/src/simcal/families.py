"""Model families and their canonical links."""

from __future__ import annotations

import enum

import numpy as np

from .errors import InputError, OverflowPredictionError

# exp() overflows above this for float64
_EXP_CAP = 709.0


class Family(str, enum.Enum):
    LINEAR = "linear"
    BINARY = "binary"
    POISSON = "poisson"

    @classmethod
    def parse(cls, name: str) -> "Family":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise InputError(
                f"unknown family {name!r}; expected one of "
                f"{', '.join(f.value for f in cls)}"
            ) from None


def mean_from_linpred(eta: np.ndarray, family: Family) -> np.ndarray:
    """Apply the canonical inverse link: identity, logistic or exponential."""
    if family is Family.LINEAR:
        return np.asarray(eta, dtype=float)
    if family is Family.BINARY:
        # numerically stable logistic
        out = np.empty_like(eta, dtype=float)
        pos = eta >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
        ex = np.exp(eta[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    if np.any(eta > _EXP_CAP):
        raise OverflowPredictionError(
            "Poisson linear predictor exceeds log of max representable value"
        )
    return np.exp(eta)


def validate_response(y: np.ndarray, family: Family) -> None:
    if not np.all(np.isfinite(y)):
        raise InputError("response contains non-finite values")
    if family is Family.BINARY:
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise InputError("binary family requires responses in {0, 1}")
    elif family is Family.POISSON:
        if np.any(y < 0) or not np.all(y == np.floor(y)):
            raise InputError(
                "poisson family requires non-negative integer responses"
            )


def conditional_variance(e: np.ndarray, family: Family) -> np.ndarray:
    """Var(Y_i | X) at mean e_i. Linear uses the sigma=1 convention."""
    if family is Family.LINEAR:
        return np.ones_like(e)
    if family is Family.BINARY:
        return e * (1.0 - e)
    return np.asarray(e, dtype=float)
