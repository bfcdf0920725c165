"""Dataset container and CSV ingestion."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import InputError
from .families import Family, validate_response


@dataclass(frozen=True)
class Dataset:
    """Immutable design matrix / response pair with a family tag.

    Variable indices are 0-based throughout the package.
    """

    X: np.ndarray
    y: np.ndarray
    family: Family
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise InputError("X must be a 2-d matrix")
        n, p = X.shape
        if n < 2 or p < 1:
            raise InputError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape != (n,):
            raise InputError(f"y has shape {y.shape}, expected ({n},)")
        if not np.all(np.isfinite(X)):
            raise InputError("X contains non-finite entries")
        validate_response(y, self.family)
        if self.column_names is not None and len(self.column_names) != p:
            raise InputError("column_names length does not match p")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def with_response(self, y: np.ndarray) -> "Dataset":
        """Same design, new response (used for simulated replicates)."""
        return replace(self, y=np.asarray(y, dtype=float))

    def resolve_indices(self, names_or_indices) -> tuple[int, ...]:
        """Map a list of column names or 0-based indices to indices."""
        out = []
        for item in names_or_indices:
            if isinstance(item, (int, np.integer)):
                j = int(item)
            else:
                s = str(item).strip()
                if s.lstrip("+-").isdigit():
                    j = int(s)
                elif self.column_names is not None and s in self.column_names:
                    j = self.column_names.index(s)
                else:
                    raise InputError(f"unknown column {item!r}")
            if not 0 <= j < self.p:
                raise InputError(f"column index {j} out of range [0, {self.p})")
            out.append(j)
        if len(set(out)) != len(out):
            raise InputError("duplicate columns in index set")
        return tuple(out)


def load_csv(path, response: str, family: Family) -> Dataset:
    """Load a dataset from a CSV with a header row.

    The named response column becomes y; all remaining numeric columns
    form X in file order.
    """
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise InputError(f"cannot read CSV {path}: {exc}") from exc
    if response not in frame.columns:
        raise InputError(f"response column {response!r} not found in {path}")
    y = frame[response].to_numpy()
    covars = frame.drop(columns=[response])
    non_numeric = [
        c for c in covars.columns
        if not np.issubdtype(covars[c].dtype, np.number)
    ]
    if non_numeric:
        raise InputError(f"non-numeric covariate columns: {non_numeric}")
    if covars.shape[1] == 0:
        raise InputError("no covariate columns besides the response")
    try:
        y = np.asarray(y, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"response column is not numeric: {exc}") from exc
    return Dataset(
        X=covars.to_numpy(dtype=float),
        y=y,
        family=family,
        column_names=tuple(covars.columns),
    )
