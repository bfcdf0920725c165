"""Scenario generation and statistical verification harness.

Generates Toeplitz-correlated Gaussian designs, scales coefficients to a
target empirical signal-to-noise ratio, and runs replicated studies of
the null p-value distribution (checked by Kolmogorov-Smirnov tests
against Uniform[0,1]) and of the selection procedure (FWER / FDR /
sensitivity across an alpha grid, replayed from one survey pass).
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.special import kolmogorov

from .data import Dataset
from .errors import (
    BracketFailureError,
    InputError,
    OverflowPredictionError,
    TooFewSamplesError,
)
from .families import Family, conditional_variance, mean_from_linpred
from .lasso import DEFAULT_CONFIG, LassoConfig
from .pvalue import PValueVariant, empirical_p_value, naive_p_value
from .selection import HaltCriterion, halting_step, select


def toeplitz_design(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. rows of a centered Gaussian with covariance rho^|i-j|,
    generated column-by-column through the AR(1) recursion."""
    if not 0.0 <= rho < 1.0:
        raise InputError("rho must lie in [0, 1)")
    xi = rng.normal(size=(n, p))
    X = np.empty((n, p))
    X[:, 0] = xi[:, 0]
    scale = math.sqrt(1.0 - rho**2)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * xi[:, j]
    return X


def empirical_snr(X, beta, beta0: float, family: Family) -> float:
    """Sample variance of E[Y|X] over the mean of Var(Y|X); sigma = 1 for
    the linear family."""
    eta = beta0 + np.asarray(X) @ np.asarray(beta, dtype=float)
    e = mean_from_linpred(eta, family)
    num = float(np.var(e, ddof=1))
    den = float(np.mean(conditional_variance(e, family)))
    if den == 0.0:
        # saturated means (e.g. binary probabilities rounding to 0/1)
        return float("inf")
    return num / den


def scale_beta_to_snr(
    X,
    support,
    family: Family,
    snr_target: float,
    intercept: float = 0.0,
    rtol: float = 1e-6,
) -> np.ndarray:
    """Equal coefficients on the support, scaled so the empirical SNR
    hits snr_target (bisection on a verified bracket)."""
    support = tuple(int(j) for j in support)
    if not support:
        raise InputError("support must be non-empty")
    if snr_target <= 0.0:
        raise InputError("snr_target must be positive")
    p = X.shape[1]
    base = np.zeros(p)
    base[list(support)] = 1.0

    def f(c: float) -> float:
        try:
            with np.errstate(over="ignore"):
                return empirical_snr(X, c * base, intercept, family)
        except OverflowPredictionError:
            # exp link saturates far above any realistic target
            return float("inf")

    grid = np.logspace(-8, 8, 65)
    vals = np.array([f(c) for c in grid])
    if vals[0] > snr_target or np.all(vals < snr_target):
        raise BracketFailureError(
            f"snr target {snr_target} unreachable within c in [1e-08, 1e+08]"
        )
    # adjacent grid pair straddling the target: a verified monotone bracket
    idx = int(np.flatnonzero(vals >= snr_target)[0])
    if idx == 0:
        return grid[0] * base
    lo, hi = grid[idx - 1], grid[idx]
    for _ in range(200):
        c = 0.5 * (lo + hi)
        if f(c) < snr_target:
            lo = c
        else:
            hi = c
        if hi - lo <= 1e-12 * hi:
            break
    c = 0.5 * (lo + hi)
    if abs(f(c) - snr_target) > rtol * snr_target:
        raise BracketFailureError("snr bisection did not converge")
    return c * base


class KsSided(str, enum.Enum):
    TWO_SIDED = "two_sided"
    # ECDF above the diagonal: excess of small values, dominance violated
    ECDF_ABOVE = "ecdf_above"
    ECDF_BELOW = "ecdf_below"


def ks_uniform(samples, sided: KsSided = KsSided.TWO_SIDED) -> tuple[float, float]:
    """K-S statistic and p-value against Uniform[0,1].

    Two-sided p uses the asymptotic Kolmogorov distribution; one-sided
    uses exp(-2 m D^2).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    if m < 5:
        raise TooFewSamplesError(f"need at least 5 samples, got {m}")
    if x[0] < 0.0 or x[-1] > 1.0:
        raise InputError("samples must lie in [0, 1]")
    i = np.arange(1, m + 1)
    d_above = float(np.max(i / m - x))
    d_below = float(np.max(x - (i - 1) / m))
    if sided is KsSided.TWO_SIDED:
        d = max(d_above, d_below)
        return d, float(kolmogorov(math.sqrt(m) * d))
    d = d_above if sided is KsSided.ECDF_ABOVE else d_below
    return d, float(min(1.0, math.exp(-2.0 * m * d * d)))


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 200
    p: int = 50
    rho: float = 0.0
    family: Family = Family.LINEAR
    n_active: int = 0
    snr_target: float = 0.0
    N: int = 50
    n_replicates: int = 200
    alpha_grid: tuple[float, ...] = (0.05,)
    intercept: float = 0.0
    master_seed: int = 0
    variant: PValueVariant = PValueVariant.PLAIN
    compute_naive: bool = False
    survey_alpha: float = 0.95
    max_steps: int | None = None

    def __post_init__(self):
        if self.n_active > self.p:
            raise InputError("n_active must not exceed p")
        if (self.snr_target == 0.0) != (self.n_active == 0):
            raise InputError("snr_target = 0 iff n_active = 0")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        raw = dict(raw)
        if "family" in raw:
            raw["family"] = Family.parse(raw["family"])
        if "variant" in raw:
            raw["variant"] = PValueVariant(raw["variant"])
        if "alpha_grid" in raw:
            raw["alpha_grid"] = tuple(float(a) for a in raw["alpha_grid"])
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown scenario config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise InputError(f"bad scenario config: {exc}") from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        d["variant"] = self.variant.value
        d["alpha_grid"] = list(self.alpha_grid)
        return d


@dataclass
class ScenarioMetrics:
    kind: str
    n_replicates: int
    replicate_p_values: list[float] = field(default_factory=list)
    naive_p_values: list[float] = field(default_factory=list)
    ks_two_sided: tuple[float, float] | None = None
    ks_ecdf_above: tuple[float, float] | None = None
    ks_ecdf_below: tuple[float, float] | None = None
    naive_ks_two_sided: tuple[float, float] | None = None
    naive_ks_ecdf_above: tuple[float, float] | None = None
    naive_ks_ecdf_below: tuple[float, float] | None = None
    # per_alpha[criterion][alpha] = {"fwer": .., "fdr": .., "sensitivity": ..}
    per_alpha: dict = field(default_factory=dict)
    fwer: float | None = None
    fdr: float | None = None
    sensitivity: float | None = None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "n_replicates": self.n_replicates,
            "replicate_p_values": list(self.replicate_p_values),
            "per_alpha": self.per_alpha,
            "fwer": self.fwer,
            "fdr": self.fdr,
            "sensitivity": self.sensitivity,
        }
        if self.naive_p_values:
            out["naive_p_values"] = list(self.naive_p_values)
        for name in (
            "ks_two_sided",
            "ks_ecdf_above",
            "ks_ecdf_below",
            "naive_ks_two_sided",
            "naive_ks_ecdf_above",
            "naive_ks_ecdf_below",
        ):
            v = getattr(self, name)
            if v is not None:
                out[name] = {"statistic": v[0], "p_value": v[1]}
        return out


def _replicate_dataset(
    config: ScenarioConfig, replicate: int
) -> tuple[Dataset, tuple[int, ...]]:
    rng = np.random.default_rng(
        np.random.SeedSequence([config.master_seed, replicate])
    )
    X = toeplitz_design(config.n, config.p, config.rho, rng)
    if config.n_active > 0:
        support = tuple(
            sorted(int(j) for j in rng.choice(config.p, config.n_active, replace=False))
        )
        beta = scale_beta_to_snr(
            X, support, config.family, config.snr_target, config.intercept
        )
    else:
        support = ()
        beta = np.zeros(config.p)
    eta = config.intercept + X @ beta
    if config.family is Family.LINEAR:
        y = eta + rng.normal(size=config.n)
    else:
        e = mean_from_linpred(eta, config.family)
        if config.family is Family.BINARY:
            y = (rng.random(config.n) < e).astype(float)
        else:
            y = rng.poisson(e).astype(float)
    return Dataset(X=X, y=y, family=config.family), support


def _null_replicate(config: ScenarioConfig, replicate: int, lasso_config: LassoConfig):
    dataset, support = _replicate_dataset(config, replicate)
    pv = empirical_p_value(
        dataset,
        support,
        config.N,
        config.variant,
        seed=np.random.SeedSequence([config.master_seed, replicate, 1]),
        config=lasso_config,
    )
    naive = None
    if config.compute_naive:
        naive = naive_p_value(
            dataset,
            support,
            config.N,
            seed=np.random.SeedSequence([config.master_seed, replicate, 2]),
            config=lasso_config,
        ).value
    return pv.value, naive


def run_null_study(
    config: ScenarioConfig,
    lasso_config: LassoConfig = DEFAULT_CONFIG,
    n_jobs: int = 1,
) -> ScenarioMetrics:
    """Distribution of the null p-value over replicated datasets, with
    the known active set as A, summarized by K-S uniformity tests."""
    results = Parallel(n_jobs=n_jobs)(
        delayed(_null_replicate)(config, r, lasso_config)
        for r in range(config.n_replicates)
    )
    p_values = [r[0] for r in results]
    metrics = ScenarioMetrics(
        kind="null",
        n_replicates=config.n_replicates,
        replicate_p_values=p_values,
    )
    metrics.ks_two_sided = ks_uniform(p_values, KsSided.TWO_SIDED)
    metrics.ks_ecdf_above = ks_uniform(p_values, KsSided.ECDF_ABOVE)
    metrics.ks_ecdf_below = ks_uniform(p_values, KsSided.ECDF_BELOW)
    if config.compute_naive:
        naive = [r[1] for r in results]
        metrics.naive_p_values = naive
        metrics.naive_ks_two_sided = ks_uniform(naive, KsSided.TWO_SIDED)
        metrics.naive_ks_ecdf_above = ks_uniform(naive, KsSided.ECDF_ABOVE)
        metrics.naive_ks_ecdf_below = ks_uniform(naive, KsSided.ECDF_BELOW)
    return metrics


def _selection_replicate(
    config: ScenarioConfig, replicate: int, lasso_config: LassoConfig
):
    dataset, support = _replicate_dataset(config, replicate)
    result = select(
        dataset,
        alpha=min(config.alpha_grid),
        criterion=HaltCriterion.THRESHOLDING,
        N=config.N,
        max_steps=config.max_steps,
        seed=int(
            np.random.SeedSequence([config.master_seed, replicate, 3]).generate_state(1)[0]
        ),
        variant=PValueVariant.PLUS,
        survey_alpha=config.survey_alpha,
        config=lasso_config,
    )
    entering = [list(s.entering) for s in result.steps]
    return list(result.p_seq), entering, list(support)


def run_selection_study(
    config: ScenarioConfig,
    lasso_config: LassoConfig = DEFAULT_CONFIG,
    n_jobs: int = 1,
) -> ScenarioMetrics:
    """Survey-mode selection per replicate, replayed across alpha_grid
    for both halting criteria; aggregates FWER, FDR and sensitivity."""
    traces = Parallel(n_jobs=n_jobs)(
        delayed(_selection_replicate)(config, r, lasso_config)
        for r in range(config.n_replicates)
    )
    metrics = ScenarioMetrics(kind="selection", n_replicates=config.n_replicates)
    for criterion in HaltCriterion:
        per_alpha = {}
        for alpha in config.alpha_grid:
            any_fp, fdp, sens = [], [], []
            for p_seq, entering, support in traces:
                h = halting_step(p_seq, alpha, criterion)
                sel = {j for step in entering[:h] for j in step}
                fp = sel - set(support)
                any_fp.append(1.0 if fp else 0.0)
                fdp.append(len(fp) / len(sel) if sel else 0.0)
                if support:
                    sens.append(len(sel & set(support)) / len(support))
            per_alpha[float(alpha)] = {
                "fwer": float(np.mean(any_fp)),
                "fdr": float(np.mean(fdp)),
                "sensitivity": float(np.mean(sens)) if sens else 0.0,
            }
        metrics.per_alpha[criterion.value] = per_alpha
    first = metrics.per_alpha[HaltCriterion.THRESHOLDING.value][float(config.alpha_grid[0])]
    metrics.fwer = first["fwer"]
    metrics.fdr = first["fdr"]
    metrics.sensitivity = first["sensitivity"]
    return metrics
