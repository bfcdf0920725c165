"""Sequential variable selection driven by conditional p-values.

At each step the entry test is run against the set of variables already
selected; thresholding continues while p_k <= alpha, ForwardStop while
the running mean of -log(1 - p_i) stays below alpha. A survey pass at a
high alpha records the p-value sequence once so that any lower alpha can
be replayed without re-simulating.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .lasso import DEFAULT_CONFIG, EntrySolver, LassoConfig
from .pvalue import (
    EmpiricalPValue,
    Estimand,
    PValueVariant,
    _ReplicateRunner,
    count_exceedances,
    simulated_entry_lambdas,
)
from .families import Family

# p = 1 would make -log(1 - p) blow up; clamp just below 1
FORWARDSTOP_CLAMP = 1e-12


class HaltCriterion(str, enum.Enum):
    THRESHOLDING = "threshold"
    FORWARDSTOP = "forwardstop"


@dataclass(frozen=True)
class SelectionStep:
    step: int
    entering: tuple[int, ...]
    lambda_entry: float
    p: float
    p_fs: float
    exceed_count: int
    accepted: bool


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    p_seq: tuple[float, ...]
    pfs_seq: tuple[float, ...]
    criterion: HaltCriterion
    alpha: float
    halted_at_step: int
    entry_lambdas: tuple[float, ...]
    halt_reason: str
    steps: tuple[SelectionStep, ...] = ()
    survey_alpha: float | None = None


def forwardstop_transform(p_seq) -> np.ndarray:
    """Running means of -log(1 - p_i), p_i clamped below 1."""
    p = np.asarray(p_seq, dtype=float)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    p = np.minimum(p, 1.0 - FORWARDSTOP_CLAMP)
    terms = -np.log1p(-p)
    return np.cumsum(terms) / np.arange(1, p.size + 1)


def halting_step(p_seq, alpha: float, criterion: HaltCriterion) -> int:
    """Number of steps accepted before the first exceedance of alpha."""
    stats = (
        np.asarray(p_seq, dtype=float)
        if criterion is HaltCriterion.THRESHOLDING
        else forwardstop_transform(p_seq)
    )
    above = np.flatnonzero(stats > alpha)
    return int(above[0]) if above.size else len(stats)


def replay_selection(p_seq, alpha_grid, criterion: HaltCriterion) -> list[int]:
    """Halting steps across an alpha grid; pure arithmetic, no simulation."""
    return [halting_step(p_seq, float(a), criterion) for a in alpha_grid]


def select(
    dataset: Dataset,
    alpha: float,
    criterion: HaltCriterion = HaltCriterion.THRESHOLDING,
    N: int = 100,
    max_steps: int | None = None,
    seed: int = 0,
    variant: PValueVariant = PValueVariant.PLUS,
    survey_alpha: float | None = None,
    config: LassoConfig = DEFAULT_CONFIG,
    n_jobs: int = 1,
) -> SelectionResult:
    """Sequential selection with thresholding or ForwardStop halting.

    With ``survey_alpha`` set, the walk continues while the plain step
    p-value stays at or below it and the final selection at ``alpha`` is
    obtained by replaying the recorded sequence.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must be in [0, 1)")
    if N < 1:
        raise ValueError("N must be >= 1")
    if max_steps is None:
        max_steps = max(1, min(dataset.p, dataset.n // 2))

    ws = EntrySolver(dataset.X, dataset.family, config)
    A: list[int] = []
    steps: list[SelectionStep] = []
    halt_reason = "max_steps"

    for k in range(1, max_steps + 1):
        event = ws.lambda_entry(dataset.y, A, need_entering=True)
        if event.lambda_entry <= 0.0 or not event.entering:
            halt_reason = "path_exhausted"
            break
        runner = _ReplicateRunner(dataset, tuple(A), config, calibrate=True)
        step_seed = np.random.SeedSequence([seed, k])
        lam_obs, lam_sims = simulated_entry_lambdas(
            dataset, tuple(A), N, step_seed, config, n_jobs=n_jobs, runner=runner
        )
        exceed = count_exceedances(lam_obs, lam_sims)
        if variant is PValueVariant.PLUS:
            p_k = (exceed + 1) / (N + 1)
        else:
            p_k = exceed / N
        p_fs = float(forwardstop_transform([s.p for s in steps] + [p_k])[-1])

        if survey_alpha is not None:
            keep_going = p_k <= survey_alpha
        elif criterion is HaltCriterion.THRESHOLDING:
            keep_going = p_k <= alpha
        else:
            keep_going = p_fs <= alpha
        steps.append(
            SelectionStep(
                step=k,
                entering=event.entering,
                lambda_entry=event.lambda_entry,
                p=float(p_k),
                p_fs=p_fs,
                exceed_count=exceed,
                accepted=keep_going,
            )
        )
        if not keep_going:
            halt_reason = "criterion"
            break
        A.extend(event.entering)

    p_all = [s.p for s in steps]
    pfs_all = forwardstop_transform(p_all)
    halt = halting_step(p_all, alpha, criterion)
    accepted = steps[:halt]
    selected = tuple(j for s in accepted for j in s.entering)
    return SelectionResult(
        selected=selected,
        p_seq=tuple(s.p for s in accepted) if survey_alpha is None else tuple(p_all),
        pfs_seq=tuple(pfs_all[: len(accepted)])
        if survey_alpha is None
        else tuple(pfs_all),
        criterion=criterion,
        alpha=alpha,
        halted_at_step=halt,
        entry_lambdas=tuple(s.lambda_entry for s in accepted)
        if survey_alpha is None
        else tuple(s.lambda_entry for s in steps),
        halt_reason=halt_reason,
        steps=tuple(steps),
        survey_alpha=survey_alpha,
    )
