"""Kernel-selection criteria computed from per-candidate log-likelihoods and acquisitions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


class Criterion(str, enum.Enum):
    R_HALF = "r_half"
    R_ADAPTIVE = "r_adaptive"
    BIC = "bic"
    AIC = "aic"
    HQC = "hqc"
    LOGLIK = "loglik"
    ACQ = "acq"


CRITERIA = tuple(c.value for c in Criterion)


@dataclass
class CandidateScore:
    kernel: int
    loglik: float
    acq: float
    n_params: int
    criterion_value: float = float("nan")


def rank(values: Sequence[float]) -> np.ndarray:
    """Ranks 1..K with the largest value ranked K; ties share the average rank."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("rank needs at least one value")
    return rankdata(values, method="average")


def _check_lengths(logliks, acqs):
    if len(logliks) != len(acqs):
        raise ValueError(f"length mismatch: {len(logliks)} logliks vs {len(acqs)} acquisitions")
    if len(logliks) == 0:
        raise ValueError("need at least one candidate")


def r_half(logliks: Sequence[float], acqs: Sequence[float]) -> np.ndarray:
    _check_lengths(logliks, acqs)
    return rank(logliks) + 0.5 * rank(acqs)


def r_adaptive(logliks: Sequence[float], acqs: Sequence[float], i: int, n: int) -> np.ndarray:
    """Rank criterion whose acquisition weight ``2*i/n`` grows with the step ``i``."""
    _check_lengths(logliks, acqs)
    if not 1 <= i <= n:
        raise ValueError(f"step index {i} outside [1, {n}]")
    return rank(logliks) + (2.0 * i / n) * rank(acqs)


def classic_criterion(kind: Criterion | str, loglik: float, acq: float, n_k: int, n: int) -> float:
    """Information criteria and the single-quantity criteria; larger is better."""
    kind = Criterion(kind)
    if kind is Criterion.LOGLIK:
        return float(loglik)
    if kind is Criterion.ACQ:
        return float(acq)
    if kind is Criterion.AIC:
        return 2.0 * loglik - 2.0 * n_k
    if n < 2:
        raise ValueError(f"{kind.value} needs at least 2 samples, got {n}")
    if kind is Criterion.BIC:
        return 2.0 * loglik - n_k * math.log(n)
    if kind is Criterion.HQC:
        return 2.0 * loglik - 2.0 * n_k * math.log(math.log(n))
    raise ValueError(f"{kind.value} is a rank criterion, not a classic one")


def criterion_values(
    kind: Criterion | str,
    scores: Sequence[CandidateScore],
    n: int,
    step: int | None = None,
    budget: int | None = None,
) -> np.ndarray:
    """Evaluate ``kind`` for all candidates and store it on each score."""
    kind = Criterion(kind)
    logliks = [s.loglik for s in scores]
    acqs = [s.acq for s in scores]
    if kind is Criterion.R_HALF:
        vals = r_half(logliks, acqs)
    elif kind is Criterion.R_ADAPTIVE:
        if step is None or budget is None:
            raise ValueError("r_adaptive needs the step index and the budget")
        vals = r_adaptive(logliks, acqs, step, budget)
    else:
        vals = np.array(
            [classic_criterion(kind, s.loglik, s.acq, s.n_params, n) for s in scores]
        )
    for s, v in zip(scores, vals):
        s.criterion_value = float(v)
    return np.asarray(vals, dtype=float)


def select_kernel(scores: Sequence[CandidateScore]) -> int:
    """Index (into ``scores``) of the winner: highest criterion, then loglik, then lowest index."""
    if not scores:
        raise ValueError("no candidates")
    best = 0
    for j in range(1, len(scores)):
        a, b = scores[j], scores[best]
        if (a.criterion_value, a.loglik) > (b.criterion_value, b.loglik):
            best = j
    return best
