"""Paired statistical comparison of classifiers on a shared test set.

Three tests: DeLong's test for the difference of two correlated AUCs,
the paired-permutation comparison of two whole ROC curves, and a paired
t-test on accuracy vectors. Normal and Student-t tail probabilities are
computed in-package from erfc and a continued-fraction regularized
incomplete beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_DEGENERATE_VAR = 1e-12


# -- special functions -------------------------------------------------------

def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction failed to converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) accurate to ~1e-14 over the t-test parameter range."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: int) -> float:
    if df < 1:
        raise ValueError("df must be >= 1")
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


# -- paired inputs -----------------------------------------------------------

@dataclass(frozen=True)
class PairedScores:
    """Two models' scores for the same cases, with shared binary labels."""

    y_true: np.ndarray
    scores_a: np.ndarray
    scores_b: np.ndarray

    def __post_init__(self) -> None:
        y = np.asarray(self.y_true).astype(bool)
        a = np.asarray(self.scores_a, dtype=np.float64)
        b = np.asarray(self.scores_b, dtype=np.float64)
        if not (y.shape == a.shape == b.shape) or y.ndim != 1:
            raise ValueError("paired scores must be aligned 1-D arrays")
        if y.all() or not y.any():
            raise ValueError("both classes must be present")
        object.__setattr__(self, "y_true", y)
        object.__setattr__(self, "scores_a", a)
        object.__setattr__(self, "scores_b", b)


# -- DeLong ------------------------------------------------------------------

def _midrank(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    z = x[order]
    n = x.shape[0]
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j < n and z[j] == z[i]:
            j += 1
        ranks[i:j] = 0.5 * (i + j - 1) + 1.0
        i = j
    out = np.empty(n)
    out[order] = ranks
    return out


def _auc_components(y: np.ndarray, scores: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """AUC plus its positive (V10) and negative (V01) structural components."""
    pos = scores[y]
    neg = scores[~y]
    m, n = pos.shape[0], neg.shape[0]
    tx = _midrank(pos)
    ty = _midrank(neg)
    tz = _midrank(np.concatenate([pos, neg]))
    auc = (tz[:m].sum() - m * (m + 1) / 2.0) / (m * n)
    v10 = (tz[:m] - tx) / n
    v01 = 1.0 - (tz[m:] - ty) / m
    return float(auc), v10, v01


@dataclass(frozen=True)
class DeLongResult:
    auc_a: float
    auc_b: float
    z: float
    p: float


def delong_test(ps: PairedScores) -> DeLongResult:
    """Two-sided test of AUC_a = AUC_b with paired-structure covariance."""
    auc_a, v10_a, v01_a = _auc_components(ps.y_true, ps.scores_a)
    auc_b, v10_b, v01_b = _auc_components(ps.y_true, ps.scores_b)
    m = v10_a.shape[0]
    n = v01_a.shape[0]
    s10 = np.cov(np.stack([v10_a, v10_b]), ddof=1) if m > 1 else np.zeros((2, 2))
    s01 = np.cov(np.stack([v01_a, v01_b]), ddof=1) if n > 1 else np.zeros((2, 2))
    contrast = np.array([1.0, -1.0])
    var = float(contrast @ (s10 / m + s01 / n) @ contrast)
    if var < _DEGENERATE_VAR:
        return DeLongResult(auc_a=auc_a, auc_b=auc_b, z=0.0, p=1.0)
    z = (auc_a - auc_b) / math.sqrt(var)
    p = 2.0 * (1.0 - normal_cdf(abs(z)))
    return DeLongResult(auc_a=auc_a, auc_b=auc_b, z=float(z), p=float(min(max(p, 0.0), 1.0)))


# -- Venkatraman -------------------------------------------------------------

def _first_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n along the last axis; ties broken by position (stable)."""
    order = np.argsort(values, axis=-1, kind="stable")
    ranks = np.empty_like(order)
    ar = np.broadcast_to(np.arange(1, values.shape[-1] + 1), values.shape)
    np.put_along_axis(ranks, order, ar, axis=-1)
    return ranks


def _curve_difference(ranks_a: np.ndarray, ranks_b: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sum over rank cutpoints of |error count difference| between curves.

    With ranks a permutation of 1..n, the misclassification-count
    difference at cutpoint k reduces to twice the difference of positive
    counts among ranks <= k.
    """
    n = y.shape[0]
    pos_at_rank_a = np.zeros(ranks_a.shape[:-1] + (n,))
    pos_at_rank_b = np.zeros_like(pos_at_rank_a)
    yb = np.broadcast_to(y.astype(np.float64), ranks_a.shape)
    np.put_along_axis(pos_at_rank_a, ranks_a - 1, yb, axis=-1)
    np.put_along_axis(pos_at_rank_b, ranks_b - 1, yb, axis=-1)
    cum_a = np.cumsum(pos_at_rank_a, axis=-1)[..., :-1]
    cum_b = np.cumsum(pos_at_rank_b, axis=-1)[..., :-1]
    return 2.0 * np.abs(cum_a - cum_b).sum(axis=-1)


@dataclass(frozen=True)
class VenkatramanResult:
    roc_difference: float
    p: float
    permutations: int


def venkatraman_test(ps: PairedScores, permutations: int = 2000, seed: int = 0) -> VenkatramanResult:
    """Permutation test of equality of two paired ROC curves.

    Scores are rank-transformed per model; the statistic integrates the
    absolute difference between the rank-scale error curves (reported
    normalized by n^2). The null swaps each case's score pair with
    probability one half and re-ranks; p = (1 + #{perm >= obs}) / (B + 1).
    """
    if permutations < 1:
        raise ValueError("permutation count must be >= 1")
    y = ps.y_true
    n = y.shape[0]
    ranks_a = _first_ranks(ps.scores_a)
    ranks_b = _first_ranks(ps.scores_b)
    observed = float(_curve_difference(ranks_a, ranks_b, y))

    rng = np.random.default_rng(seed)
    swap = rng.random((permutations, n)) < 0.5
    perm_a = np.where(swap, ranks_b, ranks_a)
    perm_b = np.where(swap, ranks_a, ranks_b)
    # Re-rank so each permuted vector is again a permutation of 1..n.
    perm_stats = _curve_difference(_first_ranks(perm_a), _first_ranks(perm_b), y)
    exceed = int(np.sum(perm_stats >= observed - 1e-12))
    p = (1.0 + exceed) / (permutations + 1.0)
    return VenkatramanResult(
        roc_difference=observed / (n * n),
        p=float(p),
        permutations=permutations,
    )


# -- paired t-test -----------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float


def paired_ttest(acc_a: np.ndarray, acc_b: np.ndarray) -> TTestResult:
    """Two-sided paired t-test on aligned accuracy vectors."""
    a = np.asarray(acc_a, dtype=np.float64)
    b = np.asarray(acc_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("accuracy vectors must be aligned 1-D arrays")
    n = a.shape[0]
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = a - b
    df = n - 1
    if np.all(d == 0.0):
        return TTestResult(t=0.0, df=df, p=1.0)
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        return TTestResult(t=math.copysign(math.inf, float(d.mean())), df=df, p=0.0)
    t = float(d.mean()) / (sd / math.sqrt(n))
    p = 2.0 * (1.0 - student_t_cdf(abs(t), df))
    return TTestResult(t=t, df=df, p=float(min(max(p, 0.0), 1.0)))
