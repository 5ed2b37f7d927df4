"""Selection stability and robust rank aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from ..errors import DataError
from .subsample import SubsampleSpec, stratified_subsample


def tanimoto(s, s_prime) -> float:
    """Set similarity ``1 - (|s| + |s'| - 2|s & s'|) / (|s| + |s'| - |s & s'|)``.

    Two empty sets are identical (similarity 1).
    """
    a, b = set(s), set(s_prime)
    inter = len(a & b)
    denom = len(a) + len(b) - inter
    if denom == 0:
        return 1.0
    # 1 - (denom - inter) / denom, as one correctly rounded division
    return inter / denom


@dataclass(frozen=True)
class StabilityReport:
    algorithm: str
    mean: float
    pairs: tuple  # ((i, j, T), ...)

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "mean_tanimoto": self.mean,
                "pairs": [[i, j, t] for i, j, t in self.pairs]}


def stability_of(top_sets: Sequence, algorithm: str = "") -> StabilityReport:
    """Mean pairwise Tanimoto similarity of a list of feature sets."""
    if len(top_sets) < 2:
        raise DataError("stability needs at least two sets")
    pairs = tuple((i, j, tanimoto(top_sets[i], top_sets[j]))
                  for i, j in combinations(range(len(top_sets)), 2))
    return StabilityReport(algorithm, float(np.mean([p[2] for p in pairs])), pairs)


def stability(ranker: Callable, matrix, labels, spec: SubsampleSpec, top_k: int = 10) -> StabilityReport:
    """Run ``ranker(X, y, seed)`` on every subsample and compare top-k sets."""
    X = np.asarray(matrix, dtype=float)
    labels = list(labels)
    sets = []
    name = ""
    for s in range(spec.count):
        rows = stratified_subsample(labels, spec.fraction, np.random.default_rng([spec.seed, s]))
        rl = ranker(X[rows], [labels[i] for i in rows], np.random.default_rng([spec.seed, s, 99]))
        name = getattr(rl, "algorithm", name)
        sets.append(rl.top(top_k))
    return stability_of(sets, getattr(name, "value", str(name)))


# ---------------------------------------------------------------------------
# Robust rank aggregation
# ---------------------------------------------------------------------------

def _rank_matrix(rank_lists) -> np.ndarray:
    if isinstance(rank_lists, np.ndarray):
        R = np.asarray(rank_lists, dtype=float)
    else:
        lists = list(rank_lists)
        if not lists:
            raise DataError("no rank lists to aggregate")
        m = lists[0].m
        if any(rl.m != m for rl in lists):
            raise DataError("rank lists cover different catalogs")
        R = np.array([rl.ranks() for rl in lists], dtype=float)
    if R.ndim != 2 or R.size == 0:
        raise DataError("rank matrix must be (lists, features)")
    return R


def beta_scores(normalized: np.ndarray) -> np.ndarray:
    """Order-statistic probabilities for each row of normalized ranks.

    ``beta[k-1] = P(k-th smallest of n uniforms <= r_(k))``, the upper
    binomial tail ``sum_{l >= k} C(n, l) r^l (1 - r)^(n - l)``.
    """
    r = np.sort(np.atleast_2d(normalized), axis=1)
    n = r.shape[1]
    k = np.arange(1, n + 1)
    return stats.binom.sf(k - 1, n, r)


def rra(rank_lists, m: int | None = None) -> np.ndarray:
    """Bonferroni-corrected RRA p-value per feature.

    Parameters
    ----------
    rank_lists : sequence of RankList, or ndarray (n_lists, m) of 1-based ranks
    m : int, optional
        Catalog size used for normalization; defaults to the number of
        columns.

    Returns
    -------
    ndarray, shape (m,)
        ``min(1, n * min_k beta_k)`` per feature.
    """
    R = _rank_matrix(rank_lists)
    n, cols = R.shape
    m = m or cols
    if R.min() < 1 or R.max() > m:
        raise DataError(f"ranks must lie in 1..{m}")
    beta = beta_scores((R / m).T)
    return np.minimum(1.0, n * beta.min(axis=1))
