"""Five filter/embedded feature rankers.

Each ranker maps ``(X, y)`` to a :class:`RankList`: a permutation of the
column indices, best first, with the scores that produced it. Ties are
broken by column index, so a ranker whose scores are all equal returns the
catalog order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats
from sklearn.tree import DecisionTreeClassifier

from ..errors import DataError, NumericalError


class Algorithm(str, Enum):
    RELIEFF = "relieff"
    MRMR = "mrmr"
    ICT = "ict"
    OOBI = "oobi"
    LDR = "ldr"


ALGORITHMS = tuple(Algorithm)


@dataclass(frozen=True)
class RankList:
    algorithm: Algorithm
    order: np.ndarray
    scores: np.ndarray | None = None
    notes: tuple = field(default=())

    def __post_init__(self):
        order = np.asarray(self.order, dtype=int)
        if not np.array_equal(np.sort(order), np.arange(order.size)):
            raise DataError("rank order must be a permutation")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))

    @property
    def m(self) -> int:
        return self.order.size

    def ranks(self) -> np.ndarray:
        """1-based rank of every column."""
        r = np.empty(self.m, dtype=int)
        r[self.order] = np.arange(1, self.m + 1)
        return r

    def top(self, k: int) -> frozenset:
        return frozenset(self.order[:k].tolist())


def order_from_scores(scores) -> np.ndarray:
    """Descending scores, ties by ascending index."""
    scores = np.asarray(scores, dtype=float)
    return np.lexsort((np.arange(scores.size), -scores))


def _encode(labels) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray([getattr(v, "value", v) for v in labels])
    classes, y = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise DataError("ranking needs at least two classes")
    return classes, y


def _check(X, labels):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("feature matrix must be two-dimensional and non-empty")
    if X.shape[0] != len(labels):
        raise DataError("label count differs from row count")
    if not np.all(np.isfinite(X)):
        raise DataError("feature matrix contains non-finite values")
    classes, y = _encode(labels)
    return X, classes, y


# ---------------------------------------------------------------------------
# Relief-F
# ---------------------------------------------------------------------------

def _unit_scale(X):
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    return np.where(span > 0, (X - lo) / np.where(span > 0, span, 1.0), 0.0)


def relief_f(X, labels, k: int = 10, chunk: int = 256) -> RankList:
    """Relief-F weights with ``k`` nearest hits and ``k`` nearest misses per class.

    Features are scaled to [0, 1]; the distance is Manhattan. Every row is
    used once. Miss contributions from class ``C`` are weighted by
    ``P(C) / (1 - P(class of the row))``. Classes smaller than ``k + 1``
    (hits) or ``k`` (misses) contribute all their rows and a warning is
    issued.
    """
    X, classes, y = _check(X, labels)
    n, m = X.shape
    Z = _unit_scale(X)
    counts = np.bincount(y, minlength=classes.size)
    prior = counts / n
    members = [np.flatnonzero(y == c) for c in range(classes.size)]
    notes = []
    small = [str(classes[c]) for c in range(classes.size) if counts[c] - 1 < k]
    if small:
        msg = f"Relief-F: k={k} truncated for class(es) {', '.join(small)}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    W = np.zeros(m)
    for s in range(0, n, chunk):
        rows = np.arange(s, min(n, s + chunk))
        D = np.abs(Z[rows, None, :] - Z[None, :, :]).sum(axis=2)
        D[np.arange(rows.size), rows] = np.inf
        for r_i, i in enumerate(rows):
            ci = y[i]
            for c in range(classes.size):
                idx = members[c]
                kk = min(k, idx.size - 1 if c == ci else idx.size)
                if kk <= 0:
                    continue
                d = D[r_i, idx]
                near = idx[np.lexsort((idx, d))[:kk]]
                diff = np.abs(Z[near] - Z[i]).sum(axis=0) / kk
                if c == ci:
                    W -= diff
                else:
                    W += prior[c] / (1.0 - prior[ci]) * diff
    W /= n
    return RankList(Algorithm.RELIEFF, order_from_scores(W), W, tuple(notes))


# ---------------------------------------------------------------------------
# MRMR
# ---------------------------------------------------------------------------

def discretize(x, bins: int = 10) -> np.ndarray:
    """Equal-frequency bin codes; equal values share a bin."""
    x = np.asarray(x, dtype=float)
    edges = np.unique(np.quantile(x, np.arange(1, bins) / bins))
    return np.searchsorted(edges, x, side="right")


def mutual_information(a, b) -> float:
    """Plug-in mutual information (nats) of two integer codes."""
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    joint /= a.size
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def mrmr(X, labels, bins: int = 10) -> RankList:
    """Greedy max-relevance min-redundancy ordering (difference criterion).

    The score of a candidate is ``MI(f; y) - mean_{g in S} MI(f; g)`` over
    the already selected set ``S``; the first pick maximizes relevance.
    Scores returned are the criterion value at the time each feature was
    picked.
    """
    X, _, y = _check(X, labels)
    m = X.shape[1]
    codes = [discretize(X[:, j], bins) for j in range(m)]
    relevance = np.array([mutual_information(c, y) for c in codes])
    redundancy_sum = np.zeros(m)
    remaining = list(range(m))
    order, picked_scores = [], []
    while remaining:
        rem = np.array(remaining)
        crit = relevance[rem] - (redundancy_sum[rem] / len(order) if order else 0.0)
        best = int(rem[np.lexsort((rem, -crit))[0]])
        order.append(best)
        picked_scores.append(float(crit[remaining.index(best)]))
        remaining.remove(best)
        for j in remaining:
            redundancy_sum[j] += mutual_information(codes[j], codes[best])
    scores = np.empty(m)
    scores[order] = picked_scores
    return RankList(Algorithm.MRMR, np.array(order), scores)


# ---------------------------------------------------------------------------
# Interaction-curvature tree
# ---------------------------------------------------------------------------

def _quartile_codes(x):
    edges = np.unique(np.quantile(x, [0.25, 0.5, 0.75]))
    return np.searchsorted(edges, x, side="right")


def _chi2_logp(codes, y):
    """Log p-value of the chi-square independence test of two code vectors."""
    _, ci = np.unique(codes, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    r, c = ci.max() + 1, yi.max() + 1
    if r < 2 or c < 2:
        return 0.0
    table = np.zeros((r, c))
    np.add.at(table, (ci, yi), 1.0)
    expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / table.sum()
    chi2 = float(np.sum((table - expected) ** 2 / expected))
    return float(stats.chi2.logsf(chi2, (r - 1) * (c - 1)))


def _gini(counts):
    tot = counts.sum()
    if tot == 0:
        return 0.0
    p = counts / tot
    return 1.0 - float(np.sum(p * p))


def _best_threshold(x, y, n_classes):
    """Threshold maximizing the Gini decrease for one feature."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = xs.size
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    total = left[-1] + onehot[-1]
    right = total - left
    nl = np.arange(1, n)
    nr = n - nl
    gl = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
    gr = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
    weighted = (nl * gl + nr * gr) / n
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None, 0.0
    weighted = np.where(valid, weighted, np.inf)
    i = int(np.argmin(weighted))
    gain = _gini(total) - weighted[i]
    return 0.5 * (xs[i] + xs[i + 1]), float(gain)


def ict_importance(X, labels, seed=None, alpha: float = 0.05, min_parent: int = 10,
                   max_depth: int | None = None) -> RankList:
    """Importance from a tree whose split variables come from curvature tests.

    At each node every feature is binned into its node-level quartiles and
    tested against the class with a chi-square test. The feature with the
    smallest p-value is split; exact ties (e.g. duplicated features) go to
    the feature whose best pairwise interaction test (4 x 4 joint bins) is
    strongest, then to the lower index. A node is not split when it is
    pure, has fewer than ``min_parent`` rows, or when the smallest p-value
    times the number of features exceeds ``alpha``. The split point
    maximizes the Gini decrease. Importance is the total weighted Gini
    decrease per feature. The procedure is deterministic; ``seed`` is
    accepted for interface uniformity.
    """
    X, classes, y = _check(X, labels)
    n, m = X.shape
    K = classes.size
    log_bonf = np.log(m)
    log_alpha = np.log(alpha)
    importance = np.zeros(m)
    stack = [(np.arange(n), 0)]
    while stack:
        rows, depth = stack.pop()
        yy = y[rows]
        counts = np.bincount(yy, minlength=K)
        if rows.size < min_parent or np.count_nonzero(counts) < 2:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        codes = [_quartile_codes(X[rows, j]) for j in range(m)]
        logp = np.array([_chi2_logp(c, yy) for c in codes])
        best_lp = logp.min()
        if best_lp + log_bonf > log_alpha:
            continue
        tied = np.flatnonzero(logp == best_lp)
        if tied.size > 1:
            inter = []
            for j in tied:
                inter.append(min(_chi2_logp(codes[j] * 4 + codes[g], yy) for g in range(m) if g != j))
            inter = np.array(inter)
            tied = tied[np.lexsort((tied, inter))]
        split = None
        for j in tied:
            thr, gain = _best_threshold(X[rows, j], yy, K)
            if thr is not None and gain > 0:
                split = (int(j), thr, gain)
                break
        if split is None:
            continue
        j, thr, gain = split
        importance[j] += gain * rows.size / n
        mask = X[rows, j] <= thr
        stack.append((rows[~mask], depth + 1))
        stack.append((rows[mask], depth + 1))
    return RankList(Algorithm.ICT, order_from_scores(importance), importance)


# ---------------------------------------------------------------------------
# Out-of-bag permutation importance
# ---------------------------------------------------------------------------

def oob_importance(X, labels, n_trees: int = 100, seed=0, max_features="sqrt") -> RankList:
    """Mean increase of out-of-bag error after permuting each feature.

    Each tree is a CART classifier (Gini splits, ``sqrt(m)`` candidate
    features per split) grown on a bootstrap sample. Features a tree never
    splits on cannot change its predictions and score 0 for that tree.
    """
    X, classes, y = _check(X, labels)
    n, m = X.shape
    if n < 10:
        raise DataError("out-of-bag importance needs at least 10 rows")
    rng = np.random.default_rng(seed)
    total = np.zeros(m)
    used_trees = 0
    for t in range(n_trees):
        boot = rng.integers(0, n, size=n)
        oob = np.setdiff1d(np.arange(n), boot)
        tree_seed = int(rng.integers(2 ** 31 - 1))
        if oob.size == 0:
            continue
        tree = DecisionTreeClassifier(max_features=max_features, random_state=tree_seed)
        tree.fit(X[boot], y[boot])
        Xo, yo = X[oob], y[oob]
        base = np.mean(tree.predict(Xo) != yo)
        split_feats = np.unique(tree.tree_.feature[tree.tree_.feature >= 0])
        for j in split_feats:
            Xp = Xo.copy()
            Xp[:, j] = Xp[rng.permutation(oob.size), j]
            total[j] += np.mean(tree.predict(Xp) != yo) - base
        used_trees += 1
    imp = total / max(used_trees, 1)
    return RankList(Algorithm.OOBI, order_from_scores(imp), imp)


# ---------------------------------------------------------------------------
# Regularized linear discriminant
# ---------------------------------------------------------------------------

def ldr_importance(X, labels, gamma: float = 0.5) -> RankList:
    """Largest absolute discriminant coefficient over all class pairs.

    Features are z-scored; the pooled within-class covariance is shrunk to
    ``(1 - gamma) * S + gamma * diag(S)`` and the coefficients for classes
    ``i, j`` are ``S_gamma^{-1} (mu_i - mu_j)``. Constant features get 0.
    """
    if not 0 <= gamma <= 1:
        raise DataError("gamma must lie in [0, 1]")
    X, classes, y = _check(X, labels)
    n, m = X.shape
    sd = X.std(axis=0, ddof=1) if n > 1 else np.zeros(m)
    live = np.flatnonzero(np.ptp(X, axis=0) > 0)
    imp = np.zeros(m)
    if live.size == 0:
        return RankList(Algorithm.LDR, order_from_scores(imp), imp)
    Z = (X[:, live] - X[:, live].mean(axis=0)) / sd[live]
    K = classes.size
    means = np.array([Z[y == c].mean(axis=0) for c in range(K)])
    resid = Z - means[y]
    dof = max(n - K, 1)
    S = resid.T @ resid / dof
    Sg = (1.0 - gamma) * S + gamma * np.diag(np.diag(S))
    if np.linalg.cond(Sg) > 1e12:
        raise NumericalError(
            f"shrunk covariance is singular (gamma={gamma}); use gamma > 0 or remove collinear features")
    diffs = np.array([means[i] - means[j] for i in range(K) for j in range(i + 1, K)])
    coef = np.linalg.solve(Sg, diffs.T)
    imp[live] = np.abs(coef).max(axis=1)
    return RankList(Algorithm.LDR, order_from_scores(imp), imp)
