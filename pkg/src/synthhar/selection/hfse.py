"""Heterogeneous feature-selection ensemble.

For each stratified subsample the five rankers run independently, their
lists are merged with RRA and every feature with ``p < alpha`` earns a
vote. Features with at least ``vote_threshold`` votes form the final set.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DataError, guard
from .aggregate import rra, stability_of
from .rankers import (ALGORITHMS, Algorithm, RankList, ict_importance, ldr_importance, mrmr,
                      oob_importance, relief_f)
from .subsample import SubsampleSpec, stratified_subsample

MODE_PER_SUBSAMPLE = "per_subsample"
MODE_POOLED = "pooled"


@dataclass(frozen=True)
class SelectionConfig:
    count: int = 10
    fraction: float = 0.88
    top_k: int = 10
    alpha: float = 0.05
    vote_threshold: int = 5
    mode: str = MODE_PER_SUBSAMPLE
    algorithms: tuple = tuple(a.value for a in ALGORITHMS)
    relief_k: int = 10
    mrmr_bins: int = 10
    ict_alpha: float = 0.05
    ict_min_parent: int = 10
    oob_trees: int = 100
    ldr_gamma: float = 0.5
    stability_gate: float | None = None
    threads: int = 1

    def __post_init__(self):
        SubsampleSpec(self.count, self.fraction)
        object.__setattr__(self, "algorithms", tuple(Algorithm(a).value for a in self.algorithms))
        if not self.algorithms:
            raise ConfigError("at least one ranking algorithm is required")
        if self.mode not in (MODE_PER_SUBSAMPLE, MODE_POOLED):
            raise ConfigError(f"mode must be {MODE_PER_SUBSAMPLE!r} or {MODE_POOLED!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 1 <= self.vote_threshold <= self.count:
            raise ConfigError("vote_threshold must lie in 1..count")
        if self.top_k < 1:
            raise ConfigError("top_k must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    def spec(self, seed: int) -> SubsampleSpec:
        return SubsampleSpec(self.count, self.fraction, seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algorithms"] = list(self.algorithms)
        return d


def run_ranker(algorithm, X, y, config: SelectionConfig, seed) -> RankList:
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.RELIEFF:
        return relief_f(X, y, k=config.relief_k)
    if algorithm is Algorithm.MRMR:
        return mrmr(X, y, bins=config.mrmr_bins)
    if algorithm is Algorithm.ICT:
        return ict_importance(X, y, seed, alpha=config.ict_alpha, min_parent=config.ict_min_parent)
    if algorithm is Algorithm.OOBI:
        return oob_importance(X, y, n_trees=config.oob_trees, seed=seed)
    return ldr_importance(X, y, gamma=config.ldr_gamma)


@dataclass
class SelectionResult:
    feature_names: tuple
    subsample_rows: list  # per subsample: sorted row indices
    rank_lists: list  # per subsample: {algorithm: RankList}
    p_values: np.ndarray  # (count, m) per-subsample RRA p-values
    selected: list  # per subsample: sorted feature indices with p < alpha
    votes: np.ndarray  # (m,)
    final: list  # sorted feature indices
    stability: dict  # algorithm -> StabilityReport
    config: SelectionConfig
    seed: int
    excluded_algorithms: tuple = ()
    pooled_p: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def final_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.final]

    def vote_matrix(self) -> np.ndarray:
        """(count, m) 0/1 matrix of per-subsample selections."""
        M = np.zeros((len(self.selected), len(self.feature_names)), dtype=int)
        for s, sel in enumerate(self.selected):
            M[s, sel] = 1
        return M

    def to_dict(self) -> dict:
        names = self.feature_names
        d = {
            "seed": self.seed,
            "config": self.config.to_dict(),
            "final_features": self.final_names,
            "votes": {names[j]: int(self.votes[j]) for j in range(len(names))},
            "subsamples": [
                {"index": s, "n_rows": len(self.subsample_rows[s]),
                 "selected": [names[j] for j in self.selected[s]],
                 "rankings": {a: [names[j] for j in rl.order] for a, rl in self.rank_lists[s].items()}}
                for s in range(len(self.selected))
            ],
            "stability": {a: r.to_dict() for a, r in self.stability.items()},
            "excluded_algorithms": list(self.excluded_algorithms),
            "notes": list(self.notes),
        }
        if self.pooled_p is not None:
            d["pooled_p"] = {names[j]: float(self.pooled_p[j]) for j in range(len(names))}
        return d

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def write_vote_csv(self, path) -> None:
        M = self.vote_matrix()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["subsample"] + list(self.feature_names))
            for s in range(M.shape[0]):
                wr.writerow([s + 1] + M[s].tolist())
            wr.writerow(["votes"] + self.votes.tolist())


def _one_subsample(X, labels, config, seed, s):
    rows = stratified_subsample(labels, config.fraction, np.random.default_rng([seed, s]))
    Xs = X[rows]
    ys = [labels[i] for i in rows]
    lists = {}
    for a in config.algorithms:
        alg_id = ALGORITHMS.index(Algorithm(a))
        lists[a] = run_ranker(a, Xs, ys, config, np.random.default_rng([seed, s, alg_id]))
    return rows, lists


def hfse_select(matrix, labels, config: SelectionConfig | None = None, seed: int = 0,
                feature_names: Sequence[str] | None = None) -> SelectionResult:
    """Ensemble selection over ``config.count`` stratified subsamples."""
    config = config or SelectionConfig()
    X = np.asarray(matrix, dtype=float)
    labels = [getattr(v, "value", v) for v in labels]
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise DataError("matrix rows and labels disagree")
    m = X.shape[1]
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{j}" for j in range(m))
    if len(names) != m:
        raise DataError("feature_names length differs from column count")

    work = [(X, labels, config, seed, s) for s in range(config.count)]
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(lambda a: _one_subsample(*a), work))
    else:
        results = [_one_subsample(*a) for a in work]
    rows_all = [r for r, _ in results]
    lists_all = [lists for _, lists in results]
    for rows in rows_all:
        guard(rows.min() >= 0 and rows.max() < X.shape[0], "subsample row index outside the matrix")

    stab = {a: stability_of([lists[a].top(config.top_k) for lists in lists_all], a)
            for a in config.algorithms}
    used = list(config.algorithms)
    excluded = ()
    if config.stability_gate is not None:
        used = [a for a in config.algorithms if stab[a].mean >= config.stability_gate]
        excluded = tuple(a for a in config.algorithms if a not in used)
        if not used:
            raise DataError(f"no algorithm reaches the stability gate {config.stability_gate}")

    # order-independent: rra sorts each feature's ranks before use
    P = np.array([rra([lists[a] for a in sorted(used)]) for lists in lists_all])
    selected = [np.flatnonzero(P[s] < config.alpha).tolist() for s in range(config.count)]
    votes = np.zeros(m, dtype=int)
    for sel in selected:
        votes[sel] += 1
    pooled = None
    if config.mode == MODE_POOLED:
        pooled = rra([lists[a] for lists in lists_all for a in sorted(used)])
        final = np.flatnonzero(pooled < config.alpha).tolist()
    else:
        final = np.flatnonzero(votes >= config.vote_threshold).tolist()
    notes = sorted({note for lists in lists_all for rl in lists.values() for note in rl.notes})
    return SelectionResult(names, rows_all, lists_all, P, selected, votes, final, stab, config, seed,
                           excluded, pooled, notes)
