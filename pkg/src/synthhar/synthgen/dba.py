"""DTW barycentre averaging (DBA).

Each iteration aligns every member to the current barycentre and replaces
every barycentre point by the mean of the member samples warped onto it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from .dtw import _as_series, dtw_cost_kernel, dtw_path_kernel

INIT_MEDOID = "medoid"
INIT_RANDOM = "random"


@dataclass(frozen=True)
class BarycenterConfig:
    max_iters: int = 30
    rel_tolerance: float = 1e-4
    init: str = INIT_MEDOID
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not self.rel_tolerance > 0:
            raise ConfigError("rel_tolerance must be positive")
        if self.init not in (INIT_MEDOID, INIT_RANDOM):
            raise ConfigError(f"init must be {INIT_MEDOID!r} or {INIT_RANDOM!r}")


def _check_set(series_set) -> list[np.ndarray]:
    if len(series_set) == 0:
        raise ConfigError("cannot average an empty set")
    return [_as_series(s, f"series {i}") for i, s in enumerate(series_set)]


def pairwise_costs(series_set: Sequence[np.ndarray]) -> np.ndarray:
    """Symmetric matrix of DTW costs."""
    n = len(series_set)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = dtw_cost_kernel(series_set[i], series_set[j])
    return out


def medoid_index(series_set) -> int:
    """Member with the smallest total DTW cost to all others (lowest index on ties)."""
    series = _check_set(series_set)
    return int(np.argmin(pairwise_costs(series).sum(axis=1)))


def multichannel_medoid_index(members: Sequence[Sequence[np.ndarray]], normalize: bool = True) -> int:
    """Medoid of multichannel members.

    Per-channel DTW cost matrices are summed. With ``normalize`` each matrix
    is first divided by its mean off-diagonal cost, so a channel's weight
    does not depend on its amplitude.
    """
    if len(members) == 0:
        raise ConfigError("cannot average an empty set")
    n = len(members)
    if n == 1:
        return 0
    n_ch = len(members[0])
    total = np.zeros(n)
    for c in range(n_ch):
        chans = [_as_series(m[c], f"member {i} channel {c}") for i, m in enumerate(members)]
        C = pairwise_costs(chans)
        if normalize:
            scale = C.sum() / (n * (n - 1))
            if scale > 0:
                C = C / scale
        total += C.sum(axis=1)
    return int(np.argmin(total))


def _align_all(bary, series):
    total = 0.0
    paths = []
    for s in series:
        cost, path = dtw_path_kernel(bary, s)
        total += cost
        paths.append(path)
    return total, paths


def _update(length, series, paths):
    sums = np.zeros(length)
    counts = np.zeros(length)
    for s, path in zip(series, paths):
        sums += np.bincount(path[:, 0], weights=s[path[:, 1]], minlength=length)
        counts += np.bincount(path[:, 0], minlength=length)
    return sums / counts


def dba_iterations(series_set, config: BarycenterConfig | None = None,
                   init: np.ndarray | None = None) -> tuple[np.ndarray, list[float]]:
    """Run DBA and return the barycentre with the within-set cost history.

    ``costs[0]`` is the cost of the initial barycentre; each later entry is
    the cost after one accepted update, so the history never increases.
    Iteration stops after ``max_iters`` updates or once the relative cost
    decrease drops below ``rel_tolerance``. An update that would raise the
    cost (floating-point noise at convergence) is rejected and ends the run.
    """
    config = config or BarycenterConfig()
    series = _check_set(series_set)
    if init is not None:
        bary = _as_series(init, "init").copy()
    elif config.init == INIT_MEDOID:
        bary = series[medoid_index(series)].copy() if len(series) > 1 else series[0].copy()
    else:
        rng = np.random.default_rng(config.seed)
        bary = series[int(rng.integers(len(series)))].copy()

    cost, paths = _align_all(bary, series)
    costs = [cost]
    for _ in range(config.max_iters):
        candidate = _update(bary.size, series, paths)
        new_cost, new_paths = _align_all(candidate, series)
        if new_cost > cost:
            break
        decrease = (cost - new_cost) / cost if cost > 0 else 0.0
        bary, cost, paths = candidate, new_cost, new_paths
        costs.append(cost)
        if decrease < config.rel_tolerance:
            break
    return bary, costs


def dba(series_set, config: BarycenterConfig | None = None,
        init: np.ndarray | None = None) -> np.ndarray:
    """DTW barycentre of a set of scalar sequences.

    The barycentre has the length of its initialisation (the medoid member
    by default).
    """
    return dba_iterations(series_set, config, init)[0]
