"""Activity-stratified subsampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError


@dataclass(frozen=True)
class SubsampleSpec:
    count: int = 10
    fraction: float = 0.88
    seed: int = 0

    def __post_init__(self):
        if self.count < 2:
            raise ConfigError("need at least two subsamples")
        if not 0 < self.fraction <= 1:
            raise ConfigError("fraction must lie in (0, 1]")


def class_take(size: int, fraction: float) -> int:
    # the rounding guard keeps e.g. 0.88 * 25 = 22.000000000000004 at 22
    return min(size, math.ceil(round(fraction * size, 9)))


def stratified_subsample(labels, fraction: float, seed, classes=None) -> np.ndarray:
    """Sorted row indices: ``ceil(fraction * n_c)`` random rows of every class.

    ``classes`` optionally lists classes that must be present; a listed
    class without rows raises :class:`DataError`.
    """
    if not 0 < fraction <= 1:
        raise ConfigError("fraction must lie in (0, 1]")
    labels = np.asarray([getattr(v, "value", v) for v in labels])
    if labels.size == 0:
        raise DataError("no rows to subsample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    present = sorted(set(labels.tolist()))
    for c in classes or ():
        c = getattr(c, "value", c)
        if c not in present:
            raise DataError(f"class {c!r} has no rows")
    picked = []
    for c in present:
        rows = np.flatnonzero(labels == c)
        if rows.size < 2:
            raise DataError(f"class {c!r} has {rows.size} row(s); stratified subsampling needs 2")
        picked.append(rng.choice(rows, size=class_take(rows.size, fraction), replace=False))
    return np.sort(np.concatenate(picked))


def jaccard(a, b) -> float:
    a, b = set(np.asarray(a).tolist()), set(np.asarray(b).tolist())
    union = a | b
    return len(a & b) / len(union) if union else 1.0
