"""Class-specific synthetic windows from DBA barycentres.

One draw samples a handful of real source sequences, averages each of the
six channels (thigh x/y/z, back x/y/z) with DBA, checks that the channel
barycentres describe the same duration and cuts the result into 2 s
windows. Draws repeat until the synthetic count for the activity equals the
real count.

Source sequences depend on the activity:

* walking: two consecutive 2 s windows (4 s), central 2 s kept afterwards;
* transfers: the full annotated interval, split into whole 2 s windows;
* static postures: single 2 s windows.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError, DataError, GenerationError
from ..labels import FINE_LABELS, TRANSFERS, FineLabel, fine
from ..signal import (NOMINAL_RATE_HZ, WINDOW_S, LabeledWindow, Origin, RecordingSession,
                      Sensor, highpass_zero_phase_array)
from .dba import BarycenterConfig, dba, multichannel_medoid_index

SYNTHETIC_PARTICIPANT = "synthetic"
CHANNELS = ("ut_x", "ut_y", "ut_z", "lb_x", "lb_y", "lb_z")
_RATE_T = NOMINAL_RATE_HZ[Sensor.UPPER_THIGH]
_RATE_B = NOMINAL_RATE_HZ[Sensor.LOWER_BACK]


class WindowPolicy(str, Enum):
    WALKING_4S_TRIM = "walking_4s_trim_to_2s"
    TRANSFER_FULL_SPAN = "transfer_full_span"
    STATIC_2S = "static_2s"


def policy_for(label: FineLabel) -> WindowPolicy:
    label = fine(label)
    if label is FineLabel.WALKING:
        return WindowPolicy.WALKING_4S_TRIM
    if label in TRANSFERS:
        return WindowPolicy.TRANSFER_FULL_SPAN
    return WindowPolicy.STATIC_2S


@dataclass(frozen=True)
class Segment:
    """A synchronized two-sensor source sequence."""
    participant_id: str
    thigh: np.ndarray
    back: np.ndarray

    def channels(self) -> list[np.ndarray]:
        return ([np.ascontiguousarray(self.thigh[:, i], dtype=float) for i in range(3)]
                + [np.ascontiguousarray(self.back[:, i], dtype=float) for i in range(3)])


@dataclass
class SynthesisPlan:
    activity: FineLabel
    pools: dict  # participant id -> list[Segment]
    target_count: int
    policy: WindowPolicy | None = None
    participant_count: int | None = None
    activity_count: int | None = None

    def __post_init__(self):
        self.activity = fine(self.activity)
        if self.policy is None:
            self.policy = policy_for(self.activity)
        self.policy = WindowPolicy(self.policy)
        if self.target_count < 0:
            raise ConfigError("target_count must be non-negative")
        if self.participant_count is None:
            self.participant_count = len(self.pools)
        if self.activity_count is None:
            self.activity_count = self.target_count


@dataclass(frozen=True)
class SynthesisConfig:
    barycenter: BarycenterConfig = field(default_factory=BarycenterConfig)
    retry_budget: int = 50
    full_pool_threshold: int = 100
    subset_fraction: float = 0.20
    fixed_subset_size: int | None = None
    drift_correction: bool = True
    drift_cutoff_hz: float = 0.5
    drift_order: int = 4
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.barycenter, dict):
            object.__setattr__(self, "barycenter", BarycenterConfig(**self.barycenter))
        if self.retry_budget < 0:
            raise ConfigError("retry_budget must be non-negative")
        if not 0 < self.subset_fraction <= 1:
            raise ConfigError("subset_fraction must lie in (0, 1]")
        if self.fixed_subset_size is not None and self.fixed_subset_size < 1:
            raise ConfigError("fixed_subset_size must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_windows(pools: Mapping[str, Sequence], activity_count: int, participant_count: int,
                   seed, *, full_pool_threshold: int = 100, subset_fraction: float = 0.20,
                   fixed_subset_size: int | None = None) -> list[tuple[str, int]]:
    """Pick the source windows for one DBA draw.

    With at least ``full_pool_threshold`` windows for the activity, one
    window is drawn from every participant that has data. Otherwise
    ``ceil(subset_fraction * participant_count)`` participants (or
    ``fixed_subset_size``) are drawn without replacement and contribute one
    window each. Returns ``(participant_id, index)`` pairs.
    """
    eligible = sorted(pid for pid, pool in pools.items() if len(pool) > 0)
    if not eligible:
        raise DataError("no participant has data for this activity")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if activity_count >= full_pool_threshold:
        chosen = eligible
    else:
        if fixed_subset_size is not None:
            k = fixed_subset_size
        else:
            k = math.ceil(round(subset_fraction * participant_count, 9))
        k = max(1, min(k, len(eligible)))
        picks = rng.choice(len(eligible), size=k, replace=False)
        chosen = [eligible[i] for i in sorted(picks)]
    return [(pid, int(rng.integers(len(pools[pid])))) for pid in chosen]


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _center(arr: np.ndarray, n: int) -> np.ndarray:
    start = (arr.shape[0] - n) // 2
    return arr[start:start + n]


def _consistent(thigh_len: int, back_len: int) -> bool:
    return abs(thigh_len / _RATE_T - back_len / _RATE_B) <= 1.0 / _RATE_T + 1e-9


class _Draw:
    __slots__ = ("ok", "windows", "reason")

    def __init__(self, ok, windows=(), reason=""):
        self.ok = ok
        self.windows = list(windows)
        self.reason = reason


def _run_draw(plan: SynthesisPlan, config: SynthesisConfig, seed: int, index: int,
              label_index: int, window_s: float) -> _Draw:
    rng = np.random.default_rng([int(seed), label_index, index])
    picks = sample_windows(plan.pools, plan.activity_count, plan.participant_count, rng,
                           full_pool_threshold=config.full_pool_threshold,
                           subset_fraction=config.subset_fraction,
                           fixed_subset_size=config.fixed_subset_size)
    members = [plan.pools[pid][i].channels() for pid, i in picks]
    med = multichannel_medoid_index(members) if len(members) > 1 else 0
    bary = []
    for c in range(len(CHANNELS)):
        bary.append(dba([m[c] for m in members], config.barycenter, init=members[med][c]))
    t_lens = {b.size for b in bary[:3]}
    b_lens = {b.size for b in bary[3:]}
    if len(t_lens) != 1 or len(b_lens) != 1 or not _consistent(t_lens.pop(), b_lens.pop()):
        return _Draw(False, reason="channel barycentres disagree in duration")
    thigh = np.column_stack(bary[:3])
    back = np.column_stack(bary[3:])

    n_t = int(round(window_s * _RATE_T))
    n_b = int(round(window_s * _RATE_B))
    if plan.policy is WindowPolicy.TRANSFER_FULL_SPAN:
        n = min(thigh.shape[0] // n_t, back.shape[0] // n_b)
        if n == 0:
            return _Draw(False, reason="barycentre shorter than one window")
        pieces = [(thigh[k * n_t:(k + 1) * n_t], back[k * n_b:(k + 1) * n_b]) for k in range(n)]
    elif plan.policy is WindowPolicy.WALKING_4S_TRIM:
        if thigh.shape[0] < n_t or back.shape[0] < n_b:
            return _Draw(False, reason="barycentre shorter than one window")
        pieces = [(_center(thigh, n_t), _center(back, n_b))]
    else:
        if thigh.shape[0] != n_t or back.shape[0] != n_b:
            return _Draw(False, reason="static barycentre is not one window long")
        pieces = [(thigh, back)]
    windows = [LabeledWindow(SYNTHETIC_PARTICIPANT, plan.activity, t, b, Origin.SYNTHETIC)
               for t, b in pieces]
    return _Draw(True, windows)


def generate_synthetic(plan: SynthesisPlan, config: SynthesisConfig | BarycenterConfig | None = None,
                       seed: int = 0, window_s: float = WINDOW_S) -> list[LabeledWindow]:
    """Produce exactly ``plan.target_count`` synthetic windows for one activity.

    Draw ``d`` uses a generator seeded from ``(seed, activity, d)``, so the
    output does not depend on ``config.threads``.
    """
    if isinstance(config, BarycenterConfig):
        config = SynthesisConfig(barycenter=config)
    config = config or SynthesisConfig()
    if plan.target_count == 0:
        return []
    if not any(len(p) for p in plan.pools.values()):
        raise GenerationError(f"{plan.activity.value}: no source sequences available")
    label_index = FINE_LABELS.index(plan.activity)
    out: list[LabeledWindow] = []
    failures = 0
    next_draw = 0
    batch = max(1, 2 * config.threads)
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        while len(out) < plan.target_count:
            # draws needed if each yields at least one window
            n = min(batch, plan.target_count - len(out) + (batch if failures else 0))
            idx = range(next_draw, next_draw + max(1, n))
            next_draw += len(idx)
            args = [(plan, config, seed, d, label_index, window_s) for d in idx]
            results = list(pool.map(lambda a: _run_draw(*a), args)) if pool else [_run_draw(*a) for a in args]
            for res in results:
                if len(out) >= plan.target_count:
                    break
                if not res.ok:
                    failures += 1
                    if failures > config.retry_budget:
                        raise GenerationError(
                            f"{plan.activity.value}: {failures} draws rejected "
                            f"(last reason: {res.reason}); retry budget {config.retry_budget} exhausted")
                    continue
                out.extend(res.windows[:plan.target_count - len(out)])
    finally:
        if pool:
            pool.shutdown()
    return out


# ---------------------------------------------------------------------------
# Building plans from real data
# ---------------------------------------------------------------------------

def _drift_corrected(seg: Segment, config: SynthesisConfig) -> Segment:
    back = np.array(seg.back, dtype=float)
    back[:, 2] = highpass_zero_phase_array(back[:, 2], _RATE_B, config.drift_cutoff_hz, config.drift_order)
    return Segment(seg.participant_id, seg.thigh, back)


def build_plans(windows: Sequence[LabeledWindow], sessions: Sequence[RecordingSession] | None = None,
                config: SynthesisConfig | None = None, window_s: float = WINDOW_S) -> list[SynthesisPlan]:
    """One plan per activity present in ``windows``, count-matched to them.

    ``windows`` are the preprocessed real windows; ``sessions`` (also
    preprocessed) supply the full transfer intervals. Walking sources are
    adjacent same-participant window pairs, optionally drift-corrected on
    the back z axis.
    """
    config = config or SynthesisConfig()
    real = [w for w in windows if w.origin is Origin.REAL]
    participants = sorted({w.participant_id for w in real} |
                          {s.participant_id for s in (sessions or ())})
    by_label: dict[FineLabel, list[LabeledWindow]] = {}
    for w in real:
        by_label.setdefault(w.label, []).append(w)

    plans = []
    for label in FINE_LABELS:
        wins = by_label.get(label, [])
        if not wins:
            continue
        policy = policy_for(label)
        pools: dict[str, list[Segment]] = {}
        if policy is WindowPolicy.STATIC_2S:
            for w in wins:
                pools.setdefault(w.participant_id, []).append(Segment(w.participant_id, w.thigh, w.back))
        elif policy is WindowPolicy.WALKING_4S_TRIM:
            per_part: dict[str, list[LabeledWindow]] = {}
            for w in wins:
                per_part.setdefault(w.participant_id, []).append(w)
            for pid, ws in per_part.items():
                ws = sorted(ws, key=lambda w: w.start_time if w.start_time is not None else math.inf)
                for a, b in zip(ws, ws[1:]):
                    if a.start_time is None or b.start_time is None:
                        continue
                    if abs(b.start_time - a.start_time - window_s) < 1e-6:
                        seg = Segment(pid, np.vstack([a.thigh, b.thigh]), np.vstack([a.back, b.back]))
                        pools.setdefault(pid, []).append(
                            _drift_corrected(seg, config) if config.drift_correction else seg)
            if not pools:
                raise GenerationError("walking synthesis needs at least one pair of consecutive windows")
        else:
            if sessions is None:
                raise ConfigError("transfer synthesis needs the recording sessions")
            for s in sessions:
                for iv in s.annotations:
                    if iv.label is not label or iv.duration < window_s - 1e-6:
                        continue
                    thigh = s.thigh.slice_time(iv.start, iv.end)
                    back = s.back.slice_time(iv.start, iv.end)
                    if thigh.shape[0] < 2 or back.shape[0] < 2:
                        continue
                    pools.setdefault(s.participant_id, []).append(Segment(s.participant_id, thigh, back))
            if not pools:
                raise GenerationError(f"{label.value}: no annotated interval of at least {window_s} s")
        plans.append(SynthesisPlan(label, pools, len(wins), policy,
                                   participant_count=len(participants), activity_count=len(wins)))
    return plans


def synthesize_dataset(windows: Sequence[LabeledWindow], sessions: Sequence[RecordingSession] | None,
                       config: SynthesisConfig | None = None, seed: int = 0) -> list[LabeledWindow]:
    """Count-matched synthetic counterpart of a real window set."""
    config = config or SynthesisConfig()
    out = []
    for plan in build_plans(windows, sessions, config):
        out.extend(generate_synthetic(plan, config, seed))
    return out


# ---------------------------------------------------------------------------
# Persistence: one long-format CSV per activity plus a manifest
# ---------------------------------------------------------------------------

def write_synthetic(directory, windows: Sequence[LabeledWindow], manifest: dict | None = None) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_label: dict[FineLabel, list[LabeledWindow]] = {}
    for w in windows:
        by_label.setdefault(w.label, []).append(w)
    counts = {}
    for label in FINE_LABELS:
        ws = by_label.get(label, [])
        if not ws:
            continue
        counts[label.value] = len(ws)
        with open(directory / f"{label.value}.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["window_id", "channel", "sample_index", "value"])
            for k, w in enumerate(ws):
                for c, chan in enumerate(w.channels()):
                    for i, v in enumerate(chan):
                        wr.writerow([k, CHANNELS[c], i, repr(float(v))])
    full = dict(manifest or {})
    full["counts"] = counts
    (directory / "manifest.json").write_text(json.dumps(full, indent=2, sort_keys=True))
    return full


def read_synthetic(directory) -> list[LabeledWindow]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"{directory}: no manifest.json")
    counts = json.loads(manifest_path.read_text()).get("counts", {})
    out = []
    for label_name, expected in counts.items():
        label = fine(label_name)
        data: dict[int, dict[str, dict[int, float]]] = {}
        with open(directory / f"{label.value}.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["window_id", "channel", "sample_index", "value"]:
                raise DataError(f"{label.value}.csv: unexpected header {header}")
            for row in reader:
                wid, chan, idx, val = int(row[0]), row[1], int(row[2]), float(row[3])
                data.setdefault(wid, {}).setdefault(chan, {})[idx] = val
        if len(data) != expected:
            raise DataError(f"{label.value}.csv: {len(data)} windows, manifest says {expected}")
        for wid in sorted(data):
            chans = [np.array([v for _, v in sorted(data[wid][c].items())]) for c in CHANNELS]
            out.append(LabeledWindow(SYNTHETIC_PARTICIPANT, label, np.column_stack(chans[:3]),
                                     np.column_stack(chans[3:]), Origin.SYNTHETIC))
    return out
