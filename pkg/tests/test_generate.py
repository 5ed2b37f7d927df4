from collections import Counter

import numpy as np
import pytest

from synthhar.errors import DataError, GenerationError
from synthhar.labels import FineLabel
from synthhar.signal import Origin
from synthhar.synthgen import (Segment, SynthesisConfig, SynthesisPlan, WindowPolicy, build_plans,
                               generate_synthetic, read_synthetic, sample_windows, synthesize_dataset,
                               write_synthetic)


def pools_of(sizes):
    return {f"P{i:02d}": [None] * n for i, n in enumerate(sizes)}


def test_full_pool_rule():
    pools = pools_of([94] * 23 + [82])
    picks = sample_windows(pools, 2244, 24, 0)
    assert len(picks) == 24
    assert sorted(p for p, _ in picks) == sorted(pools)


def test_subset_rule():
    pools = pools_of([2] * 17 + [1] * 7)
    picks = sample_windows(pools, 35, 24, 0)
    assert len(picks) == 5
    assert len({p for p, _ in picks}) == 5
    assert len(sample_windows(pools, 35, 24, 0, fixed_subset_size=6)) == 6
    assert sample_windows(pools, 35, 24, 7) == sample_windows(pools, 35, 24, 7)
    for pid, idx in picks:
        assert 0 <= idx < len(pools[pid])


def test_subset_only_among_eligible():
    pools = pools_of([3, 0, 0, 2])
    picks = sample_windows(pools, 5, 24, 1)
    assert {p for p, _ in picks} <= {"P00", "P03"}
    with pytest.raises(DataError):
        sample_windows(pools_of([0, 0]), 0, 2, 0)


def constant_segment(pid, n_t=50, n_b=256, value=0.3):
    return Segment(pid, np.full((n_t, 3), value), np.full((n_b, 3), -value))


def test_static_constant_pool_reproduced():
    pools = {f"P{i}": [constant_segment(f"P{i}")] * 2 for i in range(6)}
    # a 12-window pool over ten registered participants gives two-member draws
    plan = SynthesisPlan(FineLabel.STANDING, pools, 3258, participant_count=10, activity_count=12)
    out = generate_synthetic(plan, SynthesisConfig(), seed=4)
    assert len(out) == 3258
    for w in out[:: 97]:
        assert w.origin is Origin.SYNTHETIC and w.label is FineLabel.STANDING
        np.testing.assert_array_equal(w.thigh, 0.3)
        np.testing.assert_array_equal(w.back, -0.3)


def test_walking_trim_lengths():
    rng = np.random.default_rng(0)
    pools = {f"P{i}": [Segment(f"P{i}", rng.normal(size=(100, 3)), rng.normal(size=(512, 3)))
                       for _ in range(2)] for i in range(5)}
    plan = SynthesisPlan(FineLabel.WALKING, pools, 7)
    assert plan.policy is WindowPolicy.WALKING_4S_TRIM
    out = generate_synthetic(plan, SynthesisConfig(), seed=1)
    assert len(out) == 7
    assert all(w.thigh.shape == (50, 3) and w.back.shape == (256, 3) for w in out)


def test_transfer_split_and_budget():
    rng = np.random.default_rng(0)
    # 5 s transfers give two windows per draw
    pools = {f"P{i}": [Segment(f"P{i}", rng.normal(size=(125, 3)), rng.normal(size=(640, 3)))]
             for i in range(5)}
    out = generate_synthetic(SynthesisPlan(FineLabel.SIT_TO_STAND, pools, 5), SynthesisConfig(), seed=2)
    assert len(out) == 5
    # 1.5 s transfers never yield a full window
    short = {f"P{i}": [Segment(f"P{i}", rng.normal(size=(37, 3)), rng.normal(size=(192, 3)))]
             for i in range(5)}
    with pytest.raises(GenerationError, match="sit_to_stand"):
        generate_synthetic(SynthesisPlan(FineLabel.SIT_TO_STAND, short, 3),
                           SynthesisConfig(retry_budget=4), seed=2)


def test_count_matching_threads_and_roundtrip(small_planted, tmp_path):
    sessions, windows = small_planted
    real = Counter(w.label for w in windows)
    plans = build_plans(windows, sessions)
    assert {p.activity: p.target_count for p in plans} == dict(real)
    a = synthesize_dataset(windows, sessions, SynthesisConfig(threads=1), seed=9)
    b = synthesize_dataset(windows, sessions, SynthesisConfig(threads=3), seed=9)
    assert Counter(w.label for w in a) == real
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert x.label is y.label
        assert np.array_equal(x.thigh, y.thigh) and np.array_equal(x.back, y.back)
    write_synthetic(tmp_path, a, {"seed": 9})
    back = read_synthetic(tmp_path)
    assert Counter(w.label for w in back) == real
    for x, y in zip(sorted(a, key=lambda w: w.label.value), back):
        assert x.label is y.label
    assert all(w.origin is Origin.SYNTHETIC for w in back)
