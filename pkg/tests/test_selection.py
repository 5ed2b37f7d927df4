import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import comb

from synthhar.errors import ConfigError, DataError, NumericalError
from synthhar.features import FEATURE_NAMES, extract_matrix
from synthhar.selection import (Algorithm, RankList, SelectionConfig, SubsampleSpec, beta_scores,
                                hfse_select, ict_importance, jaccard, ldr_importance, mrmr,
                                mutual_information, oob_importance, order_from_scores, relief_f, rra,
                                stability, stability_of, stratified_subsample, tanimoto)
from synthhar.simulate import PLANTED_FEATURES

# --- subsampling ------------------------------------------------------------------


def test_subsample_counts():
    labels = ["a"] * 10 + ["b"] * 25 + ["c"] * 2
    assert np.array_equal(stratified_subsample(labels, 1.0, 0), np.arange(37))
    rows = stratified_subsample(labels, 0.88, 3)
    picked = [labels[i] for i in rows]
    assert (picked.count("a"), picked.count("b"), picked.count("c")) == (9, 22, 2)
    assert np.array_equal(rows, stratified_subsample(labels, 0.88, 3))
    assert not np.array_equal(rows, stratified_subsample(labels, 0.88, 4))


def test_subsample_errors():
    with pytest.raises(DataError):
        stratified_subsample(["a", "a", "b"], 0.5, 0)
    with pytest.raises(DataError):
        stratified_subsample(["a", "a"], 0.5, 0, classes=["a", "b"])
    with pytest.raises(ConfigError):
        stratified_subsample(["a", "a"], 0.0, 0)
    with pytest.raises(ConfigError):
        SubsampleSpec(count=1)


def test_subsample_jaccard_monte_carlo():
    # independent re-simulation of the sampling process with plain permutations
    sizes = [300, 400, 2500, 200, 50]
    labels = np.repeat(np.arange(5), sizes)
    rng = np.random.default_rng(0)

    def draw():
        out = set()
        for c, n in enumerate(sizes):
            rows = np.flatnonzero(labels == c)
            out |= set(rng.permutation(rows)[:math.ceil(0.88 * n)].tolist())
        return out

    ref = np.mean([len((a := draw()) & (b := draw())) / len(a | b) for _ in range(300)])
    got = np.mean([jaccard(stratified_subsample(labels, 0.88, [1, 2 * i]),
                           stratified_subsample(labels, 0.88, [1, 2 * i + 1])) for i in range(300)])
    assert ref == pytest.approx(0.785, abs=0.01)
    assert got == pytest.approx(ref, abs=0.005)


# --- Relief-F --------------------------------------------------------------------

def relief_loop(X, y, k):
    n, m = len(X), len(X[0])
    lo = [min(r[j] for r in X) for j in range(m)]
    hi = [max(r[j] for r in X) for j in range(m)]
    Z = [[(r[j] - lo[j]) / (hi[j] - lo[j]) if hi[j] > lo[j] else 0.0 for j in range(m)] for r in X]
    classes = sorted(set(y))
    prior = {c: y.count(c) / n for c in classes}
    W = [0.0] * m
    for i in range(n):
        for c in classes:
            cand = [r for r in range(n) if y[r] == c and r != i]
            cand.sort(key=lambda r: (sum(abs(Z[r][j] - Z[i][j]) for j in range(m)), r))
            near = cand[:k]
            if not near:
                continue
            for j in range(m):
                d = sum(abs(Z[r][j] - Z[i][j]) for r in near) / len(near)
                if c == y[i]:
                    W[j] -= d
                else:
                    W[j] += prior[c] / (1 - prior[y[i]]) * d
    return [w / n for w in W]


def test_relief_six_rows():
    # column 0 separates, 1 is noise, 2 is constant, 3 duplicates column 0
    X = np.array([[0.0, 0.2, 5.0, 0.0],
                  [0.1, 0.9, 5.0, 0.1],
                  [0.0, 0.5, 5.0, 0.0],
                  [1.0, 0.1, 5.0, 1.0],
                  [0.9, 0.7, 5.0, 0.9],
                  [1.0, 0.4, 5.0, 1.0]])
    y = ["a", "a", "a", "b", "b", "b"]
    rl = relief_f(X, y, k=2)
    np.testing.assert_allclose(rl.scores, relief_loop(X.tolist(), y, 2), rtol=1e-12, atol=1e-15)
    assert rl.scores[2] == 0.0
    assert rl.scores[0] == rl.scores[3]
    assert rl.order.tolist()[:2] == [0, 3] and rl.order[-1] in (1, 2)


def test_relief_perfect_separator_weight_one():
    X = np.column_stack([[0, 0, 0, 1, 1, 1], [0.3, 0.1, 0.8, 0.2, 0.9, 0.5]])
    rl = relief_f(X, list("aaabbb"), k=2)
    # hits never differ and misses always differ by the full range
    assert rl.scores[0] == pytest.approx(1.0, abs=1e-15)
    assert rl.order[0] == 0


def test_relief_truncation_note():
    X = np.random.default_rng(0).normal(size=(8, 3))
    with pytest.warns(RuntimeWarning, match="truncated"):
        rl = relief_f(X, list("aaaaaabb"), k=3)
    assert rl.notes and "b" in rl.notes[0]
    np.testing.assert_allclose(rl.scores, relief_loop(X.tolist(), list("aaaaaabb"), 3), atol=1e-14)


# --- MRMR --------------------------------------------------------------------------

def direct_mi(a, b):
    n = len(a)
    out = 0.0
    for u in set(a):
        for v in set(b):
            pj = sum(1 for x, z in zip(a, b) if x == u and z == v) / n
            if pj:
                out += pj * math.log(pj / (a.count(u) / n * b.count(v) / n))
    return out


def test_mutual_information_direct():
    rng = np.random.default_rng(1)
    a, b = rng.integers(0, 4, 200).tolist(), rng.integers(0, 3, 200).tolist()
    assert mutual_information(a, b) == pytest.approx(direct_mi(a, b), abs=1e-12)
    assert mutual_information(a, a) == pytest.approx(direct_mi(a, a), abs=1e-12)


def test_mrmr_duplicate_goes_last():
    y = np.repeat(np.arange(4), 10)
    bit_hi = (y >= 2).astype(float)
    bit_lo = (y % 2).astype(float)
    X = np.column_stack([bit_hi, bit_hi, bit_lo])
    rl = mrmr(X, y)
    assert rl.order.tolist() == [0, 2, 1]
    ln2 = math.log(2)
    np.testing.assert_allclose(rl.scores, [ln2, ln2 / 2, ln2], atol=1e-12)


def test_mrmr_noise_and_single():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 2000)
    X = np.column_stack([rng.uniform(size=2000), y + 0.3 * rng.normal(size=2000)])
    rl = mrmr(X, y)
    assert rl.scores[0] < 0.01
    assert rl.order.tolist() == [1, 0]
    assert mrmr(X[:, :1], y).order.tolist() == [0]


# --- ICT ------------------------------------------------------------------------------

def exhaustive_split(X, y):
    """Best single split over every feature and midpoint: (gain, feature)."""
    def gini(lab):
        if not lab:
            return 0.0
        return 1 - sum((lab.count(c) / len(lab)) ** 2 for c in set(lab))

    n = len(y)
    best = (0.0, -1)
    for j in range(X.shape[1]):
        vals = sorted(set(X[:, j].tolist()))
        for lo, hi in zip(vals, vals[1:]):
            t = (lo + hi) / 2
            left = [y[i] for i in range(n) if X[i, j] <= t]
            right = [y[i] for i in range(n) if X[i, j] > t]
            g = gini(list(y)) - (len(left) * gini(left) + len(right) * gini(right)) / n
            if g > best[0] + 1e-15:
                best = (g, j)
    return best


def test_ict_clean_threshold():
    rng = np.random.default_rng(0)
    y = [0] * 10 + [1] * 10
    X = rng.uniform(size=(20, 4))
    X[:, 2] = np.r_[rng.uniform(0, 1, 10), rng.uniform(2, 3, 10)]
    gain, j = exhaustive_split(X, y)
    rl = ict_importance(X, y)
    assert j == 2 and rl.order[0] == 2
    assert rl.scores[2] == pytest.approx(gain, abs=1e-12)
    assert np.all(rl.scores[[0, 1, 3]] == 0)


def test_ict_noise_labels():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 6))
    y = rng.integers(0, 2, 40)
    rl = ict_importance(X, y)
    assert np.all(rl.scores == 0)
    assert rl.order.tolist() == list(range(6))


# --- OOB --------------------------------------------------------------------------------

def test_oob_manual_three_trees():
    # feature 0 determines the label; the others are constant and can never split
    x0 = np.r_[np.arange(6.0), np.arange(10.0, 16.0)]
    y = np.r_[np.zeros(6, int), np.ones(6, int)]
    X = np.column_stack([x0, np.ones(12), np.full(12, 2.0)])
    rl = oob_importance(X, y, n_trees=3, seed=17)
    # replay the random stream: every tree predicts by the sign of x0 - 8
    rng = np.random.default_rng(17)
    errs = []
    for _ in range(3):
        boot = rng.integers(0, 12, size=12)
        oob = np.setdiff1d(np.arange(12), boot)
        rng.integers(2 ** 31 - 1)
        if oob.size == 0:
            continue
        perm = rng.permutation(oob.size)
        errs.append(np.mean((x0[oob][perm] > 8).astype(int) != y[oob]))
    assert rl.scores[0] == pytest.approx(np.mean(errs), abs=1e-15)
    assert rl.scores[0] > 0 and rl.order[0] == 0
    assert np.all(rl.scores[1:] == 0)


def test_oob_determinism_and_rows():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 5))
    y = (X[:, 1] > 0).astype(int)
    a = oob_importance(X, y, n_trees=20, seed=4)
    b = oob_importance(X, y, n_trees=20, seed=4)
    assert np.array_equal(a.order, b.order) and np.array_equal(a.scores, b.scores)
    assert a.order[0] == 1
    with pytest.raises(DataError):
        oob_importance(X[:9], y[:9])


# --- LDR ----------------------------------------------------------------------------

def test_ldr_diagonal_closed_form():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 4)) * [1.0, 2.0, 0.5, 1.0]
    y = np.repeat([0, 1], 30)
    X[y == 1, 0] += 1.5
    X[y == 1, 2] += 0.4
    rl = ldr_importance(X, y, gamma=1.0)
    Z = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    m0, m1 = Z[y == 0].mean(axis=0), Z[y == 1].mean(axis=0)
    within = (((Z[y == 0] - m0) ** 2).sum(axis=0) + ((Z[y == 1] - m1) ** 2).sum(axis=0)) / 58
    np.testing.assert_allclose(rl.scores, np.abs(m0 - m1) / within, rtol=1e-10)


def test_ldr_separating_axis_and_null_feature():
    rng = np.random.default_rng(1)
    y = np.repeat([0, 1], 200)
    X = rng.normal(size=(400, 5))
    X[y == 1, 3] += 2.0
    rl = ldr_importance(X, y)
    assert rl.order[0] == 3
    assert rl.scores[3] > 5 * np.max(np.delete(rl.scores, 3))


def test_ldr_singular():
    rng = np.random.default_rng(2)
    a = rng.normal(size=40)
    X = np.column_stack([a, 2 * a + 1, rng.normal(size=40)])
    y = np.repeat([0, 1], 20)
    with pytest.raises(NumericalError, match="gamma > 0"):
        ldr_importance(X, y, gamma=0.0)
    assert ldr_importance(X, y, gamma=0.5).m == 3
    X[:, 1] = 4.0
    assert ldr_importance(X, y).scores[1] == 0.0


# --- rank lists -----------------------------------------------------------------------

def test_rank_list_contract():
    with pytest.raises(DataError):
        RankList(Algorithm.MRMR, [0, 0, 1])
    rl = RankList("ldr", [2, 0, 1])
    assert rl.ranks().tolist() == [2, 3, 1] and rl.top(2) == {2, 0}
    assert order_from_scores([1.0, 3.0, 3.0, 0.0]).tolist() == [1, 2, 0, 3]


@pytest.mark.parametrize("ranker", [relief_f, mrmr, ict_importance, oob_importance, ldr_importance])
def test_rankers_are_repeatable_permutations(ranker):
    rng = np.random.default_rng(9)
    X = rng.normal(size=(40, 7))
    y = np.repeat(["a", "b"], 20)
    X[y == "b", 4] += 3.0
    a, b = ranker(X, y), ranker(X, y)
    assert sorted(a.order.tolist()) == list(range(7))
    assert np.array_equal(a.order, b.order)
    assert a.order[0] == 4


# --- Tanimoto and stability ------------------------------------------------------------

def test_tanimoto_examples():
    s = set(range(10))
    t = set(range(5, 15))
    assert tanimoto(s, t) == pytest.approx(1 / 3, abs=1e-15)
    assert tanimoto(s, s) == 1.0
    assert tanimoto({1, 2}, {3}) == 0.0
    assert tanimoto(set(), set()) == 1.0


@settings(max_examples=200)
@given(st.sets(st.integers(0, 61), max_size=20), st.sets(st.integers(0, 61), max_size=20))
def test_tanimoto_is_jaccard(a, b):
    t = tanimoto(a, b)
    ref = len(a & b) / len(a | b) if a | b else 1.0
    assert t == pytest.approx(ref, abs=1e-15)
    assert t == tanimoto(b, a) and 0 <= t <= 1


def test_stability_constant_and_random():
    X = np.zeros((40, 62))
    y = np.repeat(["a", "b"], 20)
    spec = SubsampleSpec(10, 0.88, 0)
    fixed = stability(lambda X, y, rng: RankList("ldr", np.arange(62)), X, y, spec)
    assert fixed.mean == 1.0 and len(fixed.pairs) == 45

    rep = stability(lambda X, y, rng: RankList("ldr", rng.permutation(62)), X, y, SubsampleSpec(40, 0.88, 1))
    rng = np.random.default_rng(7)
    mc = np.mean([tanimoto(set(rng.choice(62, 10, replace=False)), set(rng.choice(62, 10, replace=False)))
                  for _ in range(20000)])
    assert rep.mean == pytest.approx(mc, abs=0.05)
    assert len(rep.pairs) == 40 * 39 // 2
    with pytest.raises(DataError):
        stability_of([{1}])


# --- RRA ------------------------------------------------------------------------------

def direct_p(ranks, m):
    r = sorted(x / m for x in ranks)
    n = len(r)
    betas = [sum(comb(n, ell, exact=True) * r[k] ** ell * (1 - r[k]) ** (n - ell) for ell in range(k + 1, n + 1))
             for k in range(n)]
    return min(1.0, n * min(betas)), betas


def test_rra_worked_values():
    R = np.ones((5, 62), dtype=int)
    R[:, 1:] = np.arange(2, 63)
    p = rra(R)
    assert p[0] == pytest.approx(5 * (1 / 62) ** 5, rel=1e-12)
    assert p[0] == pytest.approx(5.5e-9, rel=0.02)
    betas = beta_scores(np.full(5, 0.2))[0]
    np.testing.assert_allclose(betas, [0.67232, 0.26272, 0.05792, 0.00672, 0.00032], rtol=1e-12)
    assert rra(np.full((5, 1), 1), m=5)[0] == pytest.approx(0.0016, rel=1e-12)
    assert rra(np.full((5, 3), 3))[2] == 1.0
    np.testing.assert_allclose(beta_scores(np.ones(5))[0], 1.0)


def test_rra_errors():
    with pytest.raises(DataError):
        rra([RankList("ldr", [0, 1]), RankList("ldr", [0, 1, 2])])
    with pytest.raises(DataError):
        rra(np.full((5, 3), 4))
    with pytest.raises(DataError):
        rra([])


@settings(max_examples=150)
@given(st.lists(st.integers(1, 62), min_size=5, max_size=5), st.integers(0, 4))
def test_rra_direct_and_monotone(ranks, who):
    m = 62
    R = np.array(ranks)[:, None]
    p = rra(R, m=m)[0]
    assert p == pytest.approx(direct_p(ranks, m)[0], rel=1e-12, abs=1e-300)
    better = list(ranks)
    better[who] = max(1, better[who] - 5)
    assert rra(np.array(better)[:, None], m=m)[0] <= p + 1e-15


def test_rra_ignores_list_order():
    rng = np.random.default_rng(0)
    lists = [RankList("ldr", rng.permutation(62)) for _ in range(5)]
    np.testing.assert_array_equal(rra(lists), rra(lists[::-1]))


# --- ensemble ---------------------------------------------------------------------------

def test_selection_config_validation():
    with pytest.raises(ConfigError):
        SelectionConfig(vote_threshold=11)
    with pytest.raises(ConfigError):
        SelectionConfig(algorithms=())
    with pytest.raises(ValueError):
        SelectionConfig(algorithms=("bogus",))
    with pytest.raises(ConfigError):
        SelectionConfig(mode="other")


@pytest.fixture(scope="module")
def planted_selection(small_planted):
    _, windows = small_planted
    X = extract_matrix(windows)
    y = [w.label for w in windows]
    cfg = SelectionConfig(oob_trees=30)
    return hfse_select(X, y, cfg, seed=3, feature_names=FEATURE_NAMES), X, y


def test_vote_rule(planted_selection):
    res, _, _ = planted_selection
    M = res.vote_matrix()
    assert M.shape == (10, 62)
    np.testing.assert_array_equal(M.sum(axis=0), res.votes)
    assert res.final == np.flatnonzero(res.votes >= 5).tolist()
    for s in range(10):
        assert res.selected[s] == np.flatnonzero(res.p_values[s] < 0.05).tolist()
    assert set(res.stability) == {a.value for a in Algorithm}
    assert all(len(r.pairs) == 45 for r in res.stability.values())


def test_planted_features_recovered(planted_selection):
    res, _, _ = planted_selection
    assert set(PLANTED_FEATURES) <= set(res.final_names)
    assert all(res.votes[FEATURE_NAMES.index(f)] == 10 for f in PLANTED_FEATURES)


def test_selection_repeatable_and_pooled(planted_selection):
    res, X, y = planted_selection
    again = hfse_select(X, y, res.config, seed=3, feature_names=FEATURE_NAMES)
    assert again.final == res.final and np.array_equal(again.p_values, res.p_values)
    cfg = SelectionConfig(count=2, vote_threshold=1, algorithms=("relieff", "ldr"), mode="pooled")
    pooled = hfse_select(X, y, cfg, seed=1)
    assert pooled.pooled_p.shape == (62,)
    assert pooled.final == np.flatnonzero(pooled.pooled_p < 0.05).tolist()


def test_stability_gate_excludes(planted_selection):
    _, X, y = planted_selection
    cfg = SelectionConfig(count=3, vote_threshold=2, algorithms=("mrmr", "ldr"), stability_gate=1.01)
    with pytest.raises(DataError, match="stability gate"):
        hfse_select(X, y, cfg)


def test_pairs_enumerated_once():
    sets = [{i} for i in range(10)]
    rep = stability_of(sets)
    assert [(i, j) for i, j, _ in rep.pairs] == list(combinations(range(10), 2))
