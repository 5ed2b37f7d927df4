"""Acceptance checks.

Each test evaluates one criterion, records a PASS/FAIL line (printed in the
terminal summary) and then asserts. Budgets are wall-clock seconds for the
whole check on one core.
"""

import time
from collections import Counter
from fractions import Fraction
from itertools import combinations

import numba
import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, make_window, report_with_f1
from oracles import (all_sequences, brute_grid, oracle_sensor, padded_paths, reference_dba,
                     signed_rank_enumeration)
from scipy import stats
from scipy.special import comb

from synthhar import evaluation, pipeline
from synthhar.cli import main
from synthhar.errors import LeakageError
from synthhar.evaluation import compare_models, friedman_test, loso_cv, wilcoxon_signed_rank
from synthhar.features import FEATURE_NAMES, FeatureTable, extract, feature_index
from synthhar.labels import FineLabel
from synthhar.pipeline import PipelineConfig, ccm_split, run_fim
from synthhar.selection import beta_scores, rra, stratified_subsample, tanimoto
from synthhar.selection.subsample import jaccard
from synthhar.signal import LabeledWindow, preprocess, segment
from synthhar.simulate import PLANTED_FEATURES, STUDY_WINDOWS, planted_cohort, simulate_cohort, study_cohort
from synthhar.synthgen import (BarycenterConfig, SynthesisConfig, dba, dba_iterations, dtw,
                               medoid_index, synthesize_dataset)
from synthhar.synthgen.dtw import dtw_cost_kernel

pytestmark = pytest.mark.slow


def verdict(n, title, checks, elapsed, budget):
    """Record one criterion line; ``checks`` maps a description to a bool."""
    failed = [k for k, ok in checks.items() if not ok]
    if elapsed >= budget:
        failed.append(f"runtime {elapsed:.1f} s over {budget:.0f} s")
    status = "PASS" if not failed else "FAIL"
    line = f"[{n:2d}] {status}  {title} ({elapsed:.1f} s of {budget:.0f} s)"
    if failed:
        line += " -- " + "; ".join(failed)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line


# ---------------------------------------------------------------------------

def test_01_feature_catalog():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    windows = [make_window(seed=s) for s in range(8)]
    t = np.column_stack([np.full(50, 0.7), rng.normal(size=50), np.sin(np.arange(50))])
    b = np.column_stack([np.full(256, -1.0), rng.uniform(size=256), np.arange(256) % 5 - 2.0])
    windows.append(LabeledWindow("P", FineLabel.SITTING, t, b))
    worst = 0.0
    within = shapes_ok = True
    for w in windows:
        f = extract(w)
        shapes_ok &= f.shape == (62,)
        for block, rate, tag in ((w.thigh, 25.0, "ut"), (w.back, 128.0, "lb")):
            for key, val in oracle_sensor(np.asarray(block), rate).items():
                err = abs(f[feature_index(f"{key}_{tag}")] - val)
                within &= err <= max(1e-9 * abs(val), 1e-12)
                if abs(val) > 1e-6:
                    worst = max(worst, err / abs(val))
    per_sensor = Counter(n.rsplit("_", 1)[1] for n in FEATURE_NAMES)
    elapsed = time.perf_counter() - t0
    verdict(1, f"62-feature catalog, loop oracles (worst rel err {worst:.1e})", {
        "62 features per window": shapes_ok and len(FEATURE_NAMES) == 62,
        "31 per sensor": per_sensor == {"ut": 31, "lb": 31},
        "every formula within 1e-9": within,
    }, elapsed, 1.0)


@numba.njit(cache=True)
def dp_grid(A, B):
    out = np.empty((A.shape[0], B.shape[0]))
    for x in range(A.shape[0]):
        for y in range(B.shape[0]):
            out[x, y] = dtw_cost_kernel(A[x], B[y])
    return out


def test_02_dtw_exhaustive():
    t0 = time.perf_counter()
    seqs = {n: all_sequences(n) for n in range(1, 7)}
    pairs = 0
    mismatches = 0
    t_dp = 0.0
    for n in range(1, 7):
        for m in range(1, 7):
            paths, lens = padded_paths(n, m)
            ref = brute_grid(seqs[n], seqs[m], paths, lens)
            s = time.perf_counter()
            got = dp_grid(seqs[n], seqs[m])
            t_dp += time.perf_counter() - s
            mismatches += int(np.count_nonzero(got != ref))
            pairs += ref.size
    elapsed = time.perf_counter() - t0
    verdict(2, f"DTW equals path enumeration on {pairs} pairs (DP {t_dp:.2f} s)", {
        "at least 1e4 pairs": pairs >= 10_000,
        "exact equality": mismatches == 0,
    }, elapsed, 30.0)


def random_set(rng):
    k = int(rng.integers(5, 25))
    base_len = int(rng.integers(20, 257))
    out = []
    for _ in range(k):
        n = int(np.clip(base_len + rng.integers(-base_len // 5, base_len // 5 + 1), 20, 256))
        t = np.linspace(0, 2 * np.pi * rng.uniform(1, 3), n)
        out.append(np.sin(t + rng.uniform(0, 1)) * rng.uniform(0.5, 1.5) + 0.1 * rng.normal(size=n))
    return out


def test_03_dba_descent():
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    cfg = BarycenterConfig()
    history_ok = proposals_ok = agree = True
    worst_rise = 0.0
    for _ in range(200):
        sets = random_set(rng)
        bary, costs = dba_iterations(sets, cfg)
        history_ok &= all(b <= a for a, b in zip(costs, costs[1:]))
        ref, proposed = reference_dba(sets, dtw, sets[medoid_index(sets)], cfg.max_iters, cfg.rel_tolerance)
        agree &= bool(np.allclose(bary, ref, rtol=1e-10, atol=1e-12))
        for a, b in zip(proposed, proposed[1:]):
            worst_rise = max(worst_rise, (b - a) / a if a > 0 else 0.0)
        proposals_ok &= worst_rise <= 1e-9
    exact = True
    for s in range(20):
        x = rng.normal(size=int(rng.integers(20, 257)))
        exact &= np.array_equal(dba([x]), x) and np.array_equal(dba([x, x.copy(), x.copy(), x.copy()]), x)
    elapsed = time.perf_counter() - t0
    verdict(3, f"DBA on 200 random sets (largest raw rise {worst_rise:.1e} relative)", {
        "accepted cost history non-increasing": history_ok,
        "independent DBA route agrees": agree,
        "raw updates non-increasing up to rounding": proposals_ok,
        "singleton and identical sets exact": exact,
    }, elapsed, 120.0)


def binomial_p(ranks, m):
    r = sorted(Fraction(int(x), m) for x in ranks)
    n = len(r)
    betas = [sum(comb(n, ell, exact=True) * r[k] ** ell * (1 - r[k]) ** (n - ell) for ell in range(k + 1, n + 1))
             for k in range(n)]
    return float(min(Fraction(1), n * min(betas)))


def test_04_tanimoto_and_rra_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    tani_ok = True
    for _ in range(1000):
        a = set(rng.choice(62, int(rng.integers(0, 20)), replace=False).tolist())
        b = set(rng.choice(62, int(rng.integers(0, 20)), replace=False).tolist())
        union = a | b
        ref = float(Fraction(len(a & b), len(union))) if union else 1.0
        tani_ok &= tanimoto(a, b) == ref
    worst = 0.0
    R = np.array([rng.integers(1, 63, size=5) for _ in range(1000)]).T
    P = rra(R, m=62)
    for j in range(R.shape[1]):
        worst = max(worst, abs(P[j] - binomial_p(R[:, j], 62)))
    worked = rra(np.full((5, 1), 1), m=5)[0]
    betas = beta_scores(np.full(5, 0.2))[0]
    elapsed = time.perf_counter() - t0
    verdict(4, f"Tanimoto exact on 1000 pairs; RRA max abs err {worst:.1e} on 1000 vectors", {
        "Tanimoto equals set arithmetic exactly": tani_ok,
        "RRA within 1e-12 of exact binomial sums": worst <= 1e-12,
        "all-0.2 ranks give p = 0.0016": abs(worked - 0.0016) <= 1e-12,
        "all-0.2 beta values": bool(np.allclose(betas, [0.67232, 0.26272, 0.05792, 0.00672, 0.00032],
                                                rtol=0, atol=1e-12)),
    }, elapsed, 10.0)


def test_05_rra_conservative():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    draws = 10_000
    # five independent uniform rankings of 62 features per draw; keep feature 0
    R = np.array([[rng.permutation(62)[0] + 1 for _ in range(draws)] for _ in range(5)])
    p = rra(R, m=62)
    ks = stats.kstest(p, "uniform", alternative="greater")
    elapsed = time.perf_counter() - t0
    verdict(5, f"RRA p-values vs uniform, one-sided KS D+={ks.statistic:.4f}, p={ks.pvalue:.3f}", {
        "not rejected at alpha 0.01": ks.pvalue >= 0.01,
    }, elapsed, 60.0)


def test_06_subsample_overlap():
    t0 = time.perf_counter()
    labels = np.repeat([f.value for f in STUDY_WINDOWS], list(STUDY_WINDOWS.values()))
    subs = [stratified_subsample(labels, 0.88, [6, s]) for s in range(46)]
    values = [jaccard(subs[i], subs[j]) for i, j in combinations(range(46), 2)]
    mean = float(np.mean(values))
    elapsed = time.perf_counter() - t0
    verdict(6, f"mean Jaccard {mean:.4f} over {len(values)} subsample pairs", {
        "at least 1000 pairs": len(values) >= 1000,
        "0.785 +/- 0.02": abs(mean - 0.785) <= 0.02,
    }, elapsed, 30.0)


def test_07_leakage_guards(small_config, small_planted, monkeypatch):
    t0 = time.perf_counter()
    cfg = PipelineConfig.load(small_config / "config.json")
    sessions, windows = small_planted
    calls = []

    def spy(module):
        real = module.guard

        def wrapped(cond, msg):
            calls.append((msg, bool(cond)))
            return real(cond, msg)
        monkeypatch.setattr(module, "guard", wrapped)

    spy(pipeline)
    spy(evaluation)
    ccm = pipeline.run_ccm(cfg, sessions, windows)
    fim = run_fim(cfg, sessions, windows)
    msgs = Counter(m for m, _ in calls)
    all_true = all(ok for _, ok in calls)
    n_folds = len(ccm.evaluation.folds) + len(fim.evaluation.folds)
    monkeypatch.undo()

    caught = {}
    with pytest.raises(LeakageError):
        run_fim(cfg, sessions, windows, synthetic=windows)
    caught["FIM rejects real rows"] = True

    table = FeatureTable.from_windows(windows)
    with monkeypatch.context() as mp:
        mp.setattr(pipeline.np, "setdiff1d", lambda a, b: a)
        try:
            ccm_split(table, 0.25, "window", 0)
            caught["CCM rejects overlapping split"] = False
        except LeakageError:
            caught["CCM rejects overlapping split"] = True

    real_train = evaluation.train

    def leaky(X, labels, *a, **kw):
        # fit on one extra row: the standardizer no longer matches the training rows
        return real_train(np.vstack([X, X[:1]]), list(labels) + list(labels[:1]), *a, **kw)
    with monkeypatch.context() as mp:
        mp.setattr(evaluation, "train", leaky)
        try:
            loso_cv(table, list(PLANTED_FEATURES))
            caught["LOSO rejects foreign training rows"] = False
        except LeakageError:
            caught["LOSO rejects foreign training rows"] = True
    elapsed = time.perf_counter() - t0
    verdict(7, f"guards ran {len(calls)} times over {n_folds} folds and both workflows", {
        "held-out participant guard on every fold": msgs["held-out rows appear in training rows"] == n_folds,
        "FIM origin guard ran": msgs["FIM selection matrix contains non-synthetic rows"] == 1,
        "CCM disjointness guard ran": msgs["CCM selection and evaluation rows overlap"] == 1,
        "all guards held on a clean run": all_true,
        **caught,
    }, elapsed, 120.0)


def test_08_planted_recovery(tmp_path):
    t0 = time.perf_counter()
    planted_cohort().save(tmp_path / "cohort.json")
    cfg = PipelineConfig.from_dict({"data": {"cohort_spec": str(tmp_path / "cohort.json")},
                                    "seed": 7, "workflow": "fim"})
    res = run_fim(cfg)
    final = set(res.selection.final_names)
    extras = sorted(final - set(PLANTED_FEATURES))
    f1 = res.evaluation.macro_f1
    elapsed = time.perf_counter() - t0
    verdict(8, f"24-participant planted cohort: extras {extras}, FIM macro-F1 {f1:.3f}", {
        "24 participants": len(res.evaluation.folds) == 24,
        "all six planted features": set(PLANTED_FEATURES) <= final,
        "at most two extras": len(extras) <= 2,
        "macro-F1 >= 0.9": f1 >= 0.9,
    }, elapsed, 600.0)


def test_09_statistics():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    wil_ok = True
    cases = 0
    for n in range(1, 11):
        for _ in range(30):
            d = rng.integers(-5, 6, n).astype(float) * rng.choice([1.0, 0.5], n)
            if not np.any(d):
                continue
            ref, _, _ = signed_rank_enumeration(d)
            wil_ok &= abs(wilcoxon_signed_rank(d, np.zeros(n)) - ref) <= 1e-12
            cases += 1
    S = np.array([[9.0, 4.0, 1.0], [6.0, 5.0, 2.0], [7.0, 9.0, 8.0], [8.0, 5.0, 6.0]])
    q, p = friedman_test(S)
    # rank sums by hand: (10, 8, 6) -> 12/48 * 200 - 48 = 2
    rep = report_with_f1(rng.uniform(0.5, 0.9, 24))
    cmp = compare_models(rep, rep, names=["a", "b"])
    deltas = [v for d in cmp.class_deltas.values() for v in d.values()]
    elapsed = time.perf_counter() - t0
    verdict(9, f"Wilcoxon vs 2^n enumeration on {cases} vectors; Friedman {q:.6f}", {
        "Wilcoxon exact matches enumeration": wil_ok,
        "Friedman hand example within 1e-6": abs(q - 2.0) <= 1e-6 and abs(p - np.exp(-1)) <= 1e-6,
        "self-comparison p = 1": cmp.friedman_p == 1.0 and cmp.pairwise[0]["p_corrected"] == 1.0,
        "self-comparison deltas zero": all(v == 0 for v in deltas),
    }, elapsed, 10.0)


def test_10_counts_and_determinism(small_config, tmp_path):
    t0 = time.perf_counter()
    spec = study_cohort(12, 25)
    sessions = [preprocess(s) for s in simulate_cohort(spec, 3)]
    windows = [w for s in sessions for w in segment(s)]
    synth = synthesize_dataset(windows, sessions, SynthesisConfig(), seed=4)
    real_counts = Counter(w.label for w in windows)
    syn_counts = Counter(w.label for w in synth)
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        code = main(["run", "--config", str(small_config / "config.json"), "--out", str(out)])
        outs.append((code, {p.relative_to(out).as_posix(): p.read_bytes() for p in out.rglob("*") if p.is_file()}))
    same = outs[0][1] == outs[1][1]
    elapsed = time.perf_counter() - t0
    verdict(10, f"{len(synth)} synthetic windows over {len(real_counts)} activities; "
                f"{len(outs[0][1])} report files compared", {
        "per-activity counts equal": syn_counts == real_counts,
        "both runs exit 0": outs[0][0] == outs[1][0] == 0,
        "reports byte-identical": same and len(outs[0][1]) >= 9,
    }, elapsed, 300.0)
