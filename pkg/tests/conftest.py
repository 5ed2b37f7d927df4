import json

import numpy as np
import pytest

from synthhar.evaluation import ClassMetrics, EvaluationReport, FoldResult
from synthhar.labels import COARSE_LABELS, FineLabel
from synthhar.signal import LabeledWindow, Origin, preprocess, segment
from synthhar.simulate import planted_cohort, simulate_cohort


def make_window(label=FineLabel.SITTING, pid="P01", seed=0, origin=Origin.REAL, start=0.0):
    rng = np.random.default_rng(seed)
    return LabeledWindow(pid, label, rng.normal(size=(50, 3)), rng.normal(size=(256, 3)), origin, start)


@pytest.fixture(scope="session")
def small_planted():
    """Six participants, two windows per activity: (sessions, windows)."""
    spec = planted_cohort(n_participants=6, windows_per_class=2)
    sessions = [preprocess(s) for s in simulate_cohort(spec, 11)]
    windows = [w for s in sessions for w in segment(s)]
    return sessions, windows


@pytest.fixture(scope="session")
def small_config(tmp_path_factory):
    """Directory holding a six-participant planted cohort spec and a quick config."""
    d = tmp_path_factory.mktemp("cfg")
    planted_cohort(n_participants=6, windows_per_class=2).save(d / "cohort.json")
    cfg = {"data": {"cohort_spec": "cohort.json", "cohort_seed": 11}, "seed": 5,
           "selection": {"oob_trees": 20}}
    (d / "config.json").write_text(json.dumps(cfg))
    return d


def report_with_f1(values, name=""):
    folds = []
    for i, v in enumerate(values):
        cm = np.zeros((5, 5), dtype=int)
        cm[0, 0] = 1
        metrics = {c: ClassMetrics(v, v, v) for c in COARSE_LABELS}
        folds.append(FoldResult(f"P{i:02d}", cm, metrics))
    return EvaluationReport(folds, name)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
