"""End-to-end workflows.

* FIM: features are selected on the count-matched synthetic dataset only,
  then the classifier is evaluated on the real windows with LOSO.
* CCM: features are selected on an activity-stratified 25% of the real
  windows, and LOSO runs on the remaining 75%.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import shutil
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, PipelineError, guard
from .evaluation import ComparisonReport, EvaluationReport, compare_models, loso_cv
from .features import FeatureTable
from .labels import FINE_LABELS
from .selection import SelectionConfig, SelectionResult, hfse_select
from .signal import (WINDOW_S, LabeledWindow, Origin, RecordingSession, load_session, preprocess,
                     segment, synchronize, write_annotations, write_series)
from .simulate import CohortSpec, simulate_cohort
from .synthgen import BarycenterConfig, SynthesisConfig, read_synthetic, synthesize_dataset, write_synthetic

WORKFLOWS = ("fim", "ccm", "both")
SPLIT_WINDOW = "window"
SPLIT_PARTICIPANT = "participant"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _from_dict(cls, data: dict | None, where: str):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class DataConfig:
    sessions_dir: str | None = None
    cohort_spec: str | None = None
    synthetic_dir: str | None = None
    cohort_seed: int | None = None

    def __post_init__(self):
        if (self.sessions_dir is None) == (self.cohort_spec is None):
            raise ConfigError("data: give exactly one of sessions_dir or cohort_spec")


@dataclass(frozen=True)
class PreprocessConfig:
    frame_s: float = 0.12
    order: int = 2
    window_s: float = WINDOW_S

    def __post_init__(self):
        if self.frame_s <= 0 or self.window_s <= 0 or self.order < 0:
            raise ConfigError("preprocess: frame_s and window_s must be positive, order non-negative")


@dataclass(frozen=True)
class ModelConfig:
    k: int = 5

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ConfigError("model: k must be odd and positive")


@dataclass(frozen=True)
class CcmConfig:
    selection_fraction: float = 0.25
    split: str = SPLIT_WINDOW

    def __post_init__(self):
        if not 0 < self.selection_fraction < 1:
            raise ConfigError("ccm: selection_fraction must lie in (0, 1)")
        if self.split not in (SPLIT_WINDOW, SPLIT_PARTICIPANT):
            raise ConfigError(f"ccm: split must be {SPLIT_WINDOW!r} or {SPLIT_PARTICIPANT!r}")


@dataclass(frozen=True)
class PipelineConfig:
    data: DataConfig
    seed: int = 0
    workflow: str = "both"
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    ccm: CcmConfig = field(default_factory=CcmConfig)
    threads: int = 1

    def __post_init__(self):
        if self.workflow not in WORKFLOWS:
            raise ConfigError(f"workflow must be one of {', '.join(WORKFLOWS)}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "PipelineConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"config: unknown key(s) {', '.join(unknown)}")
        if "data" not in d:
            raise ConfigError("config: missing 'data' section")
        data = dict(d["data"])
        if base_dir is not None:
            for key in ("sessions_dir", "cohort_spec", "synthetic_dir"):
                if data.get(key) is not None and not Path(data[key]).is_absolute():
                    data[key] = str((base_dir / data[key]).resolve())
        synth = dict(d.get("synthesis") or {})
        if "barycenter" in synth:
            synth["barycenter"] = _from_dict(BarycenterConfig, synth["barycenter"], "synthesis.barycenter")
        sel = dict(d.get("selection") or {})
        if "algorithms" in sel:
            sel["algorithms"] = tuple(sel["algorithms"])
        try:
            return cls(
                data=_from_dict(DataConfig, data, "data"),
                seed=int(d.get("seed", 0)),
                workflow=str(d.get("workflow", "both")),
                preprocess=_from_dict(PreprocessConfig, d.get("preprocess"), "preprocess"),
                synthesis=_from_dict(SynthesisConfig, synth, "synthesis"),
                selection=_from_dict(SelectionConfig, sel, "selection"),
                model=_from_dict(ModelConfig, d.get("model"), "model"),
                ccm=_from_dict(CcmConfig, d.get("ccm"), "ccm"),
                threads=int(d.get("threads", 1)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"config: {exc}") from None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d, path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selection"] = self.selection.to_dict()
        return d

    def with_overrides(self, seed: int | None = None, threads: int | None = None) -> "PipelineConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if threads is not None:
            d["threads"] = threads
        return PipelineConfig.from_dict(d)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def sub_seed(seed: int, stage: int) -> int:
    """Independent integer seed for one pipeline stage."""
    return int(np.random.default_rng([seed, stage]).integers(2 ** 31 - 1))


STAGE_COHORT, STAGE_SYNTH, STAGE_FIM_SELECT, STAGE_CCM_SPLIT, STAGE_CCM_SELECT = range(1, 6)


def versions() -> dict:
    import numba
    import scipy
    import sklearn
    return {"synthhar": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "scikit-learn": sklearn.__version__,
            "python": platform.python_version()}


def manifest(config: PipelineConfig, **extra) -> dict:
    d = {"seed": config.seed, "config_hash": config.hash(), "config": config.to_dict(),
         "versions": versions()}
    d.update(extra)
    return d


# ---------------------------------------------------------------------------
# Session directories
# ---------------------------------------------------------------------------

def write_sessions(directory, sessions: Sequence[RecordingSession]) -> None:
    """One sub-directory per participant with thigh, back and annotation CSVs."""
    directory = Path(directory)
    for s in sessions:
        d = directory / s.participant_id
        d.mkdir(parents=True, exist_ok=True)
        write_series(d / "thigh.csv", s.thigh)
        write_series(d / "back.csv", s.back)
        write_annotations(d / "annotations.csv", s.annotations)


def read_sessions(directory) -> list[RecordingSession]:
    """Load every participant sub-directory, applying ``sync.json`` when present."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"sessions directory {directory} does not exist")
    sessions = []
    for d in sorted(p for p in directory.iterdir() if p.is_dir()):
        s = load_session(d / "thigh.csv", d / "back.csv", d / "annotations.csv", participant_id=d.name)
        sync = d / "sync.json"
        if sync.exists():
            ev = json.loads(sync.read_text())
            s = synchronize(s, float(ev["thigh_event_s"]), float(ev["back_event_s"]))
        sessions.append(s)
    if not sessions:
        raise DataError(f"{directory}: no participant sub-directories")
    return sessions


def load_real(config: PipelineConfig) -> tuple[list[RecordingSession], list[LabeledWindow]]:
    """Raw sessions (from disk or simulation), smoothed, then segmented."""
    if config.data.sessions_dir is not None:
        raw = read_sessions(config.data.sessions_dir)
    else:
        spec = CohortSpec.load(config.data.cohort_spec)
        cohort_seed = config.data.cohort_seed
        raw = simulate_cohort(spec, cohort_seed if cohort_seed is not None else sub_seed(config.seed, STAGE_COHORT))
    pp = config.preprocess
    sessions = [preprocess(s, pp.frame_s, pp.order) for s in raw]
    windows = [w for s in sessions for w in segment(s, pp.window_s)]
    if not windows:
        raise DataError("segmentation produced no windows")
    return sessions, windows


# ---------------------------------------------------------------------------
# Workflows
# ---------------------------------------------------------------------------

@dataclass
class WorkflowResult:
    name: str
    selection: SelectionResult
    evaluation: EvaluationReport
    selection_rows: int
    evaluation_rows: int
    extra: dict = field(default_factory=dict)


def _select(table: FeatureTable, config: PipelineConfig, seed: int) -> SelectionResult:
    sel_cfg = config.selection
    if config.threads != sel_cfg.threads:
        sel_cfg = SelectionConfig(**{**sel_cfg.to_dict(), "algorithms": sel_cfg.algorithms,
                                     "threads": config.threads})
    result = hfse_select(table.X, table.labels, sel_cfg, seed, table.names)
    if not result.final:
        votes = ", ".join(f"{n}={v}" for n, v in zip(result.feature_names, result.votes) if v)
        raise PipelineError(f"feature selection returned an empty set (votes: {votes or 'none'})")
    return result


def synthetic_windows(config: PipelineConfig, sessions, windows) -> list[LabeledWindow]:
    if config.data.synthetic_dir is not None:
        synth = read_synthetic(config.data.synthetic_dir)
    else:
        scfg = config.synthesis
        if scfg.threads != config.threads:
            scfg = SynthesisConfig(**{**asdict(scfg), "barycenter": scfg.barycenter, "threads": config.threads})
        synth = synthesize_dataset(windows, sessions, scfg, sub_seed(config.seed, STAGE_SYNTH))
    real_counts = Counter(w.label for w in windows if w.origin is Origin.REAL)
    synth_counts = Counter(w.label for w in synth)
    if real_counts != synth_counts:
        raise PipelineError(f"synthetic counts {dict(synth_counts)} differ from real counts {dict(real_counts)}")
    return synth


def run_fim(config: PipelineConfig, sessions=None, windows=None, synthetic=None) -> WorkflowResult:
    """Select on synthetic windows only, evaluate on real windows."""
    if windows is None:
        sessions, windows = load_real(config)
    if synthetic is None:
        synthetic = synthetic_windows(config, sessions, windows)
    syn_table = FeatureTable.from_windows(synthetic)
    guard(all(o is Origin.SYNTHETIC for o in syn_table.origins),
          "FIM selection matrix contains non-synthetic rows")
    selection = _select(syn_table, config, sub_seed(config.seed, STAGE_FIM_SELECT))
    real_table = FeatureTable.from_windows(windows)
    report = loso_cv(real_table, selection.final_names, config.model.k, threads=config.threads, name="fim")
    return WorkflowResult("fim", selection, report, len(syn_table), len(real_table),
                          {"synthetic_counts": {k.value: v for k, v in sorted(Counter(w.label for w in synthetic).items())}})


def ccm_split(table: FeatureTable, fraction: float, mode: str, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint (selection, evaluation) row indices.

    Window mode takes ``round(fraction * n_c)`` rows of every fine class;
    participant mode takes ``ceil(fraction * P)`` whole participants.
    """
    rng = np.random.default_rng(seed)
    n = len(table)
    if mode == SPLIT_WINDOW:
        labels = np.array([lab.value for lab in table.labels])
        picks = []
        for lab in FINE_LABELS:
            rows = np.flatnonzero(labels == lab.value)
            if rows.size:
                take = int(round(fraction * rows.size))
                picks.append(rng.choice(rows, size=take, replace=False))
        sel = np.sort(np.concatenate(picks)) if picks else np.array([], dtype=int)
    else:
        pids = sorted(set(table.participants))
        k = max(1, math.ceil(round(fraction * len(pids), 9)))
        if k >= len(pids):
            raise DataError("participant split leaves no participants for evaluation")
        chosen = set(rng.choice(pids, size=k, replace=False).tolist())
        sel = np.array([i for i, p in enumerate(table.participants) if p in chosen], dtype=int)
    ev = np.setdiff1d(np.arange(n), sel)
    guard(not np.intersect1d(sel, ev).size, "CCM selection and evaluation rows overlap")
    guard(sel.size + ev.size == n, "CCM split lost rows")
    return sel, ev


def run_ccm(config: PipelineConfig, sessions=None, windows=None) -> WorkflowResult:
    """Select on a stratified share of real windows, evaluate on the rest."""
    if windows is None:
        sessions, windows = load_real(config)
    table = FeatureTable.from_windows(windows)
    sel_rows, ev_rows = ccm_split(table, config.ccm.selection_fraction, config.ccm.split,
                                  sub_seed(config.seed, STAGE_CCM_SPLIT))
    selection = _select(table.subset(sel_rows), config, sub_seed(config.seed, STAGE_CCM_SELECT))
    eval_table = table.subset(ev_rows)
    report = loso_cv(eval_table, selection.final_names, config.model.k, threads=config.threads, name="ccm")
    return WorkflowResult("ccm", selection, report, len(sel_rows), len(ev_rows),
                          {"split": config.ccm.split})


def run_compare(config: PipelineConfig, sessions=None, windows=None,
                synthetic=None) -> tuple[WorkflowResult, WorkflowResult, ComparisonReport]:
    if windows is None:
        sessions, windows = load_real(config)
    ccm = run_ccm(config, sessions, windows)
    fim = run_fim(config, sessions, windows, synthetic)
    if sorted(ccm.evaluation.participants) != sorted(fim.evaluation.participants):
        raise PipelineError("CCM and FIM evaluations cover different participants; "
                            "use the window-level CCM split to compare them")
    return ccm, fim, compare_models(ccm.evaluation, fim.evaluation, names=["ccm", "fim"])


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def prepare_output(out, force: bool = False) -> Path:
    """Create a fresh output directory; an existing non-empty one needs ``force``."""
    out = Path(out)
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigError(f"output directory {out} is not empty; choose a new one or pass --force")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_workflow(out: Path, result: WorkflowResult) -> None:
    d = out / result.name
    d.mkdir(parents=True, exist_ok=True)
    result.selection.write_json(d / "selection.json")
    result.selection.write_vote_csv(d / "votes.csv")
    result.evaluation.write_json(d / "evaluation.json")
    result.evaluation.write_confusion_csv(d / "confusion.csv")


def run(config: PipelineConfig, out, force: bool = False) -> dict:
    """Run the configured workflow(s) and write every report under ``out``."""
    out = prepare_output(out, force)
    sessions, windows = load_real(config)
    summary = {"real_counts": {k.value: v for k, v in sorted(Counter(w.label for w in windows).items())}}
    if config.workflow == "both":
        ccm, fim, cmp = run_compare(config, sessions, windows)
        write_workflow(out, ccm)
        write_workflow(out, fim)
        cmp.write_json(out / "comparison.json")
        summary.update(ccm=_brief(ccm), fim=_brief(fim), winner=cmp.winner)
    elif config.workflow == "fim":
        fim = run_fim(config, sessions, windows)
        write_workflow(out, fim)
        summary.update(fim=_brief(fim))
    else:
        ccm = run_ccm(config, sessions, windows)
        write_workflow(out, ccm)
        summary.update(ccm=_brief(ccm))
    write_json(out / "manifest.json", manifest(config, summary=summary))
    return summary


def _brief(r: WorkflowResult) -> dict:
    return {"features": r.selection.final_names, "macro_f1": r.evaluation.macro_f1,
            "selection_rows": r.selection_rows, "evaluation_rows": r.evaluation_rows, **r.extra}


def save_synthetic(out: Path, windows, config: PipelineConfig) -> dict:
    return write_synthetic(out, windows, manifest(config))
