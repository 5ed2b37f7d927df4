"""Command-line interface.

Every stage reads and writes documented files so it can run on its own::

    synthhar simulate --preset planted --out sessions/
    synthhar ingest   --sessions sessions/ --out windows/
    synthhar synth    --sessions sessions/ --out synthetic/
    synthhar features --windows synthetic/ --out feat_syn/
    synthhar select   --features feat_syn/features.csv --out sel/
    synthhar train    --features feat_real/features.csv --selection sel/selection.json --out model/
    synthhar evaluate --features feat_real/features.csv --selection sel/selection.json --out eval/
    synthhar compare  --reports a/evaluation.json b/evaluation.json --out cmp/
    synthhar report   --run run/
    synthhar run      --config config.json --out run/

Exit codes: 0 success, 2 configuration error, 3 data error, 4 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from collections import Counter
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, PipelineError
from .evaluation import EvaluationReport, compare_models, loso_cv
from .features import FeatureTable
from .labels import COARSE_LABELS
from .model import train
from .pipeline import (PipelineConfig, load_real, manifest, prepare_output, read_sessions,
                       run, write_json, write_sessions)
from .selection import hfse_select
from .signal import LabeledWindow, Origin, preprocess, segment
from .simulate import CohortSpec, planted_cohort, simulate_cohort, study_cohort
from .synthgen import read_synthetic, synthesize_dataset, write_synthetic

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PIPELINE = 0, 2, 3, 4
PRESETS = {"planted": planted_cohort, "study": study_cohort}


# ---------------------------------------------------------------------------
# Window files
# ---------------------------------------------------------------------------

def save_windows(path, windows) -> None:
    """Windows as ``.npz``: thigh (n, 50, 3), back (n, 256, 3) and row metadata."""
    start = [np.nan if w.start_time is None else w.start_time for w in windows]
    np.savez(path, thigh=np.stack([w.thigh for w in windows]), back=np.stack([w.back for w in windows]),
             label=np.array([w.label.value for w in windows]),
             participant=np.array([w.participant_id for w in windows]),
             origin=np.array([w.origin.value for w in windows]), start_time=np.array(start, dtype=float))


def load_windows(path) -> list[LabeledWindow]:
    path = Path(path)
    if path.is_dir():
        if (path / "windows.npz").exists():
            path = path / "windows.npz"
        else:
            return read_synthetic(path)
    try:
        z = np.load(path)
    except FileNotFoundError:
        raise DataError(f"{path} not found") from None
    out = []
    for i in range(z["label"].size):
        st = float(z["start_time"][i])
        out.append(LabeledWindow(str(z["participant"][i]), str(z["label"][i]), z["thigh"][i], z["back"][i],
                                 Origin(str(z["origin"][i])), None if np.isnan(st) else st))
    return out


# ---------------------------------------------------------------------------
# Configuration for single stages (the data section is optional here)
# ---------------------------------------------------------------------------

def stage_config(args) -> PipelineConfig:
    d = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {args.config} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        base = Path(args.config).parent
    else:
        base = None
    if "data" not in d:
        d["data"] = {"sessions_dir": "."}
    cfg = PipelineConfig.from_dict(d, base)
    return cfg.with_overrides(seed=args.seed, threads=args.threads)


def _out(args) -> Path:
    if not args.out:
        raise ConfigError("--out is required")
    return prepare_output(args.out, args.force)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if bool(args.spec) == bool(args.preset):
        raise ConfigError("give exactly one of --spec or --preset")
    spec = CohortSpec.load(args.spec) if args.spec else PRESETS[args.preset]()
    seed = args.seed if args.seed is not None else 0
    out = _out(args)
    sessions = simulate_cohort(spec, seed)
    write_sessions(out, sessions)
    spec.save(out / "cohort_spec.json")
    write_json(out / "manifest.json", {"seed": seed, "participants": [s.participant_id for s in sessions]})
    print(f"wrote {len(sessions)} sessions to {out}")
    return EXIT_OK


def _sessions_and_windows(args, cfg):
    if args.sessions:
        pp = cfg.preprocess
        sessions = [preprocess(s, pp.frame_s, pp.order) for s in read_sessions(args.sessions)]
        windows = [w for s in sessions for w in segment(s, pp.window_s)]
        if not windows:
            raise DataError("segmentation produced no windows")
        return sessions, windows
    if args.config:
        return load_real(PipelineConfig.load(args.config).with_overrides(seed=args.seed))
    raise ConfigError("give --sessions or a --config with a data section")


def cmd_ingest(args) -> int:
    cfg = stage_config(args)
    _, windows = _sessions_and_windows(args, cfg)
    out = _out(args)
    save_windows(out / "windows.npz", windows)
    counts = {k.value: v for k, v in sorted(Counter(w.label for w in windows).items())}
    write_json(out / "manifest.json", manifest(cfg, counts=counts))
    print(f"{len(windows)} windows: {counts}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = stage_config(args)
    sessions, windows = _sessions_and_windows(args, cfg)
    out = _out(args)
    synth = synthesize_dataset(windows, sessions, cfg.synthesis, cfg.seed)
    write_synthetic(out, synth, manifest(cfg))
    print(f"{len(synth)} synthetic windows written to {out}")
    return EXIT_OK


def cmd_features(args) -> int:
    if not args.windows:
        raise ConfigError("--windows is required")
    windows = load_windows(args.windows)
    out = _out(args)
    table = FeatureTable.from_windows(windows)
    table.write_csv(out / "features.csv")
    print(f"{len(table)} x {len(table.names)} feature matrix written to {out / 'features.csv'}")
    return EXIT_OK


def _features(args) -> FeatureTable:
    if not args.features:
        raise ConfigError("--features is required")
    if not Path(args.features).exists():
        raise DataError(f"{args.features} not found")
    return FeatureTable.read_csv(args.features)


def _selected(args) -> list[str]:
    if not args.selection:
        raise ConfigError("--selection is required")
    try:
        d = json.loads(Path(args.selection).read_text())
    except FileNotFoundError:
        raise DataError(f"{args.selection} not found") from None
    feats = d.get("final_features")
    if not feats:
        raise PipelineError("selection file lists no final features")
    return list(feats)


def cmd_select(args) -> int:
    cfg = stage_config(args)
    table = _features(args)
    out = _out(args)
    res = hfse_select(table.X, table.labels, cfg.selection, cfg.seed, table.names)
    res.write_json(out / "selection.json")
    res.write_vote_csv(out / "votes.csv")
    origins = sorted({o.value for o in table.origins})
    write_json(out / "manifest.json", manifest(cfg, input=str(args.features), origins=origins))
    if not res.final:
        raise PipelineError("feature selection returned an empty set; see votes.csv")
    print("selected: " + ", ".join(res.final_names))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = stage_config(args)
    table = _features(args)
    feats = _selected(args)
    out = _out(args)
    model = train(table.X, table.labels, feats, cfg.model.k, table.names)
    model.save(out)
    print(f"model with k={model.k} on {len(feats)} features written to {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = stage_config(args)
    table = _features(args)
    feats = _selected(args)
    out = _out(args)
    report = loso_cv(table, feats, cfg.model.k, threads=cfg.threads, name=args.name or "")
    report.write_json(out / "evaluation.json")
    report.write_confusion_csv(out / "confusion.csv")
    write_json(out / "manifest.json", manifest(cfg, features=feats))
    print(f"LOSO macro-F1 {report.macro_f1:.4f} over {len(report.folds)} participants")
    return EXIT_OK


def cmd_compare(args) -> int:
    if not args.reports or len(args.reports) < 2:
        raise ConfigError("--reports needs at least two evaluation.json files")
    reports = []
    for p in args.reports:
        try:
            reports.append(EvaluationReport.read_json(p))
        except FileNotFoundError:
            raise DataError(f"{p} not found") from None
    names = args.names or [Path(p).parent.name or f"model_{i}" for i, p in enumerate(args.reports)]
    out = _out(args)
    cmp = compare_models(*reports, names=names)
    cmp.write_json(out / "comparison.json")
    print(f"Friedman p={cmp.friedman_p:.4g}; winner: {cmp.winner or 'none'}")
    return EXIT_OK


def format_report(report: EvaluationReport, title: str) -> str:
    lines = [title, f"{'class':<10} {'precision':>17} {'recall':>17} {'F1':>17} {'F1 range':>13}"]
    pc = report.per_class()
    for c in COARSE_LABELS:
        row = pc[c.value]
        cells = [f"{row[m]['mean']:.3f} ± {row[m]['sd']:.3f}" for m in ("precision", "recall", "f1")]
        lines.append(f"{c.value:<10} {cells[0]:>17} {cells[1]:>17} {cells[2]:>17} "
                     f"{row['f1']['min']:.2f}-{row['f1']['max']:.2f}".rstrip())
    lines.append(f"macro-F1 (mean over participants): {report.macro_f1:.3f}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    if not args.run:
        raise ConfigError("--run is required")
    run_dir = Path(args.run)
    parts = []
    for name in ("ccm", "fim"):
        p = run_dir / name / "evaluation.json"
        if p.exists():
            parts.append(format_report(EvaluationReport.read_json(p), f"[{name.upper()}]"))
            sel = json.loads((run_dir / name / "selection.json").read_text())
            parts.append("features: " + ", ".join(sel["final_features"]))
    cmp = run_dir / "comparison.json"
    if cmp.exists():
        d = json.loads(cmp.read_text())
        pw = "; ".join(f"{x['a']} vs {x['b']}: p={x['p_corrected']:.4g}" for x in d["pairwise_wilcoxon"])
        parts.append(f"Friedman chi2={d['friedman']['statistic']:.4g}, p={d['friedman']['p']:.4g}; {pw}; "
                     f"winner: {d['winner'] or 'none'}")
    if not parts:
        raise DataError(f"{run_dir}: no evaluation reports found")
    text = "\n\n".join(parts) + "\n"
    if args.out:
        out = _out(args)
        (out / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = PipelineConfig.load(args.config).with_overrides(seed=args.seed, threads=args.threads)
    if not args.out:
        raise ConfigError("--out is required")
    summary = run(cfg, args.out, args.force)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "simulate a cohort and write session CSVs"),
    "ingest": (cmd_ingest, "load, synchronize, smooth and segment sessions"),
    "synth": (cmd_synth, "generate the count-matched synthetic dataset"),
    "features": (cmd_features, "extract the 62-feature matrix"),
    "select": (cmd_select, "run the feature-selection ensemble"),
    "train": (cmd_train, "train the KNN model on selected features"),
    "evaluate": (cmd_evaluate, "leave-one-subject-out evaluation"),
    "compare": (cmd_compare, "Friedman and Wilcoxon comparison of evaluation reports"),
    "report": (cmd_report, "print the per-class tables of a run directory"),
    "run": (cmd_run, "run FIM, CCM or both end to end"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthhar", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", help="output directory (must be new or empty)")
        p.add_argument("--threads", type=int, help="upper bound on worker threads")
        p.add_argument("--force", action="store_true", help="replace a non-empty output directory")
        if name == "simulate":
            p.add_argument("--spec", help="cohort specification JSON")
            p.add_argument("--preset", choices=sorted(PRESETS))
        if name in ("ingest", "synth"):
            p.add_argument("--sessions", help="directory with one sub-directory per participant")
        if name == "features":
            p.add_argument("--windows", help="windows.npz, an ingest directory or a synthetic directory")
        if name in ("select", "train", "evaluate"):
            p.add_argument("--features", help="features.csv")
        if name in ("train", "evaluate"):
            p.add_argument("--selection", help="selection.json")
        if name == "evaluate":
            p.add_argument("--name", help="label stored in the report")
        if name == "compare":
            p.add_argument("--reports", nargs="+", help="evaluation.json files")
            p.add_argument("--names", nargs="+", help="model names, one per report")
        if name == "report":
            p.add_argument("--run", help="run directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
