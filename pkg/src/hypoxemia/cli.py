"""Command-line workflow orchestration.

Subcommands mirror the pipeline stages (synth, score, preprocess, impute,
dataset, train, evaluate, analyze) plus ``run`` which chains them.  Every
artifact embeds the resolved config hash and seed; reruns with identical
config and input are byte-identical.

Exit codes: 0 success, 2 input/schema error, 3 partial row-level failure,
4 numerical/stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import analysis, dataset as ds, impute as imp, metrics, pipeline as pl
from .config import RunConfig
from .errors import (
    HypoxemiaError,
    InvalidInputError,
    MissingInputError,
    SchemaError,
)
from .gbdt import GbdtModel, fit_classifier
from .scoring import ScoringMatrix, alarm_runs, default_matrix, tag_vector
from .synth import generate_cohort
from .vitals import VitalKind, age_band, classify_population

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_PARTIAL = 3
EXIT_NUMERIC = 4

CORR_COLUMNS = ["spo2", "heart_rate", "resp_rate", "sbp", "dbp", "map",
                "temperature", "bmi", "age", "height", "weight"]


# -- artifact io ----------------------------------------------------------------

def _meta_line(cfg: RunConfig) -> str:
    return f"# seed={cfg.seed} config_hash={cfg.config_hash()}"


def _write_csv(df: pd.DataFrame, path: Path, cfg: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_meta_line(cfg) + "\n")
        df.to_csv(fh, index=False)


def _write_json(obj: dict, path: Path, cfg: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"meta": cfg.meta(), **obj}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise SchemaError(f"missing artifact: {path} (run the prior stage first)")
    df = pd.read_csv(path, comment="#", dtype={"subject_id": str, "hadm_id": str})
    if "charttime" in df.columns:
        df["charttime"] = pd.to_datetime(df["charttime"], format="ISO8601")
    return df


def _format_charttime(df: pd.DataFrame) -> pd.DataFrame:
    out = df.copy()
    if "charttime" in out.columns and not out.empty:
        out["charttime"] = out["charttime"].dt.strftime("%Y-%m-%dT%H:%M:%S")
    return out


def _matrix(cfg: RunConfig) -> ScoringMatrix:
    if cfg.matrix_file:
        return ScoringMatrix.load(cfg.matrix_file)
    return default_matrix()


# -- stages ----------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> int:
    df = generate_cohort(cfg.synth)
    _write_csv(df, Path(cfg.out_dir) / "raw.csv", cfg)
    print(f"synth: wrote {len(df)} rows for {cfg.synth.patients} patients")
    return EXIT_OK


def cmd_score(cfg: RunConfig, input_path: str | None = None) -> int:
    path = Path(input_path or cfg.input or Path(cfg.out_dir) / "raw.csv")
    matrix = _matrix(cfg)
    df = pl.load_records(path)

    tag_cols = {f"TAG_{c}": np.full(len(df), np.nan) for c in ds.TAG_SOURCE_ORDER}
    labels = np.full(len(df), np.nan)
    row_errors = []
    for i, row in enumerate(df.itertuples(index=False)):
        try:
            if pd.isna(row.age):
                raise MissingInputError("age missing")
            if pd.isna(row.copd):
                raise MissingInputError("copd flag missing")
            band = age_band(float(row.age))
            group = classify_population(float(row.age), bool(row.copd))
            vitals = {k: getattr(row, k.value) for k in VitalKind}
            if any(pd.isna(v) for v in vitals.values()):
                missing = sorted(k.value for k, v in vitals.items() if pd.isna(v))
                raise MissingInputError(f"missing vitals: {missing}")
            scores = tag_vector(vitals, band, matrix)
            for kind, score in zip(VitalKind, scores):
                tag_cols[f"TAG_{kind.value}"][i] = score
            labels[i] = matrix.severity_tables[group].lookup(float(row.spo2)).level
        except HypoxemiaError as exc:
            row_errors.append({"row": i, "hadm_id": row.hadm_id,
                               "error": str(exc)})

    out = df.copy()
    for col in ds.TAG_FEATURES:
        out[col] = tag_cols[col]
    out[ds.LABEL_COLUMN] = labels
    _write_csv(_format_charttime(out), Path(cfg.out_dir) / "scored.csv", cfg)

    failed_rows = {e["row"] for e in row_errors}
    alarms: dict = {}
    for hadm, grp in out.groupby("hadm_id", sort=True):
        if any(i in failed_rows for i in grp.index):
            continue
        grp = grp.sort_values("charttime")
        alarms[hadm] = {
            kind.value: [r.as_dict() for r in
                         alarm_runs(grp[f"TAG_{kind.value}"].astype(int), kind)]
            for kind in VitalKind
        }
    _write_json({"alarms": alarms, "row_errors": row_errors},
                Path(cfg.out_dir) / "alarms.json", cfg)

    if row_errors:
        print(f"score: {len(row_errors)} of {len(df)} rows failed", file=sys.stderr)
        return EXIT_PARTIAL
    print(f"score: {len(df)} rows scored")
    return EXIT_OK


def cmd_preprocess(cfg: RunConfig) -> int:
    path = Path(cfg.input or Path(cfg.out_dir) / "raw.csv")
    df = pl.load_records(path)
    cohort, report = pl.preprocess(df)
    if cohort:
        combined = pd.concat([cohort[h] for h in sorted(cohort)], ignore_index=True)
    else:
        combined = df.iloc[:0]
    _write_csv(_format_charttime(combined), Path(cfg.out_dir) / "preprocessed.csv", cfg)
    _write_json({"report": report.as_dict()},
                Path(cfg.out_dir) / "pipeline_report.json", cfg)
    print(f"preprocess: kept {len(cohort)} admissions, {len(combined)} rows")
    return EXIT_OK


def _label_context(per_admission: list[np.ndarray]) -> dict:
    """Pooled run-duration stats per label, never bridging admissions."""
    durations: dict[int, list[int]] = {}
    for labels in per_admission:
        for value, length in pl.run_lengths(labels):
            durations.setdefault(value, []).append(length)
    return {
        str(v): {"mean": float(np.mean(ls)), "median": float(np.median(ls)),
                 "runs": len(ls)}
        for v, ls in sorted(durations.items())
    }


def cmd_impute(cfg: RunConfig) -> int:
    frame = _read_frame(Path(cfg.out_dir) / "preprocessed.csv")
    if frame.empty:
        raise InvalidInputError("preprocessed cohort is empty; nothing to impute")
    matrix = _matrix(cfg)
    result = imp.mice(frame, cfg.impute)
    completed = pl.add_derived_columns(result.frame)
    masks = result.masks.copy()
    masks["map"] = np.maximum(masks["sbp"], masks["dbp"])
    masks["bmi"] = np.maximum(masks["weight"], masks["height"])

    def _one(hadm: str) -> pd.DataFrame:
        idx = completed.index[completed["hadm_id"] == hadm]
        series = completed.loc[idx]
        grid = pl.interpolate_minutes(series, masks.loc[idx])
        grid = pl.round_values(grid)
        sanitized = pl.sanitize(grid)
        for kind in VitalKind:
            if sanitized[kind.value].isna().any():
                raise InvalidInputError(
                    f"admission {hadm}: out-of-range values after interpolation")
        return sanitized

    hadm_ids = sorted(completed["hadm_id"].unique())
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            grids = list(pool.map(_one, hadm_ids))
    else:
        grids = [_one(h) for h in hadm_ids]
    masked = pd.concat(grids, ignore_index=True)

    # context for the report: label mix before vs after interpolation
    before = [ds.severity_labels_for(completed[completed["hadm_id"] == h], matrix)
              for h in hadm_ids]
    after = [ds.severity_labels_for(g, matrix) for g in grids]
    report_path = Path(cfg.out_dir) / "pipeline_report.json"
    report = json.loads(report_path.read_text())["report"] if report_path.exists() else {}
    report["label_distribution"] = {
        "before_interpolation": {str(k): v for k, v in
                                 pl.label_distribution(np.concatenate(before)).items()},
        "after_interpolation": {str(k): v for k, v in
                                pl.label_distribution(np.concatenate(after)).items()},
    }
    report["label_durations"] = _label_context(after)
    report["derived_consistency"] = pl.derived_consistency(masked)
    report["missingness_after_impute"] = float(
        masked[[k.value for k in VitalKind]].isna().to_numpy().mean())
    _write_json({"report": report}, report_path, cfg)
    _write_json({"audit": result.audit}, Path(cfg.out_dir) / "impute_audit.json", cfg)
    _write_csv(_format_charttime(masked), Path(cfg.out_dir) / "masked_frame.csv", cfg)
    print(f"impute: {len(hadm_ids)} admissions onto minute grid, "
          f"{len(masked)} rows")
    return EXIT_OK


def cmd_dataset(cfg: RunConfig) -> int:
    frame = _read_frame(Path(cfg.out_dir) / "masked_frame.csv")
    matrix = _matrix(cfg)
    out_dir = Path(cfg.out_dir) / "dataset"

    # admissions outside the supported labelling populations are dropped
    unsupported = (frame["age"].to_numpy(dtype=float) < 18.0) & \
                  (frame["copd"].to_numpy(dtype=float) > 0)
    dropped = sorted(frame.loc[unsupported, "hadm_id"].unique())
    frame = frame[~frame["hadm_id"].isin(dropped)]

    assembled = ds.assemble_features(frame, matrix)
    shifted = ds.apply_shift_lag(assembled, cfg.dataset.lag_minutes)
    if shifted.empty:
        raise InvalidInputError("no rows left after shift-lag")

    split = ds.split_patients(shifted["subject_id"].unique(),
                              cfg.dataset.fractions, cfg.seed)
    frames = {name: shifted[shifted["subject_id"].map(split.assignment) == name]
              for name in ("train", "validation", "test")}
    flat_cols = (["subject_id", "hadm_id", "charttime"]
                 + ds.GBM_FEATURES + [ds.LABEL_COLUMN])
    for name, part in frames.items():
        _write_csv(_format_charttime(part[flat_cols]),
                   out_dir / f"gbm_{name}.csv", cfg)

    weights = ds.class_weights(frames["train"][ds.LABEL_COLUMN])
    _write_json({"class_weights": {str(c): float(w) for c, w in enumerate(weights)}},
                out_dir / "class_weights.json", cfg)

    stats = ds.compute_standardization(frames["train"])
    _write_json({"standardization": stats.as_dict()},
                out_dir / "standardization.json", cfg)
    standardized = ds.apply_standardization(shifted, stats)
    _write_csv(_sequence_table(standardized, cfg), out_dir / "sequences.csv", cfg)

    manifest = split.as_dict()
    manifest["counts"] = split.counts()
    manifest["dropped_unsupported_admissions"] = dropped
    _write_json({"split": manifest}, out_dir / "split_manifest.json", cfg)
    print("dataset: rows", {k: len(v) for k, v in frames.items()},
          f"({len(dropped)} unsupported admissions dropped)")
    return EXIT_OK


def _sequence_table(standardized: pd.DataFrame, cfg: RunConfig) -> pd.DataFrame:
    """Padded fixed-length segments, flattened to CSV rows.

    Column layout: sequence_id, row, subject_id, hadm_id, charttime,
    mask_charttime, the 41 features, validity_mask, label.  Pad rows carry
    the pad value in every feature column and validity 0.
    """
    target_len = cfg.dataset.sequence_length
    pad_value = cfg.dataset.pad_value
    blocks = []
    seq_id = 0
    for hadm, grp in standardized.groupby("hadm_id", sort=True):
        grp = grp.sort_values("charttime")
        rows = grp[ds.GBM_FEATURES].to_numpy(dtype=float)
        labels = grp[ds.LABEL_COLUMN].to_numpy()
        for k, segment in enumerate(ds.pad_and_segment(rows, target_len, pad_value)):
            n = segment.n_real
            offset = k * target_len
            taken = grp.iloc[offset:offset + n]
            block = pd.DataFrame(segment.values, columns=ds.GBM_FEATURES)
            block.insert(0, "sequence_id", seq_id)
            block.insert(1, "row", np.arange(target_len))
            block.insert(2, "subject_id", grp["subject_id"].iloc[0])
            block.insert(3, "hadm_id", hadm)
            charttimes = np.full(target_len, "", dtype=object)
            charttimes[:n] = taken["charttime"].dt.strftime("%Y-%m-%dT%H:%M:%S")
            block.insert(4, "charttime", charttimes)
            mask_ct = np.zeros(target_len, dtype=np.int8)
            mask_ct[:n] = taken["mask_charttime"].to_numpy(dtype=np.int8)
            block.insert(5, "mask_charttime", mask_ct)
            block["validity_mask"] = segment.validity
            seg_labels = np.full(target_len, -1, dtype=np.int64)
            seg_labels[:n] = labels[offset:offset + n]
            block[ds.LABEL_COLUMN] = seg_labels
            blocks.append(block)
            seq_id += 1
    if not blocks:
        return pd.DataFrame()
    return pd.concat(blocks, ignore_index=True)


def cmd_train(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    train = _read_frame(out_dir / "dataset" / "gbm_train.csv")
    valid = _read_frame(out_dir / "dataset" / "gbm_validation.csv")
    if train.empty:
        raise InvalidInputError("empty training split")

    y = train[ds.LABEL_COLUMN].to_numpy(dtype=int)
    weights = ds.class_weights(y, cfg.gbdt.n_classes)
    X = train[ds.GBM_FEATURES].to_numpy(dtype=float)
    validation = None
    if not valid.empty:
        yv = valid[ds.LABEL_COLUMN].to_numpy(dtype=int)
        validation = (valid[ds.GBM_FEATURES].to_numpy(dtype=float), yv, weights[yv])

    model = fit_classifier(X, y, sample_weights=weights[y], config=cfg.gbdt,
                           validation=validation, feature_names=ds.GBM_FEATURES)
    payload = model.to_dict()
    payload["meta"] = cfg.meta()
    (out_dir / "model.json").write_text(
        json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")

    log = pd.DataFrame({
        "round": np.arange(1, len(model.history["train_loss"]) + 1),
        "train_loss": model.history["train_loss"],
    })
    if model.history["valid_loss"] is not None:
        log["valid_loss"] = model.history["valid_loss"]
    _write_csv(log, out_dir / "training_log.csv", cfg)

    importance = model.feature_importance()
    _write_json({"top_25": [{"feature": f, "gain": g} for f, g in importance.top(25)],
                 "all": importance.as_dict()},
                out_dir / "feature_importance.json", cfg)
    print(f"train: {len(model.trees)} rounds trained, best_round={model.best_round}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    model = GbdtModel.load(out_dir / "model.json")
    test = _read_frame(out_dir / "dataset" / "gbm_test.csv")
    if test.empty:
        raise InvalidInputError("empty test split")
    X = test[ds.GBM_FEATURES].to_numpy(dtype=float)
    y = test[ds.LABEL_COLUMN].to_numpy(dtype=int)
    probs = model.predict_proba(X)
    preds = model.predict_label(X)
    rep = metrics.evaluate(y, preds, probs, model.n_classes)
    _write_json({"evaluation": rep.as_dict()}, out_dir / "evaluation.json", cfg)
    print(f"evaluate: accuracy={rep.accuracy:.4f} mcc={rep.mcc:.4f} "
          f"macro_f1={rep.macro['f1']:.4f}")
    return EXIT_OK


def cmd_analyze(cfg: RunConfig, svg: bool = False) -> int:
    out_dir = Path(cfg.out_dir)
    frame = _read_frame(out_dir / "masked_frame.csv")
    adir = out_dir / "analysis"

    cols = [c for c in CORR_COLUMNS if c in frame.columns]
    X = frame[cols].to_numpy(dtype=float)
    corr = analysis.correlation_matrix(X)
    corr_df = pd.DataFrame(corr, index=cols, columns=cols)
    _write_csv(corr_df.reset_index().rename(columns={"index": "feature"}),
               adir / "correlation.csv", cfg)
    _write_json({"features": cols,
                 "matrix": [[None if np.isnan(v) else float(v) for v in row]
                            for row in corr]},
                adir / "correlation.json", cfg)

    pca_cols = cols + ["gender"]
    pca_frame = frame[cols].copy()
    pca_frame["gender"] = frame["gender"].map(ds.encode_gender)
    Xp = pca_frame.to_numpy(dtype=float)
    mean = Xp.mean(axis=0)
    std = Xp.std(axis=0)
    std[std == 0] = 1.0
    result = analysis.pca((Xp - mean) / std, feature_names=pca_cols)
    _write_json({"pca": result.as_dict()}, adir / "pca.json", cfg)
    ratios = result.explained_variance_ratio
    pca_df = pd.DataFrame({
        "component": np.arange(1, len(ratios) + 1),
        "eigenvalue": result.eigenvalues,
        "explained_variance_ratio": ratios,
        "cumulative_ratio": np.cumsum(ratios),
    })
    _write_csv(pca_df, adir / "pca.csv", cfg)

    if svg:
        banner = f"<!-- {_meta_line(cfg)[2:]} -->\n"
        labels = [f"PC{i + 1}" for i in range(len(ratios))]
        (adir / "pca_variance.svg").write_text(
            banner + analysis.svg_bar_chart(labels, list(ratios),
                                            "Explained variance ratio"),
            encoding="utf-8")
        (adir / "correlation_spo2.svg").write_text(
            banner + analysis.svg_bar_chart(cols, [0.0 if np.isnan(v) else float(v)
                                                   for v in corr[cols.index("spo2")]],
                                            "Correlation with spo2"),
            encoding="utf-8")
    print(f"analyze: correlation over {len(cols)} features, "
          f"PC1 ratio {ratios[0]:.3f}")
    return EXIT_OK


def cmd_run(cfg: RunConfig) -> int:
    if cfg.input is None:
        code = cmd_synth(cfg)
        if code != EXIT_OK:
            return code
    stages = [
        ("preprocess", lambda: cmd_preprocess(cfg)),
        ("impute", lambda: cmd_impute(cfg)),
        ("dataset", lambda: cmd_dataset(cfg)),
        ("train", lambda: cmd_train(cfg)),
        ("evaluate", lambda: cmd_evaluate(cfg)),
        ("analyze", lambda: cmd_analyze(cfg)),
    ]
    for name, fn in stages:
        if not cfg.stages.get(name, True):
            continue
        code = fn()
        if code != EXIT_OK:
            print(f"run: stage {name} failed with exit code {code}", file=sys.stderr)
            return code
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypoxemia",
        description="Hypoxemia severity triage workflow")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--jobs", type=int, help="per-admission parallelism")
    parser.add_argument("--input", help="input CSV path")
    parser.add_argument("--out-dir", help="artifact directory")
    parser.add_argument("--dump-matrix", action="store_true",
                        help="emit normalized scoring intervals as JSON and exit")
    sub = parser.add_subparsers(dest="command")
    for name in ("synth", "preprocess", "impute", "dataset", "train",
                 "evaluate", "run"):
        sub.add_parser(name)
    score = sub.add_parser("score")
    score.add_argument("scored_input", nargs="?", help="CSV to score")
    # accepted after the subcommand too; SUPPRESS keeps the subparser from
    # clobbering a value parsed at the top level
    score.add_argument("--dump-matrix", action="store_true",
                       default=argparse.SUPPRESS)
    analyze = sub.add_parser("analyze")
    analyze.add_argument("--svg", action="store_true",
                         help="emit SVG charts next to the JSON outputs")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise SchemaError(f"config file not found: {path}")
        base = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(base, dict):
            raise SchemaError("config root must be a JSON object")
    for key in ("seed", "jobs", "input"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    if args.out_dir is not None:
        base["out_dir"] = args.out_dir
    return RunConfig.from_dict(base)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.dump_matrix:
            print(_matrix(cfg).dump_json())
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_SCHEMA
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "score":
            return cmd_score(cfg, args.scored_input)
        if args.command == "preprocess":
            return cmd_preprocess(cfg)
        if args.command == "impute":
            return cmd_impute(cfg)
        if args.command == "dataset":
            return cmd_dataset(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg, svg=args.svg)
        if args.command == "run":
            return cmd_run(cfg)
        parser.print_usage(sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except InvalidInputError as exc:   # includes SchemaError / ConfigError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except HypoxemiaError as exc:
        stage = args.command or "cli"
        print(f"error in stage {stage}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
