"""Command-line front end: ``tumorpipe {synth,extract,train,predict,evaluate}``.

Exit codes: 0 success, 2 input/output problem, 3 configuration error,
4 solver non-convergence, 5 corrupt model file.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import modelfile, plotting
from .dataset import CsvFormatError, format_real, read_feature_csv, write_feature_csv
from .evaluation import comparison_csv, comparison_table, compare_methods, cross_validate
from .imaging import PgmError, load_pgm, preprocess
from .manifest import ManifestError, extract_rows, load_manifest
from .pipeline import ConfigError, PipelineConfig, fit_pipeline, load_config
from .svm import ConvergenceError
from .synth import write_synthetic_set

log = logging.getLogger("tumorpipe")

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_CONVERGENCE = 4
EXIT_CORRUPT = 5


class CommandError(Exception):
    def __init__(self, message, code=EXIT_IO):
        super().__init__(message)
        self.code = code


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _write_text(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _is_manifest(path) -> bool:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    return "image" in [h.strip().lower() for h in header]


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    if args.classes < 2:
        raise CommandError("--classes must be at least 2", EXIT_CONFIG)
    if args.per_class < 1:
        raise CommandError("--per-class must be at least 1", EXIT_CONFIG)
    manifest = write_synthetic_set(
        args.out, args.classes, args.per_class, args.separation, args.seed, args.size
    )
    log.info("wrote %d images, manifest %s", args.classes * args.per_class, manifest)
    print(manifest)
    return EXIT_OK


# -------------------------------------------------------------- extract


def cmd_extract(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    names, matrix, failures = extract_rows(manifest, cfg.extraction(), jobs=args.jobs)
    if failures:
        for i in sorted(failures):
            print(f"error: {failures[i]}", file=sys.stderr)
        raise CommandError(f"{len(failures)} of {len(manifest.rows)} image(s) failed")
    labels = [r.label for r in manifest.rows]
    write_feature_csv(args.out, names, matrix, labels if all(labels) else None)
    log.info("wrote %d rows x %d features to %s", matrix.shape[0], matrix.shape[1], args.out)
    if args.figures:
        seen = set()
        for row in manifest.rows:
            if row.label in seen:
                continue
            seen.add(row.label)
            stages = preprocess(load_pgm(row.image), cfg.extraction().blur_sigma)
            fig = plotting.plot_preprocessing(stages, title=f"{row.label or row.image.name}")
            plotting.save_figure(fig, Path(args.figures) / f"preprocess_{row.label or row.image.stem}.png")
    return EXIT_OK


# ---------------------------------------------------------------- train


def training_report(model) -> str:
    cfg = model.config
    lines = ["# configuration", cfg.to_text().rstrip(), ""]
    lines.append("# features")
    lines.append(f"input features: {model.n_features}")
    if model.selection_report is not None:
        lines.append(model.selection_report.to_text().rstrip())
    elif model.selected is not None:
        lines.append(f"selection: none ({len(model.selected)} feature(s) passed through)")
    lines.append("")
    if model.pca is not None:
        lines.append("# PCA eigenvalue spectrum")
        total = float(np.sum(np.clip(model.pca.spectrum, 0, None))) or 1.0
        cum = 0.0
        for i, ev in enumerate(model.pca.spectrum):
            cum += max(ev, 0.0)
            mark = "*" if i < model.pca.basis.shape[1] else " "
            lines.append(f"{mark}{i + 1:4d}  {format_real(ev):>15}  {format_real(cum / total):>15}")
        lines.append(f"retained components: {model.pca.basis.shape[1]}")
        lines.append("")
    if model.lda is not None:
        lines.append("# LDA eigenvalues")
        lines.extend(f"{i + 1:5d}  {format_real(ev):>15}" for i, ev in enumerate(model.lda.eigenvalues))
        lines.append("")
    lines.append("# support vectors per one-vs-rest machine")
    for cls, mach in zip(model.svm.classes, model.svm.machines):
        lines.append(f"{model.label_names[cls]}: {mach.support_vectors.shape[0]}")
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = read_feature_csv(args.features).to_dataset()
    if ds.n_classes < 2:
        raise CommandError("training needs at least two distinct labels")
    model = fit_pipeline(ds, cfg)
    modelfile.save(args.out, model)
    train_acc = float(np.mean(model.predict(ds.matrix) == ds.labels))
    report = training_report(model) + f"\ntraining accuracy: {format_real(train_acc)}\n"
    _write_text(args.report, report)
    if args.figures:
        out = Path(args.figures)
        if model.pca is not None:
            plotting.save_figure(
                plotting.plot_spectrum(model.pca.spectrum, model.pca.basis.shape[1]), out / "pca_spectrum.png"
            )
        if model.selection_report is not None and model.selection_report.history:
            plotting.save_figure(
                plotting.plot_selection_history(model.selection_report), out / "selection_history.png"
            )
    return EXIT_OK


# -------------------------------------------------------------- predict


def _input_matrix(path, model):
    """Feature matrix plus row ids and optional true labels for CSV or manifest input."""
    if _is_manifest(path):
        manifest = load_manifest(path)
        names, X, failures = extract_rows(manifest, model.config.extraction())
        if failures:
            for i in sorted(failures):
                print(f"error: {failures[i]}", file=sys.stderr)
            raise CommandError(f"{len(failures)} image(s) failed")
        ids = [r.image.name for r in manifest.rows]
        labels = [r.label for r in manifest.rows]
        return X, ids, labels if all(labels) else None
    table = read_feature_csv(path, require_label=False)
    if table.matrix.shape[1] == model.n_features and table.feature_names != model.feature_names:
        raise CommandError("feature columns do not match the model's feature names")
    return table.matrix, [str(i) for i in range(table.matrix.shape[0])], table.labels


def cmd_predict(args) -> int:
    model = modelfile.load(args.model)
    X, ids, truth = _input_matrix(args.input, model)
    scores = model.decision_function(X)
    pred = np.argmax(scores, axis=1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "predicted"] + [f"decision_{name}" for name in model.label_names])
    for i, row in enumerate(scores):
        w.writerow([ids[i], model.label_names[pred[i]]] + [format_real(v) for v in row])
    _write_text(args.out, buf.getvalue())
    if truth is not None:
        hits = sum(model.label_names[p] == t for p, t in zip(pred, truth))
        print(f"accuracy: {format_real(hits / len(truth))} ({hits}/{len(truth)})", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------- evaluate


def cmd_evaluate(args) -> int:
    if args.model:
        cfg = modelfile.load(args.model).config
        if args.config:
            cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
    else:
        cfg = _config(args)
    ds = read_feature_csv(args.features).to_dataset()
    k = cfg.k if args.k is None else args.k
    if not 2 <= k <= ds.n_samples:
        raise CommandError(f"k must lie in [2, {ds.n_samples}] for {ds.n_samples} samples, got {k}", EXIT_CONFIG)
    cv = cross_validate(ds, cfg, k, cfg.seed)
    lines = [
        f"samples: {ds.n_samples}  features: {ds.n_features}  classes: {ds.n_classes}",
        f"pipeline: {cfg.pipeline}  selection: {cfg.selection}  kernel: {cfg.kernel}  C: {format_real(cfg.C)}",
        f"stratified {k}-fold cross-validation, seed {cfg.seed}",
        "",
        f"{'fold':>4}  {'train':>6}  {'test':>5}  {'accuracy':>12}",
    ]
    for f in cv.folds:
        lines.append(f"{f.fold + 1:>4}  {f.n_train:>6}  {f.n_test:>5}  {format_real(f.accuracy):>12}")
    lines.append(f"mean accuracy: {format_real(cv.mean)}  std: {format_real(cv.std)}")
    rates = cv.rates()
    lines.append(
        f"macro FP rate: {format_real(rates.fp_rate)}  FN rate: {format_real(rates.fn_rate)}"
        f"  correct rate: {format_real(rates.correct_rate)}"
    )
    lines.append("")
    lines.append("confusion matrix (rows true, columns predicted):")
    width = max(len(n) for n in ds.label_names)
    lines.append(" " * (width + 2) + "  ".join(f"{n:>{width}}" for n in ds.label_names))
    for name, row in zip(ds.label_names, cv.confusion):
        lines.append(f"{name:>{width}}  " + "  ".join(f"{v:>{width}d}" for v in row))
    rows = None
    if not args.no_compare:
        rows = compare_methods(ds, cfg, k, cfg.seed)
        lines.append("")
        lines.append(comparison_table(rows).rstrip())
        if args.table_csv:
            _write_text(args.table_csv, comparison_csv(rows))
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.figures:
        out = Path(args.figures)
        plotting.save_figure(plotting.plot_fold_accuracies(cv.accuracies), out / "fold_accuracy.png")
        if rows:
            plotting.save_figure(plotting.plot_comparison(rows), out / "comparison.png")
    return EXIT_OK


# --------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tumorpipe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic image set")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--separation", type=float, default=0.5, help="0 makes all classes identical")
    p.add_argument("--size", type=int, default=64, help="image side length in pixels")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="manifest of PGM images -> feature CSV")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--figures", help="directory for preprocessing figures")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="feature CSV -> model file and training report")
    p.add_argument("features")
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--report", help="training report path (default: stdout)")
    p.add_argument("--figures", help="directory for spectrum and selection figures")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a model to a feature CSV or image manifest")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("--out", help="predictions CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="cross-validated metrics and method comparison")
    p.add_argument("features")
    p.add_argument("--model", help="take the pipeline configuration from this model file")
    p.add_argument("--config")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--table-csv", help="also write the comparison table as CSV")
    p.add_argument("--no-compare", action="store_true", help="skip the with/without selection comparison")
    p.add_argument("--figures", help="directory for evaluation figures")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except modelfile.CorruptModelError as exc:
        print(f"corrupt model: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except ConvergenceError as exc:
        print(
            f"solver did not converge: {exc} (max KKT violation {exc.max_violation:.3g}"
            f" after {exc.iterations} iterations)",
            file=sys.stderr,
        )
        return EXIT_CONVERGENCE
    except (OSError, CsvFormatError, ManifestError, PgmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
