"""Command-line surface: preprocess, train, evaluate, ablate, bench,
gradcheck, and export-attention.

Exit codes: 0 success, 1 check/test failure, 2 usage or configuration
error, 3 data error. Every flag overrides the matching key of the JSON
config file; the resolved configuration is written next to the outputs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checks, data, dsp, metrics
from .errors import (
    ConfigError,
    DataError,
    FilterDesignError,
    PapernetError,
    TrainingError,
    WeightFormatError,
)
from .model import VARIANTS, build_papernet, count_non_trainable, count_parameters
from .training import TrainConfig, predict_probs, train


@dataclass
class RunConfig:
    """Everything one run needs; JSON keys match the field names."""

    data: str | None = None
    outdir: str = "papernet_out"
    sample_rate_hz: float = dsp.DEFAULT_SAMPLE_RATE
    band_low_hz: float = dsp.DEFAULT_BAND[0]
    band_high_hz: float = dsp.DEFAULT_BAND[1]
    variant: str = "full"
    num_classes: int | None = None
    lr0: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    early_stop_patience: int = 6
    l2: float = 1e-4
    dropout: float = 0.3
    seed: int = 0
    class_weighting: bool = True

    def train_config(self) -> TrainConfig:
        fields = {f.name for f in dataclasses.fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in fields})

    def require_data(self) -> Path:
        if not self.data:
            raise ConfigError("no dataset path configured (set --data or the config key)")
        path = Path(self.data)
        if not path.exists():
            raise ConfigError(f"dataset path does not exist: {path}")
        return path


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file does not exist: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for f in dataclasses.fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    config = RunConfig(**values)
    if config.variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {config.variant!r}")
    config.train_config().validate()
    return config


def _write_resolved(config: RunConfig, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "config_resolved.json", "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(config), fh, indent=2)
        fh.write("\n")


@dataclass
class PreparedData:
    features: np.ndarray  # filtered + standardized [N, 16]
    labels: np.ndarray
    splits: data.SplitIndices
    test_guard: data.SingleUse
    num_classes: int


def prepare_dataset(config: RunConfig) -> PreparedData:
    """Ingest, band-pass, split, and standardize. The test indices are
    wrapped so they can be consumed exactly once, after training."""
    raw = data.load_csv(config.require_data())
    num_classes = config.num_classes or raw.num_classes
    if raw.labels.max() >= num_classes:
        raise DataError(
            f"labels go up to {raw.labels.max()} but num_classes={num_classes}"
        )
    filtered = dsp.preprocess_recording(
        raw.features, config.sample_rate_hz, config.band_low_hz, config.band_high_hz
    )
    splits = data.stratified_split(raw.labels, seed=config.seed)
    standardizer = dsp.fit_standardizer(filtered, splits.train)
    features = dsp.apply_standardizer(standardizer, filtered)
    return PreparedData(
        features=features,
        labels=raw.labels,
        splits=splits,
        test_guard=data.SingleUse(splits.test, "test split"),
        num_classes=num_classes,
    )


def _evaluate_split(model, prepared: PreparedData, indices, config: RunConfig, outdir: Path):
    probs = predict_probs(model, prepared.features[indices])
    report = metrics.evaluate_probs(
        prepared.labels[indices], probs, prepared.num_classes, baseline_seed=config.seed
    )
    report.extra = {
        "variant": model.variant,
        "split_hash": prepared.splits.hash(),
        "n_samples": int(len(indices)),
        "parameters": count_parameters(model),
    }
    metrics.report_to_json(report, outdir / "report.json")
    metrics.roc_to_csv(report, outdir / "roc.csv")
    return report


def _export_attention_csv(model, prepared: PreparedData, indices, outdir: Path) -> None:
    per_sample, mean = data.export_attention(model, prepared.features[indices])
    data.attention_to_csv(outdir / "attention.csv", per_sample, mean)


def cmd_train(args) -> int:
    config = resolve_config(args)
    config.require_data()
    outdir = Path(config.outdir)
    _write_resolved(config, outdir)
    prepared = prepare_dataset(config)
    model = build_papernet(
        num_classes=prepared.num_classes,
        input_length=prepared.features.shape[1],
        variant=config.variant,
        seed=config.seed,
    )
    print(
        f"training variant={config.variant} seed={config.seed} "
        f"parameters={count_parameters(model)}"
    )
    best, final, history = train(
        model, prepared.features, prepared.labels, prepared.splits,
        config.train_config(), outdir=outdir,
    )
    last = history.records[-1]
    print(
        f"finished after {last.epoch} epochs: "
        f"best val macro-F1 {history.best_val_macro_f1():.4f}"
    )
    test_idx = prepared.test_guard.take()
    report = _evaluate_split(best, prepared, test_idx, config, outdir)
    if config.variant != "no_attention":
        _export_attention_csv(best, prepared, test_idx, outdir)
    print(
        f"test accuracy {report.accuracy:.4f} macro-F1 {report.macro_f1:.4f} "
        f"macro ROC-AUC {report.macro_auc if report.macro_auc is None else round(report.macro_auc, 4)}"
    )
    return 0


def cmd_evaluate(args) -> int:
    config = resolve_config(args)
    config.require_data()
    outdir = Path(config.outdir)
    _write_resolved(config, outdir)
    prepared = prepare_dataset(config)
    which = args.split
    indices = {
        "train": prepared.splits.train,
        "val": prepared.splits.val,
        "test": prepared.splits.test,
        "all": np.arange(len(prepared.labels)),
    }[which]
    model = build_papernet(
        num_classes=prepared.num_classes,
        input_length=prepared.features.shape[1],
        variant=config.variant,
        seed=config.seed,
    )
    model = data.load_weights(args.weights, model)
    report = _evaluate_split(model, prepared, indices, config, outdir)
    print(
        f"{which}: accuracy {report.accuracy:.4f} macro-F1 {report.macro_f1:.4f} "
        f"macro ROC-AUC {report.macro_auc if report.macro_auc is None else round(report.macro_auc, 4)}"
    )
    return 0


def cmd_ablate(args) -> int:
    config = resolve_config(args)
    config.require_data()
    outdir = Path(config.outdir)
    _write_resolved(config, outdir)
    prepared = prepare_dataset(config)
    print(f"ablation over {VARIANTS} with split hash {prepared.splits.hash()}")
    rows = []
    for variant in VARIANTS:
        run_dir = outdir / variant
        run_dir.mkdir(parents=True, exist_ok=True)
        model = build_papernet(
            num_classes=prepared.num_classes,
            input_length=prepared.features.shape[1],
            variant=variant,
            seed=config.seed,
        )
        best, _, history = train(
            model, prepared.features, prepared.labels, prepared.splits,
            config.train_config(), outdir=run_dir,
        )
        probs = predict_probs(best, prepared.features[prepared.splits.test])
        report = metrics.evaluate_probs(
            prepared.labels[prepared.splits.test], probs, prepared.num_classes,
            baseline_seed=config.seed,
        )
        rows.append(
            {
                "variant": variant,
                "accuracy": report.accuracy,
                "macro_f1": report.macro_f1,
                "macro_roc_auc": report.macro_auc,
            }
        )
        print(
            f"  {variant}: accuracy {report.accuracy:.4f} "
            f"macro-F1 {report.macro_f1:.4f} epochs {len(history.records)}"
        )
    with open(outdir / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["variant", "accuracy", "macro_f1", "macro_roc_auc"])
        writer.writeheader()
        writer.writerows(rows)
    with open(outdir / "ablation.json", "w", encoding="utf-8") as fh:
        json.dump({"split_hash": prepared.splits.hash(), "results": rows}, fh, indent=2)
        fh.write("\n")
    return 0


def cmd_bench(args) -> int:
    if args.n_samples < 1:
        raise ConfigError(f"--n-samples must be positive, got {args.n_samples}")
    model = data.load_weights(args.weights, input_length=args.input_length)
    rng = np.random.default_rng(0)
    sample = rng.standard_normal((1, model.input_length, 1)).astype(model.dtype)
    for _ in range(20):  # warmup
        predict_probs(model, sample)
    times = np.empty(args.n_samples)
    for i in range(args.n_samples):
        t0 = time.perf_counter()
        predict_probs(model, sample)
        times[i] = (time.perf_counter() - t0) * 1e3
    print(f"parameters: {count_parameters(model)}")
    print(f"non-trainable: {count_non_trainable(model)}")
    print(
        f"single-sample latency over {args.n_samples} runs: "
        f"mean {times.mean():.3f} ms, p50 {np.percentile(times, 50):.3f} ms, "
        f"p95 {np.percentile(times, 95):.3f} ms"
    )
    return 0


def cmd_gradcheck(args) -> int:
    failures = 0
    for name, fn in checks.SUITE.items():
        err = fn()
        ok = err < checks.TOLERANCE
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'} {name}: max relative error {err:.3e}")
    if failures:
        print(f"{failures} gradient check(s) failed")
        return 1
    print(f"all {len(checks.SUITE)} gradient checks passed")
    return 0


def cmd_export_attention(args) -> int:
    config = resolve_config(args)
    config.require_data()
    outdir = Path(config.outdir)
    _write_resolved(config, outdir)
    prepared = prepare_dataset(config)
    model = build_papernet(
        num_classes=prepared.num_classes,
        input_length=prepared.features.shape[1],
        variant=config.variant,
        seed=config.seed,
    )
    model = data.load_weights(args.weights, model)
    indices = prepared.splits.test if args.split == "test" else np.arange(len(prepared.labels))
    _export_attention_csv(model, prepared, indices, outdir)
    print(f"wrote attention weights for {len(indices)} samples to {outdir / 'attention.csv'}")
    return 0


def cmd_preprocess(args) -> int:
    config = resolve_config(args)
    config.require_data()
    outdir = Path(config.outdir)
    _write_resolved(config, outdir)
    raw = data.load_csv(config.require_data())
    filtered = dsp.preprocess_recording(
        raw.features, config.sample_rate_hz, config.band_low_hz, config.band_high_hz
    )
    out_path = outdir / "filtered.csv"
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"X{i + 1}" for i in range(filtered.shape[1])] + ["y"])
        for row, label in zip(filtered, raw.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    print(f"wrote {len(raw.labels)} filtered rows to {out_path}")
    return 0


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its keys")
    sub.add_argument("--data", help="dataset CSV path")
    sub.add_argument("--outdir", help="output directory")
    sub.add_argument("--sample-rate-hz", dest="sample_rate_hz", type=float)
    sub.add_argument("--band-low-hz", dest="band_low_hz", type=float)
    sub.add_argument("--band-high-hz", dest="band_high_hz", type=float)
    sub.add_argument("--variant", choices=VARIANTS)
    sub.add_argument("--num-classes", dest="num_classes", type=int)
    sub.add_argument("--lr0", type=float)
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--max-epochs", dest="max_epochs", type=int)
    sub.add_argument("--plateau-patience", dest="plateau_patience", type=int)
    sub.add_argument("--plateau-factor", dest="plateau_factor", type=float)
    sub.add_argument("--min-lr", dest="min_lr", type=float)
    sub.add_argument("--early-stop-patience", dest="early_stop_patience", type=int)
    sub.add_argument("--l2", type=float)
    sub.add_argument("--dropout", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument(
        "--no-class-weighting",
        dest="class_weighting",
        action="store_const",
        const=False,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="papernet",
        description="EEG classification pipeline: DSP preprocessing, training, "
        "evaluation, ablations, and verification.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("train", help="train one variant and evaluate on the test split")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("evaluate", help="evaluate saved weights on a split")
    _add_config_flags(sub)
    sub.add_argument("--weights", required=True)
    sub.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    sub.set_defaults(func=cmd_evaluate)

    sub = subs.add_parser("ablate", help="train all four variants under identical splits")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_ablate)

    sub = subs.add_parser("bench", help="single-sample inference latency")
    sub.add_argument("--weights", required=True)
    sub.add_argument("--n-samples", dest="n_samples", type=int, default=200)
    sub.add_argument("--input-length", dest="input_length", type=int, default=16)
    sub.set_defaults(func=cmd_bench)

    sub = subs.add_parser("gradcheck", help="finite-difference checks for every layer")
    sub.set_defaults(func=cmd_gradcheck)

    sub = subs.add_parser("export-attention", help="per-sample attention weights to CSV")
    _add_config_flags(sub)
    sub.add_argument("--weights", required=True)
    sub.add_argument("--split", choices=("test", "all"), default="test")
    sub.set_defaults(func=cmd_export_attention)

    sub = subs.add_parser("preprocess", help="band-pass the dataset and write filtered rows")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_preprocess)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FilterDesignError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, WeightFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (TrainingError, PapernetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
