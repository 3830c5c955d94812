"""Command-line pipeline driver.

Subcommands: ingest, train-aug, augment, train-clf, ablate, gradcheck.
Configuration precedence is defaults < ``--config`` JSON file < flags.
``MAGE_OUT_DIR`` supplies the default output directory. Every run that
writes artifacts also writes ``manifest.json`` (resolved configuration,
seeds, SHA-256 of inputs and outputs) so it can be reproduced exactly.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from collections import Counter

import numpy as np

from . import benchmark as bench
from .augment import (
    AutoencoderConfig,
    DenoisingConfig,
    GaussianCorruption,
    LinearNoiseConfig,
    MaskingCorruption,
    VaeConfig,
    linear_transform,
    reconstruct,
    train_autoencoder,
    train_dae,
    train_vae,
)
from .checkpoint import load_model, save_model
from .config import PipelineConfig, load_config_file, merge_overrides
from .data import (
    Dataset,
    EmbeddingRecord,
    MinMaxScaler,
    ShufflePlan,
    encode_label,
    generate_synthetic,
    read_records,
    write_records,
)
from .errors import (
    ConfigError,
    MageError,
    NumericError,
    OptimizationError,
    ParseError,
    UsageError,
    ValidationError,
)
from .gradsuite import run_gradient_suite
from .rng import Rng

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir, command: str, cfg: PipelineConfig, seed: int, inputs, outputs, args=None):
    arg_record = {}
    if args is not None:
        arg_record = {
            k: v for k, v in vars(args).items() if k != "fn" and isinstance(v, (str, int, float, bool, type(None)))
        }
    manifest = {
        "command": command,
        "seed": seed,
        "args": arg_record,
        "config": cfg.to_dict(),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _resolve_config(args) -> PipelineConfig:
    base = PipelineConfig.desk_scale() if getattr(args, "synthetic", False) else PipelineConfig()
    if args.config:
        base = merge_overrides(base, load_config_file(args.config))
    flag_overrides = {}
    if getattr(args, "shuffles", None) is not None:
        flag_overrides.setdefault("plan", {})["n_shuffles"] = args.shuffles
    if getattr(args, "iterations", None) is not None:
        flag_overrides.setdefault("plan", {})["n_iterations"] = args.iterations
    if args.seed is not None:
        flag_overrides.setdefault("plan", {})["base_seed"] = args.seed
    if flag_overrides:
        base = merge_overrides(base, flag_overrides)
    return base


def _out_dir(args) -> str:
    out = args.out_dir or os.environ.get("MAGE_OUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _load_or_generate(args, cfg: PipelineConfig) -> Dataset:
    if getattr(args, "synthetic", False):
        rng = Rng(cfg.plan.base_seed).child("synthetic-data")
        return generate_synthetic(3, args.synthetic_dim, args.synthetic_per_class, 10.0, rng)
    if not args.data:
        raise UsageError("provide --data RECORDS or --synthetic")
    return read_records(args.data)


def _parse_tsv(path) -> Dataset:
    """id <tab> lang <tab> label <tab> comma-separated floats."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"{path}: line {lineno}: expected 4 tab-separated fields")
            rec_id, lang, label_text, vec_text = parts
            label = int(label_text) if label_text.strip().isdigit() else encode_label(label_text)
            if label not in (0, 1, 2):
                raise ValidationError(f"{path}: line {lineno}: label {label} outside {{0,1,2}}")
            try:
                vec = np.array([float(v) for v in vec_text.split(",")], dtype=np.float64)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: malformed vector") from None
            records.append(EmbeddingRecord(id=rec_id, lang=lang, label=label, vector=vec))
    return Dataset.from_records(records)


def cmd_ingest(args) -> int:
    dataset = _parse_tsv(args.input) if args.input.endswith(".tsv") else read_records(args.input)
    out_dir = _out_dir(args)
    out_path = os.path.join(out_dir, args.output)
    write_records(dataset, out_path)
    counts = Counter((r.lang, r.label) for r in dataset.records)
    print(f"ingested {len(dataset)} records (dimension {dataset.dimension})")
    for (lang, label), n in sorted(counts.items()):
        print(f"  {lang} label={label}: {n}")
    cfg = _resolve_config(args)
    _write_manifest(out_dir, "ingest", cfg, cfg.plan.base_seed, [args.input], [out_path], args)
    return 0


def _train_all_augmenters(train: Dataset, cfg: PipelineConfig, rng: Rng, out_dir: str):
    scaler = MinMaxScaler.fit(train.vectors())
    scaled = scaler.apply(train.vectors())
    aug = cfg.augmenters
    ae_config = AutoencoderConfig(
        input_dim=train.dimension,
        latent_dim=aug.ae_latent,
        hidden_dims=tuple(aug.ae_hidden),
        dropout_rate=aug.ae_dropout,
        learning_rate=aug.ae_lr,
        epochs=aug.ae_epochs,
        batch_size=aug.ae_batch,
    )
    corruption = (
        GaussianCorruption(aug.dae_sigma)
        if aug.dae_corruption == "gaussian"
        else MaskingCorruption(aug.dae_mask_rate)
    )
    vae_config = VaeConfig(
        input_dim=train.dimension,
        latent_dim=aug.vae_latent,
        hidden_dim=aug.vae_hidden,
        dropout_rate=aug.vae_dropout,
        beta=aug.vae_beta,
        learning_rate=aug.vae_lr,
        epochs=aug.vae_epochs,
        batch_size=aug.vae_batch,
    )
    paths = {}
    ae, ae_history = train_autoencoder(scaled, ae_config, scaler, rng.child("ae"))
    dae, dae_history = train_dae(scaled, DenoisingConfig(ae_config, corruption), scaler, rng.child("dae"))
    vae, vae_history = train_vae(scaled, vae_config, scaler, rng.child("vae"))
    for name, model in (("ae", ae), ("dae", dae), ("vae", vae)):
        paths[name] = os.path.join(out_dir, f"{name}.ckpt")
        save_model(model, paths[name])
    print(f"ae   final loss {ae_history[-1]:.6f}")
    print(f"dae  final loss {dae_history[-1]:.6f}")
    print(f"vae  final loss {vae_history[-1][0] + vae_history[-1][1]:.6f}")
    return paths


def cmd_train_aug(args) -> int:
    cfg = _resolve_config(args)
    dataset = _load_or_generate(args, cfg)
    out_dir = _out_dir(args)
    rng = Rng(cfg.plan.base_seed)
    paths = _train_all_augmenters(dataset, cfg, rng, out_dir)
    inputs = [] if args.synthetic else [args.data]
    _write_manifest(out_dir, "train-aug", cfg, cfg.plan.base_seed, inputs, list(paths.values()), args)
    return 0


def cmd_augment(args) -> int:
    cfg = _resolve_config(args)
    dataset = read_records(args.data)
    out_dir = _out_dir(args)
    rng = Rng(cfg.plan.base_seed)
    vectors = dataset.vectors()
    noise = LinearNoiseConfig(cfg.augmenters.r_min, cfg.augmenters.r_max)
    views = {"linear": linear_transform(vectors, noise, rng.child("noise"))}
    for name in ("ae", "dae", "vae"):
        path = os.path.join(args.checkpoints, f"{name}.ckpt")
        if os.path.exists(path):
            views[name] = reconstruct(load_model(path), vectors)
    outputs = []
    for name, data in views.items():
        records = tuple(
            dataclasses.replace(rec, vector=data[i]) for i, rec in enumerate(dataset.records)
        )
        out_path = os.path.join(out_dir, f"view-{name}.jsonl")
        write_records(Dataset(dataset.dimension, records), out_path)
        outputs.append(out_path)
        print(f"wrote {out_path}")
    _write_manifest(out_dir, "augment", cfg, cfg.plan.base_seed, [args.data], outputs, args)
    return 0


def cmd_train_clf(args) -> int:
    cfg = _resolve_config(args)
    train = read_records(args.data)
    test = read_records(args.test) if args.test else None
    out_dir = _out_dir(args)
    config = bench.AblationConfig(
        augmenter=args.augmenter, attention=args.attention, classifier=args.classifier
    )
    seed = cfg.plan.base_seed
    if test is None:
        from .data import stratified_split

        train, test = stratified_split(train, cfg.train_fraction, Rng(seed).child("holdout"))
    results = bench.execute_run(train, test, [config], cfg, seed, details=True)
    metrics, y_pred, probs, model, test_stack = results[config.label]
    print(f"{config.label}: accuracy {metrics.accuracy:.4f} macro-F1 {metrics.f1:.4f}")
    outputs = []

    metrics_path = os.path.join(out_dir, "metrics.json")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(
            {"config": config.label, **dataclasses.asdict(metrics)}, fh, indent=2, sort_keys=True
        )
        fh.write("\n")
    outputs.append(metrics_path)

    predictions_path = os.path.join(out_dir, "predictions.csv")
    with open(predictions_path, "w", encoding="utf-8") as fh:
        fh.write("id,true,predicted,p0,p1,p2\n")
        for rec, pred, row in zip(test.records, y_pred, probs):
            fh.write(f"{rec.id},{rec.label},{pred},{row[0]!r},{row[1]!r},{row[2]!r}\n")
    outputs.append(predictions_path)

    if args.attention:
        from .attention import mage_forward

        clf_path = os.path.join(out_dir, "classifier.ckpt")
        save_model(model.clf, clf_path)
        attn_path = os.path.join(out_dir, "attention.ckpt")
        save_model(model.mage, attn_path)
        outputs += [clf_path, attn_path]
        _, trace, _ = mage_forward(model.mage, test_stack)
        traces_path = os.path.join(out_dir, "attention-traces.csv")
        with open(traces_path, "w", encoding="utf-8") as fh:
            fh.write("id,head,view,weight\n")
            for rec_id, head, view, weight in trace.rows([r.id for r in test.records]):
                fh.write(f"{rec_id},{head},{view},{weight!r}\n")
        outputs.append(traces_path)
    else:
        clf_path = os.path.join(out_dir, "classifier.ckpt")
        save_model(model, clf_path)
        outputs.append(clf_path)

    inputs = [args.data] + ([args.test] if args.test else [])
    _write_manifest(out_dir, "train-clf", cfg, seed, inputs, outputs, args)
    return 0


def cmd_ablate(args) -> int:
    cfg = _resolve_config(args)
    dataset = _load_or_generate(args, cfg)
    out_dir = _out_dir(args)
    plan = ShufflePlan(
        n_shuffles=cfg.plan.n_shuffles,
        n_iterations=cfg.plan.n_iterations,
        base_seed=cfg.plan.base_seed,
    )
    configs = bench.default_configs()
    result = bench.run_shuffled_benchmark(dataset, plan, configs, cfg, jobs=args.jobs)
    formats = [args.format] if args.format else ["csv", "markdown"]
    outputs = []
    for fmt in formats:
        ext = "csv" if fmt == "csv" else "md"
        path = os.path.join(out_dir, f"report.{ext}")
        bench.emit_report(result, fmt, path)
        outputs.append(path)
        print(f"wrote {path}")
    for row in result.aggregate():
        print(
            f"{row['config']:<22} mean acc {row['mean_accuracy']:.4f} "
            f"± {row['std_accuracy']:.4f} (f1 {row['mean_f1']:.4f}, {row['runs']} runs)"
        )
    inputs = [] if args.synthetic else [args.data]
    _write_manifest(out_dir, "ablate", cfg, cfg.plan.base_seed, inputs, outputs, args)
    return 0


def cmd_gradcheck(args) -> int:
    reports = run_gradient_suite(n_seeds=args.seeds, tol=args.tol)
    width = max(len(r.component) for r in reports)
    print(f"{'component':<{width}}  {'max rel err':>12}  pass")
    for r in reports:
        print(f"{r.component:<{width}}  {r.max_rel_error:>12.3e}  {'ok' if r.passed else 'FAIL'}")
    if not all(r.passed for r in reports):
        raise NumericError("gradient check failed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mage", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="base seed override")
        p.add_argument("--out-dir", default=None, help="output directory (or $MAGE_OUT_DIR)")
        if data:
            p.add_argument("--data", help="record file (.jsonl or .bin)")
            p.add_argument("--synthetic", action="store_true", help="generate desk-scale data")
            p.add_argument("--synthetic-dim", type=int, default=32)
            p.add_argument("--synthetic-per-class", type=int, default=60)

    p = sub.add_parser("ingest", help="validate and convert records")
    common(p, data=False)
    p.add_argument("--input", required=True, help="TSV or record file")
    p.add_argument("--output", default="records.jsonl", help="output file name")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("train-aug", help="train AE, DAE and VAE augmenters")
    common(p)
    p.set_defaults(fn=cmd_train_aug)

    p = sub.add_parser("augment", help="write view record files from checkpoints")
    common(p)
    p.add_argument("--checkpoints", required=True, help="directory with ae/dae/vae.ckpt")
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("train-clf", help="train and score one configuration")
    common(p)
    p.add_argument("--test", help="held-out record file (default: split --data)")
    p.add_argument("--augmenter", default="original", choices=["original", "dae", "vae"])
    p.add_argument("--attention", action="store_true")
    p.add_argument("--classifier", default="lstm", choices=["lstm", "softmax"])
    p.set_defaults(fn=cmd_train_clf)

    p = sub.add_parser("ablate", help="run the full shuffled ablation matrix")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for runs")
    p.add_argument("--format", choices=["csv", "markdown"], default=None)
    p.add_argument("--shuffles", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("gradcheck", help="verify every analytic gradient")
    p.add_argument("--config", help="JSON config file (unused, accepted for symmetry)")
    p.add_argument("--seeds", type=int, default=10, help="random configs per component")
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, OptimizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
