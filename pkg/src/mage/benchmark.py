"""The ablation matrix, the shuffled benchmark protocol, report emission.

One *run* trains every augmenter the requested configurations need (on
the training split only), builds the view stacks for train and test,
trains each configuration's classifier, and scores the held-out split.
Augmenters are trained once per run seed and shared across the
configurations that use them. The shuffled benchmark repeats this over
``n_shuffles`` reshuffles of the combined data x ``n_iterations``
training seeds, re-splitting train/test at the original corpus ratio per
shuffle.

Everything is a pure function of (data, config, base seed): rerunning a
benchmark with the same base seed produces byte-identical reports.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .attention import mage_init
from .augment import (
    AutoencoderConfig,
    DenoisingConfig,
    GaussianCorruption,
    LinearNoiseConfig,
    MaskingCorruption,
    VaeConfig,
    build_view_stack,
    linear_transform,
    reconstruct,
    train_autoencoder,
    train_dae,
    train_vae,
)
from .classifiers import (
    TrainConfig,
    predict_joint,
    predict_lstm,
    predict_softmax,
    train_joint,
    train_lstm,
    train_softmax,
)
from .config import PipelineConfig
from .data import Dataset, MinMaxScaler, ShufflePlan, make_shuffle_plan, stratified_indices
from .errors import ConfigError, UsageError
from .metrics import MetricsRecord, confusion, metrics_from_confusion
from .optim import LbfgsConfig
from .rng import Rng

__all__ = [
    "AblationConfig",
    "RunMetrics",
    "BenchmarkResult",
    "default_configs",
    "execute_run",
    "run_ablation",
    "run_shuffled_benchmark",
    "emit_report",
]

AUGMENTER_SETS = ("original", "dae", "vae")
CLASSIFIERS = ("lstm", "softmax")


@dataclass(frozen=True)
class AblationConfig:
    """One cell of the experiment matrix."""

    augmenter: str  # original | dae | vae
    attention: bool
    classifier: str  # lstm | softmax

    def __post_init__(self):
        if self.augmenter not in AUGMENTER_SETS:
            raise ConfigError(f"unknown augmenter set {self.augmenter!r}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"unknown classifier {self.classifier!r}")
        if self.augmenter == "original" and self.attention:
            raise ConfigError("attention over a single original view is not part of the matrix")

    @property
    def label(self) -> str:
        aug = self.augmenter + ("+mage" if self.attention else "")
        return f"{aug}:{self.classifier}"


def default_configs() -> list[AblationConfig]:
    """The 5-configuration matrix for both classifier tracks (10 cells)."""
    configs = []
    for clf in CLASSIFIERS:
        for aug in AUGMENTER_SETS:
            configs.append(AblationConfig(augmenter=aug, attention=False, classifier=clf))
        for aug in ("dae", "vae"):
            configs.append(AblationConfig(augmenter=aug, attention=True, classifier=clf))
    return configs


@dataclass(frozen=True)
class RunMetrics:
    config: str
    shuffle: int
    iteration: int
    metrics: MetricsRecord


@dataclass
class BenchmarkResult:
    runs: list

    def configs(self) -> list[str]:
        seen = []
        for run in self.runs:
            if run.config not in seen:
                seen.append(run.config)
        return seen

    def metrics_for(self, config: str) -> list[MetricsRecord]:
        return [r.metrics for r in self.runs if r.config == config]

    def aggregate(self) -> list[dict]:
        """Per-config mean/std accuracy and mean macro-F1 (sample std)."""
        rows = []
        for config in self.configs():
            metrics = self.metrics_for(config)
            acc = np.array([m.accuracy for m in metrics])
            f1 = np.array([m.f1 for m in metrics])
            rows.append(
                {
                    "config": config,
                    "runs": len(metrics),
                    "mean_accuracy": float(acc.mean()),
                    "std_accuracy": float(acc.std(ddof=1)) if acc.size > 1 else 0.0,
                    "mean_f1": float(f1.mean()),
                }
            )
        return rows


def _train_augmenters(train: Dataset, needed: set, cfg: PipelineConfig, rng: Rng):
    """Fit the scaler and whichever generative models the configs require."""
    scaler = MinMaxScaler.fit(train.vectors())
    scaled = scaler.apply(train.vectors())
    aug = cfg.augmenters
    dim = train.dimension
    models = {}
    if needed - {"original"}:
        ae_config = AutoencoderConfig(
            input_dim=dim,
            latent_dim=aug.ae_latent,
            hidden_dims=tuple(aug.ae_hidden),
            dropout_rate=aug.ae_dropout,
            learning_rate=aug.ae_lr,
            epochs=aug.ae_epochs,
            batch_size=aug.ae_batch,
        )
        models["ae"], _ = train_autoencoder(scaled, ae_config, scaler, rng.child("ae"))
        if "dae" in needed:
            corruption = (
                GaussianCorruption(aug.dae_sigma)
                if aug.dae_corruption == "gaussian"
                else MaskingCorruption(aug.dae_mask_rate)
            )
            models["dae"], _ = train_dae(
                scaled, DenoisingConfig(ae_config, corruption), scaler, rng.child("dae")
            )
        if "vae" in needed:
            vae_config = VaeConfig(
                input_dim=dim,
                latent_dim=aug.vae_latent,
                hidden_dim=aug.vae_hidden,
                dropout_rate=aug.vae_dropout,
                beta=aug.vae_beta,
                learning_rate=aug.vae_lr,
                epochs=aug.vae_epochs,
                batch_size=aug.vae_batch,
            )
            models["vae"], _ = train_vae(scaled, vae_config, scaler, rng.child("vae"))
    return scaler, models


def _build_stacks(train: Dataset, test: Dataset, augmenter: str, models: dict,
                  cfg: PipelineConfig, rng: Rng):
    """Per-split view stacks in the fixed order original, linear, ae, gen."""
    stacks = {}
    for split_name, split in (("train", train), ("test", test)):
        original = split.vectors()
        if augmenter == "original":
            stacks[split_name] = build_view_stack(original)
            continue
        noise = LinearNoiseConfig(cfg.augmenters.r_min, cfg.augmenters.r_max)
        linear_view = linear_transform(original, noise, rng.child("noise", split_name))
        ae_view = reconstruct(models["ae"], original)
        gen_view = reconstruct(models[augmenter], original)
        stacks[split_name] = build_view_stack(
            original, linear_view, ae_view, gen_view, gen_name=augmenter
        )
    return stacks["train"], stacks["test"]


def _train_and_score(config: AblationConfig, train_stack, test_stack, y_train, y_test,
                     cfg: PipelineConfig, rng: Rng):
    """Train one configuration and score it; returns
    ``(metrics, y_pred, probabilities, model)``."""
    clf = cfg.classifiers
    train_config = TrainConfig(
        learning_rate=clf.learning_rate,
        batch_size=clf.batch_size,
        max_epochs=clf.max_epochs,
        patience=clf.patience,
        lr_step_size=clf.lr_step_size,
        lr_gamma=clf.lr_gamma,
    )
    if config.attention:
        idx_train, idx_val = stratified_indices(y_train, 1.0 - cfg.val_fraction, rng.child("val"))
        mage = mage_init(
            cfg.attention.num_heads,
            train_stack.dim,
            rng.child("mage"),
            temperature=cfg.attention.temperature,
        )
        model, _ = train_joint(
            mage,
            config.classifier,
            train_stack.data[idx_train],
            y_train[idx_train],
            train_stack.data[idx_val],
            y_train[idx_val],
            config=train_config,
            rng=rng.child("joint"),
            num_classes=cfg.num_classes,
            hidden_dim=clf.lstm_hidden,
        )
        y_pred, probs = predict_joint(model, test_stack)
    elif config.classifier == "lstm":
        idx_train, idx_val = stratified_indices(y_train, 1.0 - cfg.val_fraction, rng.child("val"))
        model, _ = train_lstm(
            (train_stack.data[idx_train], y_train[idx_train]),
            (train_stack.data[idx_val], y_train[idx_val]),
            hidden_dim=clf.lstm_hidden,
            num_classes=cfg.num_classes,
            config=train_config,
            rng=rng.child("lstm"),
        )
        y_pred, probs = predict_lstm(model, test_stack.data)
    else:  # plain softmax track: concatenated views, convex L-BFGS fit
        n, v, d = train_stack.data.shape
        features_train = train_stack.data.reshape(n, v * d)
        features_test = test_stack.data.reshape(test_stack.data.shape[0], v * d)
        model, _, _ = train_softmax(
            features_train,
            y_train,
            l2=clf.l2,
            config=LbfgsConfig(
                memory=clf.lbfgs_memory,
                max_iterations=clf.lbfgs_max_iterations,
                grad_tol=clf.lbfgs_tol,
            ),
            num_classes=cfg.num_classes,
        )
        y_pred, probs = predict_softmax(model, features_test)
    cm = confusion(y_test, y_pred, cfg.num_classes)
    return metrics_from_confusion(cm), y_pred, probs, model


def execute_run(train: Dataset, test: Dataset, configs, cfg: PipelineConfig, seed: int,
                details: bool = False) -> dict:
    """One seeded pass: augmenters once, then every config.

    Returns ``{config label: MetricsRecord}``, or with ``details`` a dict
    of ``(metrics, y_pred, probabilities, model, test_stack)`` per label.
    """
    rng = Rng(seed)
    needed = {c.augmenter for c in configs}
    scaler, models = _train_augmenters(train, needed, cfg, rng)
    y_train, y_test = train.labels(), test.labels()
    results = {}
    stacks_cache = {}
    for config in configs:
        if config.augmenter not in stacks_cache:
            stacks_cache[config.augmenter] = _build_stacks(
                train, test, config.augmenter, models, cfg, rng.child("views", config.augmenter)
            )
        train_stack, test_stack = stacks_cache[config.augmenter]
        metrics, y_pred, probs, model = _train_and_score(
            config, train_stack, test_stack, y_train, y_test, cfg, rng.child("clf", config.label)
        )
        results[config.label] = (
            (metrics, y_pred, probs, model, test_stack) if details else metrics
        )
    return results


def run_ablation(train: Dataset, test: Dataset, configs, cfg: PipelineConfig, seeds) -> BenchmarkResult:
    """Score every config on a fixed train/test split across seeds."""
    if len(train) == 0 or len(test) == 0:
        raise UsageError("ablation needs non-empty train and test splits")
    runs = []
    for iteration, seed in enumerate(seeds):
        results = execute_run(train, test, configs, cfg, seed)
        for config in configs:
            runs.append(
                RunMetrics(config=config.label, shuffle=0, iteration=iteration,
                           metrics=results[config.label])
            )
    return BenchmarkResult(runs=runs)


def _split_at_ratio(dataset: Dataset, order: np.ndarray, fraction: float):
    shuffled = dataset.reordered(order)
    cut = int(round(fraction * len(shuffled)))
    cut = min(max(cut, 1), len(shuffled) - 1)
    return shuffled.subset(range(cut)), shuffled.subset(range(cut, len(shuffled)))


def run_shuffled_benchmark(dataset: Dataset, plan: ShufflePlan, configs,
                           cfg: PipelineConfig, jobs: int = 1) -> BenchmarkResult:
    """The full protocol: n_shuffles reshuffles x n_iterations seeded runs.

    Each shuffle re-splits the combined data at ``cfg.train_fraction``;
    iterations within a shuffle share the split but train with different
    seeds. ``jobs > 1`` fans independent runs over a process pool; results
    are identical to the sequential order.
    """
    specs = make_shuffle_plan(plan, dataset)
    units = [
        (_split_at_ratio(dataset, spec.order, cfg.train_fraction), spec) for spec in specs
    ]
    runs: list[RunMetrics] = []
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(execute_run, train, test, configs, cfg, spec.seed)
                for (train, test), spec in units
            ]
            all_results = [f.result() for f in futures]
    else:
        all_results = [
            execute_run(train, test, configs, cfg, spec.seed) for (train, test), spec in units
        ]
    for ((_, _), spec), results in zip(units, all_results):
        for config in configs:
            runs.append(
                RunMetrics(
                    config=config.label,
                    shuffle=spec.shuffle_index,
                    iteration=spec.iteration_index,
                    metrics=results[config.label],
                )
            )
    runs.sort(key=lambda r: (r.config, r.shuffle, r.iteration))
    return BenchmarkResult(runs=runs)


def _atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(result: BenchmarkResult, format: str, path) -> None:
    """Write the benchmark as CSV (raw per-run rows) or Markdown (summary).

    Output is deterministically ordered by (config, shuffle, iteration)
    and written atomically (temp file + rename).
    """
    if not result.runs:
        raise UsageError("refusing to emit an empty benchmark result")
    rows = sorted(result.runs, key=lambda r: (r.config, r.shuffle, r.iteration))
    if format == "csv":
        lines = ["config,shuffle,iteration,accuracy,precision,recall,f1"]
        for r in rows:
            m = r.metrics
            lines.append(
                f"{r.config},{r.shuffle},{r.iteration},{m.accuracy!r},{m.precision!r},"
                f"{m.recall!r},{m.f1!r}"
            )
    elif format == "markdown":
        lines = [
            "# Benchmark summary",
            "",
            "| config | mean accuracy | std | mean macro-F1 |",
            "| --- | --- | --- | --- |",
        ]
        for row in result.aggregate():
            lines.append(
                f"| {row['config']} | {row['mean_accuracy']:.4f} | {row['std_accuracy']:.4f} "
                f"| {row['mean_f1']:.4f} |"
            )
        lines += ["", f"{len(result.runs)} runs total."]
    else:
        raise UsageError(f"unknown report format {format!r}")
    _atomic_write(path, "\n".join(lines) + "\n")
