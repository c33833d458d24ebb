"""Desk-scale benchmark: ten-fold CV plus per-obfuscator robustness rows.

Mirrors the evaluation protocol of the obfuscation study: train on a
synthetic family corpus, run stratified ten-fold cross-validation, then
train one model on a 90/10 split and score the held-out samples after
each simulated obfuscator (twelve single rows plus the all-at-once row).
The ``contrastive`` switch selects the full pipeline or the joint
cross-entropy ablation so the two columns can be compared.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .callgraph import ApiRegistry
from .centrality import KatzParams, profile
from .dataset import LabeledDataset
from .errors import InputFormatError
from .imagegen import to_image
from .obfusim import Pipeline, paper_suite
from .rng import mix64
from .synth import SynthConfig, gen_dataset
from .training import (
    AugmentationPolicy,
    CVResult,
    SupConConfig,
    build_augmentation_pool,
    evaluate,
    train_classifier,
    train_encoder,
    train_joint,
)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Everything the benchmark command needs, reproducible from the seed."""

    families: int = 10
    variants: int = 200
    folds: int = 10
    seed: int = 0
    contrastive: bool = True
    encoder_epochs: int = 6
    classifier_epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 0.05
    temperature: float = 0.07
    core_size: int = 8
    core_overlap: int = 8
    indirection_rate: float = 1.0
    pool_views: int = 4
    policy: AugmentationPolicy = field(default_factory=lambda: AugmentationPolicy(
        mode="graph", indirection_max=0.8, junk_max=10, encsim_max=2))


def synth_config(cfg: BenchmarkConfig) -> SynthConfig:
    return SynthConfig(
        families=cfg.families, variants=cfg.variants, seed=cfg.seed,
        core_size=cfg.core_size, overlap_budget=cfg.core_overlap,
    )


def training_config(cfg: BenchmarkConfig) -> SupConConfig:
    return SupConConfig(
        temperature=cfg.temperature, learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size, epochs=cfg.encoder_epochs, seed=cfg.seed,
    )


def obfuscate_and_featurize(ds: LabeledDataset, pipe: Pipeline,
                            registry: ApiRegistry, seed: int,
                            katz: KatzParams = KatzParams()) -> LabeledDataset:
    """Apply one obfuscation pipeline to every graph and refeaturize."""
    if ds.graphs is None:
        raise InputFormatError("obfuscation evaluation needs a dataset with graphs")
    images = np.zeros_like(ds.images)
    for i, g in enumerate(ds.graphs):
        transformed = pipe.apply(g, registry, mix64(seed, i))
        images[i] = to_image(profile(transformed, registry, katz), ds.layout).pixels
    return LabeledDataset(
        images=images, labels=ds.labels, label_names=ds.label_names,
        layout=ds.layout, registry_hash=ds.registry_hash,
    )


def train_pipeline(train_ds: LabeledDataset, cfg: BenchmarkConfig,
                   registry: ApiRegistry):
    """Train either the contrastive pipeline or the joint ablation."""
    tcfg = training_config(cfg)
    if not cfg.contrastive:
        return train_joint(train_ds, tcfg)
    pooled = train_ds
    if cfg.policy.mode == "graph" and train_ds.aug_images is None:
        pooled = build_augmentation_pool(train_ds, cfg.policy, registry,
                                         views=cfg.pool_views, seed=cfg.seed)
    enc = train_encoder(pooled, tcfg, cfg.policy, registry=registry)
    cls_cfg = SupConConfig(
        temperature=cfg.temperature, learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size, epochs=cfg.classifier_epochs, seed=cfg.seed,
    )
    return train_classifier(enc.checkpoint, train_ds, cls_cfg)


def robustness_rows(model, holdout: LabeledDataset, registry: ApiRegistry,
                    cfg: BenchmarkConfig) -> list[tuple[str, float, float]]:
    """(obfuscator, macro F1, accuracy) rows, clean row first."""
    clean = evaluate(model, holdout)
    rows = [("Clean", clean.macro_f1, clean.accuracy)]
    for name, pipe in paper_suite(indirection_rate=cfg.indirection_rate):
        obf = obfuscate_and_featurize(holdout, pipe, registry, mix64(cfg.seed, hash(name) & 0xFFFF))
        m = evaluate(model, obf)
        rows.append((name, m.macro_f1, m.accuracy))
    return rows


@dataclass
class BenchmarkResult:
    cv: CVResult
    robustness: list[tuple[str, float, float]]
    holdout_fold: int
    dataset_digest: str

    def table_lines(self) -> list[str]:
        lines = [
            f"ten-fold CV:  mean accuracy {self.cv.mean_accuracy:.4f}   "
            f"mean macro-F1 {self.cv.mean_macro_f1:.4f}",
            "",
            f"{'obfuscator':24s} {'macro-F1':>9s} {'accuracy':>9s}",
        ]
        for name, f1, acc in self.robustness:
            lines.append(f"{name:24s} {f1:9.4f} {acc:9.4f}")
        return lines

    def robustness_csv_rows(self) -> list[list]:
        rows = [["obfuscator", "macro_f1", "accuracy"]]
        rows += [[name, f"{f1:.6f}", f"{acc:.6f}"] for name, f1, acc in self.robustness]
        return rows


def run_benchmark(registry: ApiRegistry, cfg: BenchmarkConfig,
                  dataset: LabeledDataset | None = None,
                  report=None) -> BenchmarkResult:
    """Full benchmark; pass ``report`` (RunReport) to collect stage times."""
    from .report import FAMILIAL_CLASSIFICATION, IMAGE_GENERATION, STATIC_ANALYSIS

    class _NullStage:
        def stage(self, _name):
            import contextlib

            return contextlib.nullcontext()

    rep = report if report is not None else _NullStage()
    if dataset is None:
        with rep.stage(STATIC_ANALYSIS):
            scfg = synth_config(cfg)
        with rep.stage(IMAGE_GENERATION):
            dataset = gen_dataset(scfg, registry).dataset
    with rep.stage(FAMILIAL_CLASSIFICATION):
        pooled = dataset
        if cfg.contrastive and cfg.policy.mode == "graph":
            pooled = build_augmentation_pool(dataset, cfg.policy, registry,
                                             views=cfg.pool_views, seed=cfg.seed)
        from .training import crossvalidate

        cv = crossvalidate(
            pooled, training_config(cfg), k=cfg.folds, policy=cfg.policy,
            contrastive=cfg.contrastive,
            classifier_epochs=cfg.classifier_epochs, registry=registry,
        )
        folds = cv.fold_assignments
        holdout_fold = cfg.folds - 1
        train_ds = pooled.subset(np.flatnonzero(folds != holdout_fold))
        holdout = pooled.subset(np.flatnonzero(folds == holdout_fold))
        model = train_pipeline(train_ds, cfg, registry).checkpoint
        rows = robustness_rows(model, holdout, registry, cfg)
    return BenchmarkResult(
        cv=cv, robustness=rows, holdout_fold=holdout_fold,
        dataset_digest=dataset.digest(),
    )
