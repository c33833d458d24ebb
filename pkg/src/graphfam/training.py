"""Contrastive encoder pretraining, classifier training, metrics, k-fold CV.

The encoder is pretrained on multi-view batches with the supervised
contrastive loss, then frozen while a one-layer classifier is fit with
softmax cross-entropy on the unit-normalized 512-d embeddings.  A joint
cross-entropy mode (encoder and head trained together, no contrastive
stage, no multi-view batches) serves as the ablation baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .callgraph import ApiRegistry
from .centrality import KatzParams, profile
from .dataset import LabeledDataset, stratified_folds
from .errors import HashMismatchError, InputFormatError, NumericError
from .imagegen import FeatureImage, to_image
from .nnet import Checkpoint, EncoderConfig, encoder_backward, encoder_forward, init_params
from .nnet.ops import l2_normalize_rows, l2_normalize_rows_backward
from .obfusim import Transform, compose
from .rng import mix64


@dataclass(frozen=True)
class SupConConfig:
    """Optimization settings (shared by contrastive and classifier stages)."""

    temperature: float = 0.07
    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        for name in ("learning_rate", "momentum", "weight_decay", "batch_size"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size >= 1 and epochs >= 0 required")


@dataclass(frozen=True)
class AugmentationPolicy:
    """How a training batch is turned into two views per sample.

    ``pixel`` mode masks a fraction of the nonzero pixels and applies
    multiplicative jitter (clamped back to [0, 255]).  ``graph`` mode
    re-featurizes each sample through a randomly parametrized obfuscation
    pipeline (rename + call indirection + junk + crypto surfacing), which
    is the semantically faithful augmentation; it needs the dataset to
    carry graphs.
    """

    mask_fraction: float = 0.1
    jitter: tuple[float, float] = (0.9, 1.1)
    mode: str = "pixel"
    indirection_max: float = 0.6
    junk_max: int = 8
    junk_degree: int = 2
    encsim_max: int = 2

    def __post_init__(self):
        if not 0.0 <= self.mask_fraction < 1.0:
            raise ValueError("mask_fraction must be in [0, 1)")
        if self.mode not in ("pixel", "graph"):
            raise ValueError("mode must be 'pixel' or 'graph'")


def supcon_loss(embeddings, labels, temperature: float = 0.07):
    """Supervised contrastive loss over a multi-view batch.

    For each anchor i with positives P(i) (same label, excluding i) and
    candidates A(i) (everything but i)::

        loss = sum_i -(1/|P(i)|) sum_{p in P(i)}
               log( exp(v_i.v_p / t) / sum_{a in A(i)} exp(v_i.v_a / t) )

    Anchors with no positive contribute zero.  Returns (loss, gradient
    w.r.t. the embedding matrix).  Rows must be unit-normalized.
    """
    v = np.asarray(embeddings, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 2:
        raise NumericError("supcon_loss needs a (views >= 2, dim) matrix")
    norms = np.sqrt((v * v).sum(axis=1))
    if float(np.max(np.abs(norms - 1.0))) > 1e-4:
        raise NumericError("supcon_loss requires row-normalized embeddings")
    labels = np.asarray(labels)
    m = v.shape[0]

    z = (v @ v.T) / temperature
    eye = np.eye(m, dtype=bool)
    z_masked = np.where(eye, -np.inf, z)
    zmax = z_masked.max(axis=1, keepdims=True)
    expz = np.exp(z_masked - zmax)  # diagonal exp(-inf) = 0
    denom = expz.sum(axis=1, keepdims=True)
    log_prob = (z_masked - zmax) - np.log(denom)

    pos_mask = (labels[:, None] == labels[None, :]) & ~eye
    pos_counts = pos_mask.sum(axis=1)
    active = pos_counts > 0
    pos_log_sum = np.where(pos_mask, log_prob, 0.0).sum(axis=1)
    per_anchor = np.zeros(m)
    per_anchor[active] = -pos_log_sum[active] / pos_counts[active]
    loss = float(per_anchor.sum())

    softmax = expz / denom
    coeff = np.zeros((m, m))
    coeff[active] = softmax[active]
    coeff[active] -= pos_mask[active] / np.maximum(pos_counts[active, None], 1)
    grad = (coeff + coeff.T) @ v / temperature
    return loss, grad


def _pixel_augment(images: np.ndarray, policy: AugmentationPolicy, rng) -> np.ndarray:
    out = images.copy()
    flat = out.reshape(len(out), -1)
    if policy.mask_fraction > 0:
        for i in range(len(out)):
            nz = np.flatnonzero(flat[i])
            k = int(round(policy.mask_fraction * len(nz)))
            if k:
                flat[i, rng.choice(nz, size=k, replace=False)] = 0.0
    lo, hi = policy.jitter
    if (lo, hi) != (1.0, 1.0):
        out *= rng.uniform(lo, hi, size=out.shape)
        np.clip(out, 0.0, 255.0, out=out)
    return out


def _random_pipeline(policy: AugmentationPolicy, rng):
    stages = [Transform(kind="rename")]
    rate = float(rng.uniform(0.0, policy.indirection_max))
    if rate > 0:
        stages.append(Transform(kind="call_indirection", rate=rate))
    k = int(rng.integers(0, policy.junk_max + 1))
    if k:
        stages.append(Transform(kind="junk_code", k=k, attach_degree=policy.junk_degree))
    m = int(rng.integers(0, policy.encsim_max + 1))
    if m:
        stages.append(Transform(kind="encryption_sim", m=m))
    return compose(stages)


def _graph_augment(indices, ds: LabeledDataset, policy: AugmentationPolicy,
                   registry: ApiRegistry | None, katz: KatzParams, rng) -> np.ndarray:
    if ds.aug_images is not None:
        # precomputed view pool: pick the clean image or one of the k views
        k = ds.aug_images.shape[1]
        picks = rng.integers(0, k + 1, size=len(indices))
        out = np.empty((len(indices), ds.layout.side, ds.layout.side))
        for row, (i, pick) in enumerate(zip(indices, picks)):
            out[row] = ds.images[i] if pick == k else ds.aug_images[i, pick]
        return out
    if ds.graphs is None:
        raise InputFormatError("graph-level augmentation needs a dataset with graphs")
    if registry is None:
        raise InputFormatError("graph-level augmentation needs the registry")
    out = np.empty((len(indices), ds.layout.side, ds.layout.side))
    for row, i in enumerate(indices):
        pipe = _random_pipeline(policy, rng)
        g = pipe.apply(ds.graphs[i], registry, int(rng.integers(2 ** 62)))
        out[row] = to_image(profile(g, registry, katz), ds.layout).pixels
    return out


def build_augmentation_pool(ds: LabeledDataset, policy: AugmentationPolicy,
                            registry: ApiRegistry, *, views: int = 4, seed: int = 0,
                            katz: KatzParams = KatzParams()) -> LabeledDataset:
    """Attach ``views`` precomputed graph-level views per item.

    Sampling obfuscation pipelines once up front makes graph-mode
    contrastive training cost the same per step as pixel mode; the pool is
    deterministic from the seed.
    """
    if ds.graphs is None:
        raise InputFormatError("augmentation pool needs a dataset with graphs")
    rng = np.random.default_rng(np.random.PCG64(mix64(seed, 0x504F4F4C)))
    pool = np.empty((len(ds), views, ds.layout.side, ds.layout.side))
    for i, g in enumerate(ds.graphs):
        for v in range(views):
            pipe = _random_pipeline(policy, rng)
            g2 = pipe.apply(g, registry, int(rng.integers(2 ** 62)))
            pool[i, v] = to_image(profile(g2, registry, katz), ds.layout).pixels
    return LabeledDataset(
        images=ds.images, labels=ds.labels, label_names=ds.label_names,
        layout=ds.layout, registry_hash=ds.registry_hash, graphs=ds.graphs,
        folds=ds.folds, aug_images=pool,
    )


def make_views(images, labels, policy: AugmentationPolicy, rng, *,
               dataset: LabeledDataset | None = None, indices=None,
               registry: ApiRegistry | None = None,
               katz: KatzParams = KatzParams()):
    """Two independently augmented copies of the batch, concatenated.

    Labels are duplicated correspondingly.  ``pixel`` mode works directly
    on the image batch; ``graph`` mode re-featurizes through obfuscation
    transforms and needs (dataset, indices, registry).
    """
    if policy.mode == "graph":
        if dataset is None or indices is None or registry is None:
            raise InputFormatError("graph mode needs dataset, indices and registry")
        a = _graph_augment(indices, dataset, policy, registry, katz, rng)
        b = _graph_augment(indices, dataset, policy, registry, katz, rng)
    else:
        a = _pixel_augment(images, policy, rng)
        b = _pixel_augment(images, policy, rng)
    views = np.concatenate([a, b], axis=0)
    vlabels = np.concatenate([labels, labels], axis=0)
    return views, vlabels


class _SGD:
    """SGD with momentum and decoupled-from-nothing weight decay (classic
    L2-into-gradient convention)."""

    def __init__(self, params: dict, cfg: SupConConfig):
        self.vel = {k: np.zeros_like(v) for k, v in params.items()}
        self.lr = cfg.learning_rate
        self.momentum = cfg.momentum
        self.weight_decay = cfg.weight_decay

    def step(self, params: dict, grads: dict) -> None:
        for k, p in params.items():
            g = grads[k] + self.weight_decay * p
            v = self.vel[k]
            v *= self.momentum
            v += g
            p -= self.lr * v


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    epoch_losses: list[float]


def _check_trainable(ds: LabeledDataset) -> None:
    if len(ds) == 0:
        raise InputFormatError("dataset is empty")
    if len(set(ds.labels.tolist())) < 2:
        raise InputFormatError("training needs at least 2 families")


def train_encoder(ds: LabeledDataset, cfg: SupConConfig,
                  policy: AugmentationPolicy = AugmentationPolicy(),
                  encoder_config: EncoderConfig | None = None,
                  registry: ApiRegistry | None = None,
                  katz: KatzParams = KatzParams()) -> TrainResult:
    """Supervised contrastive pretraining of the encoder.

    Runs epochs * ceil(n / batch) SGD-with-momentum steps on multi-view
    batches; per-epoch mean per-view losses are returned for logging.
    The gradient is scaled by 1/len(views) per step so the configured
    learning rate is batch-size independent; the logged/returned loss
    values follow the summed-over-anchors definition of ``supcon_loss``.
    """
    _check_trainable(ds)
    config = encoder_config or EncoderConfig(side=ds.layout.side)
    if config.side != ds.layout.side:
        raise InputFormatError("encoder config side does not match the dataset layout")
    params, state = init_params(config, cfg.seed)
    optimizer = _SGD(params, cfg)
    rng = np.random.default_rng(np.random.PCG64(mix64(cfg.seed, 0x454E43)))
    dtype = np.dtype(config.dtype)
    n = len(ds)
    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            views, vlabels = make_views(
                ds.images[idx], ds.labels[idx], policy, rng,
                dataset=ds, indices=idx, registry=registry, katz=katz,
            )
            x = (views / 255.0).astype(dtype)
            emb, cache = encoder_forward(params, state, config, x, train=True)
            nemb, ncache = l2_normalize_rows(emb.astype(np.float64))
            loss, d_nemb = supcon_loss(nemb, vlabels, cfg.temperature)
            if not math.isfinite(loss):
                raise NumericError(
                    f"non-finite contrastive loss at epoch {epoch} "
                    f"(batch start {start}); try a lower learning rate"
                )
            d_emb = l2_normalize_rows_backward(d_nemb / len(views), ncache)
            grads, _, _ = encoder_backward(params, cache, d_emb.astype(dtype))
            optimizer.step(params, grads)
            batch_losses.append(loss / len(views))
        epoch_losses.append(float(np.mean(batch_losses)) if batch_losses else 0.0)
    ck = Checkpoint(config=config, params=params, state=state,
                    registry_hash=ds.registry_hash, seed=cfg.seed)
    return TrainResult(checkpoint=ck, epoch_losses=epoch_losses)


def embed_dataset(ck: Checkpoint, images: np.ndarray, batch: int = 512) -> np.ndarray:
    """Unit-normalized eval-mode embeddings for a stack of images."""
    dtype = np.dtype(ck.config.dtype)
    chunks = []
    for start in range(0, len(images), batch):
        x = (images[start:start + batch] / 255.0).astype(dtype)
        emb, _ = encoder_forward(ck.params, ck.state, ck.config, x, train=False)
        chunks.append(emb.astype(np.float64))
    emb = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, ck.config.embed_dim))
    normed, _ = l2_normalize_rows(emb)
    return normed


def _softmax_ce(logits: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy and dlogits for integer targets."""
    zmax = logits.max(axis=1, keepdims=True)
    expz = np.exp(logits - zmax)
    probs = expz / expz.sum(axis=1, keepdims=True)
    n = len(targets)
    eps = np.finfo(np.float64).tiny
    loss = float(-np.log(probs[np.arange(n), targets] + eps).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    return loss, dlogits / n


def _init_head(dim: int, families: int, seed: int):
    rng = np.random.default_rng(np.random.PCG64(mix64(seed, 0x484541)))
    limit = math.sqrt(6.0 / dim)
    w = rng.uniform(-limit, limit, size=(families, dim))
    return {"w": w, "b": np.zeros(families)}


def train_classifier(encoder: Checkpoint, ds: LabeledDataset,
                     cfg: SupConConfig) -> TrainResult:
    """Fit the one-layer head on frozen-encoder normalized embeddings.

    Same optimizer settings as the contrastive stage, cross-entropy loss.
    """
    _check_trainable(ds)
    if encoder.registry_hash != ds.registry_hash:
        raise HashMismatchError("encoder and dataset registries differ")
    emb = embed_dataset(encoder, ds.images)
    families = ds.family_count
    head = _init_head(encoder.config.embed_dim, families, cfg.seed)
    optimizer = _SGD(head, cfg)
    rng = np.random.default_rng(np.random.PCG64(mix64(cfg.seed, 0x434C53)))
    n = len(ds)
    epoch_losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits = emb[idx] @ head["w"].T + head["b"]
            loss, dlogits = _softmax_ce(logits, ds.labels[idx])
            if not math.isfinite(loss):
                raise NumericError(f"non-finite classifier loss at epoch {epoch}")
            grads = {"w": dlogits.T @ emb[idx], "b": dlogits.sum(axis=0)}
            optimizer.step(head, grads)
            batch_losses.append(loss)
        epoch_losses.append(float(np.mean(batch_losses)) if batch_losses else 0.0)
    ck = encoder.clone_arrays().with_head(ds.label_names, head["w"], head["b"])
    return TrainResult(checkpoint=ck, epoch_losses=epoch_losses)


def train_joint(ds: LabeledDataset, cfg: SupConConfig,
                encoder_config: EncoderConfig | None = None) -> TrainResult:
    """Ablation baseline: encoder + head trained together with plain
    cross-entropy on single-view batches (no contrastive stage)."""
    _check_trainable(ds)
    config = encoder_config or EncoderConfig(side=ds.layout.side)
    params, state = init_params(config, cfg.seed)
    head = _init_head(config.embed_dim, ds.family_count, cfg.seed)
    opt_enc = _SGD(params, cfg)
    opt_head = _SGD(head, cfg)
    rng = np.random.default_rng(np.random.PCG64(mix64(cfg.seed, 0x4A4E54)))
    dtype = np.dtype(config.dtype)
    n = len(ds)
    epoch_losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x = (ds.images[idx] / 255.0).astype(dtype)
            emb, cache = encoder_forward(params, state, config, x, train=True)
            nemb, ncache = l2_normalize_rows(emb.astype(np.float64))
            logits = nemb @ head["w"].T + head["b"]
            loss, dlogits = _softmax_ce(logits, ds.labels[idx])
            if not math.isfinite(loss):
                raise NumericError(f"non-finite joint loss at epoch {epoch}")
            hgrads = {"w": dlogits.T @ nemb, "b": dlogits.sum(axis=0)}
            d_emb = l2_normalize_rows_backward(dlogits @ head["w"], ncache)
            grads, _, _ = encoder_backward(params, cache, d_emb.astype(dtype))
            opt_enc.step(params, grads)
            opt_head.step(head, hgrads)
            batch_losses.append(loss)
        epoch_losses.append(float(np.mean(batch_losses)) if batch_losses else 0.0)
    ck = Checkpoint(config=config, params=params, state=state,
                    registry_hash=ds.registry_hash, seed=cfg.seed)
    ck = ck.with_head(ds.label_names, head["w"], head["b"])
    return TrainResult(checkpoint=ck, epoch_losses=epoch_losses)


def score_images(ck: Checkpoint, images: np.ndarray) -> np.ndarray:
    """(n, F) classifier scores for a stack of images."""
    if not ck.has_head:
        raise InputFormatError("checkpoint has no classifier head")
    emb = embed_dataset(ck, images)
    return emb @ ck.head_w.T + ck.head_b


def classify(ck: Checkpoint, img: FeatureImage) -> tuple[str, np.ndarray]:
    """Label plus the full score vector; ties break to the lowest index."""
    if img.registry_hash != ck.registry_hash:
        raise HashMismatchError("image and checkpoint registries differ")
    if img.layout.side != ck.config.side:
        raise HashMismatchError("image layout does not match the checkpoint")
    scores = score_images(ck, img.pixels[None])[0]
    return ck.labels[int(np.argmax(scores))], scores


@dataclass(frozen=True)
class FamilyStats:
    tp: int
    fp: int
    tn: int
    fn: int

    def _rate(self, num: int, den: int) -> float:
        return num / den if den else 0.0

    @property
    def tpr(self) -> float:
        return self._rate(self.tp, self.tp + self.fn)

    @property
    def fnr(self) -> float:
        return self._rate(self.fn, self.tp + self.fn)

    @property
    def tnr(self) -> float:
        return self._rate(self.tn, self.tn + self.fp)

    @property
    def fpr(self) -> float:
        return self._rate(self.fp, self.tn + self.fp)

    @property
    def precision(self) -> float:
        return self._rate(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return self._rate(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0


@dataclass(frozen=True)
class Metrics:
    """Per-family one-vs-rest counts, the confusion matrix and accuracy."""

    labels: tuple[str, ...]
    confusion: np.ndarray  # rows: true family, cols: predicted family

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion)) / self.total if self.total else 0.0

    def family(self, label: str) -> FamilyStats:
        i = self.labels.index(label)
        tp = int(self.confusion[i, i])
        fn = int(self.confusion[i].sum()) - tp
        fp = int(self.confusion[:, i].sum()) - tp
        tn = self.total - tp - fn - fp
        return FamilyStats(tp=tp, fp=fp, tn=tn, fn=fn)

    @property
    def macro_f1(self) -> float:
        return float(np.mean([self.family(lab).f1 for lab in self.labels]))

    def to_dict(self) -> dict:
        fams = {}
        for lab in self.labels:
            st = self.family(lab)
            fams[lab] = {
                "TP": st.tp, "FP": st.fp, "TN": st.tn, "FN": st.fn,
                "TPR": st.tpr, "FNR": st.fnr, "TNR": st.tnr, "FPR": st.fpr,
                "precision": st.precision, "recall": st.recall, "F1": st.f1,
            }
        return {
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
            "per_family": fams,
            "classification_accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
        }

    def csv_rows(self) -> list[list]:
        rows = [["family", "TP", "FP", "TN", "FN", "TPR", "FNR", "TNR", "FPR",
                 "precision", "recall", "F1"]]
        for lab in self.labels:
            st = self.family(lab)
            rows.append([lab, st.tp, st.fp, st.tn, st.fn,
                         f"{st.tpr:.6f}", f"{st.fnr:.6f}", f"{st.tnr:.6f}",
                         f"{st.fpr:.6f}", f"{st.precision:.6f}",
                         f"{st.recall:.6f}", f"{st.f1:.6f}"])
        rows.append(["__accuracy__", "", "", "", "", "", "", "", "", "", "",
                     f"{self.accuracy:.6f}"])
        return rows


def metrics_from_predictions(true_idx, pred_idx, labels) -> Metrics:
    f = len(labels)
    confusion = np.zeros((f, f), dtype=np.int64)
    for t, p in zip(true_idx, pred_idx):
        confusion[t, p] += 1
    return Metrics(labels=tuple(labels), confusion=confusion)


def evaluate(ck: Checkpoint, ds: LabeledDataset) -> Metrics:
    """Score every item and tabulate one-vs-rest counts per family."""
    if not ck.has_head:
        raise InputFormatError("checkpoint has no classifier head")
    if ds.registry_hash != ck.registry_hash:
        raise HashMismatchError("dataset and checkpoint registries differ")
    name_to_idx = {lab: i for i, lab in enumerate(ck.labels)}
    try:
        remap = np.array([name_to_idx[ds.label_names[i]] for i in ds.labels])
    except KeyError as exc:
        raise InputFormatError(f"dataset label {exc} unknown to the checkpoint") from exc
    scores = score_images(ck, ds.images)
    pred = np.argmax(scores, axis=1)
    return metrics_from_predictions(remap, pred, ck.labels)


@dataclass
class CVResult:
    fold_metrics: list[Metrics]
    fold_assignments: np.ndarray

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([m.accuracy for m in self.fold_metrics]))

    @property
    def mean_macro_f1(self) -> float:
        return float(np.mean([m.macro_f1 for m in self.fold_metrics]))

    def mean_family_f1(self) -> dict[str, float]:
        labels = self.fold_metrics[0].labels
        return {
            lab: float(np.mean([m.family(lab).f1 for m in self.fold_metrics]))
            for lab in labels
        }

    @property
    def confusion_total(self) -> np.ndarray:
        return np.sum([m.confusion for m in self.fold_metrics], axis=0)


def crossvalidate(ds: LabeledDataset, cfg: SupConConfig, k: int = 10, *,
                  policy: AugmentationPolicy = AugmentationPolicy(),
                  contrastive: bool = True,
                  encoder_config: EncoderConfig | None = None,
                  classifier_epochs: int | None = None,
                  registry: ApiRegistry | None = None,
                  katz: KatzParams = KatzParams()) -> CVResult:
    """Stratified k-fold: retrain encoder + classifier per fold.

    ``contrastive=False`` trains the joint cross-entropy ablation instead.
    """
    folds = stratified_folds(ds.labels, k, cfg.seed)
    fold_metrics = []
    for fold in range(k):
        train_ds = ds.subset(np.flatnonzero(folds != fold))
        test_ds = ds.subset(np.flatnonzero(folds == fold))
        fold_cfg = replace(cfg, seed=mix64(cfg.seed, fold))
        if contrastive:
            enc = train_encoder(train_ds, fold_cfg, policy,
                                encoder_config=encoder_config,
                                registry=registry, katz=katz)
            cls_cfg = (fold_cfg if classifier_epochs is None
                       else replace(fold_cfg, epochs=classifier_epochs))
            model = train_classifier(enc.checkpoint, train_ds, cls_cfg)
        else:
            model = train_joint(train_ds, fold_cfg, encoder_config=encoder_config)
        fold_metrics.append(evaluate(model.checkpoint, test_ds))
    return CVResult(fold_metrics=fold_metrics, fold_assignments=folds)
