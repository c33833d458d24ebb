"""Labeled feature-image datasets and fold assignment."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .callgraph import CallGraph
from .errors import InputFormatError
from .imagegen import ImageLayout


@dataclass
class LabeledDataset:
    """Feature images with family labels.

    ``images`` is (n, side, side) float64 in [0, 255]; ``labels`` indexes
    into ``label_names``.  ``graphs`` is optional and only needed for
    graph-level augmentation and obfuscation-robustness evaluation.
    """

    images: np.ndarray
    labels: np.ndarray
    label_names: tuple[str, ...]
    layout: ImageLayout
    registry_hash: str
    graphs: list[CallGraph] | None = None
    folds: np.ndarray | None = None
    aug_images: np.ndarray | None = None  # (n, k, side, side) precomputed views

    def __post_init__(self):
        if self.images.ndim != 3:
            raise InputFormatError("images must be (n, side, side)")
        if len(self.images) != len(self.labels):
            raise InputFormatError("images and labels disagree in length")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def family_count(self) -> int:
        return len(self.label_names)

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices)
        return LabeledDataset(
            images=self.images[indices],
            labels=self.labels[indices],
            label_names=self.label_names,
            layout=self.layout,
            registry_hash=self.registry_hash,
            graphs=None if self.graphs is None else [self.graphs[i] for i in indices],
            aug_images=None if self.aug_images is None else self.aug_images[indices],
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.images, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        h.update("|".join(self.label_names).encode("utf-8"))
        return h.hexdigest()


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Assign each item a fold in [0, k) with per-family balance.

    Every family must have at least k samples, otherwise per-fold metrics
    lose whole families.
    """
    rng = np.random.default_rng(seed)
    folds = np.full(len(labels), -1, dtype=np.int64)
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        if len(idx) < k:
            raise InputFormatError(
                f"family {lab} has {len(idx)} samples; stratified {k}-fold needs >= {k}"
            )
        rng.shuffle(idx)
        folds[idx] = np.arange(len(idx)) % k
    return folds
