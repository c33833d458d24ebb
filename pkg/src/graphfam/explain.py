"""Grad-CAM++ heatmaps, pixel-to-feature attribution, and SSIM analysis.

The class-activation map weights come from the standard closed form in
which the second and third derivatives of the exponentiated class score
reduce to elementwise powers of the first derivative of the raw score
(the exp factor cancels inside the ratio)::

    alpha_k(i,j) = g_k(i,j)^2 / (2 g_k(i,j)^2 + sum(A_k) g_k(i,j)^3)
    w_k          = sum_ij alpha_k(i,j) * relu(g_k(i,j))
    map          = relu(sum_k w_k A_k)

with A the final convolutional feature maps and g the gradient of the
target class score w.r.t. A.  The map is bilinearly upsampled to the
image size and min-max normalized.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .callgraph import ApiRegistry
from .errors import InputFormatError, NumericError
from .imagegen import FeatureImage, ImageLayout, image_digest, pixel_to_feature, quantize
from .nnet import Checkpoint, encoder_backward, encoder_forward
from .nnet.ops import l2_normalize_rows, l2_normalize_rows_backward


@dataclass(frozen=True)
class Heatmap:
    """side x side class-activation map in [0, 1]."""

    grid: np.ndarray
    target: str
    source_hash: str

    def __post_init__(self):
        self.grid.setflags(write=False)


@dataclass(frozen=True)
class Attribution:
    """Ranked (api_index, centrality_kind, weight) triples, pads excluded.

    Sorted by weight descending; ties break by flat pixel index ascending.
    """

    entries: tuple[tuple[int, str, float], ...]


def bilinear_upsample(grid: np.ndarray, out_side: int) -> np.ndarray:
    """Half-pixel-center bilinear resize of a square map."""
    in_h, in_w = grid.shape
    if (in_h, in_w) == (out_side, out_side):
        return grid.copy()
    ys = (np.arange(out_side) + 0.5) * (in_h / out_side) - 0.5
    xs = (np.arange(out_side) + 0.5) * (in_w / out_side) - 0.5
    y0f, x0f = np.floor(ys), np.floor(xs)
    wy, wx = ys - y0f, xs - x0f
    y0 = np.clip(y0f.astype(int), 0, in_h - 1)
    y1 = np.clip(y0f.astype(int) + 1, 0, in_h - 1)
    x0 = np.clip(x0f.astype(int), 0, in_w - 1)
    x1 = np.clip(x0f.astype(int) + 1, 0, in_w - 1)
    top = (1 - wx)[None, :] * grid[y0][:, x0] + wx[None, :] * grid[y0][:, x1]
    bot = (1 - wx)[None, :] * grid[y1][:, x0] + wx[None, :] * grid[y1][:, x1]
    return (1 - wy)[:, None] * top + wy[:, None] * bot


def _minmax_normalize(grid: np.ndarray) -> np.ndarray:
    lo, hi = float(grid.min()), float(grid.max())
    if hi > lo:
        return (grid - lo) / (hi - lo)
    if hi > 0.0:
        return np.ones_like(grid)
    return np.zeros_like(grid)


def gradcam_pp(ck: Checkpoint, img: FeatureImage, target: str) -> Heatmap:
    """Class-activation heatmap for ``target`` over a feature image."""
    if not ck.has_head:
        raise InputFormatError("checkpoint has no classifier head")
    if target not in ck.labels:
        raise InputFormatError(f"unknown target label {target!r}")
    if img.registry_hash != ck.registry_hash:
        from .errors import HashMismatchError

        raise HashMismatchError("image and checkpoint registries differ")
    if img.layout.side != ck.config.side:
        raise InputFormatError("image layout does not match the checkpoint")

    dtype = np.dtype(ck.config.dtype)
    x = (img.pixels[None] / 255.0).astype(dtype)
    emb, cache = encoder_forward(ck.params, ck.state, ck.config, x, train=False)
    _, ncache = l2_normalize_rows(emb.astype(np.float64))
    t = ck.labels.index(target)
    d_emb = l2_normalize_rows_backward(ck.head_w[t][None], ncache)
    _, _, d_maps = encoder_backward(ck.params, cache, d_emb.astype(dtype))

    feats = cache["feature_maps"][0].astype(np.float64)  # (C, h, w)
    grad = d_maps[0].astype(np.float64)
    g2 = grad * grad
    g3 = g2 * grad
    channel_sum = feats.sum(axis=(1, 2), keepdims=True)
    denom = 2.0 * g2 + channel_sum * g3
    alpha = np.divide(g2, denom, out=np.zeros_like(g2), where=denom != 0.0)
    weights = (alpha * np.maximum(grad, 0.0)).sum(axis=(1, 2))
    cam = np.maximum((weights[:, None, None] * feats).sum(axis=0), 0.0)
    grid = _minmax_normalize(bilinear_upsample(cam, img.layout.side))
    if not np.isfinite(grid).all():
        raise NumericError("non-finite class-activation map")
    return Heatmap(grid=grid, target=target, source_hash=image_digest(img))


def attribute(h: Heatmap, layout: ImageLayout, top_k: int) -> Attribution:
    """Top-k (api, centrality) features under the heatmap.

    Pad pixels are excluded, as are zero-weight pixels (a heatmap hot only
    on padding attributes to nothing).
    """
    if top_k <= 0:
        raise InputFormatError("top_k must be positive")
    if h.grid.shape != (layout.side, layout.side):
        raise InputFormatError("layout does not match the heatmap")
    flat = h.grid.reshape(-1)
    n_feat = 4 * layout.size
    weights = flat[:n_feat]
    keep = np.flatnonzero(weights > 0.0)
    order = np.lexsort((keep, -weights[keep]))
    entries = []
    for flat_idx in keep[order][:top_k]:
        feat = pixel_to_feature(layout, int(flat_idx) // layout.side,
                                int(flat_idx) % layout.side)
        entries.append((feat[0], feat[1], float(weights[flat_idx])))
    return Attribution(entries=tuple(entries))


def ssim(a: Heatmap | np.ndarray, b: Heatmap | np.ndarray,
         window: int = 8, c1: float = 0.01 ** 2, c2: float = 0.03 ** 2) -> float:
    """Structural similarity over non-overlapping tiles, unit dynamic range.

    Per tile: luminance * contrast-structure =
    (2 mu_a mu_b + c1)(2 cov + c2) / ((mu_a^2 + mu_b^2 + c1)(var_a + var_b + c2)),
    averaged over tiles.  Symmetric; ssim(x, x) = 1 exactly.
    """
    ga = a.grid if isinstance(a, Heatmap) else np.asarray(a, dtype=np.float64)
    gb = b.grid if isinstance(b, Heatmap) else np.asarray(b, dtype=np.float64)
    if ga.shape != gb.shape:
        raise InputFormatError(f"heatmap shapes differ: {ga.shape} vs {gb.shape}")
    h, w = ga.shape
    vals = []
    for r in range(0, h, window):
        for c in range(0, w, window):
            ta = ga[r:r + window, c:c + window]
            tb = gb[r:r + window, c:c + window]
            mua, mub = ta.mean(), tb.mean()
            da, db = ta - mua, tb - mub
            var_a = (da * da).mean()
            var_b = (db * db).mean()
            cov = (da * db).mean()
            lum = (2.0 * mua * mub + c1) / (mua * mua + mub * mub + c1)
            cs = (2.0 * cov + c2) / (var_a + var_b + c2)
            vals.append(lum * cs)
    return float(np.mean(vals))


def heatmap_family_matrix(heatmaps, labels) -> tuple[np.ndarray, tuple[str, ...]]:
    """F x F mean pairwise SSIM; diagonal excludes self-pairs.

    ``labels`` are the family names aligned with ``heatmaps``.  Every
    family needs at least two heatmaps so the diagonal is defined.
    """
    order = tuple(sorted(set(labels)))
    groups = {fam: [h for h, lab in zip(heatmaps, labels) if lab == fam]
              for fam in order}
    for fam, maps in groups.items():
        if len(maps) < 2:
            raise InputFormatError(f"family {fam!r} needs >= 2 heatmaps")
    f = len(order)
    matrix = np.zeros((f, f))
    for i, fa in enumerate(order):
        for j, fb in enumerate(order):
            if j < i:
                continue
            vals = []
            for ai, ha in enumerate(groups[fa]):
                for bi, hb in enumerate(groups[fb]):
                    if i == j and ai == bi:
                        continue
                    vals.append(ssim(ha, hb))
            matrix[i, j] = matrix[j, i] = float(np.mean(vals))
    return matrix, order


def save_heatmap_png(h: Heatmap, path) -> None:
    """8-bit grayscale PNG of the activation map."""
    Image.fromarray(quantize(h.grid * 255.0), mode="L").save(path, format="PNG")


def heatmap_csv_rows(h: Heatmap, layout: ImageLayout,
                     registry: ApiRegistry) -> list[list]:
    """(row, col, value, api signature or PAD, centrality) per pixel."""
    rows = [["row", "col", "value", "api_signature", "centrality"]]
    for r in range(layout.side):
        for c in range(layout.side):
            feat = pixel_to_feature(layout, r, c)
            if feat is None:
                sig, kind = "PAD", ""
            else:
                sig, kind = registry.entries[feat[0]], feat[1]
            rows.append([r, c, f"{h.grid[r, c]:.9f}", sig, kind])
    return rows


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def attribution_csv_rows(att: Attribution, registry: ApiRegistry) -> list[list]:
    rows = [["rank", "api_index", "api_signature", "centrality", "weight"]]
    for rank, (api, kind, weight) in enumerate(att.entries, start=1):
        rows.append([rank, api, registry.entries[api], kind, f"{weight:.9f}"])
    return rows
