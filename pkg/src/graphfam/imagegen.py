"""Pack centrality profiles into square grayscale images and invert pixels.

Layout is API-major: the four centralities of registry API i occupy flat
indices 4i..4i+3 of a row-major side x side grid, side = ceil(sqrt(4S)),
with zero padding after index 4S-1.  Pixel value = 255 * centrality.
Images stay float for modeling; 8-bit quantization happens only on PNG
export.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .centrality import COLUMNS, CentralityProfile
from .errors import InputFormatError

_CACHE_MAGIC = b"GFCI"
_CACHE_VERSION = 1


@dataclass(frozen=True)
class ImageLayout:
    """Geometry of the packed image for a registry of size S."""

    size: int
    side: int
    pad: int

    @property
    def pixel_count(self) -> int:
        return self.side * self.side


def layout_for(size: int) -> ImageLayout:
    """side = ceil(sqrt(4S)); pad fills the trailing pixels with zeros."""
    if size < 1:
        raise ValueError("registry size must be >= 1")
    side = math.isqrt(4 * size)
    if side * side < 4 * size:
        side += 1
    return ImageLayout(size=size, side=side, pad=side * side - 4 * size)


@dataclass(frozen=True)
class FeatureImage:
    """side x side float pixels in [0, 255] plus provenance hashes."""

    pixels: np.ndarray
    layout: ImageLayout
    registry_hash: str
    source_hash: str

    def __post_init__(self):
        self.pixels.setflags(write=False)


def to_image(p: CentralityProfile, layout: ImageLayout) -> FeatureImage:
    """Flat index 4i+c <- 255 * values[i][c]; trailing pad pixels are 0."""
    if layout.size != p.size:
        raise InputFormatError(
            f"layout is for S={layout.size} but profile has S={p.size}"
        )
    flat = np.zeros(layout.pixel_count)
    flat[: 4 * layout.size] = 255.0 * p.values.reshape(-1)
    pixels = flat.reshape(layout.side, layout.side)
    return FeatureImage(
        pixels=pixels,
        layout=layout,
        registry_hash=p.registry_hash,
        source_hash=p.digest(),
    )


def pixel_to_feature(layout: ImageLayout, row: int, col: int) -> tuple[int, str] | None:
    """Invert a pixel position to (api_index, centrality_kind); None for pad."""
    if not (0 <= row < layout.side and 0 <= col < layout.side):
        raise ValueError(f"pixel ({row}, {col}) outside {layout.side}x{layout.side}")
    flat = row * layout.side + col
    if flat >= 4 * layout.size:
        return None
    return flat // 4, COLUMNS[flat % 4]


def quantize(pixels: np.ndarray) -> np.ndarray:
    """Round-half-to-even to uint8; lossless for integer-valued pixels."""
    return np.rint(np.clip(pixels, 0.0, 255.0)).astype(np.uint8)


def export_png(img: FeatureImage, path) -> None:
    """8-bit grayscale PNG."""
    Image.fromarray(quantize(img.pixels), mode="L").save(path, format="PNG")


def image_digest(img: FeatureImage) -> str:
    h = hashlib.sha256()
    h.update(img.registry_hash.encode("ascii"))
    h.update(np.ascontiguousarray(img.pixels, dtype="<f8").tobytes())
    return h.hexdigest()


def save_image(img: FeatureImage, path) -> None:
    """Binary cache mirroring the profile cache, with layout in the header."""
    header = _CACHE_MAGIC + struct.pack(
        "<BxxxIII", _CACHE_VERSION, img.layout.size, img.layout.side, img.layout.pad
    )
    header += bytes.fromhex(img.registry_hash) + bytes.fromhex(img.source_hash)
    payload = np.ascontiguousarray(img.pixels, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def load_image(path, registry_hash: str | None = None) -> FeatureImage:
    from .errors import HashMismatchError

    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 84 or blob[:4] != _CACHE_MAGIC:
        raise InputFormatError(f"{path}: not a feature-image cache file")
    version, size, side, pad = struct.unpack_from("<BxxxIII", blob, 4)
    if version != _CACHE_VERSION:
        raise InputFormatError(f"{path}: unsupported image cache version {version}")
    reg_hash = blob[20:52].hex()
    src_hash = blob[52:84].hex()
    expected = 84 + side * side * 8
    if len(blob) != expected:
        raise InputFormatError(f"{path}: truncated image cache")
    layout = layout_for(size)
    if (layout.side, layout.pad) != (side, pad):
        raise InputFormatError(f"{path}: inconsistent layout header")
    pixels = np.frombuffer(blob[84:], dtype="<f8").reshape(side, side).copy()
    if registry_hash is not None and registry_hash != reg_hash:
        raise HashMismatchError(f"{path}: image was built against a different registry")
    return FeatureImage(
        pixels=pixels, layout=layout, registry_hash=reg_hash, source_hash=src_hash
    )
