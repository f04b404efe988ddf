"""Label-map data model and the operations shared by every inpainting engine.

A label map is an (H, W) uint8 array of taxonomy class ids; an inpaint mask is
an (H, W) bool array where True marks pixels to reconstruct. Both are plain
numpy arrays; the functions here keep them consistent with their taxonomy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .taxonomy import ClassTaxonomy

CROP_W, CROP_H = 256, 128
MASK_MIN, MASK_MAX = 16, 64


class ShapeError(ValueError):
    """Dimension mismatch between label maps / masks."""


@dataclass(frozen=True)
class PairedSample:
    """Aligned (dynamic-frame, static-frame, mask) triple; the unit of evaluation."""

    dynamic_frame: np.ndarray
    static_frame: np.ndarray
    mask: np.ndarray
    id: str

    def __post_init__(self):
        if not (self.dynamic_frame.shape == self.static_frame.shape == self.mask.shape):
            raise ShapeError(
                f"paired sample {self.id!r}: shapes differ "
                f"{self.dynamic_frame.shape} / {self.static_frame.shape} / {self.mask.shape}"
            )


def as_labelmap(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.size == 0:
        raise ShapeError(f"label map must be a non-empty 2-D array, got shape {a.shape}")
    return a.astype(np.uint8, copy=False)


def as_mask(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {a.shape}")
    return a.astype(bool, copy=False)


def remap_labels(raw: np.ndarray, tax: ClassTaxonomy) -> np.ndarray:
    """Translate raw source-dataset ids into taxonomy ids; unmapped ids become Unlabeled."""
    raw = as_labelmap(raw)
    return tax.remap_lut()[raw]


def encode_one_hot(m: np.ndarray, channels: int, channel_ids=None) -> np.ndarray:
    """(H, W) label map -> (H, W, channels) one-hot uint8 tensor.

    channel_ids maps channel index -> class id; defaults to the identity, i.e.
    channels over the full class universe. Pass the static id list to encode a
    static-only map over the static channel set.
    """
    m = as_labelmap(m)
    if channel_ids is None:
        channel_ids = np.arange(channels)
    channel_ids = np.asarray(channel_ids)
    if len(channel_ids) != channels:
        raise ValueError("channel_ids length must equal channel count")
    # class id -> channel index, -1 for ids outside the channel set
    inv = np.full(256, -1, dtype=np.int16)
    inv[channel_ids] = np.arange(channels)
    idx = inv[m]
    if (idx < 0).any():
        bad = np.unique(m[idx < 0])
        raise ValueError(f"labels {bad.tolist()} outside the channel set")
    out = np.zeros(m.shape + (channels,), dtype=np.uint8)
    h, w = m.shape
    out[np.arange(h)[:, None], np.arange(w)[None, :], idx] = 1
    return out


def decode_argmax(t: np.ndarray, channel_ids=None) -> np.ndarray:
    """(H, W, K) real tensor -> (H, W) label map; ties go to the lowest channel index."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise ShapeError(f"expected (H, W, K) tensor, got shape {t.shape}")
    idx = t.argmax(axis=2)  # np.argmax returns the first (lowest) index on ties
    if channel_ids is not None:
        idx = np.asarray(channel_ids)[idx]
    return idx.astype(np.uint8)


def extract_dynamic_mask(m: np.ndarray, tax: ClassTaxonomy, dilation: int = 0) -> np.ndarray:
    """True where the label is dynamic, optionally dilated with a 3x3 square element."""
    m = as_labelmap(m)
    mask = ~tax.is_static_lut()[m]
    if dilation > 0:
        mask = ndimage.binary_dilation(mask, structure=np.ones((3, 3), bool), iterations=dilation)
    return mask


def sample_training_crop(m: np.ndarray, rng_seed: int, crop_size=(CROP_W, CROP_H),
                         mask_range=(MASK_MIN, MASK_MAX)):
    """Sample a training crop and a random rectangular occlusion mask inside it.

    Deterministic in (m, rng_seed). The crop position is uniform over valid
    offsets; the mask rectangle's width and height are each uniform in
    mask_range (clipped to the crop) and placed uniformly inside the crop.
    """
    m = as_labelmap(m)
    cw, ch = crop_size
    h, w = m.shape
    if w < cw or h < ch:
        raise ShapeError(f"image {w}x{h} smaller than crop {cw}x{ch}")
    rng = np.random.default_rng(rng_seed)
    x0 = int(rng.integers(0, w - cw + 1))
    y0 = int(rng.integers(0, h - ch + 1))
    crop = m[y0:y0 + ch, x0:x0 + cw].copy()
    lo, hi = mask_range
    mw = int(rng.integers(min(lo, cw), min(hi, cw) + 1))
    mh = int(rng.integers(min(lo, ch), min(hi, ch) + 1))
    mx = int(rng.integers(0, cw - mw + 1))
    my = int(rng.integers(0, ch - mh + 1))
    mask = np.zeros((ch, cw), dtype=bool)
    mask[my:my + mh, mx:mx + mw] = True
    return crop, mask


def compose_inpainted(original: np.ndarray, generated: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Take generated values under the mask, original values elsewhere."""
    original = as_labelmap(original)
    generated = as_labelmap(generated)
    mask = as_mask(mask)
    if not (original.shape == generated.shape == mask.shape):
        raise ShapeError(
            f"compose: shapes differ {original.shape} / {generated.shape} / {mask.shape}"
        )
    return np.where(mask, generated, original).astype(np.uint8)
