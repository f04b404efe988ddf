"""Inference: fill a masked label map with the trained generator.

Images larger than the training crop are processed in overlapping tiles with
logits averaged in the overlaps; smaller images go through in a single pass
(the net is fully convolutional, it only needs even spatial dims, which are
obtained by edge padding when necessary).
"""

from __future__ import annotations

import numpy as np
import torch

from ..labelmap import as_labelmap, as_mask, compose_inpainted, decode_argmax
from ..taxonomy import ClassTaxonomy
from .net import Generator
from .train import build_generator_input

TILE_W, TILE_H = 256, 128
STRIDE_W, STRIDE_H = 128, 64


def _forward_tile(gen: Generator, labels: np.ndarray, mask: np.ndarray,
                  num_classes: int) -> np.ndarray:
    """Run one tile, edge-padding odd dims; returns (H, W, K) logits."""
    h, w = labels.shape
    ph, pw = h % 2, w % 2
    if ph or pw:
        labels = np.pad(labels, ((0, ph), (0, pw)), mode="edge")
        mask = np.pad(mask, ((0, ph), (0, pw)), mode="edge")
    x = build_generator_input(labels[None], mask[None], num_classes)
    with torch.no_grad():
        logits = gen(x)[0].numpy()
    return np.moveaxis(logits, 0, 2)[:h, :w]


def _tile_starts(size: int, tile: int, stride: int):
    if size <= tile:
        return [0]
    starts = list(range(0, size - tile + 1, stride))
    if starts[-1] != size - tile:
        starts.append(size - tile)
    return starts


def infer_inpaint(gen: Generator, m: np.ndarray, mask: np.ndarray,
                  tax: ClassTaxonomy) -> np.ndarray:
    """Generator fill inside the mask, original labels everywhere else."""
    m = as_labelmap(m)
    mask = as_mask(mask)
    if m.shape != mask.shape:
        raise ValueError(f"shape mismatch {m.shape} vs {mask.shape}")
    if gen.in_channels != tax.num_classes + 1 or gen.out_channels != len(tax.static_ids):
        raise ValueError(
            f"generator channels ({gen.in_channels}->{gen.out_channels}) do not match "
            f"taxonomy {tax.name!r} ({tax.num_classes + 1}->{len(tax.static_ids)})")
    if not mask.any():
        return m.copy()
    h, w = m.shape
    static_ids = np.array(tax.static_ids)
    if h <= TILE_H and w <= TILE_W:
        logits = _forward_tile(gen, m, mask, tax.num_classes)
    else:
        th, tw = min(TILE_H, h), min(TILE_W, w)
        acc = np.zeros((h, w, len(static_ids)), dtype=np.float64)
        cnt = np.zeros((h, w, 1), dtype=np.float64)
        for y0 in _tile_starts(h, th, STRIDE_H):
            for x0 in _tile_starts(w, tw, STRIDE_W):
                part = _forward_tile(gen, m[y0:y0 + th, x0:x0 + tw],
                                     mask[y0:y0 + th, x0:x0 + tw], tax.num_classes)
                acc[y0:y0 + th, x0:x0 + tw] += part
                cnt[y0:y0 + th, x0:x0 + tw] += 1.0
        logits = acc / cnt
    filled = decode_argmax(logits, channel_ids=static_ids)
    return compose_inpainted(m, filled, mask)
