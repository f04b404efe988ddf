"""Spatially discounted cross-entropy for masked reconstruction.

The per-pixel weight is 1 on context pixels and gamma^d inside the mask, where
d is the Chebyshev distance to the nearest unmasked pixel, so deep mask
interiors are penalized less than pixels near the boundary.
"""

from __future__ import annotations

import numpy as np
import torch
from scipy import ndimage

from ..labelmap import as_mask


def discount_weight_map(mask: np.ndarray, gamma: float) -> np.ndarray:
    """(H, W) float32 weights: 1 outside the mask, gamma^chebyshev_distance inside."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    mask = as_mask(mask)
    if not mask.any():
        return np.ones(mask.shape, dtype=np.float32)
    d = ndimage.distance_transform_cdt(mask, metric="chessboard")
    return (gamma ** d.astype(np.float64)).astype(np.float32)


def masked_ce_loss(logits: np.ndarray, target: np.ndarray, weights: np.ndarray):
    """Weighted softmax cross-entropy; returns (loss, gradient w.r.t. logits).

    logits: (H, W, K) over the static channel set; target: (H, W) channel
    indices; weights: (H, W) non-negative. Reference numpy implementation used
    as the oracle for the training path.
    """
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target)
    weights = np.asarray(weights, dtype=np.float64)
    k = logits.shape[2]
    if target.min() < 0 or target.max() >= k:
        raise ValueError("target index outside the channel set")
    z = logits - logits.max(axis=2, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=2, keepdims=True)
    h, w = target.shape
    logp = z - np.log(ez.sum(axis=2, keepdims=True))
    nll = -logp[np.arange(h)[:, None], np.arange(w)[None, :], target]
    wsum = weights.sum()
    loss = float((weights * nll).sum() / wsum)
    one_hot = np.zeros_like(p)
    one_hot[np.arange(h)[:, None], np.arange(w)[None, :], target] = 1.0
    grad = weights[:, :, None] * (p - one_hot) / wsum
    return loss, grad


def weighted_ce(logits: torch.Tensor, target: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Batch version of the discounted CE: logits (B,K,H,W), target (B,H,W) indices."""
    logp = torch.log_softmax(logits, dim=1)
    nll = -logp.gather(1, target.unsqueeze(1)).squeeze(1)
    return (weights * nll).sum() / weights.sum()
