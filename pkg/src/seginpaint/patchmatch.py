"""Categorical PatchMatch: randomized nearest-neighbor fields over label patches.

Patch similarity is the Hamming distance between label patches. Source patches
are those overlapping the masked region; target patches must lie fully inside
the image and contain no masked pixel. The field is optimized by alternating
scan-order propagation with decaying-radius random search, and the masked
pixels are refilled by majority vote over all overlapping matched patches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .classic import inpaint_nn
from .labelmap import as_labelmap, as_mask, compose_inpainted, extract_dynamic_mask
from .taxonomy import ClassTaxonomy


@dataclass(frozen=True)
class PatchParams:
    patch_size: int = 7
    nnf_iters: int = 5
    search_alpha: float = 0.5
    search_radius_start: int | None = None  # None -> max(W, H)
    vote_iters: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ValueError("patch_size must be odd and >= 3")
        if not 0.0 < self.search_alpha < 1.0:
            raise ValueError("search_alpha must be in (0,1)")
        if min(self.nnf_iters, self.vote_iters) < 1:
            raise ValueError("iteration counts must be >= 1")


@dataclass
class NnfField:
    """Per source-patch-center best match and its stored Hamming distance."""

    src_y: np.ndarray
    src_x: np.ndarray
    tgt_y: np.ndarray
    tgt_x: np.ndarray
    dist: np.ndarray

    @property
    def energy(self) -> int:
        return int(self.dist.sum())

    def copy(self) -> "NnfField":
        return NnfField(self.src_y.copy(), self.src_x.copy(),
                        self.tgt_y.copy(), self.tgt_x.copy(), self.dist.copy())


@njit(cache=True)
def _hamming(work, skip, ay, ax, by, bx, r, cap):
    d = 0
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if skip[ay + dy, ax + dx]:
                continue
            if work[ay + dy, ax + dx] != work[by + dy, bx + dx]:
                d += 1
                if d >= cap:
                    return d
    return d


def patch_distance(a_center, b_center, m: np.ndarray, mask: np.ndarray, patch_size: int) -> int:
    """Hamming distance between two patches, skipping a-side masked positions."""
    m = as_labelmap(m)
    mask = as_mask(mask)
    r = patch_size // 2
    h, w = m.shape
    (ay, ax), (by, bx) = a_center, b_center
    for (y, x) in ((ay, ax), (by, bx)):
        if not (r <= y < h - r and r <= x < w - r):
            raise ValueError(f"patch at ({y},{x}) not fully inside {w}x{h} image")
    if mask[by - r:by + r + 1, bx - r:bx + r + 1].any():
        raise ValueError("target patch contains masked pixels")
    return int(_hamming(m, mask, ay, ax, by, bx, r, (patch_size * patch_size) + 1))


@njit(cache=True)
def _nnf_pass(work, skip, valid, center_idx, src_y, src_x, tgt_y, tgt_x, dist,
              forward, radii, rand, r):
    h, w = work.shape
    n = src_y.shape[0]
    cap_full = (2 * r + 1) * (2 * r + 1) + 1
    for ii in range(n):
        i = ii if forward else n - 1 - ii
        y = src_y[i]
        x = src_x[i]
        best = dist[i]
        # propagation from already-visited scan neighbors
        for nb in range(2):
            if forward:
                ny = y - 1 if nb == 0 else y
                nx = x if nb == 0 else x - 1
            else:
                ny = y + 1 if nb == 0 else y
                nx = x if nb == 0 else x + 1
            if ny < 0 or ny >= h or nx < 0 or nx >= w:
                continue
            j = center_idx[ny, nx]
            if j < 0:
                continue
            cy = tgt_y[j] + (y - ny)
            cx = tgt_x[j] + (x - nx)
            if cy < r or cy >= h - r or cx < r or cx >= w - r or not valid[cy, cx]:
                continue
            d = _hamming(work, skip, y, x, cy, cx, r, best)
            if d < best:
                best = d
                tgt_y[i] = cy
                tgt_x[i] = cx
                dist[i] = d
        # random search with decaying radius around the current best target
        for k in range(radii.shape[0]):
            rad = radii[k]
            cy = tgt_y[i] + int((rand[i, k, 0] * 2.0 - 1.0) * rad)
            cx = tgt_x[i] + int((rand[i, k, 1] * 2.0 - 1.0) * rad)
            if cy < r:
                cy = r
            if cy > h - 1 - r:
                cy = h - 1 - r
            if cx < r:
                cx = r
            if cx > w - 1 - r:
                cx = w - 1 - r
            if not valid[cy, cx]:
                continue
            d = _hamming(work, skip, y, x, cy, cx, r, best)
            if d < best:
                best = d
                tgt_y[i] = cy
                tgt_x[i] = cx
                dist[i] = d
    return dist


@njit(cache=True)
def _recompute(work, skip, src_y, src_x, tgt_y, tgt_x, dist, r, cap):
    for i in range(src_y.shape[0]):
        dist[i] = _hamming(work, skip, src_y[i], src_x[i], tgt_y[i], tgt_x[i], r, cap)


@njit(cache=True)
def _vote(work, mask, src_y, src_x, tgt_y, tgt_x, r, acc):
    for i in range(src_y.shape[0]):
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                py = src_y[i] + dy
                px = src_x[i] + dx
                if mask[py, px]:
                    acc[py, px, work[tgt_y[i] + dy, tgt_x[i] + dx]] += 1


def _valid_target_map(unknown: np.ndarray, r: int) -> np.ndarray:
    """Centers whose patch is fully inside and contains no unknown pixel."""
    h, w = unknown.shape
    counts = np.lib.stride_tricks.sliding_window_view(
        unknown.astype(np.int32), (2 * r + 1, 2 * r + 1)).sum(axis=(2, 3))
    valid = np.zeros((h, w), dtype=bool)
    valid[r:h - r, r:w - r] = counts == 0
    return valid


def _source_centers(mask: np.ndarray, r: int):
    """Row-major centers whose fully-inside patch overlaps the mask."""
    h, w = mask.shape
    counts = np.lib.stride_tricks.sliding_window_view(
        mask.astype(np.int32), (2 * r + 1, 2 * r + 1)).sum(axis=(2, 3))
    inner = np.zeros((h, w), dtype=bool)
    inner[r:h - r, r:w - r] = counts > 0
    ys, xs = np.nonzero(inner)  # row-major order
    return ys.astype(np.int32), xs.astype(np.int32)


def _radii(start: float, alpha: float) -> np.ndarray:
    radii = []
    rad = float(start)
    while rad >= 1.0:
        radii.append(rad)
        rad *= alpha
    return np.array(radii, dtype=np.float64) if radii else np.zeros(0, dtype=np.float64)


def init_nnf(work: np.ndarray, mask: np.ndarray, params: PatchParams,
             rng: np.random.Generator) -> NnfField:
    """Uniform random valid targets for every source patch center."""
    r = params.patch_size // 2
    src_y, src_x = _source_centers(mask, r)
    if src_y.size == 0:
        raise ValueError("mask has no coverable patch centers")
    valid = _valid_target_map(mask, r)
    vy, vx = np.nonzero(valid)
    if vy.size == 0:
        raise ValueError("no valid target patch: too little unmasked area for patch_size")
    pick = rng.integers(0, vy.size, size=src_y.size)
    tgt_y = vy[pick].astype(np.int32)
    tgt_x = vx[pick].astype(np.int32)
    dist = np.zeros(src_y.size, dtype=np.int64)
    skip = np.zeros_like(mask)
    _recompute(work, skip, src_y, src_x, tgt_y, tgt_x, dist, r, params.patch_size ** 2 + 1)
    return NnfField(src_y, src_x, tgt_y, tgt_x, dist)


def nnf_iterate(nnf: NnfField, m: np.ndarray, mask: np.ndarray, params: PatchParams,
                iteration: int = 0, rng: np.random.Generator | None = None) -> NnfField:
    """One propagation + random-search pass; total energy never increases.

    m is the working label map with masked pixels already filled by a current
    guess; mask marks which target patches are off limits. Scan order is
    forward on even iterations, backward on odd ones.
    """
    m = as_labelmap(m)
    mask = as_mask(mask)
    if rng is None:
        rng = np.random.default_rng(params.rng_seed + iteration)
    r = params.patch_size // 2
    h, w = m.shape
    out = nnf.copy()
    valid = _valid_target_map(mask, r)
    center_idx = np.full((h, w), -1, dtype=np.int64)
    center_idx[out.src_y, out.src_x] = np.arange(out.src_y.size)
    start = params.search_radius_start if params.search_radius_start is not None else max(h, w)
    radii = _radii(start, params.search_alpha)
    rand = rng.random((out.src_y.size, max(radii.size, 1), 2))
    skip = np.zeros_like(mask)
    _nnf_pass(m, skip, valid, center_idx, out.src_y, out.src_x, out.tgt_y, out.tgt_x,
              out.dist, iteration % 2 == 0, radii, rand, r)
    return out


def inpaint_patchmatch(m: np.ndarray, mask: np.ndarray, tax: ClassTaxonomy,
                       params: PatchParams = PatchParams()) -> np.ndarray:
    """Iterated NNF optimization plus majority-vote refill of the masked pixels."""
    m = as_labelmap(m)
    mask = as_mask(mask)
    if m.shape != mask.shape:
        raise ValueError(f"shape mismatch {m.shape} vs {mask.shape}")
    h, w = m.shape
    if min(h, w) < params.patch_size:
        raise ValueError(f"image {w}x{h} too small for patch_size {params.patch_size}")
    if not mask.any():
        return m.copy()
    # fill both the mask and unmasked dynamic pixels so the working map is
    # static-only; targets may not overlap either
    unknown = mask | extract_dynamic_mask(m, tax)
    work = inpaint_nn(m, unknown, tax)
    rng = np.random.default_rng(params.rng_seed)
    r = params.patch_size // 2
    nnf = init_nnf(work, unknown, params, rng)
    num_classes = tax.num_classes
    for _ in range(params.vote_iters):
        for it in range(params.nnf_iters):
            nnf = nnf_iterate(nnf, work, unknown, params, iteration=it, rng=rng)
        acc = np.zeros((h, w, num_classes), dtype=np.int64)
        _vote(work, mask, nnf.src_y, nnf.src_x, nnf.tgt_y, nnf.tgt_x, r, acc)
        voted = acc.argmax(axis=2).astype(np.uint8)  # ties -> lowest class id
        has_votes = mask & (acc.sum(axis=2) > 0)
        work = np.where(has_votes, voted, work).astype(np.uint8)
        skip = np.zeros_like(mask)
        _recompute(work, skip, nnf.src_y, nnf.src_x, nnf.tgt_y, nnf.tgt_x, nnf.dist,
                   r, params.patch_size ** 2 + 1)
    return compose_inpainted(m, work, mask)
