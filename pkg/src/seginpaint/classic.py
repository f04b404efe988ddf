"""Nearest-neighbor and diffusion-based inpainting of categorical label maps.

Both engines fill masked pixels with static-class labels and leave everything
else untouched. The nearest-neighbor engine is exact: each masked pixel takes
the label of the closest unmasked static pixel (Euclidean metric, ties broken
by row-major order of the candidate). The diffusion engine lifts the label map
to per-class indicator channels, evolves the masked region with an explicit
scheme combining plain diffusion and an isophote-transport term, and hardens
the result with an argmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .labelmap import as_labelmap, as_mask, compose_inpainted, decode_argmax
from .taxonomy import ClassTaxonomy


class NoContextError(ValueError):
    """No unmasked static-class pixel is available to copy from."""


def inpaint_nn(m: np.ndarray, mask: np.ndarray, tax: ClassTaxonomy) -> np.ndarray:
    """Assign each masked pixel the label of its nearest unmasked static pixel."""
    m = as_labelmap(m)
    mask = as_mask(mask)
    if m.shape != mask.shape:
        raise ValueError(f"shape mismatch {m.shape} vs {mask.shape}")
    h, w = m.shape
    candidates = ~mask & tax.is_static_lut()[m]
    if not candidates.any():
        raise NoContextError("no unmasked static-class pixel available")
    out = m.copy()
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return out
    # exact Euclidean distance to the candidate set, then resolve the row-major
    # earliest candidate at that exact distance by enumerating lattice offsets
    dist = ndimage.distance_transform_edt(~candidates)
    r2 = np.rint(dist[ys, xs] ** 2).astype(np.int64)
    for val in np.unique(r2):
        grp = np.nonzero(r2 == val)[0]
        gy, gx = ys[grp], xs[grp]
        pending = np.ones(grp.size, dtype=bool)
        for dy, dx in _offsets_at_squared_radius(int(val)):
            if not pending.any():
                break
            cy, cx = gy + dy, gx + dx
            ok = pending & (cy >= 0) & (cy < h) & (cx >= 0) & (cx < w)
            sel = np.nonzero(ok)[0]
            sel = sel[candidates[cy[sel], cx[sel]]]
            if sel.size:
                out[gy[sel], gx[sel]] = m[cy[sel], cx[sel]]
                pending[sel] = False
        if pending.any():  # numerical safety net; not expected to trigger
            for k in np.nonzero(pending)[0]:
                out[gy[k], gx[k]] = _nn_single(m, candidates, int(gy[k]), int(gx[k]))
    return out


def _offsets_at_squared_radius(r2: int):
    """Integer (dy, dx) with dy*dy + dx*dx == r2, in ascending (dy, dx) order."""
    r = math.isqrt(r2)
    offs = []
    for dy in range(-r, r + 1):
        rem = r2 - dy * dy
        dx = math.isqrt(rem)
        if dx * dx == rem:
            if dx == 0:
                offs.append((dy, 0))
            else:
                offs.append((dy, -dx))
                offs.append((dy, dx))
    return offs


def _nn_single(m, candidates, y, x):
    cy, cx = np.nonzero(candidates)
    d = (cy - y) ** 2 + (cx - x) ** 2
    return m[cy[d.argmin()], cx[d.argmin()]]


@dataclass(frozen=True)
class DiffusionParams:
    dt: float = 0.1
    max_iters: int = 2000
    residual_tol: float = 1e-4
    transport_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.25:
            raise ValueError("dt must be in (0, 0.25] for stability")
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")
        if self.transport_weight < 0:
            raise ValueError("transport_weight must be >= 0")


@dataclass(frozen=True)
class NsResult:
    labels: np.ndarray
    converged: bool
    iterations: int


def _laplacian(u: np.ndarray) -> np.ndarray:
    """5-point Laplacian with edge replication, over (K, H, W)."""
    p = np.pad(u, ((0, 0), (1, 1), (1, 1)), mode="edge")
    return p[:, :-2, 1:-1] + p[:, 2:, 1:-1] + p[:, 1:-1, :-2] + p[:, 1:-1, 2:] - 4.0 * u


def _central_diff(u: np.ndarray):
    """(d/dy, d/dx) central differences with one-sided borders, over (K, H, W)."""
    dy = np.empty_like(u)
    dy[:, 1:-1] = (u[:, 2:] - u[:, :-2]) * 0.5
    dy[:, 0] = u[:, 1] - u[:, 0]
    dy[:, -1] = u[:, -1] - u[:, -2]
    dx = np.empty_like(u)
    dx[:, :, 1:-1] = (u[:, :, 2:] - u[:, :, :-2]) * 0.5
    dx[:, :, 0] = u[:, :, 1] - u[:, :, 0]
    dx[:, :, -1] = u[:, :, -1] - u[:, :, -2]
    return dy, dx


def inpaint_navier_stokes(m: np.ndarray, mask: np.ndarray, tax: ClassTaxonomy,
                          params: DiffusionParams = DiffusionParams()) -> NsResult:
    """Per-channel diffusion/transport fill of the masked region.

    The label map is encoded as indicator channels over the static classes;
    dynamic-class pixels contribute no boundary data and are treated as
    unknown alongside the mask. Unmasked static pixels act as Dirichlet
    boundary values. The update interleaves the smoothness-transport term
    grad(lap u) . perp(grad u) with plain diffusion whose weight ramps up
    linearly over the first half of the iteration budget, and clamps the
    channels to [0, 1] after every step.
    """
    m = as_labelmap(m)
    mask = as_mask(mask)
    if m.shape != mask.shape:
        raise ValueError(f"shape mismatch {m.shape} vs {mask.shape}")
    if not mask.any():
        return NsResult(m.copy(), True, 0)
    static_ids = np.array(tax.static_ids)
    known = ~mask & tax.is_static_lut()[m]
    if not known.any():
        raise NoContextError("no unmasked static-class pixel available")
    unknown = ~known
    k = len(static_ids)
    u = np.full((k, *m.shape), 1.0 / k, dtype=np.float32)
    for c, sid in enumerate(static_ids):
        u[c, known] = (m[known] == sid).astype(np.float32)

    half = max(params.max_iters / 2.0, 1.0)
    converged = False
    it = 0
    for it in range(1, params.max_iters + 1):
        ramp = min(1.0, it / half)
        lap = _laplacian(u)
        upd = ramp * lap
        if params.transport_weight > 0.0:
            lap_y, lap_x = _central_diff(lap)
            u_y, u_x = _central_diff(u)
            transport = lap_x * (-u_y) + lap_y * u_x
            upd += params.transport_weight * transport
        stepped = np.clip(u + np.float32(params.dt) * upd, 0.0, 1.0)
        delta = np.abs(stepped[:, unknown] - u[:, unknown])
        residual = float(delta.max()) if delta.size else 0.0
        u[:, unknown] = stepped[:, unknown]
        if residual < params.residual_tol:
            converged = True
            break
    filled = decode_argmax(np.moveaxis(u, 0, 2), channel_ids=static_ids)
    return NsResult(compose_inpainted(m, filled, mask), converged, it)
