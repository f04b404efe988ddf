"""Uniform dispatch over the four inpainting engines."""

from __future__ import annotations

import numpy as np

from .classic import DiffusionParams, inpaint_navier_stokes, inpaint_nn
from .patchmatch import PatchParams, inpaint_patchmatch
from .taxonomy import ClassTaxonomy

METHODS = ("nn", "ns", "pm", "learned")


def run_engine(method: str, m: np.ndarray, mask: np.ndarray, tax: ClassTaxonomy,
               diffusion: DiffusionParams | None = None,
               patch: PatchParams | None = None,
               generator=None) -> np.ndarray:
    """Run one engine; returns a label map obeying the shared engine contract."""
    if method == "nn":
        out = m.copy()
        if mask.any():
            out = inpaint_nn(m, mask, tax)
        return out
    if method == "ns":
        return inpaint_navier_stokes(m, mask, tax, diffusion or DiffusionParams()).labels
    if method == "pm":
        return inpaint_patchmatch(m, mask, tax, patch or PatchParams())
    if method == "learned":
        from .learned import infer_inpaint
        if generator is None:
            raise ValueError("learned engine requires a generator (checkpoint)")
        return infer_inpaint(generator, m, mask, tax)
    raise ValueError(f"unknown inpainting method {method!r}; choices: {METHODS}")
