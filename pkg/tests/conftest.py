"""Shared fixtures for the seginpaint test suite."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))  # for the oracles helper module

from seginpaint import get_taxonomy


@pytest.fixture(scope="session")
def carla9():
    return get_taxonomy("carla9")


@pytest.fixture(scope="session")
def city12():
    return get_taxonomy("cityscapes12")


def random_labelmap(rng, h, w, tax, dynamic_frac=0.1, dynamic_blocks=False):
    """Random map over the taxonomy's classes with a controlled dynamic share.

    With dynamic_blocks the dynamic pixels form one or two compact rectangles
    instead of scatter, leaving clean static regions elsewhere.
    """
    static_ids = np.array(tax.static_ids)
    dynamic_ids = np.array(tax.dynamic_ids)
    m = static_ids[rng.integers(0, static_ids.size, size=(h, w))].astype(np.uint8)
    if dynamic_frac <= 0:
        return m
    if dynamic_blocks:
        for _ in range(int(rng.integers(1, 3))):
            bh = max(int(h * dynamic_frac), 1)
            bw = max(int(w * dynamic_frac), 1)
            y0 = int(rng.integers(0, h - bh + 1))
            x0 = int(rng.integers(0, w - bw + 1))
            m[y0:y0 + bh, x0:x0 + bw] = dynamic_ids[int(rng.integers(0, dynamic_ids.size))]
        return m
    dyn = rng.random((h, w)) < dynamic_frac
    if dyn.any():
        m[dyn] = dynamic_ids[rng.integers(0, dynamic_ids.size, size=int(dyn.sum()))]
    return m


def random_mask(rng, h, w, max_frac=0.3):
    """Random union of a rectangle and scattered pixels, below max_frac coverage."""
    mask = np.zeros((h, w), dtype=bool)
    mh = int(rng.integers(1, max(int(h * max_frac), 2) + 1))
    mw = int(rng.integers(1, max(int(w * max_frac), 2) + 1))
    y0 = int(rng.integers(0, h - mh + 1))
    x0 = int(rng.integers(0, w - mw + 1))
    mask[y0:y0 + mh, x0:x0 + mw] = True
    mask |= rng.random((h, w)) < 0.02
    return mask
