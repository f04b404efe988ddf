"""Reading and writing label maps and masks as 8-bit PNG files.

Label maps go out as single-channel indexed PNGs whose pixel values are class
ids (palette attached for viewability); masks as 0/255 grayscale PNGs. A color
renderer produces 24-bit RGB previews through the taxonomy palette.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .labelmap import as_labelmap, as_mask
from .taxonomy import ClassTaxonomy


def write_labelmap(path, m: np.ndarray, tax: ClassTaxonomy | None = None) -> None:
    m = as_labelmap(m)
    img = Image.fromarray(m, mode="P")
    # always attach a full 256-entry palette: without one PIL reduces the bit
    # depth on save and the stored indices no longer equal the class ids
    if tax is not None:
        pal = np.zeros((256, 3), dtype=np.uint8)
        pal[: tax.num_classes] = tax.palette()
    else:
        pal = np.repeat(np.arange(256, dtype=np.uint8)[:, None], 3, axis=1)
    img.putpalette(pal.flatten().tolist())
    img.save(path, format="PNG")


def read_labelmap(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode not in ("P", "L"):
        raise ValueError(f"{path}: expected indexed or grayscale PNG, got mode {img.mode}")
    return np.asarray(img, dtype=np.uint8)


def write_mask(path, mask: np.ndarray) -> None:
    mask = as_mask(mask)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def read_mask(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode not in ("L", "P", "1"):
        raise ValueError(f"{path}: expected grayscale mask PNG, got mode {img.mode}")
    return np.asarray(img.convert("L")) > 0


def write_color_render(path, m: np.ndarray, tax: ClassTaxonomy) -> None:
    m = as_labelmap(m)
    rgb = tax.palette()[m]
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
