"""Quantitative evaluation of inpainted label maps against paired ground truth.

The headline number is the per-image masked accuracy averaged across images;
pixel-pooled accuracy and a row-normalized confusion matrix over masked pixels
are reported alongside. Reports go out as CSV plus a deterministic heatmap PNG.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import pngio
from .labelmap import as_labelmap, as_mask
from .synth import read_manifest
from .taxonomy import ClassTaxonomy


def masked_accuracy(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    pred = as_labelmap(pred)
    truth = as_labelmap(truth)
    mask = as_mask(mask)
    if not (pred.shape == truth.shape == mask.shape):
        raise ValueError(f"shape mismatch {pred.shape} / {truth.shape} / {mask.shape}")
    n = int(mask.sum())
    if n == 0:
        raise ValueError("empty mask")
    return float((pred[mask] == truth[mask]).sum()) / n


@dataclass
class ConfusionMatrix:
    """Counts over masked pixels: rows are true static classes, columns predicted."""

    counts: np.ndarray
    class_ids: np.ndarray
    class_names: list

    @property
    def normalized(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        out = np.zeros_like(self.counts, dtype=np.float64)
        np.divide(self.counts, sums, out=out, where=sums > 0)
        return out

    @property
    def empty_rows(self) -> np.ndarray:
        return self.counts.sum(axis=1) == 0

    @property
    def pooled_accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts)) / total if total else 0.0

    def per_class_accuracy(self) -> dict:
        norm = self.normalized
        return {name: float(norm[i, i]) for i, name in enumerate(self.class_names)
                if not self.empty_rows[i]}


def confusion_matrix(pairs, tax: ClassTaxonomy) -> ConfusionMatrix:
    """Accumulate (pred, truth, mask) triples over masked pixels only."""
    static_ids = np.array(tax.static_ids)
    names = [tax.classes[i].name for i in static_ids]
    pos = np.full(256, -1, dtype=np.int64)
    pos[static_ids] = np.arange(len(static_ids))
    k = len(static_ids)
    counts = np.zeros((k, k), dtype=np.int64)
    for pred, truth, mask in pairs:
        mask = as_mask(mask)
        p = pos[as_labelmap(pred)[mask]]
        t = pos[as_labelmap(truth)[mask]]
        if (p < 0).any() or (t < 0).any():
            raise ValueError("dynamic-class label inside the mask")
        counts += np.bincount(t * k + p, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts, static_ids, names)


@dataclass
class EvalResult:
    method: str
    per_image: list = field(default_factory=list)
    per_class: dict = field(default_factory=dict)
    n: int = 0
    excluded_empty: int = 0
    pooled_accuracy: float = 0.0
    errors: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_image)) if self.per_image else 0.0


def evaluate_dataset(manifest_path, pred_dir, tax: ClassTaxonomy,
                     method: str = "method"):
    """Score every manifest sample's prediction; returns (EvalResult, ConfusionMatrix).

    Missing predictions and dimension mismatches are recorded per sample in
    result.errors and the run continues.
    """
    base = os.path.dirname(os.path.abspath(manifest_path))
    result = EvalResult(method=method)
    pairs = []
    for rec in read_manifest(manifest_path):
        pred_path = os.path.join(pred_dir, rec["id"] + ".png")
        try:
            pred = pngio.read_labelmap(pred_path)
        except (FileNotFoundError, ValueError) as e:
            result.errors.append(f"{rec['id']}: {e}")
            continue
        truth = pngio.read_labelmap(os.path.join(base, rec["static_png"]))
        mask = pngio.read_mask(os.path.join(base, rec["mask_png"]))
        if pred.shape != truth.shape:
            result.errors.append(
                f"{rec['id']}: prediction shape {pred.shape} != truth {truth.shape}")
            continue
        if not mask.any():
            result.excluded_empty += 1
            continue
        result.per_image.append(masked_accuracy(pred, truth, mask))
        pairs.append((pred, truth, mask))
        result.n += 1
    if pairs:
        cm = confusion_matrix(pairs, tax)
        result.pooled_accuracy = cm.pooled_accuracy
        result.per_class = cm.per_class_accuracy()
    else:
        k = len(tax.static_ids)
        cm = ConfusionMatrix(np.zeros((k, k), dtype=np.int64), np.array(tax.static_ids),
                             [tax.classes[i].name for i in tax.static_ids])
    return result, cm


def _heat_color(v: float):
    # fixed blue-to-yellow ramp, byte-deterministic
    return (int(round(255 * v)), int(round(220 * v)), int(round(160 * (1.0 - v) + 32)))


def render_heatmap(cm: ConfusionMatrix, path, cell: int = 32) -> None:
    norm = cm.normalized
    k = norm.shape[0]
    img = np.zeros((k * cell, k * cell, 3), dtype=np.uint8)
    for i in range(k):
        for j in range(k):
            img[i * cell:(i + 1) * cell, j * cell:(j + 1) * cell] = _heat_color(norm[i, j])
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    norm = cm.normalized
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["true\\pred"] + cm.class_names + ["row_count"])
        for i, name in enumerate(cm.class_names):
            w.writerow([name] + [f"{v:.6f}" for v in norm[i]] + [int(cm.counts[i].sum())])


def write_accuracy_csv(results, path) -> None:
    class_names = sorted({name for r in results for name in r.per_class})
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "mean_accuracy", "pooled_accuracy", "n", "excluded_empty"]
                   + class_names)
        for r in results:
            w.writerow([r.method, f"{r.mean:.6f}", f"{r.pooled_accuracy:.6f}", r.n,
                        r.excluded_empty]
                       + [f"{r.per_class[c]:.6f}" if c in r.per_class else "" for c in class_names])


def render_report(results, cms: dict, out_dir) -> list:
    """Write accuracy.csv plus per-method confusion CSVs and heatmap PNGs."""
    if not results:
        raise ValueError("no evaluation results to report")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    acc_path = os.path.join(out_dir, "accuracy.csv")
    write_accuracy_csv(results, acc_path)
    written.append(acc_path)
    for method, cm in cms.items():
        cpath = os.path.join(out_dir, f"confusion_{method}.csv")
        write_confusion_csv(cm, cpath)
        written.append(cpath)
        hpath = os.path.join(out_dir, f"confusion_{method}.png")
        render_heatmap(cm, hpath)
        written.append(hpath)
    return written
