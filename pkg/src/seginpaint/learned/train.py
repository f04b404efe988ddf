"""Training loop for the learned categorical inpainter.

Each step samples seeded crops of static ground-truth frames, blanks a random
rectangle, and optimizes the generator with the discounted cross-entropy loss,
optionally plus a non-saturating adversarial term against a small patch
discriminator. The whole loop is a pure function of (dataset, config): per-step
seeds derive from the config seed, so runs and resumes are reproducible.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, asdict

import numpy as np
import torch
from torch.nn import functional as F

from ..labelmap import sample_training_crop
from ..synth import read_manifest, load_sample
from ..taxonomy import ClassTaxonomy, get_taxonomy
from .losses import discount_weight_map, weighted_ce
from .net import (Generator, Discriminator, init_params, save_checkpoint, load_checkpoint,
                  state_arrays, load_state_arrays)

ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 500
    batch_size: int = 8
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    gamma: float = 0.99
    adv_weight: float = 0.01
    seed: int = 0
    crop_w: int = 256
    crop_h: int = 128

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.adv_weight < 0:
            raise ValueError("adv_weight must be >= 0")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")


@dataclass(frozen=True)
class LossReport:
    step: int
    ce: float
    adv_g: float
    adv_d: float
    batch_acc: float


def static_index_lut(tax: ClassTaxonomy) -> np.ndarray:
    """Class id -> position in the static channel set (-1 for dynamic ids)."""
    lut = np.full(256, -1, dtype=np.int64)
    for i, sid in enumerate(tax.static_ids):
        lut[sid] = i
    return lut


def build_generator_input(labels: np.ndarray, masks: np.ndarray, num_classes: int) -> torch.Tensor:
    """(B,H,W) labels + (B,H,W) masks -> (B, C+1, H, W) masked one-hot input."""
    b, h, w = labels.shape
    x = np.zeros((b, num_classes + 1, h, w), dtype=np.float32)
    flat = np.arange(b)[:, None, None]
    x[flat, labels.astype(np.int64), np.arange(h)[None, :, None], np.arange(w)[None, None, :]] = 1.0
    x[:, :num_classes][np.broadcast_to(masks[:, None], (b, num_classes, h, w))] = 0.0
    x[:, num_classes] = masks.astype(np.float32)
    return torch.from_numpy(x)


def generator_losses(gen: Generator, disc: Discriminator | None, x: torch.Tensor,
                     target_idx: torch.Tensor, mask_t: torch.Tensor, weights: torch.Tensor,
                     adv_weight: float):
    """Forward pass producing (total generator loss, ce, adv_g, fake tensor)."""
    logits = gen(x)
    ce = weighted_ce(logits, target_idx, weights)
    k = logits.shape[1]
    real = F.one_hot(target_idx, k).permute(0, 3, 1, 2).to(logits.dtype)
    soft = torch.softmax(logits, dim=1)
    m = mask_t.unsqueeze(1).to(logits.dtype)
    fake = real * (1.0 - m) + soft * m
    if disc is not None and adv_weight > 0:
        adv_g = F.softplus(-disc(fake)).mean()
        total = ce + adv_weight * adv_g
    else:
        adv_g = torch.zeros((), dtype=logits.dtype)
        total = ce
    return total, ce, adv_g, fake, logits


def train_step(gen: Generator, disc: Discriminator, opt_g, opt_d,
               targets: np.ndarray, masks: np.ndarray, tax: ClassTaxonomy,
               cfg: TrainConfig, step: int = 0) -> LossReport:
    """One optimizer update on a batch of (static-frame crop, rectangle mask)."""
    lut = static_index_lut(tax)
    target_idx_np = lut[targets]
    if (target_idx_np < 0).any():
        raise ValueError("training targets contain dynamic-class labels")
    weights_np = np.stack([discount_weight_map(m, cfg.gamma) for m in masks])
    x = build_generator_input(targets, masks, tax.num_classes)
    target_idx = torch.from_numpy(target_idx_np)
    mask_t = torch.from_numpy(masks)
    weights = torch.from_numpy(weights_np)

    total, ce, adv_g, fake, logits = generator_losses(
        gen, disc, x, target_idx, mask_t, weights, cfg.adv_weight)
    if not torch.isfinite(total):
        raise RuntimeError(f"non-finite generator loss at step {step}: {float(total)}")
    opt_g.zero_grad(set_to_none=True)
    total.backward()
    opt_g.step()

    adv_d = 0.0
    if cfg.adv_weight > 0:
        k = logits.shape[1]
        real = F.one_hot(target_idx, k).permute(0, 3, 1, 2).float()
        d_loss = F.softplus(-disc(real)).mean() + F.softplus(disc(fake.detach())).mean()
        if not torch.isfinite(d_loss):
            raise RuntimeError(f"non-finite discriminator loss at step {step}: {float(d_loss)}")
        opt_d.zero_grad(set_to_none=True)
        d_loss.backward()
        opt_d.step()
        adv_d = float(d_loss.detach())

    with torch.no_grad():
        pred = logits.argmax(dim=1)
        agree = (pred == target_idx) & mask_t
        denom = int(mask_t.sum())
        acc = float(agree.sum()) / denom if denom else 1.0
    return LossReport(step, float(ce.detach()), float(adv_g.detach()), adv_d, acc)


def _adam_arrays(opt, model, prefix):
    arrays = {}
    params = list(model.parameters())
    for i, p in enumerate(params):
        st = opt.state.get(p)
        if st:
            arrays[f"{prefix}.{i}.exp_avg"] = st["exp_avg"].numpy()
            arrays[f"{prefix}.{i}.exp_avg_sq"] = st["exp_avg_sq"].numpy()
            arrays[f"{prefix}.{i}.step"] = np.array([float(st["step"])], dtype=np.float32)
    return arrays


def _load_adam_arrays(opt, model, arrays, prefix):
    for i, p in enumerate(model.parameters()):
        key = f"{prefix}.{i}.exp_avg"
        if key not in arrays:
            continue
        opt.state[p] = {
            "step": torch.tensor(float(arrays[f"{prefix}.{i}.step"][0])),
            "exp_avg": torch.from_numpy(arrays[key].copy()),
            "exp_avg_sq": torch.from_numpy(arrays[f"{prefix}.{i}.exp_avg_sq"].copy()),
        }


def fit(manifest_path, cfg: TrainConfig, ckpt_path, taxonomy: str | ClassTaxonomy = "carla9",
        resume: bool = False, loss_csv=None):
    """Train from a dataset manifest; writes a checkpoint and a per-step loss CSV.

    Returns (generator, list of LossReport).
    """
    tax = get_taxonomy(taxonomy) if isinstance(taxonomy, str) else taxonomy
    records = read_manifest(manifest_path)
    if not records:
        raise ValueError(f"empty dataset manifest: {manifest_path}")
    frames = [load_sample(manifest_path, rec).static_frame for rec in records]

    torch.set_num_threads(1)  # bit-reproducibility of the training sequence
    num_s = len(tax.static_ids)
    gen = Generator(tax.num_classes + 1, num_s)
    disc = Discriminator(num_s)
    init_params(gen, cfg.seed)
    init_params(disc, cfg.seed + 1)
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2),
                             eps=ADAM_EPS)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2),
                             eps=ADAM_EPS)
    start_step = 0
    if resume and os.path.exists(ckpt_path):
        tax_name, arrays, sidecar = load_checkpoint(ckpt_path)
        if tax_name != tax.name:
            raise ValueError(f"checkpoint taxonomy {tax_name!r} != requested {tax.name!r}")
        load_state_arrays(gen, arrays, "gen")
        load_state_arrays(disc, arrays, "disc")
        _load_adam_arrays(opt_g, gen, arrays, "opt_g")
        _load_adam_arrays(opt_d, disc, arrays, "opt_d")
        start_step = int(sidecar.get("step", 0))

    reports = []
    for step in range(start_step, cfg.steps):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, step]))
        idxs = rng.integers(0, len(frames), size=cfg.batch_size)
        crops, masks = [], []
        for i in idxs:
            crop, mask = sample_training_crop(
                frames[i], int(rng.integers(0, 2 ** 31)), crop_size=(cfg.crop_w, cfg.crop_h))
            crops.append(crop)
            masks.append(mask)
        reports.append(train_step(gen, disc, opt_g, opt_d, np.stack(crops), np.stack(masks),
                                  tax, cfg, step))

    arrays = {}
    arrays.update(state_arrays(gen, "gen"))
    arrays.update(state_arrays(disc, "disc"))
    arrays.update(_adam_arrays(opt_g, gen, "opt_g"))
    arrays.update(_adam_arrays(opt_d, disc, "opt_d"))
    save_checkpoint(ckpt_path, arrays, tax.name,
                    {"config": asdict(cfg), "step": cfg.steps, "taxonomy": tax.name})
    if loss_csv:
        write_header = not (resume and os.path.exists(loss_csv) and start_step > 0)
        with open(loss_csv, "a" if not write_header else "w", newline="") as f:
            w = csv.writer(f)
            if write_header:
                w.writerow(["step", "ce", "adv_g", "adv_d", "batch_acc"])
            for r in reports:
                w.writerow([r.step, f"{r.ce:.6f}", f"{r.adv_g:.6f}", f"{r.adv_d:.6f}",
                            f"{r.batch_acc:.6f}"])
    return gen, reports


def load_generator(ckpt_path):
    """Rebuild a generator (and its taxonomy) from a checkpoint file."""
    tax_name, arrays, _ = load_checkpoint(ckpt_path)
    tax = get_taxonomy(tax_name)
    gen = Generator(tax.num_classes + 1, len(tax.static_ids))
    load_state_arrays(gen, arrays, "gen")
    return gen, tax
