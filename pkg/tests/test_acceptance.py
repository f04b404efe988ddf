"""Acceptance gate: one test per criterion, with pinned tolerances.

The absolute benchmark numbers of the original evaluation protocol are not
reproducible at this scale, so acceptance is property-based (engine outputs
against independent oracles, training-progress thresholds, dataset protocol
checks) plus reproduction of the relative ordering of the engines on a seeded
synthetic evaluation set.
"""

import dataclasses
import json
import os

import numpy as np
import pytest
import torch

import seginpaint as sp
from seginpaint import pngio
from seginpaint.classic import DiffusionParams, inpaint_navier_stokes, inpaint_nn
from seginpaint.engines import run_engine
from seginpaint.evalkit import confusion_matrix, evaluate_dataset, masked_accuracy
from seginpaint.labelmap import sample_training_crop
from seginpaint.learned.losses import discount_weight_map
from seginpaint.learned.net import Discriminator, Generator, init_params
from seginpaint.learned.train import (TrainConfig, build_generator_input, fit,
                                      generator_losses)
from seginpaint.patchmatch import PatchParams, init_nnf, inpaint_patchmatch, nnf_iterate
from seginpaint.synth import (SynthConfig, build_dataset, generate_scene_pair,
                              load_sample, random_scene_spec, read_manifest)
from conftest import random_labelmap, random_mask
from oracles import brute_force_nn, harmonic_agreement
from test_patchmatch import planted_scene

torch.set_num_threads(1)

TAX = sp.get_taxonomy("carla9")


def _write_frameset(out_dir, pairs):
    """Write paired samples as a dataset directory with a JSONL manifest."""
    for sub in ("dynamic", "static", "mask"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    records = []
    for i, pair in enumerate(pairs):
        sid = f"{i:06d}"
        rel = {k: os.path.join(k, sid + ".png") for k in ("dynamic", "static", "mask")}
        pngio.write_labelmap(os.path.join(out_dir, rel["dynamic"]), pair.dynamic_frame, TAX)
        pngio.write_labelmap(os.path.join(out_dir, rel["static"]), pair.static_frame, TAX)
        pngio.write_mask(os.path.join(out_dir, rel["mask"]), pair.mask)
        records.append({"id": sid, "dynamic_png": rel["dynamic"],
                        "static_png": rel["static"], "mask_png": rel["mask"],
                        "dyn_pixels": int(pair.mask.sum()), "seed": i})
    manifest = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    return manifest


def test_criterion_1_nn_exact_oracle():
    """NN inpainting is pixel-identical to the brute-force all-pairs oracle."""
    rng = np.random.default_rng(101)
    for _ in range(200):
        m = random_labelmap(rng, 32, 32, TAX, dynamic_frac=0.1)
        mask = random_mask(rng, 32, 32)
        got = inpaint_nn(m, mask, TAX)
        want = brute_force_nn(m, mask, TAX)
        assert (got == want).all()
    print("[criterion 1] PASS: 200/200 instances bit-identical to the brute-force oracle")


def test_criterion_2_diffusion_correctness():
    """Pure diffusion agrees with a dense harmonic solve on >= 99% of masked pixels."""
    params = DiffusionParams(transport_weight=0.0, dt=0.2, max_iters=20_000,
                             residual_tol=1e-6)
    rng = np.random.default_rng(102)
    worst = 1.0
    for _ in range(50):
        h, w = int(rng.integers(10, 33)), int(rng.integers(10, 33))
        m = random_labelmap(rng, h, w, TAX, dynamic_frac=0.05)
        mask = random_mask(rng, h, w, max_frac=0.35)
        if not mask.any():
            mask[h // 2, w // 2] = True
        got = inpaint_navier_stokes(m, mask, TAX, params).labels
        agree = harmonic_agreement(m, mask, TAX, got)
        worst = min(worst, agree)
        assert agree >= 0.99
    # constant-class boundary: the fill must be exactly that class
    m = np.full((16, 16), 1, dtype=np.uint8)
    mask = np.zeros((16, 16), bool)
    mask[4:12, 4:12] = True
    res = inpaint_navier_stokes(m, mask, TAX, params)
    assert (res.labels == 1).all()
    print(f"[criterion 2] PASS: 50/50 instances >= 99% oracle agreement "
          f"(worst {worst:.3f}); constant boundary exact")


def test_criterion_3_patchmatch_properties():
    """NNF energy never increases; planted duplicates are recovered exactly."""
    rng = np.random.default_rng(103)
    for i in range(50):
        m = random_labelmap(rng, 24, 24, TAX, dynamic_frac=0.0)
        mask = np.zeros((24, 24), bool)
        mask[8:15, 8:15] = True
        work = inpaint_nn(m, mask, TAX)
        params = PatchParams(patch_size=5, rng_seed=i)
        nnf = init_nnf(work, mask, params, np.random.default_rng(i))
        energy = nnf.energy
        for it in range(4):
            nnf = nnf_iterate(nnf, work, mask, params, iteration=it)
            assert nnf.energy <= energy
            energy = nnf.energy
    recovered = 0
    for seed in range(50):
        m, mask = planted_scene(seed, TAX)
        out = inpaint_patchmatch(m, mask, TAX, PatchParams(rng_seed=seed))
        recovered += int((out[mask] == m[mask]).all())
    assert recovered >= 45
    print(f"[criterion 3] PASS: energy monotone on 50/50 instances; "
          f"planted duplicates recovered {recovered}/50 (>= 45 required)")


def test_criterion_4_gradient_check():
    """Analytic generator gradients match central finite differences.

    Quarter-width network, 8x8 input, 3 classes, double precision, step 1e-4,
    max relative error < 1e-3. Parameters whose perturbation flips a leaky-ReLU
    activation sign are excluded: the loss is not differentiable across the
    kink, so the central difference does not estimate the one-sided derivative
    there. The exclusion must stay marginal (< 2% of parameters).
    """
    gen = Generator(4, 3, width=8).double()
    disc = Discriminator(3, width=4).double()
    init_params(gen, 104)
    init_params(disc, 105)
    rng = np.random.default_rng(104)
    labels = rng.integers(0, 3, size=(1, 8, 8)).astype(np.uint8)
    masks = np.zeros((1, 8, 8), bool)
    masks[0, 2:6, 2:6] = True
    x = build_generator_input(labels, masks, 3).double()
    target_idx = torch.from_numpy(labels.astype(np.int64))
    mask_t = torch.from_numpy(masks)
    weights = torch.from_numpy(
        discount_weight_map(masks[0], 0.99)[None].astype(np.float64))
    adv_weight = 0.01

    signs = []
    hooked = [gen.conv1, gen.conv2, gen.conv3, gen.conv4, gen.conv5,
              disc.conv1, disc.conv2, disc.conv3]
    handles = [mod.register_forward_hook(
        lambda _m, _i, out: signs.append(out.detach() >= 0)) for mod in hooked]

    def loss_and_signs():
        signs.clear()
        total, *_ = generator_losses(gen, disc, x, target_idx, mask_t, weights, adv_weight)
        return total, [s.clone() for s in signs]

    total, _ = loss_and_signs()
    gen.zero_grad()
    total.backward()
    analytic = [p.grad.detach().clone() for p in gen.parameters()]

    eps = 1e-4
    checked = skipped = 0
    max_rel = 0.0
    with torch.no_grad():
        for p, g in zip(gen.parameters(), analytic):
            flat = p.view(-1)
            gflat = g.view(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + eps
                lp, sp_ = loss_and_signs()
                flat[i] = orig - eps
                lm, sm_ = loss_and_signs()
                flat[i] = orig
                if any((a != b).any() for a, b in zip(sp_, sm_)):
                    skipped += 1  # finite difference straddles a ReLU kink
                    continue
                fd = (float(lp) - float(lm)) / (2 * eps)
                an = float(gflat[i])
                rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
                max_rel = max(max_rel, rel)
                checked += 1
    for h in handles:
        h.remove()
    total_params = checked + skipped
    assert skipped / total_params < 0.02
    assert max_rel < 1e-3
    print(f"[criterion 4] PASS: {checked} parameters checked, max relative error "
          f"{max_rel:.2e} < 1e-3 ({skipped} kink-straddling parameters excluded)")


@pytest.fixture(scope="module")
def toy_trainset(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("toy64"))
    pairs = []
    seed = 60_000
    while len(pairs) < 64:
        seed += 1
        spec = random_scene_spec(seed)
        pairs.append(generate_scene_pair(spec, 200, 150, TAX))
    return _write_frameset(out, pairs)


def test_criterion_5_training_progress(toy_trainset, tmp_path):
    """500 steps on the 64-sample toy set halve the CE and pass 0.60 accuracy."""
    cfg = TrainConfig(steps=500, batch_size=8, crop_w=128, crop_h=64, seed=0)
    _, reports = fit(toy_trainset, cfg, tmp_path / "toy.ckpt", TAX,
                     loss_csv=tmp_path / "toy.csv")
    ce_initial = reports[0].ce
    ce_final = float(np.mean([r.ce for r in reports[-10:]]))
    acc_final = float(np.mean([r.batch_acc for r in reports[-10:]]))
    assert ce_final <= 0.5 * ce_initial
    assert acc_final > 0.60
    print(f"[criterion 5] PASS: CE {ce_initial:.3f} -> {ce_final:.3f} "
          f"(<= 50% required), masked accuracy {acc_final:.3f} (> 0.60 required)")


def test_criterion_6_engine_contracts():
    """Unmasked pixels unchanged, masked pixels static, bit-determinism; 500 pairs."""
    gen = Generator(TAX.num_classes + 1, len(TAX.static_ids), width=8)
    init_params(gen, 106)
    is_static = TAX.is_static_lut()
    rng = np.random.default_rng(106)
    diffusion = DiffusionParams(max_iters=80)
    for i in range(500):
        h, w = int(rng.integers(12, 29)), int(rng.integers(12, 29))
        m = random_labelmap(rng, h, w, TAX, dynamic_frac=0.15, dynamic_blocks=True)
        mask = random_mask(rng, h, w)
        if rng.random() < 0.05:
            mask[:] = False
        m[0, 0] = 1  # guarantee an unmasked static context pixel
        mask[0, 0] = False
        patch = PatchParams(patch_size=5, nnf_iters=2, vote_iters=1, rng_seed=i)
        for method in ("nn", "ns", "pm", "learned"):
            out = run_engine(method, m, mask, TAX, diffusion=diffusion, patch=patch,
                             generator=gen)
            again = run_engine(method, m, mask, TAX, diffusion=diffusion, patch=patch,
                               generator=gen)
            assert (out == again).all(), f"{method}: nondeterministic on instance {i}"
            assert (out[~mask] == m[~mask]).all(), f"{method}: unmasked pixel changed"
            if mask.any():
                assert is_static[out[mask]].all(), f"{method}: dynamic label in fill"
    print("[criterion 6] PASS: 500 fuzzed instances x 4 engines obey the "
          "engine contract bit-exactly")


def _ordering_scene(seed):
    """Evaluation scenes with paper-scale occluders (large cars close to camera)."""
    s = random_scene_spec(seed)
    return dataclasses.replace(s, car_scale=0.75, car_tmin=0.65,
                               car_count=max(s.car_count % 3 + 2, 2) + 1,
                               person_count=s.person_count % 5,
                               person_scale=0.4)


@pytest.fixture(scope="module")
def ordering_generator(tmp_path_factory):
    """Generator trained on 64 large-occluder scenes disjoint from the eval seeds."""
    out = str(tmp_path_factory.mktemp("ordering_train"))
    w, h = 96, 72
    pairs = []
    seed = 50_000
    while len(pairs) < 64:
        seed += 1
        pair = generate_scene_pair(_ordering_scene(seed), w, h, TAX)
        if pair.mask.sum() < 0.0104 * w * h:
            continue
        pairs.append(pair)
    manifest = _write_frameset(out, pairs)
    cfg = TrainConfig(steps=500, batch_size=8, seed=7, crop_w=w, crop_h=h)
    gen, _ = fit(manifest, cfg, os.path.join(out, "gen.ckpt"), TAX)
    return gen


def test_criterion_7_relative_ordering(ordering_generator):
    """On 200 eval scenes: NN > NS, NN > PM; the learned engine > NS and > PM."""
    w, h = 96, 72
    accs = {m: [] for m in ("nn", "ns", "pm", "learned")}
    n = 0
    seed = 13_000
    while n < 200:
        seed += 1
        pair = generate_scene_pair(_ordering_scene(seed), w, h, TAX)
        if pair.mask.sum() < 0.0104 * w * h:
            continue
        n += 1
        for method in accs:
            out = run_engine(method, pair.dynamic_frame, pair.mask, TAX,
                             generator=ordering_generator)
            accs[method].append(masked_accuracy(out, pair.static_frame, pair.mask))
    mean = {m: float(np.mean(v)) for m, v in accs.items()}
    assert mean["nn"] > mean["ns"]
    assert mean["nn"] > mean["pm"]
    assert mean["learned"] > mean["ns"]
    assert mean["learned"] > mean["pm"]
    stretch = "met" if mean["learned"] > mean["nn"] else "not met"
    print(f"[criterion 7] PASS: n={n} mean masked accuracy "
          f"nn={mean['nn']:.4f} > ns={mean['ns']:.4f}, nn > pm={mean['pm']:.4f}; "
          f"learned={mean['learned']:.4f} > ns and > pm "
          f"(stretch goal learned > nn: {stretch}, non-gating)")


def test_criterion_8_dataset_protocol(tmp_path):
    """Post-correction alignment is exact; every kept sample beats the threshold."""
    cfg = SynthConfig(count=60, width=160, height=120, seed=108)
    summary = build_dataset(cfg, tmp_path / "ds")
    records = read_manifest(summary.manifest)
    assert summary.kept == len(records) > 0
    assert summary.kept + summary.rejected == 60
    threshold = cfg.threshold_frac * cfg.width * cfg.height
    for rec in records:
        sample = load_sample(summary.manifest, rec)
        assert int(sample.mask.sum()) == rec["dyn_pixels"]
        assert rec["dyn_pixels"] > threshold
        unmasked = ~sample.mask
        assert (sample.dynamic_frame[unmasked] == sample.static_frame[unmasked]).all()
    print(f"[criterion 8] PASS: {summary.kept} kept / {summary.rejected} rejected; "
          "unmasked agreement 100%, threshold satisfied by every kept sample")


def test_criterion_9_metric_sanity(tmp_path):
    """Ground-truth predictions score 1.0; rows normalize; per-image mean rule."""
    cfg = SynthConfig(count=6, width=80, height=60, threshold_frac=0.0, seed=109)
    summary = build_dataset(cfg, tmp_path / "ds")
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    for rec in read_manifest(summary.manifest):
        sample = load_sample(summary.manifest, rec)
        pngio.write_labelmap(pred_dir / (rec["id"] + ".png"), sample.static_frame, TAX)
    result, cm = evaluate_dataset(summary.manifest, pred_dir, TAX, "gt")
    assert result.n > 0
    assert result.mean == 1.0
    sums = cm.normalized.sum(axis=1)
    for i, s in enumerate(sums):
        if not cm.empty_rows[i]:
            assert abs(s - 1.0) <= 1e-9
    # per-image averaging: accuracies 1.0 and 0.5 average to 0.75
    truth = np.full((4, 4), 1, dtype=np.uint8)
    good = truth.copy()
    half = truth.copy()
    half[0, :2] = 2
    mask = np.zeros((4, 4), bool)
    mask[0, :] = True
    per_image = [masked_accuracy(good, truth, mask),
                 masked_accuracy(half, truth, mask)]
    assert per_image == [1.0, 0.5]
    assert float(np.mean(per_image)) == 0.75
    print("[criterion 9] PASS: ground-truth mean 1.0, row sums 1 +/- 1e-9, "
          "per-image mean of {1.0, 0.5} = 0.75")
