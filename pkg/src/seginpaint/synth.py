"""Procedural generation of paired road-scene label maps.

Each scene is rendered twice from one seeded spec: a static frame (roads,
sidewalks, buildings, fences, vegetation, poles) and a dynamic frame with car
and person silhouettes overlaid. The pairs are pixel-aligned by construction;
acquisition drift is injected deliberately and then corrected, mirroring how a
simulator-recorded dataset has to be cleaned before use.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from . import pngio
from .labelmap import PairedSample, extract_dynamic_mask
from .taxonomy import ClassTaxonomy, get_taxonomy

# carla9 class ids used by the renderer
UNLABELED, ROAD, SIDEWALK, BUILDING, FENCE, POLE, VEGETATION, PERSON, CAR = range(9)


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    horizon_frac: float = 0.4
    vanish_x_frac: float = 0.5
    road_halfwidth_frac: float = 0.28
    sidewalk_frac: float = 0.10
    fence_frac: float = 0.04
    building_count: int = 5
    pole_density: float = 0.02
    vegetation_density: float = 0.00005
    car_count: int = 3
    person_count: int = 4
    car_scale: float = 0.16  # car width as a fraction of image width at full depth
    car_tmin: float = 0.3  # closest-to-horizon placement (0 = horizon, 1 = bottom)
    person_scale: float = 0.22  # person height as a fraction of ground height

    def __post_init__(self):
        if min(self.car_scale, self.person_scale) <= 0:
            raise ValueError("object scales must be positive")
        if not 0.0 < self.car_tmin < 1.0:
            raise ValueError("car_tmin must be in (0,1)")
        for f in (self.horizon_frac, self.vanish_x_frac, self.road_halfwidth_frac,
                  self.sidewalk_frac):
            if not 0.0 < f < 1.0:
                raise ValueError(f"scene fraction {f} outside (0,1)")
        if min(self.building_count, self.car_count, self.person_count) < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class SynthConfig:
    count: int = 100
    width: int = 400
    height: int = 300
    threshold_frac: float = 0.0104  # dynamic-pixel filter as fraction of image area
    drift_prob: float = 0.5
    drift_max: int = 2
    seed: int = 0
    taxonomy: str = "carla9"

    def __post_init__(self):
        if not 0.0 <= self.threshold_frac < 1.0:
            raise ValueError("threshold_frac must be in [0,1)")
        if self.drift_max < 0:
            raise ValueError("drift_max must be >= 0")


def random_scene_spec(seed: int) -> SceneSpec:
    rng = np.random.default_rng(seed)
    return SceneSpec(
        seed=seed,
        horizon_frac=float(rng.uniform(0.3, 0.5)),
        vanish_x_frac=float(rng.uniform(0.3, 0.7)),
        road_halfwidth_frac=float(rng.uniform(0.2, 0.35)),
        sidewalk_frac=float(rng.uniform(0.06, 0.14)),
        fence_frac=float(rng.uniform(0.02, 0.06)),
        building_count=int(rng.integers(2, 8)),
        pole_density=float(rng.uniform(0.005, 0.03)),
        vegetation_density=float(rng.uniform(0.0, 0.0001)),
        car_count=int(rng.integers(0, 9)),
        person_count=int(rng.integers(0, 13)),
    )


def _road_geometry(spec: SceneSpec, w: int, h: int):
    """Per-row road center and half widths for road / sidewalk / fence bands."""
    horizon = int(spec.horizon_frac * h)
    rows = np.arange(h)
    t = np.clip((rows - horizon) / max(h - 1 - horizon, 1), 0.0, None)
    vx = spec.vanish_x_frac * w
    center = vx + (w / 2 - vx) * t
    road_hw = spec.road_halfwidth_frac * w * t
    side_hw = road_hw + spec.sidewalk_frac * w * t
    fence_hw = side_hw + spec.fence_frac * w * t
    return horizon, center, road_hw, side_hw, fence_hw


def _fill_band(img, rows, center, halfwidth, label):
    w = img.shape[1]
    for y in rows:
        if halfwidth[y] <= 0:
            continue
        x0 = max(int(np.floor(center[y] - halfwidth[y])), 0)
        x1 = min(int(np.ceil(center[y] + halfwidth[y])), w)
        if x1 > x0:
            img[y, x0:x1] = label


def _render_static(spec: SceneSpec, w: int, h: int) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    img = np.full((h, w), UNLABELED, dtype=np.uint8)
    horizon, center, road_hw, side_hw, fence_hw = _road_geometry(spec, w, h)
    ground_rows = range(horizon, h)

    # buildings: blocks rising above the horizon line
    for _ in range(spec.building_count):
        bw = int(rng.integers(w // 12, w // 3))
        bx = int(rng.integers(-bw // 2, w - bw // 2))
        top = int(rng.integers(max(horizon - h // 3, 0), max(horizon - 2, 1)))
        bottom = horizon + int(rng.integers(1, max(h // 20, 2)))
        img[max(top, 0):min(bottom, h), max(bx, 0):min(bx + bw, w)] = BUILDING

    # fence band (outermost), later overdrawn by sidewalk and road
    _fill_band(img, ground_rows, center, fence_hw, FENCE)

    # vegetation blobs off the roadway
    n_blobs = int(spec.vegetation_density * w * h) + rng.integers(0, 3)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(n_blobs):
        cy = int(rng.integers(horizon, h))
        cx = int(rng.integers(0, w))
        ry = int(rng.integers(3, max(h // 12, 4)))
        rx = int(rng.integers(3, max(w // 10, 4)))
        blob = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        blob &= np.abs(xx - center[yy.clip(horizon, h - 1)]) > fence_hw[yy.clip(horizon, h - 1)]
        blob[:horizon] = False
        img[blob] = VEGETATION

    _fill_band(img, ground_rows, center, side_hw, SIDEWALK)
    _fill_band(img, ground_rows, center, road_hw, ROAD)

    # poles, drawn in front of everything
    n_poles = max(int(spec.pole_density * w), 0)
    for _ in range(n_poles):
        t = float(rng.uniform(0.25, 1.0))
        y1 = horizon + int(t * (h - 1 - horizon))
        side = 1 if rng.random() < 0.5 else -1
        px = int(center[y1] + side * (road_hw[y1] + side_hw[y1]) / 2)
        height = max(int(0.35 * (h - horizon) * t), 3)
        pw = 1 + (t > 0.6)
        y0 = max(y1 - height, 0)
        img[y0:y1, max(px, 0):min(px + pw, w)] = POLE
    return img


def _draw_car(img, rng, spec, w, h, horizon, center, road_hw):
    t = float(rng.uniform(spec.car_tmin, 1.0))
    y1 = horizon + int(t * (h - 1 - horizon))
    cw = max(int(spec.car_scale * w * t), 4)
    chh = max(int(0.55 * cw), 3)
    lo = center[y1] - road_hw[y1] + cw / 2
    hi = center[y1] + road_hw[y1] - cw / 2
    cx = int(rng.uniform(min(lo, hi), max(lo, hi)))
    y0 = y1 - chh
    yy, xx = np.mgrid[max(y0, 0):min(y1, h), max(cx - cw // 2, 0):min(cx + cw // 2 + 1, w)]
    if yy.size == 0:
        return
    # rounded-rectangle body (superellipse), wheel stubs below
    dy = (yy - (y0 + y1) / 2) / max(chh / 2, 1)
    dx = (xx - cx) / max(cw / 2, 1)
    body = dx ** 4 + dy ** 4 <= 1.0
    img[yy[body], xx[body]] = CAR
    wr = max(cw // 8, 1)
    for wx in (cx - cw // 3, cx + cw // 3):
        x0, x1 = max(wx - wr, 0), min(wx + wr + 1, w)
        img[min(y1, h - 1):min(y1 + wr + 1, h), x0:x1] = CAR


def _draw_person(img, rng, spec, w, h, horizon, center, road_hw, side_hw):
    t = float(rng.uniform(0.3, 1.0))
    y1 = horizon + int(t * (h - 1 - horizon))
    ph = max(int(spec.person_scale * (h - horizon) * t), 3)
    pw = max(int(0.3 * ph), 1)
    side = 1 if rng.random() < 0.5 else -1
    if rng.random() < 0.3:  # some people cross the road
        px = int(rng.uniform(center[y1] - road_hw[y1], center[y1] + road_hw[y1]))
    else:
        px = int(center[y1] + side * (road_hw[y1] + side_hw[y1]) / 2)
    y0 = y1 - ph
    yy, xx = np.mgrid[max(y0, 0):min(y1 + 1, h), max(px - pw, 0):min(px + pw + 1, w)]
    if yy.size == 0:
        return
    # vertical capsule
    cyt, cyb = y0 + pw, y1 - pw
    dyc = np.clip(yy, cyt, cyb)
    capsule = (yy - dyc) ** 2 + (xx - px) ** 2 <= pw ** 2
    capsule |= (np.abs(xx - px) <= pw) & (yy >= cyt) & (yy <= cyb)
    img[yy[capsule], xx[capsule]] = PERSON


def generate_scene_pair(spec: SceneSpec, width: int = 400, height: int = 300,
                        tax: ClassTaxonomy | None = None) -> PairedSample:
    """Render the static frame, overlay dynamic objects, derive the mask."""
    if tax is None:
        tax = get_taxonomy("carla9")
    w, h = width, height
    static = _render_static(spec, w, h)
    dynamic = static.copy()
    rng = np.random.default_rng(spec.seed + 1)  # object placement stream
    horizon, center, road_hw, side_hw, _ = _road_geometry(spec, w, h)
    for _ in range(spec.car_count):
        _draw_car(dynamic, rng, spec, w, h, horizon, center, road_hw)
    for _ in range(spec.person_count):
        _draw_person(dynamic, rng, spec, w, h, horizon, center, road_hw, side_hw)
    mask = extract_dynamic_mask(dynamic, tax)
    return PairedSample(dynamic, static, mask, id=f"scene{spec.seed:010d}")


def _shift_edge(a: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate content by (dx, dy), replicating edge rows/columns."""
    if dx == 0 and dy == 0:
        return a.copy()
    h, w = a.shape
    pad = max(abs(dx), abs(dy))
    p = np.pad(a, pad, mode="edge")
    return p[pad - dy:pad - dy + h, pad - dx:pad - dx + w].copy()


def apply_drift(sample: PairedSample, rng_seed: int, max_offset: int) -> PairedSample:
    """Translate the static frame by a random integer offset to simulate drift."""
    if max_offset < 0:
        raise ValueError("max_offset must be >= 0")
    rng = np.random.default_rng(rng_seed)
    dx = int(rng.integers(-max_offset, max_offset + 1))
    dy = int(rng.integers(-max_offset, max_offset + 1))
    return PairedSample(
        sample.dynamic_frame,
        _shift_edge(sample.static_frame, dx, dy),
        sample.mask,
        id=f"{sample.id}+d{dx},{dy}",
    )


def align_correct(sample: PairedSample, tax: ClassTaxonomy | None = None) -> PairedSample:
    """Overwrite misaligned static-class pixels of the static frame from the dynamic frame."""
    if tax is None:
        tax = get_taxonomy("carla9")
    is_static = tax.is_static_lut()
    sel = is_static[sample.dynamic_frame] & (sample.static_frame != sample.dynamic_frame)
    sel &= ~sample.mask
    static = sample.static_frame.copy()
    static[sel] = sample.dynamic_frame[sel]
    return PairedSample(sample.dynamic_frame, static, sample.mask, sample.id)


@dataclass(frozen=True)
class BuildSummary:
    generated: int
    kept: int
    rejected: int
    manifest: str


def build_dataset(cfg: SynthConfig, out_dir) -> BuildSummary:
    """Generate, drift, correct, filter and write a paired dataset with a JSONL manifest."""
    tax = get_taxonomy(cfg.taxonomy)
    for sub in ("dynamic", "static", "mask"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(2 * cfg.count, dtype=np.uint32)
    records = []
    kept = rejected = 0
    threshold = cfg.threshold_frac * cfg.width * cfg.height
    for i in range(cfg.count):
        spec = random_scene_spec(int(seeds[2 * i]))
        pair = generate_scene_pair(spec, cfg.width, cfg.height, tax)
        drift_rng = np.random.default_rng(int(seeds[2 * i + 1]))
        if cfg.drift_max > 0 and drift_rng.random() < cfg.drift_prob:
            pair = apply_drift(pair, int(seeds[2 * i + 1]), cfg.drift_max)
            pair = align_correct(pair, tax)
        dyn_pixels = int(pair.mask.sum())
        if dyn_pixels <= threshold:
            rejected += 1
            continue
        sid = f"{i:06d}"
        rel = {k: os.path.join(k, sid + ".png") for k in ("dynamic", "static", "mask")}
        pngio.write_labelmap(os.path.join(out_dir, rel["dynamic"]), pair.dynamic_frame, tax)
        pngio.write_labelmap(os.path.join(out_dir, rel["static"]), pair.static_frame, tax)
        pngio.write_mask(os.path.join(out_dir, rel["mask"]), pair.mask)
        records.append({
            "id": sid,
            "dynamic_png": rel["dynamic"],
            "static_png": rel["static"],
            "mask_png": rel["mask"],
            "dyn_pixels": dyn_pixels,
            "seed": int(seeds[2 * i]),
        })
        kept += 1
    records.sort(key=lambda r: r["id"])
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as f:
        json.dump(asdict(cfg), f, indent=2, sort_keys=True)
    return BuildSummary(cfg.count, kept, rejected, manifest_path)


def read_manifest(manifest_path):
    """Load manifest records; file paths stay relative to the manifest directory."""
    records = []
    with open(manifest_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def load_sample(manifest_path, rec) -> PairedSample:
    base = os.path.dirname(os.path.abspath(manifest_path))
    return PairedSample(
        pngio.read_labelmap(os.path.join(base, rec["dynamic_png"])),
        pngio.read_labelmap(os.path.join(base, rec["static_png"])),
        pngio.read_mask(os.path.join(base, rec["mask_png"])),
        id=rec["id"],
    )
