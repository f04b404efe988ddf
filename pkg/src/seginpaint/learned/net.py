"""Compact categorical inpainting generator and patch discriminator.

The generator is a single-stage fully convolutional net: one plain conv, a
stride-2 downsampling conv, two dilated convs (rates 2 and 4) for context
aggregation, nearest-neighbor upsampling back to full resolution, and a 1x1
classification head over the static classes. Checkpoints use a small custom
binary container with a JSON sidecar so training is resumable and runs are
byte-reproducible.
"""

from __future__ import annotations

import json
import struct

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

LEAKY_SLOPE = 0.2
CKPT_MAGIC = b"LISG"
CKPT_VERSION = 1


class Generator(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, width: int = 32):
        super().__init__()
        w2 = width * 2
        self.conv1 = nn.Conv2d(in_channels, width, 3, padding=1)
        self.conv2 = nn.Conv2d(width, w2, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(w2, w2, 3, padding=2, dilation=2)
        self.conv4 = nn.Conv2d(w2, w2, 3, padding=4, dilation=4)
        self.conv5 = nn.Conv2d(w2, width, 3, padding=1)
        self.head = nn.Conv2d(width, out_channels, 1)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.width = width

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] % 2 or x.shape[-2] % 2:
            raise ValueError(f"input spatial dims must be even, got {tuple(x.shape[-2:])}")
        h = F.leaky_relu(self.conv1(x), LEAKY_SLOPE)
        h = F.leaky_relu(self.conv2(h), LEAKY_SLOPE)
        h = F.leaky_relu(self.conv3(h), LEAKY_SLOPE)
        h = F.leaky_relu(self.conv4(h), LEAKY_SLOPE)
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = F.leaky_relu(self.conv5(h), LEAKY_SLOPE)
        return self.head(h)


class Discriminator(nn.Module):
    def __init__(self, in_channels: int, width: int = 16):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, width, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(width, width * 2, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(width * 2, width * 4, 3, stride=2, padding=1)
        self.fc = nn.Linear(width * 4, 1)
        self.in_channels = in_channels
        self.width = width

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.leaky_relu(self.conv1(x), LEAKY_SLOPE)
        h = F.leaky_relu(self.conv2(h), LEAKY_SLOPE)
        h = F.leaky_relu(self.conv3(h), LEAKY_SLOPE)
        h = h.mean(dim=(2, 3))
        return self.fc(h).squeeze(1)


def init_params(model: nn.Module, seed: int) -> None:
    """Seeded uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("bias"):
                p.zero_()
                continue
            if p.dim() == 4:  # conv: (out, in, kh, kw)
                fan_in = p.shape[1] * p.shape[2] * p.shape[3]
                fan_out = p.shape[0] * p.shape[2] * p.shape[3]
            else:  # linear: (out, in)
                fan_in, fan_out = p.shape[1], p.shape[0]
            bound = float(np.sqrt(6.0 / (fan_in + fan_out)))
            vals = rng.uniform(-bound, bound, size=tuple(p.shape))
            p.copy_(torch.from_numpy(vals.astype(np.float32)))


def _write_array(f, name: str, arr: np.ndarray) -> None:
    nb = name.encode("utf-8")
    f.write(struct.pack("<H", len(nb)))
    f.write(nb)
    f.write(struct.pack("<B", arr.ndim))
    for d in arr.shape:
        f.write(struct.pack("<I", d))
    f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_array(f):
    (nlen,) = struct.unpack("<H", f.read(2))
    name = f.read(nlen).decode("utf-8")
    (ndim,) = struct.unpack("<B", f.read(1))
    shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(f.read(4 * count), dtype="<f4").reshape(shape)
    return name, data.copy()


def save_checkpoint(path, arrays: dict, taxonomy_name: str, sidecar: dict) -> None:
    """arrays: ordered name -> float array; sidecar lands in <path>.json."""
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<I", CKPT_VERSION))
        tb = taxonomy_name.encode("utf-8")
        f.write(struct.pack("<H", len(tb)))
        f.write(tb)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            _write_array(f, name, np.asarray(arr))
    with open(str(path) + ".json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)


def load_checkpoint(path):
    """Returns (taxonomy_name, arrays dict, sidecar dict)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CKPT_MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (tlen,) = struct.unpack("<H", f.read(2))
        taxonomy_name = f.read(tlen).decode("utf-8")
        (n,) = struct.unpack("<I", f.read(4))
        arrays = {}
        for _ in range(n):
            name, arr = _read_array(f)
            arrays[name] = arr
    try:
        with open(str(path) + ".json", "r", encoding="utf-8") as f:
            sidecar = json.load(f)
    except FileNotFoundError:
        sidecar = {}
    return taxonomy_name, arrays, sidecar


def state_arrays(model: nn.Module, prefix: str) -> dict:
    return {f"{prefix}.{k}": v.detach().cpu().numpy() for k, v in model.state_dict().items()}


def load_state_arrays(model: nn.Module, arrays: dict, prefix: str) -> None:
    state = {}
    for k, v in model.state_dict().items():
        key = f"{prefix}.{k}"
        if key not in arrays:
            raise ValueError(f"checkpoint missing array {key}")
        if tuple(arrays[key].shape) != tuple(v.shape):
            raise ValueError(
                f"checkpoint array {key} shape {arrays[key].shape} != model {tuple(v.shape)}")
        state[k] = torch.from_numpy(arrays[key]).to(v.dtype)
    model.load_state_dict(state)
