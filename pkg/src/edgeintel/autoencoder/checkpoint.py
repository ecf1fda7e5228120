"""Binary model checkpoints.

Layout (little-endian)::

    magic "AEMD" | version u8
    blocks u8 | input_side u32 | image_channels u8 | base_width u16 |
    seed u64 | skip_mode u8 (0 paper, 1 codec_honest)
    tensor_count u16
    per tensor: ndim u8 | dims u32 * ndim | float64 data
"""

from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

from .model import SKIP_MODES, Model, ModelConfig

MAGIC = b"AEMD"
VERSION = 1
_CONFIG = struct.Struct("<BIBHQB")


class CheckpointError(ValueError):
    pass


def save_model(model: Model) -> bytes:
    cfg = model.config
    out = bytearray(MAGIC)
    out.append(VERSION)
    out += _CONFIG.pack(cfg.blocks, cfg.input_side, cfg.image_channels, cfg.base_width,
                        cfg.seed, SKIP_MODES.index(cfg.skip_mode))
    out += struct.pack("<H", len(model.params))
    for p in model.params.values():
        out += struct.pack("<B", p.ndim)
        out += struct.pack(f"<{p.ndim}I", *p.shape)
        out += np.ascontiguousarray(p, dtype="<f8").tobytes()
    return bytes(out)


def load_model(data: bytes) -> Model:
    data = bytes(data)
    if data[:4] != MAGIC:
        raise CheckpointError("not a model checkpoint (bad magic)")
    if len(data) < 5 or data[4] != VERSION:
        raise CheckpointError("unsupported checkpoint version")
    pos = 5
    try:
        blocks, side, chans, width, seed, mode = _CONFIG.unpack_from(data, pos)
        pos += _CONFIG.size
        config = ModelConfig(blocks=blocks, input_side=side, image_channels=chans,
                             base_width=width, seed=seed, skip_mode=SKIP_MODES[mode])
        (count,) = struct.unpack_from("<H", data, pos)
        pos += 2
        tensors = []
        for _ in range(count):
            ndim = data[pos]
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            size = int(np.prod(shape)) if shape else 1
            if pos + 8 * size > len(data):
                raise CheckpointError("truncated tensor data")
            tensors.append(np.frombuffer(data, dtype="<f8", count=size, offset=pos)
                           .reshape(shape).astype(np.float64))
            pos += 8 * size
    except (struct.error, IndexError) as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    if pos != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    names = [f"{layer}.{part}" for layer in config.layer_shapes() for part in ("w", "b")]
    if len(tensors) != len(names):
        raise CheckpointError(f"expected {len(names)} tensors, found {len(tensors)}")
    params = OrderedDict()
    for name, t in zip(names, tensors):
        layer = name.rsplit(".", 1)[0]
        cout, cin, k = config.layer_shapes()[layer]
        want = (cout, cin, k, k) if name.endswith(".w") else (cout,)
        if t.shape != want:
            raise CheckpointError(f"{name} has shape {t.shape}, expected {want}")
        params[name] = t
    return Model(config, params)


def write_model(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))


def read_model(path) -> Model:
    with open(path, "rb") as fh:
        return load_model(fh.read())
