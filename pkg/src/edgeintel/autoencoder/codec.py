"""The trained autoencoder used as a transmission codec.

An ``ae_embedding`` blob stores the bottleneck activation quantised to
8 bits. The container's quality byte carries the block count, and the
payload is ``min f32 | max f32 | samples`` with samples in channel-major
order (big-endian floats, like the container header).
"""

from __future__ import annotations

import struct

import numpy as np

from ..codecs.container import CodecError, CodecId, EncodedBlob
from ..raster import Image
from .model import Model
from .train import batch_to_images, images_to_batch

_RANGE = struct.Struct(">ff")


def _require_codec_mode(model: Model) -> None:
    if model.config.skip_mode != "codec_honest":
        raise CodecError("embedding codec needs a codec_honest model; paper-mode "
                         "skips carry information around the bottleneck")


def quantize_embedding(emb: np.ndarray):
    lo = np.float32(emb.min())
    hi = np.float32(emb.max())
    span = float(hi) - float(lo)
    if span > 0:
        q = np.rint((emb - float(lo)) / span * 255.0)
    else:
        q = np.zeros_like(emb)
    return np.clip(q, 0, 255).astype(np.uint8), lo, hi


def dequantize_embedding(q: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return float(lo) + q.astype(np.float64) / 255.0 * (float(hi) - float(lo))


def encode_embedding(model: Model, image: Image) -> EncodedBlob:
    _require_codec_mode(model)
    cfg = model.config
    if image.width != cfg.input_side or image.height != cfg.input_side:
        raise ValueError(f"image is {image.width}x{image.height}, model expects "
                         f"{cfg.input_side}x{cfg.input_side}")
    if image.channels != cfg.image_channels:
        raise ValueError(f"image has {image.channels} channels, model expects {cfg.image_channels}")
    emb = model.encode(images_to_batch([image]))
    q, lo, hi = quantize_embedding(emb[0])
    payload = _RANGE.pack(lo, hi) + q.tobytes()
    return EncodedBlob(CodecId.AE_EMBEDDING, image.width, image.height, image.channels,
                       cfg.blocks, payload)


def decode_embedding(model: Model, blob: EncodedBlob) -> Image:
    _require_codec_mode(model)
    blob.expect(CodecId.AE_EMBEDDING)
    cfg = model.config
    if blob.quality != cfg.blocks:
        raise CodecError(f"blob was made by a {blob.quality}-block model, "
                         f"decoder has {cfg.blocks} blocks")
    if blob.width != cfg.input_side or blob.height != cfg.input_side \
            or blob.channels != cfg.image_channels:
        raise CodecError("blob dimensions do not match the model")
    s = cfg.embedding_side
    need = _RANGE.size + cfg.image_channels * s * s
    if len(blob.payload) != need:
        raise CodecError(f"embedding payload is {len(blob.payload)} bytes, expected {need}")
    lo, hi = _RANGE.unpack_from(blob.payload, 0)
    q = np.frombuffer(blob.payload, dtype=np.uint8, offset=_RANGE.size)
    emb = dequantize_embedding(q.reshape(1, cfg.image_channels, s, s), lo, hi)
    return batch_to_images(model.decode(emb))[0]
