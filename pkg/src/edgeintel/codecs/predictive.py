"""Lossless left-neighbour predictive coding with a Huffman back end."""

from __future__ import annotations

import numpy as np

from ..raster import Image
from .container import CodecError, CodecId, EncodedBlob
from .huffman import HuffmanError, huffman_decode, huffman_encode


def residuals(image: Image) -> np.ndarray:
    """Planar residual bytes, channel by channel, rows in raster order.

    Each sample is predicted from its left neighbour; the first column is
    predicted from the sample above and the origin is stored as-is.
    Differences wrap modulo 256.
    """
    px = image.pixels.astype(np.int16).transpose(2, 0, 1)
    pred = np.zeros_like(px)
    pred[:, :, 1:] = px[:, :, :-1]
    pred[:, 1:, 0] = px[:, :-1, 0]
    return ((px - pred) % 256).astype(np.uint8)


def reconstruct(res: np.ndarray) -> np.ndarray:
    res = res.astype(np.int64)
    first_col = np.cumsum(res[:, :, 0], axis=1)
    res = res.copy()
    res[:, :, 0] = first_col
    return (np.cumsum(res, axis=2) % 256).astype(np.uint8)


def predictive_encode(image: Image) -> EncodedBlob:
    payload = huffman_encode(residuals(image).tobytes())
    return EncodedBlob(CodecId.PREDICTIVE, image.width, image.height, image.channels, 0, payload)


def predictive_decode(blob: EncodedBlob) -> Image:
    blob.expect(CodecId.PREDICTIVE)
    try:
        raw = huffman_decode(blob.payload)
    except HuffmanError as exc:
        raise CodecError(f"malformed predictive payload: {exc}") from None
    c, h, w = blob.channels, blob.height, blob.width
    if len(raw) != c * h * w:
        raise CodecError(f"residual count {len(raw)} != {c}x{h}x{w}")
    res = np.frombuffer(raw, dtype=np.uint8).reshape(c, h, w)
    return Image(reconstruct(res).transpose(1, 2, 0))


def huffman_image_encode(image: Image) -> EncodedBlob:
    return EncodedBlob(CodecId.HUFFMAN, image.width, image.height, image.channels, 0,
                       huffman_encode(image.samples))


def huffman_image_decode(blob: EncodedBlob) -> Image:
    blob.expect(CodecId.HUFFMAN)
    try:
        raw = huffman_decode(blob.payload)
    except HuffmanError as exc:
        raise CodecError(f"malformed huffman payload: {exc}") from None
    if len(raw) != blob.width * blob.height * blob.channels:
        raise CodecError("sample count does not match header dimensions")
    return Image.from_samples(blob.width, blob.height, blob.channels, raw)
