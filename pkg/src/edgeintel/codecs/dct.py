"""8x8 block DCT transform codec (the lossy, JPEG-like path).

Every channel is padded by edge replication to a multiple of 8, split into
blocks in raster order, transformed with an orthonormal 2-D DCT-II and
quantised by the quality-scaled luminance table. Coefficients are zig-zag
scanned and serialised per block as ``(run u8, value i16 BE)`` pairs, where
``run`` counts the zeros skipped before ``value``; ``(0, 0)`` ends a block.
The concatenated byte stream of all channels is Huffman coded.
"""

from __future__ import annotations

import struct
from typing import List, Sequence, Tuple

import numpy as np

from .. import metrics
from ..raster import Image
from .container import CodecError, CodecId, EncodedBlob
from .huffman import HuffmanError, huffman_decode, huffman_encode

N = 8

LUMINANCE_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)


def dct_matrix(n: int = N) -> np.ndarray:
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0, :] = np.sqrt(1.0 / n)
    return m


_D = dct_matrix()


def zigzag_order(n: int = N) -> np.ndarray:
    """Flat indices of an n x n block in zig-zag scan order."""
    cells = sorted(((y, x) for y in range(n) for x in range(n)),
                   key=lambda p: (p[0] + p[1], p[0] if (p[0] + p[1]) % 2 else p[1]))
    return np.array([y * n + x for y, x in cells])


ZIGZAG = zigzag_order()
_UNZIGZAG = np.argsort(ZIGZAG)


def quant_table(quality: int) -> np.ndarray:
    if not 1 <= quality <= 100:
        raise ValueError(f"quality {quality} outside [1, 100]")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    return np.maximum((LUMINANCE_TABLE * scale + 50) // 100, 1)


def forward_dct(blocks: np.ndarray) -> np.ndarray:
    """2-D DCT-II of ``(..., 8, 8)`` blocks."""
    return _D @ blocks @ _D.T


def inverse_dct(coefs: np.ndarray) -> np.ndarray:
    return _D.T @ coefs @ _D


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _to_blocks(plane: np.ndarray) -> Tuple[np.ndarray, int, int]:
    h, w = plane.shape
    ph, pw = -(-h // N) * N, -(-w // N) * N
    padded = np.pad(plane, ((0, ph - h), (0, pw - w)), mode="edge")
    by, bx = ph // N, pw // N
    blocks = padded.reshape(by, N, bx, N).transpose(0, 2, 1, 3).reshape(by * bx, N, N)
    return blocks, by, bx


def _from_blocks(blocks: np.ndarray, by: int, bx: int, h: int, w: int) -> np.ndarray:
    plane = blocks.reshape(by, bx, N, N).transpose(0, 2, 1, 3).reshape(by * N, bx * N)
    return plane[:h, :w]


def _serialize(zz: np.ndarray) -> bytes:
    out = bytearray()
    pack = struct.Struct(">Bh").pack
    for block in zz:
        nz = np.flatnonzero(block)
        prev = -1
        for pos in nz.tolist():
            out += pack(pos - prev - 1, int(block[pos]))
            prev = pos
        out += pack(0, 0)
    return bytes(out)


def _deserialize(stream: bytes, nblocks: int) -> np.ndarray:
    if len(stream) % 3:
        raise CodecError("coefficient stream is not a whole number of pairs")
    pairs = np.frombuffer(stream, dtype=np.dtype([("run", "u1"), ("val", ">i2")]))
    runs = pairs["run"].tolist()
    vals = pairs["val"].tolist()
    out = np.zeros((nblocks, N * N), dtype=np.int64)
    b = 0
    pos = 0
    for run, val in zip(runs, vals):
        if b >= nblocks:
            raise CodecError("coefficient stream has trailing data")
        if run == 0 and val == 0:
            b += 1
            pos = 0
            continue
        pos += run
        if pos >= N * N:
            raise CodecError(f"run overflows block {b}")
        out[b, pos] = val
        pos += 1
    if b != nblocks:
        raise CodecError(f"stream holds {b} blocks, expected {nblocks}")
    return out


def quantize_blocks(blocks: np.ndarray, quality: int) -> np.ndarray:
    q = quant_table(quality)
    return round_half_away(forward_dct(blocks.astype(np.float64)) / q).astype(np.int64)


def dct_encode(image: Image, quality: int = 75) -> EncodedBlob:
    if not 1 <= int(quality) <= 100:
        raise ValueError(f"quality {quality} outside [1, 100]")
    quality = int(quality)
    chunks = []
    for c in range(image.channels):
        blocks, _, _ = _to_blocks(image.pixels[:, :, c])
        coefs = quantize_blocks(blocks, quality).reshape(-1, N * N)
        chunks.append(_serialize(coefs[:, ZIGZAG]))
    payload = huffman_encode(b"".join(chunks))
    return EncodedBlob(CodecId.DCT, image.width, image.height, image.channels, quality, payload)


def dct_decode(blob: EncodedBlob) -> Image:
    blob.expect(CodecId.DCT)
    if not 1 <= blob.quality <= 100:
        raise CodecError(f"quality {blob.quality} outside [1, 100]")
    try:
        stream = huffman_decode(blob.payload)
    except HuffmanError as exc:
        raise CodecError(f"malformed dct payload: {exc}") from None
    h, w = blob.height, blob.width
    by, bx = -(-h // N), -(-w // N)
    per_plane = by * bx
    coefs = _deserialize(stream, per_plane * blob.channels)
    q = quant_table(blob.quality)
    planes = []
    for c in range(blob.channels):
        zz = coefs[c * per_plane:(c + 1) * per_plane]
        blocks = zz[:, _UNZIGZAG].reshape(-1, N, N) * q
        pixels = inverse_dct(blocks.astype(np.float64))
        planes.append(_from_blocks(pixels, by, bx, h, w))
    out = np.clip(round_half_away(np.stack(planes, axis=2)), 0, 255).astype(np.uint8)
    return Image(out)


def rate_distortion_sweep(image: Image, qualities: Sequence[int],
                          max_value: float = 255.0) -> List[Tuple[int, float, float]]:
    """``(quality, bitrate_bpp, psnr_db)`` per quality; bitrate counts the whole blob."""
    if not qualities:
        raise ValueError("quality list is empty")
    points = []
    for q in qualities:
        blob = dct_encode(image, q)
        decoded = dct_decode(blob)
        points.append((int(q),
                       metrics.bitrate_bpp(blob.byte_size, image.width * image.height),
                       metrics.psnr(image, decoded, max_value)))
    return points
