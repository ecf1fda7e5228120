"""Canonical Huffman coding over bytes.

Stream layout (all integers big-endian)::

    symbol_count  u16
    (symbol u8, code_length u8) * symbol_count   # canonical order
    original_len  u64
    bit-packed codes, MSB first, zero padded to a byte boundary
"""

from __future__ import annotations

import heapq
import math
import struct
from typing import Dict, List, Tuple

import numpy as np


class HuffmanError(ValueError):
    pass


_TABLE_BITS = 16


def code_lengths(freqs) -> Dict[int, int]:
    """Huffman code length per symbol for a ``{symbol: frequency}`` map.

    Merges always take the two lightest nodes, ordered by (frequency,
    smallest symbol in the subtree). A lone symbol gets a 1-bit code.
    """
    items = [(int(f), int(s)) for s, f in dict(freqs).items() if f > 0]
    if not items:
        return {}
    if len(items) == 1:
        return {items[0][1]: 1}
    heap = [(f, s, (s,)) for f, s in items]
    heapq.heapify(heap)
    lengths = {s: 0 for _, s in items}
    while len(heap) > 1:
        f1, k1, syms1 = heapq.heappop(heap)
        f2, k2, syms2 = heapq.heappop(heap)
        for s in syms1 + syms2:
            lengths[s] += 1
        heapq.heappush(heap, (f1 + f2, min(k1, k2), syms1 + syms2))
    return lengths


def canonical_codes(lengths: Dict[int, int]) -> Dict[int, Tuple[int, int]]:
    """Assign canonical codewords: ``{symbol: (code, length)}``."""
    codes = {}
    code = 0
    prev = 0
    for sym, length in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0])):
        code <<= length - prev
        codes[sym] = (code, length)
        code += 1
        prev = length
    return codes


def entropy_bits(data: bytes) -> float:
    """Empirical zeroth-order entropy in bits per symbol."""
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    p = counts[counts > 0] / len(data)
    return float(-(p * np.log2(p)).sum()) + 0.0


def average_code_length(data: bytes) -> float:
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    lengths = code_lengths({s: int(c) for s, c in enumerate(counts) if c})
    return sum(counts[s] * l for s, l in lengths.items()) / len(data)


def _pack_codes(symbols: np.ndarray, codes: Dict[int, Tuple[int, int]]) -> bytes:
    max_len = max(l for _, l in codes.values())
    code_of = np.zeros(256, dtype=object if max_len > 62 else np.int64)
    len_of = np.zeros(256, dtype=np.int64)
    for s, (c, l) in codes.items():
        code_of[s] = c
        len_of[s] = l
    out = bytearray()
    # chunked to bound the (n, max_len) bit matrix
    chunk = max(1, (1 << 22) // max_len)
    carry = np.zeros(0, dtype=np.uint8)
    shifts = np.arange(max_len - 1, -1, -1)
    for start in range(0, len(symbols), chunk):
        sym = symbols[start:start + chunk]
        lens = len_of[sym]
        if max_len > 62:
            bits = np.array([[(int(code_of[s]) >> int(k)) & 1 for k in shifts] for s in sym],
                            dtype=np.uint8).reshape(len(sym), max_len)
        else:
            bits = ((code_of[sym][:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        # keep only the low ``len`` bits of each right-aligned row
        keep = np.arange(max_len)[None, :] >= (max_len - lens)[:, None]
        stream = np.concatenate([carry, bits[keep]])
        whole = (len(stream) // 8) * 8
        out += np.packbits(stream[:whole]).tobytes()
        carry = stream[whole:]
    if len(carry):
        out += np.packbits(carry).tobytes()
    return bytes(out)


def huffman_encode(data: bytes) -> bytes:
    data = bytes(data)
    if not data:
        raise HuffmanError("cannot encode empty input")
    arr = np.frombuffer(data, dtype=np.uint8)
    counts = np.bincount(arr, minlength=256)
    lengths = code_lengths({s: int(c) for s, c in enumerate(counts) if c})
    codes = canonical_codes(lengths)
    if max(lengths.values()) > 255:
        raise HuffmanError("code length exceeds 255 bits")
    header = bytearray(struct.pack(">H", len(codes)))
    for sym, (_, length) in sorted(codes.items(), key=lambda kv: (kv[1][1], kv[0])):
        header += bytes((sym, length))
    header += struct.pack(">Q", len(data))
    return bytes(header) + _pack_codes(arr, codes)


def _parse_header(stream: bytes) -> Tuple[Dict[int, int], int, int]:
    if len(stream) < 2:
        raise HuffmanError("corrupt header: truncated symbol count")
    (count,) = struct.unpack_from(">H", stream, 0)
    if not 1 <= count <= 256:
        raise HuffmanError(f"corrupt header: symbol count {count}")
    pos = 2
    if len(stream) < pos + 2 * count + 8:
        raise HuffmanError("corrupt header: truncated code table")
    lengths: Dict[int, int] = {}
    prev = (0, -1)
    for i in range(count):
        sym, length = stream[pos + 2 * i], stream[pos + 2 * i + 1]
        if length == 0:
            raise HuffmanError(f"corrupt header: zero code length for symbol {sym}")
        if sym in lengths:
            raise HuffmanError(f"corrupt header: duplicate symbol {sym}")
        if (length, sym) <= prev:
            raise HuffmanError("corrupt header: table not in canonical order")
        prev = (length, sym)
        lengths[sym] = length
    pos += 2 * count
    kraft = sum(math.ldexp(1.0, -l) for l in lengths.values())
    if kraft > 1.0:
        raise HuffmanError("corrupt header: code lengths violate the Kraft inequality")
    (original_len,) = struct.unpack_from(">Q", stream, pos)
    return lengths, original_len, pos + 8


def _decode_table(bits: np.ndarray, n: int, codes, max_len: int) -> List[int]:
    size = 1 << max_len
    table_sym = np.full(size, -1, dtype=np.int64)
    table_len = np.zeros(size, dtype=np.int64)
    for sym, (code, length) in codes.items():
        lo = code << (max_len - length)
        hi = (code + 1) << (max_len - length)
        table_sym[lo:hi] = sym
        table_len[lo:hi] = length
    padded = np.concatenate([bits, np.zeros(max_len, dtype=np.uint8)]).astype(np.int64)
    window = np.zeros(len(bits), dtype=np.int64)
    for j in range(max_len):
        window = (window << 1) | padded[j:j + len(bits)]
    syms = table_sym[window].tolist()
    lens = table_len[window].tolist()
    total = len(bits)
    out = []
    pos = 0
    append = out.append
    for _ in range(n):
        if pos >= total:
            raise HuffmanError("truncated bitstream")
        s = syms[pos]
        if s < 0:
            raise HuffmanError(f"invalid code at bit {pos}")
        append(s)
        pos += lens[pos]
    if pos > total:
        raise HuffmanError("truncated bitstream")
    return out


def _decode_bitwise(bits: np.ndarray, n: int, codes) -> List[int]:
    # slow path for code lengths beyond the lookup table width
    lookup = {(length, code): sym for sym, (code, length) in codes.items()}
    max_len = max(l for _, l in codes.values())
    blist = bits.tolist()
    total = len(blist)
    out = []
    pos = 0
    for _ in range(n):
        code = 0
        for length in range(1, max_len + 1):
            if pos >= total:
                raise HuffmanError("truncated bitstream")
            code = (code << 1) | blist[pos]
            pos += 1
            sym = lookup.get((length, code))
            if sym is not None:
                out.append(sym)
                break
        else:
            raise HuffmanError(f"invalid code ending at bit {pos}")
    return out


def huffman_decode(stream: bytes, *, table_bits: int = _TABLE_BITS) -> bytes:
    stream = bytes(stream)
    lengths, n, pos = _parse_header(stream)
    codes = canonical_codes(lengths)
    max_len = max(lengths.values())
    body = np.frombuffer(stream, dtype=np.uint8, offset=pos)
    bits = np.unpackbits(body)
    if n == 0:
        syms: List[int] = []
    elif max_len <= table_bits:
        syms = _decode_table(bits, n, codes, max_len)
    else:
        syms = _decode_bitwise(bits, n, codes)
    len_of = np.zeros(256, dtype=np.int64)
    for sym, length in lengths.items():
        len_of[sym] = length
    used_bits = int(len_of[np.asarray(syms, dtype=np.int64)].sum()) if syms else 0
    if (used_bits + 7) // 8 != len(body):
        raise HuffmanError(
            f"length mismatch: {len(body)} payload bytes for {used_bits} coded bits")
    return bytes(syms)
