"""Self-describing blob container shared by all image codecs.

Layout (big-endian)::

    magic "IMCP" | version u8 | codec_id u8 | width u32 | height u32 |
    channels u8 | quality u8 | payload_len u64 | payload
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

MAGIC = b"IMCP"
VERSION = 1
_HEADER = struct.Struct(">4sBBIIBBQ")
HEADER_SIZE = _HEADER.size


class CodecError(ValueError):
    pass


class CodecId(enum.IntEnum):
    HUFFMAN = 0
    PREDICTIVE = 1
    DCT = 2
    AE_EMBEDDING = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: str) -> "CodecId":
        try:
            return cls[name.upper()]
        except KeyError:
            raise CodecError(f"unknown codec {name!r}") from None


@dataclass(frozen=True)
class EncodedBlob:
    codec_id: CodecId
    width: int
    height: int
    channels: int
    quality: int
    payload: bytes

    def to_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, VERSION, int(self.codec_id), self.width, self.height,
                            self.channels, self.quality, len(self.payload)) + self.payload

    @property
    def byte_size(self) -> int:
        return HEADER_SIZE + len(self.payload)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedBlob":
        data = bytes(data)
        if len(data) < HEADER_SIZE:
            raise CodecError(f"blob shorter than {HEADER_SIZE}-byte header")
        magic, version, codec, w, h, c, q, n = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise CodecError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CodecError(f"unsupported container version {version}")
        try:
            codec = CodecId(codec)
        except ValueError:
            raise CodecError(f"unknown codec id {codec}") from None
        if w < 1 or h < 1 or c not in (1, 3):
            raise CodecError(f"bad dimensions {w}x{h}x{c}")
        payload = data[HEADER_SIZE:]
        if len(payload) != n:
            raise CodecError(f"payload length {len(payload)} != declared {n}")
        return cls(codec, w, h, c, q, payload)

    def expect(self, codec: CodecId) -> None:
        if self.codec_id != codec:
            raise CodecError(f"expected {codec.label} blob, got {self.codec_id.label}")
