"""Side-by-side comparisons of the traditional codecs and the autoencoder."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import List, Sequence

from . import metrics
from .codecs import dct_decode, dct_encode, predictive_decode, predictive_encode
from .raster import Image, write_pnm

METHOD_HEADER = ("method", "bytes", "ratio_pct", "bitrate_bpp", "psnr_db", "ssim")
COMPARISON_HEADER = ("image", "ae_bytes", "ae_psnr_db", "dct_quality", "dct_bytes",
                     "dct_psnr_db", "psnr_gain_pct")


@dataclass
class MethodRow:
    method: str
    bytes: int
    ratio_pct: float
    bitrate_bpp: float
    psnr_db: float
    ssim: float


def _row(method: str, original: Image, decoded: Image, nbytes: int, raw_bytes: int,
         max_value: float) -> MethodRow:
    q = metrics.quality_report(original, decoded, nbytes, max_value)
    return MethodRow(method, nbytes, metrics.compression_ratio_bytes(raw_bytes, nbytes),
                     q.bitrate_bpp, q.psnr_db, q.ssim)


def method_table(image: Image, qualities: Sequence[int] = (25, 50, 75, 95), model=None,
                 max_value: float = 255.0) -> List[MethodRow]:
    """Bytes and quality of every transmission method for one image.

    Ratios are against the raw PNM file, so the raw row reads 100%.
    """
    raw = len(write_pnm(image))
    rows = [_row("raw", image, image, raw, raw, max_value)]
    blob = predictive_encode(image)
    rows.append(_row("lossless", image, predictive_decode(blob), blob.byte_size, raw, max_value))
    for q in qualities:
        blob = dct_encode(image, q)
        rows.append(_row(f"dct_q{q}", image, dct_decode(blob), blob.byte_size, raw, max_value))
    if model is not None:
        from .autoencoder.codec import decode_embedding, encode_embedding
        blob = encode_embedding(model, image)
        rows.append(_row(f"ae_b{model.blocks}", image, decode_embedding(model, blob),
                         blob.byte_size, raw, max_value))
    return rows


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def method_table_csv(rows: Sequence[MethodRow]) -> str:
    return _csv(METHOD_HEADER, [[r.method, r.bytes, metrics.format_pct(r.ratio_pct),
                                 f"{r.bitrate_bpp:.4f}", metrics.format_db(r.psnr_db),
                                 f"{r.ssim:.4f}"] for r in rows])


def matched_dct_quality(image: Image, target_bytes: int) -> int:
    """Quality whose DCT blob size is closest to ``target_bytes`` (lowest q on ties)."""
    best_q, best_gap = 1, None
    for q in range(1, 101):
        gap = abs(dct_encode(image, q).byte_size - target_bytes)
        if best_gap is None or gap < best_gap:
            best_q, best_gap = q, gap
    return best_q


@dataclass
class ComparisonRow:
    image: str
    ae_bytes: int
    ae_psnr_db: float
    dct_quality: int
    dct_bytes: int
    dct_psnr_db: float

    @property
    def psnr_gain_pct(self) -> float:
        if math.isinf(self.ae_psnr_db) or math.isinf(self.dct_psnr_db):
            return float("nan")
        return 100.0 * (self.ae_psnr_db - self.dct_psnr_db) / self.dct_psnr_db


@dataclass
class ComparisonReport:
    blocks: int
    rows: List[ComparisonRow]

    @property
    def mean_ae_psnr(self) -> float:
        return metrics.mean_psnr([r.ae_psnr_db for r in self.rows])

    @property
    def mean_dct_psnr(self) -> float:
        return metrics.mean_psnr([r.dct_psnr_db for r in self.rows])

    @property
    def psnr_gain_pct(self) -> float:
        return 100.0 * (self.mean_ae_psnr - self.mean_dct_psnr) / self.mean_dct_psnr

    def to_dict(self) -> dict:
        def num(v):
            return "inf" if math.isinf(v) else (None if math.isnan(v) else v)
        return {
            "blocks": self.blocks,
            "mean_ae_psnr_db": num(self.mean_ae_psnr),
            "mean_dct_psnr_db": num(self.mean_dct_psnr),
            "psnr_gain_pct": num(self.psnr_gain_pct),
            "rows": [{k: (num(v) if isinstance(v, float) else v) for k, v in asdict(r).items()}
                     for r in self.rows],
        }

    def to_csv(self) -> str:
        return _csv(COMPARISON_HEADER, [
            [r.image, r.ae_bytes, metrics.format_db(r.ae_psnr_db), r.dct_quality, r.dct_bytes,
             metrics.format_db(r.dct_psnr_db), f"{r.psnr_gain_pct:.2f}"] for r in self.rows])


def ae_vs_dct(model, images: Sequence[Image], names: Sequence[str] | None = None,
              max_value: float = 255.0) -> ComparisonReport:
    """PSNR of the autoencoder against the DCT codec at a matched byte budget.

    The AE side goes through the real blob path (quantised embedding, decoder
    only), so both columns pay for exactly the bytes they report.
    """
    from .autoencoder.codec import decode_embedding, encode_embedding
    if not images:
        raise ValueError("no images to compare")
    names = list(names) if names is not None else [f"img{i:04d}" for i in range(len(images))]
    rows = []
    for name, img in zip(names, images):
        blob = encode_embedding(model, img)
        ae_psnr = metrics.psnr(img, decode_embedding(model, blob), max_value)
        q = matched_dct_quality(img, blob.byte_size)
        dblob = dct_encode(img, q)
        rows.append(ComparisonRow(name, blob.byte_size, ae_psnr, q, dblob.byte_size,
                                  metrics.psnr(img, dct_decode(dblob), max_value)))
    return ComparisonReport(model.blocks, rows)

