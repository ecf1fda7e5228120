"""Distortion and size metrics shared by every compression method."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .raster import Image

SSIM_WINDOW = 8
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2

INF = float("inf")


def _check_pair(a: Image, b: Image) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {a.width}x{a.height}x{a.channels} vs "
            f"{b.width}x{b.height}x{b.channels}")


def mse(a: Image, b: Image) -> float:
    _check_pair(a, b)
    d = a.pixels.astype(np.int64) - b.pixels.astype(np.int64)
    # integer sum is exact; one rounding at the division
    return int(np.sum(d * d)) / d.size


def psnr_from_mse(err: float, max_value: float = 255.0) -> float:
    if err == 0:
        return INF
    return 10.0 * math.log10(max_value * max_value / err)


def psnr(a: Image, b: Image, max_value: float = 255.0) -> float:
    return psnr_from_mse(mse(a, b), max_value)


def _window_sums(x: np.ndarray, k: int) -> np.ndarray:
    s = np.zeros((x.shape[0] + 1, x.shape[1] + 1), dtype=np.int64)
    s[1:, 1:] = x.cumsum(0).cumsum(1)
    return s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]


def _ssim_plane(a: np.ndarray, b: np.ndarray, k: int) -> float:
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    n = k * k
    # all window sums are exact integers; statistics use population variance
    mu_a = _window_sums(a, k) / n
    mu_b = _window_sums(b, k) / n
    var_a = _window_sums(a * a, k) / n - mu_a * mu_a
    var_b = _window_sums(b * b, k) / n - mu_b * mu_b
    cov = _window_sums(a * b, k) / n - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def ssim(a: Image, b: Image, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all stride-1 ``window`` x ``window`` uniform windows.

    Each channel is scored separately and the channel scores are averaged
    without weights.
    """
    _check_pair(a, b)
    if a.width < window or a.height < window:
        raise ValueError(f"image {a.width}x{a.height} smaller than {window}x{window} window")
    scores = [_ssim_plane(a.pixels[:, :, c], b.pixels[:, :, c], window)
              for c in range(a.channels)]
    return float(sum(scores) / len(scores))


def compression_ratio_spatial(input_side: int, output_side: int) -> float:
    if input_side < 1 or output_side < 1:
        raise ValueError("sides must be >= 1")
    if output_side > input_side:
        raise ValueError("output side exceeds input side")
    return 100.0 * (output_side / input_side) ** 2


def compression_ratio_bytes(original: int, encoded: int) -> float:
    if original <= 0:
        raise ValueError("original size must be > 0")
    return 100.0 * encoded / original


def bitrate_bpp(encoded_bytes: int, pixel_count: int) -> float:
    if pixel_count <= 0:
        raise ValueError("pixel_count must be > 0")
    return 8.0 * encoded_bytes / pixel_count


def format_pct(value: float) -> str:
    return f"{value:.2f}"


def format_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.4f}"


def mean_psnr(values) -> float:
    """Average of per-image PSNRs; infinite entries are dropped unless all are."""
    finite = [v for v in values if not math.isinf(v)]
    if not finite:
        return INF
    return sum(finite) / len(finite)


@dataclass
class QualityReport:
    mse: float
    psnr_db: float
    ssim: float
    bytes_original: int
    bytes_encoded: int
    compression_ratio_pct: float
    bitrate_bpp: float

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.psnr_db):
            d["psnr_db"] = "inf"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "QualityReport":
        d = dict(d)
        if d["psnr_db"] == "inf":
            d["psnr_db"] = INF
        return cls(**d)


def quality_report(original: Image, decoded: Image, encoded_bytes: int | None = None,
                   max_value: float = 255.0) -> QualityReport:
    err = mse(original, decoded)
    encoded = original.nbytes if encoded_bytes is None else encoded_bytes
    return QualityReport(
        mse=err,
        psnr_db=psnr_from_mse(err, max_value),
        ssim=ssim(original, decoded) if min(original.width, original.height) >= SSIM_WINDOW else float("nan"),
        bytes_original=original.nbytes,
        bytes_encoded=encoded,
        compression_ratio_pct=compression_ratio_bytes(original.nbytes, encoded),
        bitrate_bpp=bitrate_bpp(encoded, original.width * original.height),
    )


# Lower-case twin of autoencoder.train.ABLATION_HEADER for machine-readable output.
METRICS_CSV_HEADER = ("blocks", "psnr_train", "ssim_train", "psnr_test",
                      "ssim_test", "output_size", "compression_pct")
