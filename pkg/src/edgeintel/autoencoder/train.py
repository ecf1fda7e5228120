"""Mini-batch training, evaluation and the block-count ablation."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from typing import List, Sequence

import numpy as np

from .. import metrics
from ..raster import Image, resize_nearest
from . import nn
from .model import Model, ModelConfig, build_model

log = logging.getLogger(__name__)

CONVERGENCE_FACTOR = 0.5
EVAL_BATCH = 25


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 25
    val_split: float = 0.20
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.val_split < 1.0:
            raise ValueError("val_split must be in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainingReport:
    blocks: int
    train_mse: List[float]
    val_mse: List[float]
    train_quality: metrics.QualityReport
    test_quality: metrics.QualityReport
    parameter_count: int
    embedding_side: int
    compression_ratio_pct: float
    converged: bool
    model: Model | None = field(default=None, repr=False, compare=False)

    def curves_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_mse", "val_mse"])
        for i, (t, v) in enumerate(zip(self.train_mse, self.val_mse), start=1):
            w.writerow([i, repr(t), repr(v)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "blocks": self.blocks,
            "parameter_count": self.parameter_count,
            "embedding_side": self.embedding_side,
            "compression_ratio_pct": self.compression_ratio_pct,
            "converged": self.converged,
            "train": self.train_quality.to_dict(),
            "test": self.test_quality.to_dict(),
            "train_mse": self.train_mse,
            "val_mse": self.val_mse,
        }


def images_to_batch(images: Sequence[Image], side: int | None = None) -> np.ndarray:
    """Stack images as an NCHW float batch in [0, 1], resizing when needed."""
    arrs = []
    for img in images:
        if side is not None and (img.width != side or img.height != side):
            img = resize_nearest(img, side, side)
        arrs.append(img.pixels.transpose(2, 0, 1))
    return np.stack(arrs).astype(np.float64) / 255.0


def batch_to_images(batch: np.ndarray) -> List[Image]:
    q = np.clip(np.rint(batch * 255.0), 0, 255).astype(np.uint8)
    return [Image(x.transpose(1, 2, 0)) for x in q]


def reconstruct(model: Model, batch: np.ndarray) -> np.ndarray:
    outs = [model.forward(batch[i:i + EVAL_BATCH])[0] for i in range(0, len(batch), EVAL_BATCH)]
    return np.concatenate(outs)


def evaluate_mse(model: Model, batch: np.ndarray) -> float:
    sq = 0.0
    for i in range(0, len(batch), EVAL_BATCH):
        chunk = batch[i:i + EVAL_BATCH]
        d = model.forward(chunk)[0] - chunk
        sq += float(np.sum(d * d))
    return sq / batch.size


def quality_on(model: Model, batch: np.ndarray, max_value: float = 255.0) -> metrics.QualityReport:
    """Per-image metrics on 8-bit re-quantised reconstructions, then averaged."""
    cfg = model.config
    originals = batch_to_images(batch)
    decoded = batch_to_images(reconstruct(model, batch))
    errs = [metrics.mse(a, b) for a, b in zip(originals, decoded)]
    psnrs = [metrics.psnr_from_mse(e, max_value) for e in errs]
    ssims = [metrics.ssim(a, b) if cfg.input_side >= metrics.SSIM_WINDOW else float("nan")
             for a, b in zip(originals, decoded)]
    raw = cfg.image_channels * cfg.input_side ** 2
    emb = cfg.image_channels * cfg.embedding_side ** 2
    return metrics.QualityReport(
        mse=float(np.mean(errs)),
        psnr_db=metrics.mean_psnr(psnrs),
        ssim=float(np.mean(ssims)),
        bytes_original=raw,
        bytes_encoded=emb,
        compression_ratio_pct=metrics.compression_ratio_spatial(cfg.input_side, cfg.embedding_side),
        bitrate_bpp=metrics.bitrate_bpp(emb, cfg.input_side ** 2),
    )


def split_indices(n: int, val_split: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_val = min(max(1, int(round(val_split * n))), n - 1)
    return perm[n_val:], perm[:n_val]


def train(model_config: ModelConfig, train_config: TrainConfig, dataset: Sequence[Image],
          psnr_max: float = 255.0) -> TrainingReport:
    if len(dataset) < 2 * train_config.batch_size:
        raise ValueError(
            f"dataset of {len(dataset)} images is smaller than 2 x batch_size "
            f"({2 * train_config.batch_size})")
    data = images_to_batch(dataset, model_config.input_side)
    if data.shape[1] != model_config.image_channels:
        raise ValueError(f"dataset has {data.shape[1]} channels, model expects "
                         f"{model_config.image_channels}")
    rng = np.random.default_rng(train_config.seed)
    train_idx, val_idx = split_indices(len(data), train_config.val_split, rng)
    train_set, val_set = data[train_idx], data[val_idx]

    model = build_model(model_config)
    state = nn.AdamState(lr=train_config.learning_rate)
    bs = train_config.batch_size
    train_curve: List[float] = []
    val_curve: List[float] = []
    for epoch in range(train_config.epochs):
        order = rng.permutation(len(train_set))
        total = 0.0
        for start in range(0, len(order), bs):
            batch = train_set[order[start:start + bs]]
            loss, grads = model.gradients(batch)
            nn.adam_update(model.params, grads, state)
            total += loss * len(batch)
        train_curve.append(total / len(train_set))
        val_curve.append(evaluate_mse(model, val_set))
        log.info("blocks=%d epoch %d train_mse=%.6g val_mse=%.6g", model_config.blocks,
                 epoch + 1, train_curve[-1], val_curve[-1])

    converged = bool(val_curve) and val_curve[-1] <= CONVERGENCE_FACTOR * val_curve[0]
    return TrainingReport(
        blocks=model_config.blocks,
        train_mse=train_curve,
        val_mse=val_curve,
        train_quality=quality_on(model, train_set, psnr_max),
        test_quality=quality_on(model, val_set, psnr_max),
        parameter_count=model.parameter_count(),
        embedding_side=model_config.embedding_side,
        compression_ratio_pct=metrics.compression_ratio_spatial(
            model_config.input_side, model_config.embedding_side),
        converged=converged,
        model=model,
    )


# --------------------------------------------------------------------------
# ablation table

ABLATION_HEADER = ("Blocks", "PSNR Train", "SSIM Train", "PSNR Test", "SSIM Test",
                   "Output Size", "Compression")


@dataclass
class AblationRow:
    blocks: int
    psnr_train: float | None
    ssim_train: float | None
    psnr_test: float | None
    ssim_test: float | None
    output_size: int
    compression_pct: float
    report: TrainingReport | None = field(default=None, repr=False, compare=False)

    @classmethod
    def sizes_only(cls, blocks: int, input_side: int) -> "AblationRow":
        side = ModelConfig(blocks=blocks, input_side=input_side).embedding_side
        return cls(blocks, None, None, None, None, side,
                   metrics.compression_ratio_spatial(input_side, side))

    @classmethod
    def from_report(cls, report: TrainingReport) -> "AblationRow":
        return cls(report.blocks, report.train_quality.psnr_db, report.train_quality.ssim,
                   report.test_quality.psnr_db, report.test_quality.ssim,
                   report.embedding_side, report.compression_ratio_pct, report)


def run_ablation(blocks: Sequence[int], model_config: ModelConfig, train_config: TrainConfig,
                 dataset: Sequence[Image], psnr_max: float = 255.0) -> List[AblationRow]:
    if not blocks:
        raise ValueError("block list is empty")
    rows = []
    for b in blocks:
        report = train(replace(model_config, blocks=int(b)), train_config, dataset, psnr_max)
        rows.append(AblationRow.from_report(report))
    return rows


def _fmt(v: float | None) -> str:
    if v is None:
        return ""
    return metrics.format_db(v)


def ablation_csv(rows: Sequence[AblationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ABLATION_HEADER)
    for r in rows:
        w.writerow([r.blocks, _fmt(r.psnr_train), _fmt(r.ssim_train), _fmt(r.psnr_test),
                    _fmt(r.ssim_test), r.output_size, metrics.format_pct(r.compression_pct)])
    return buf.getvalue()


def _parse(v: str) -> float | None:
    if v == "":
        return None
    return float(v)


def parse_ablation_csv(text: str) -> List[AblationRow]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != ABLATION_HEADER:
        raise ValueError(f"unexpected ablation header {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        rows.append(AblationRow(int(rec[0]), _parse(rec[1]), _parse(rec[2]), _parse(rec[3]),
                                _parse(rec[4]), int(rec[5]), float(rec[6])))
    return rows
