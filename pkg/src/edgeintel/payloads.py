"""Transmission units: captions, detection cutouts and packaged images."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

from . import metrics
from .codecs import dct_encode, predictive_encode
from .raster import Annotation, Image, crop, write_pnm

log = logging.getLogger(__name__)

KINDS = ("caption", "cutout", "ae_embedding", "lossy_image", "lossless_image", "raw_image")
DEFAULT_MIN_CONFIDENCE = 0.5

_METHOD_KIND = {"raw": "raw_image", "lossless": "lossless_image",
                "dct": "lossy_image", "ae": "ae_embedding"}


@dataclass(frozen=True)
class Payload:
    kind: str
    data: bytes
    source_image_id: str = ""
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown payload kind {self.kind!r}")

    @property
    def byte_size(self) -> int:
        return len(self.data)

    @property
    def extension(self) -> str:
        return {"caption": "txt", "raw_image": "pnm"}.get(self.kind, "imcp")


def extract_cutouts(image: Image, annotations: Sequence[Annotation],
                    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
                    image_id: str | None = None) -> List[Payload]:
    """One losslessly coded cutout per sufficiently confident detection.

    Boxes are clipped to the image; boxes that miss the image entirely are
    skipped and counted in a warning. ``image_id`` restricts the detections
    used to those tagged with it.
    """
    out = []
    skipped = 0
    for ann in annotations:
        if image_id is not None and ann.image_id != image_id:
            continue
        if ann.confidence < min_confidence:
            continue
        try:
            box = ann.box.clip(image.width, image.height)
        except ValueError:
            skipped += 1
            continue
        blob = predictive_encode(crop(image, box))
        out.append(Payload("cutout", blob.to_bytes(), ann.image_id, {
            "box": box.as_list(),
            "class_name": ann.class_name,
            "confidence": ann.confidence,
            "codec": "predictive",
        }))
    if skipped:
        log.warning("skipped %d cutout(s) with no overlap with the %dx%d image",
                    skipped, image.width, image.height)
    return out


def caption_text(annotations: Sequence[Annotation]) -> str:
    counts = Counter(a.class_name for a in annotations)
    if not counts:
        return "no objects detected."
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    parts = [f"{n} {name}" + ("" if n == 1 else "s") for name, n in ordered]
    return ", ".join(parts) + " detected."


def generate_caption(annotations: Sequence[Annotation], image_id: str = "") -> Payload:
    return Payload("caption", caption_text(annotations).encode("utf-8"), image_id,
                   {"objects": len(annotations)})


def package_image(image: Image, method: str = "raw", *, quality: int = 75, model=None,
                  image_id: str = "") -> Payload:
    """Wrap a whole image as a payload using ``raw``, ``lossless``, ``dct`` or ``ae``."""
    if method not in _METHOD_KIND:
        raise ValueError(f"unknown packaging method {method!r}")
    meta: Dict[str, object] = {"width": image.width, "height": image.height,
                               "channels": image.channels}
    if method == "raw":
        data = write_pnm(image)
    elif method == "lossless":
        data = predictive_encode(image).to_bytes()
        meta["codec"] = "predictive"
    elif method == "dct":
        data = dct_encode(image, quality).to_bytes()
        meta.update(codec="dct", quality=int(quality))
    else:
        if model is None:
            raise ValueError("ae packaging needs a trained model")
        from .autoencoder.codec import encode_embedding
        data = encode_embedding(model, image).to_bytes()
        meta.update(codec="ae_embedding", blocks=model.blocks,
                    embedding_side=model.embedding_side)
    return Payload(_METHOD_KIND[method], data, image_id, meta)


def build_manifest(payloads: Sequence[Payload], raw_bytes: int | None = None,
                   image_id: str | None = None) -> bytes:
    """JSON manifest; ratios are against ``raw_bytes`` or the raw_image payload."""
    if not payloads:
        raise ValueError("no payloads to describe")
    if raw_bytes is None:
        raws = [p.byte_size for p in payloads if p.kind == "raw_image"]
        if not raws:
            raise ValueError("manifest needs raw_bytes when no raw_image payload is present")
        raw_bytes = raws[0]
    if image_id is None:
        image_id = next((p.source_image_id for p in payloads if p.source_image_id), "")
    doc = {
        "image_id": image_id,
        "payloads": [{
            "kind": p.kind,
            "byte_size": p.byte_size,
            "ratio_pct": metrics.compression_ratio_bytes(raw_bytes, p.byte_size),
            "meta": p.meta,
        } for p in payloads],
    }
    return json.dumps(doc, indent=2).encode("utf-8")


def parse_manifest(data: bytes) -> dict:
    doc = json.loads(bytes(data).decode("utf-8"))
    if not isinstance(doc, dict) or "payloads" not in doc:
        raise ValueError("manifest lacks a payloads list")
    for entry in doc["payloads"]:
        if entry.get("kind") not in KINDS:
            raise ValueError(f"unknown payload kind {entry.get('kind')!r}")
    return doc
