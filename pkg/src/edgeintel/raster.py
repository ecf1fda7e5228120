"""8-bit rasters, netpbm I/O, detection annotations and synthetic scenes."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


class PNMError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class AnnotationError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, eq=False)
class Image:
    """Row-major, channel-interleaved 8-bit raster.

    ``pixels`` always has shape ``(height, width, channels)`` even for
    grayscale images.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"bad pixel array shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("samples must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_samples(cls, width: int, height: int, channels: int, samples) -> "Image":
        buf = np.frombuffer(bytes(samples), dtype=np.uint8) if isinstance(
            samples, (bytes, bytearray, memoryview)) else np.asarray(samples)
        if buf.size != width * height * channels:
            raise ValueError(
                f"expected {width * height * channels} samples, got {buf.size}")
        return cls(buf.reshape(height, width, channels))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def samples(self) -> bytes:
        return self.pixels.tobytes()

    @property
    def nbytes(self) -> int:
        return self.pixels.size

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.pixels.shape, self.samples))

    def __repr__(self):
        return f"Image({self.width}x{self.height}x{self.channels})"


@dataclass(frozen=True)
class BoundingBox:
    """Integer pixel box; min corner inclusive, max corner exclusive."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError(f"zero-area box {self.as_list()}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_list(self) -> List[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def clip(self, width: int, height: int) -> "BoundingBox":
        x0, y0 = max(self.x_min, 0), max(self.y_min, 0)
        x1, y1 = min(self.x_max, width), min(self.y_max, height)
        if x0 >= x1 or y0 >= y1:
            raise ValueError("empty intersection")
        return BoundingBox(x0, y0, x1, y1)

    def intersects(self, other: "BoundingBox", margin: int = 0) -> bool:
        return not (self.x_max + margin <= other.x_min or other.x_max + margin <= self.x_min
                    or self.y_max + margin <= other.y_min or other.y_max + margin <= self.y_min)


@dataclass(frozen=True)
class Annotation:
    image_id: str
    box: BoundingBox
    class_name: str
    confidence: float = 1.0

    def __post_init__(self):
        if not self.class_name:
            raise ValueError("class_name must be non-empty")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps({
            "image_id": self.image_id,
            "bbox": self.box.as_list(),
            "class_name": self.class_name,
            "confidence": self.confidence,
        })


BACKGROUNDS = ("flat", "gradient", "noise")


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    width: int = 256
    height: int = 256
    object_count: int = 4
    background_texture: str = "noise"
    channels: int = 3
    image_id: str = field(default="")

    def __post_init__(self):
        if self.background_texture not in BACKGROUNDS:
            raise ValueError(f"unknown background {self.background_texture!r}")
        if self.width < 1 or self.height < 1:
            raise ValueError("scene dimensions must be positive")
        if self.object_count < 0:
            raise ValueError("object_count must be >= 0")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in u64")


# --------------------------------------------------------------------------
# netpbm

_WS = b" \t\r\n"


def _read_token(data: bytes, pos: int) -> Tuple[bytes, int, int]:
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WS:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in _WS and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PNMError("truncated header", start)
    return data[start:pos], start, pos


def read_pnm(data: bytes) -> Image:
    data = bytes(data)
    if len(data) < 2:
        raise PNMError("truncated magic", 0)
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise PNMError(f"unsupported magic {magic!r}", 0)
    channels = 1 if magic == b"P5" else 3
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, tok_start, pos = _read_token(data, pos)
        if not re.fullmatch(rb"[0-9]+", tok):
            raise PNMError(f"malformed {name} {tok!r}", tok_start)
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PNMError("zero image dimension", 2)
    if maxval != 255:
        raise PNMError(f"maxval {maxval} != 255", tok_start)
    if pos >= len(data) or data[pos:pos + 1] not in _WS:
        raise PNMError("missing whitespace after maxval", pos)
    pos += 1
    need = width * height * channels
    body = data[pos:pos + need]
    if len(body) < need:
        raise PNMError(f"truncated body: need {need} bytes, have {len(body)}", len(data))
    return Image.from_samples(width, height, channels, body)


def pnm_header(image: Image) -> bytes:
    magic = "P5" if image.channels == 1 else "P6"
    return f"{magic}\n{image.width} {image.height}\n255\n".encode("ascii")


def write_pnm(image: Image) -> bytes:
    return pnm_header(image) + image.samples


def load_pnm(path) -> Image:
    with open(path, "rb") as fh:
        return read_pnm(fh.read())


def save_pnm(image: Image, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pnm(image))


# --------------------------------------------------------------------------
# geometry

def crop(image: Image, box: BoundingBox) -> Image:
    b = box.clip(image.width, image.height)
    return Image(image.pixels[b.y_min:b.y_max, b.x_min:b.x_max, :])


def resize_nearest(image: Image, new_w: int, new_h: int) -> Image:
    if new_w < 1 or new_h < 1:
        raise ValueError("target dimensions must be >= 1")
    # floor(i * src / new) in exact integer arithmetic
    ys = (np.arange(new_h) * image.height) // new_h
    xs = (np.arange(new_w) * image.width) // new_w
    return Image(image.pixels[ys[:, None], xs[None, :], :])


# --------------------------------------------------------------------------
# annotations

def read_annotations(data) -> List[Annotation]:
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8")
    out = []
    for lineno, line in enumerate(data.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AnnotationError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(rec, dict):
            raise AnnotationError("record is not an object", lineno)
        try:
            image_id = rec["image_id"]
            bbox = rec["bbox"]
            class_name = rec["class_name"]
            confidence = rec["confidence"]
        except KeyError as exc:
            raise AnnotationError(f"missing key {exc.args[0]!r}", lineno) from None
        if not isinstance(image_id, str) or not isinstance(class_name, str):
            raise AnnotationError("image_id and class_name must be strings", lineno)
        if (not isinstance(bbox, list) or len(bbox) != 4
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in bbox)):
            raise AnnotationError("bbox must be 4 integers", lineno)
        if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
            raise AnnotationError("confidence must be a number", lineno)
        try:
            out.append(Annotation(image_id, BoundingBox(*bbox), class_name, float(confidence)))
        except ValueError as exc:
            raise AnnotationError(str(exc), lineno) from None
    return out


def write_annotations(annotations: Sequence[Annotation]) -> bytes:
    return "".join(a.to_json() + "\n" for a in annotations).encode("utf-8")


# --------------------------------------------------------------------------
# synthetic scenes

_RECT_CLASSES = ("building", "car", "truck")
_PLACEMENT_RETRIES = 200


def _background(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    h, w, c = spec.height, spec.width, spec.channels
    base = rng.integers(40, 200, size=c).astype(np.float64)
    if spec.background_texture == "flat":
        return np.broadcast_to(base, (h, w, c)).copy()
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    if spec.background_texture == "gradient":
        gx, gy = rng.uniform(-40, 40, size=2)
        ramp = gx * xx / max(w - 1, 1) + gy * yy / max(h - 1, 1)
        return base + ramp[:, :, None]
    # low-frequency terrain plus fine grain
    coarse = rng.normal(0.0, 25.0, size=(h // 8 + 2, w // 8 + 2, c))
    fy, fx = yy / 8.0, xx / 8.0
    y0, x0 = fy.astype(int), fx.astype(int)
    ty, tx = (fy - y0)[:, :, None], (fx - x0)[:, :, None]
    terrain = ((1 - ty) * (1 - tx) * coarse[y0, x0] + (1 - ty) * tx * coarse[y0, x0 + 1]
               + ty * (1 - tx) * coarse[y0 + 1, x0] + ty * tx * coarse[y0 + 1, x0 + 1])
    grain = rng.normal(0.0, 6.0, size=(h, w, c))
    return base + terrain + grain


def generate_scene(spec: SceneSpec) -> Tuple[Image, List[Annotation]]:
    """Render a deterministic scene of non-overlapping objects.

    Rectangles get a random class from building/car/truck, ellipses are
    storage tanks. Every object has a fill colour distinct from all others.
    Raises ValueError when the objects cannot be placed without overlap.
    """
    rng = np.random.default_rng(spec.seed)
    canvas = _background(spec, rng)
    image_id = spec.image_id or f"scene-{spec.seed}"
    short = min(spec.width, spec.height)
    lo = max(2, short // 10)
    hi = max(lo + 1, short // 4)

    boxes: List[BoundingBox] = []
    annotations: List[Annotation] = []
    used_colours = set()
    for _ in range(spec.object_count):
        for _attempt in range(_PLACEMENT_RETRIES):
            bw = int(rng.integers(lo, hi + 1))
            bh = int(rng.integers(lo, hi + 1))
            if bw > spec.width or bh > spec.height:
                continue
            x0 = int(rng.integers(0, spec.width - bw + 1))
            y0 = int(rng.integers(0, spec.height - bh + 1))
            box = BoundingBox(x0, y0, x0 + bw, y0 + bh)
            if not any(box.intersects(b, margin=1) for b in boxes):
                break
        else:
            raise ValueError(
                f"could not place {spec.object_count} objects in "
                f"{spec.width}x{spec.height} within the retry budget")
        while True:
            colour = tuple(int(v) for v in rng.integers(0, 256, size=spec.channels))
            if colour not in used_colours:
                used_colours.add(colour)
                break
        ellipse = bool(rng.integers(0, 2))
        region = canvas[box.y_min:box.y_max, box.x_min:box.x_max]
        if ellipse:
            yy, xx = np.mgrid[0:bh, 0:bw].astype(np.float64)
            ry, rx = bh / 2.0, bw / 2.0
            mask = ((yy + 0.5 - ry) / ry) ** 2 + ((xx + 0.5 - rx) / rx) ** 2 <= 1.0
            region[mask] = colour
            name = "storage_tank"
        else:
            region[:] = colour
            name = _RECT_CLASSES[int(rng.integers(0, len(_RECT_CLASSES)))]
        confidence = round(float(rng.uniform(0.55, 1.0)), 3)
        boxes.append(box)
        annotations.append(Annotation(image_id, box, name, confidence))

    pixels = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
    return Image(pixels), annotations


def scene_corpus(count: int, side: int, seed: int = 0, channels: int = 3,
                 max_objects: int = 4) -> List[Image]:
    """``count`` scenes with varied textures, seeded from one master seed."""
    rng = np.random.default_rng(seed)
    images = []
    for i in range(count):
        spec = SceneSpec(
            seed=int(rng.integers(0, 2 ** 63)),
            width=side, height=side,
            object_count=int(rng.integers(0, max_objects + 1)),
            background_texture=BACKGROUNDS[i % len(BACKGROUNDS)],
            channels=channels,
        )
        images.append(generate_scene(spec)[0])
    return images
