"""Residual convolutional autoencoder whose bottleneck is a reduced image."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from . import nn

SKIP_MODES = ("paper", "codec_honest")
MAX_WIDTH = 64
# inputs live in [0, 1]; centring them keeps the first ReLU layer from
# starting half dead and measurably speeds up the shallow models
INPUT_OFFSET = 0.5


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    blocks: int = 1
    input_side: int = 256
    image_channels: int = 3
    base_width: int = 16
    seed: int = 0
    skip_mode: str = "codec_honest"

    def __post_init__(self):
        if not 0 <= self.blocks <= 5:
            raise ValueError(f"blocks must be in [0, 5], got {self.blocks}")
        if self.input_side < 1 or self.input_side % (2 ** self.blocks):
            raise ValueError(
                f"input_side {self.input_side} not divisible by 2^{self.blocks}")
        if self.image_channels not in (1, 3):
            raise ValueError("image_channels must be 1 or 3")
        if self.base_width < 1:
            raise ValueError("base_width must be >= 1")
        if self.skip_mode not in SKIP_MODES:
            raise ValueError(f"skip_mode must be one of {SKIP_MODES}")

    @property
    def embedding_side(self) -> int:
        return self.input_side // (2 ** self.blocks)

    def widths(self) -> List[int]:
        return [min(self.base_width * 2 ** i, MAX_WIDTH) for i in range(self.blocks)]

    def layer_shapes(self) -> "OrderedDict[str, Tuple[int, int, int]]":
        """``name -> (out_channels, in_channels, kernel)`` in declaration order."""
        c = self.image_channels
        widths = self.widths()
        shapes: "OrderedDict[str, Tuple[int, int, int]]" = OrderedDict()
        cin = c
        for i, w in enumerate(widths):
            shapes[f"enc{i}"] = (w, cin, 3)
            cin = w
        shapes["bottleneck"] = (c, cin, 1)
        cin = c
        for k in range(self.blocks):
            cout = widths[self.blocks - 2 - k] if k < self.blocks - 1 else widths[0]
            shapes[f"dec{k}"] = (cout, cin, 3)
            cin = cout
        shapes["out"] = (c, cin, 3)
        return shapes

    def parameter_count(self) -> int:
        return sum(o * i * k * k + o for o, i, k in self.layer_shapes().values())


class Model:
    """Encoder (stride-2 convs) -> 1x1 bottleneck -> decoder (upsample + conv).

    In ``paper`` skip mode each encoder block output is added to the decoder
    activation of the same resolution and width. The deepest encoder output
    has no such partner (the bottleneck sits there), so B <= 1 models have no
    skips in either mode.
    """

    def __init__(self, config: ModelConfig, params: "OrderedDict[str, np.ndarray]"):
        self.config = config
        self.params = params

    @property
    def blocks(self) -> int:
        return self.config.blocks

    @property
    def embedding_side(self) -> int:
        return self.config.embedding_side

    @property
    def has_skips(self) -> bool:
        return self.config.skip_mode == "paper" and self.config.blocks >= 2

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def layer(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        return self.params[f"{name}.w"], self.params[f"{name}.b"]

    def copy(self) -> "Model":
        return Model(self.config, OrderedDict((k, v.copy()) for k, v in self.params.items()))

    # -- forward (public API is NCHW, layers run NHWC) -----------------------

    def _check_batch(self, batch: np.ndarray) -> None:
        c, s = self.config.image_channels, self.config.input_side
        if batch.ndim != 4 or batch.shape[1:] != (c, s, s):
            raise ValueError(f"expected batch of shape (n, {c}, {s}, {s}), got {batch.shape}")

    def _encode(self, x: np.ndarray, caches: list | None = None):
        h = x - INPUT_OFFSET
        skips = []
        for i in range(self.blocks):
            w, b = self.layer(f"enc{i}")
            z, cache = nn.conv2d(h, w, b, stride=2)
            h = nn.relu(z)
            skips.append(h)
            if caches is not None:
                caches.append((f"enc{i}", cache, h))
        w, b = self.layer("bottleneck")
        emb, cache = nn.conv2d(h, w, b)
        if caches is not None:
            caches.append(("bottleneck", cache, None))
        return emb, skips

    def _decode(self, emb: np.ndarray, skips: list | None = None, caches: list | None = None):
        h = emb
        for k in range(self.blocks):
            w, b = self.layer(f"dec{k}")
            z, cache = nn.conv2d(nn.upsample2(h), w, b)
            h = nn.relu(z)
            if caches is not None:
                caches.append((f"dec{k}", cache, h))
            if skips is not None and self.has_skips and k < self.blocks - 1:
                h = h + skips[self.blocks - 2 - k]
        w, b = self.layer("out")
        z, cache = nn.conv2d(h, w, b)
        out = nn.sigmoid(z)
        if caches is not None:
            caches.append(("out", cache, out))
        return out

    def encode(self, batch: np.ndarray) -> np.ndarray:
        """Bottleneck activation ``(n, image_channels, s, s)`` for an NCHW batch."""
        self._check_batch(batch)
        emb, _ = self._encode(_nhwc(batch))
        return _nchw(emb)

    def decode(self, emb: np.ndarray) -> np.ndarray:
        """Decoder half only; no skip connections are available here."""
        c, s = self.config.image_channels, self.embedding_side
        if emb.ndim != 4 or emb.shape[1:] != (c, s, s):
            raise ValueError(f"expected embedding of shape (n, {c}, {s}, {s}), got {emb.shape}")
        return _nchw(self._decode(_nhwc(emb)))

    def forward(self, batch: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._check_batch(batch)
        emb, skips = self._encode(_nhwc(batch))
        return _nchw(self._decode(emb, skips)), _nchw(emb)

    # -- backward ----------------------------------------------------------

    def gradients(self, batch: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
        """MSE loss of reconstructing ``batch`` and its parameter gradients."""
        self._check_batch(batch)
        x = _nhwc(batch)
        caches: list = []
        emb, skips = self._encode(x, caches)
        recon = self._decode(emb, skips, caches)
        loss = nn.mse_loss(recon, x)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss {loss}")
        grads: Dict[str, np.ndarray] = {}
        by_name = {name: (cache, act) for name, cache, act in caches}

        def conv_back(name, dz):
            cache, _ = by_name[name]
            # the network input needs no gradient
            need_dx = name != ("enc0" if self.blocks else "bottleneck")
            dx, dw, db = nn.conv2d_backward(dz, self.params[f"{name}.w"], cache, need_dx)
            grads[f"{name}.w"], grads[f"{name}.b"] = dw, db
            return dx

        dh = conv_back("out", nn.sigmoid_backward(nn.mse_loss_backward(recon, x), recon))
        skip_grads: Dict[int, np.ndarray] = {}
        for k in reversed(range(self.blocks)):
            if self.has_skips and k < self.blocks - 1:
                skip_grads[self.blocks - 2 - k] = dh
            _, act = by_name[f"dec{k}"]
            dh = nn.upsample2_backward(conv_back(f"dec{k}", nn.relu_backward(dh, act)))
        dh = conv_back("bottleneck", dh)
        for i in reversed(range(self.blocks)):
            if i in skip_grads:
                dh = dh + skip_grads[i]
            _, act = by_name[f"enc{i}"]
            dh = conv_back(f"enc{i}", nn.relu_backward(dh, act))
        ordered = OrderedDict((name, grads[name]) for name in self.params)
        for name, g in ordered.items():
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for {name}")
        return loss, ordered


def _nhwc(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x.transpose(0, 2, 3, 1))


def _nchw(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


def build_model(config: ModelConfig) -> Model:
    """Initialise weights with He fan-in normals drawn from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    params: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, (cout, cin, k) in config.layer_shapes().items():
        std = np.sqrt(2.0 / (cin * k * k))
        params[f"{name}.w"] = rng.normal(0.0, std, size=(cout, cin, k, k))
        params[f"{name}.b"] = np.zeros(cout)
    return Model(config, params)


def forward(model: Model, batch: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return model.forward(batch)


def loss_mse(reconstruction: np.ndarray, target: np.ndarray) -> float:
    return nn.mse_loss(reconstruction, target)


def backward_and_step(model: Model, batch: np.ndarray,
                      state: nn.AdamState) -> Tuple[float, nn.AdamState]:
    loss, grads = model.gradients(batch)
    nn.adam_update(model.params, grads, state)
    return loss, state
