"""Float64 NHWC layer primitives with hand-written backward passes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np


def _out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _gemm_weights(w: np.ndarray) -> np.ndarray:
    cout, cin, k, _ = w.shape
    return w.transpose(2, 3, 1, 0).reshape(k * k * cin, cout)


def _im2col(x: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, _, _, cin = x.shape
    pad = k // 2
    if k == 1 and stride == 1:
        return x.reshape(n * ho * wo, cin)
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    pieces = [xp[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride, :]
              for i in range(k) for j in range(k)]
    return np.concatenate(pieces, axis=-1).reshape(n * ho * wo, k * k * cin)


def _flat_padded(x: np.ndarray, pad: int) -> np.ndarray:
    n, h, w, c = x.shape
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0))).reshape(-1, c)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1):
    """Zero-padded ("same" for stride 1) cross-correlation of an NHWC batch.

    ``w`` is ``(out, in, k, k)``. Returns ``(y, cache)``.

    Stride-1 layers with at least as many input as output channels skip
    im2col: the padded batch is flattened to rows, one GEMM produces every
    kernel offset's contribution side by side, and shifted row slices of that
    product are summed. Rows that straddle the padding produce junk that is
    cropped away. Otherwise one im2col GEMM is used, with columns ordered
    ``(ky, kx, channel)``.
    """
    n, h, wd, cin = x.shape
    cout, cin_w, k, _ = w.shape
    if cin != cin_w:
        raise ValueError(f"conv expects {cin_w} input channels, got {cin}")
    pad = k // 2
    ho, wo = _out_size(h, k, stride, pad), _out_size(wd, k, stride, pad)
    if stride == 1 and k > 1 and cin >= cout:
        xf = _flat_padded(x, pad)
        hp, wp = h + 2 * pad, wd + 2 * pad
        rows = xf.shape[0]
        z = xf @ w.transpose(1, 2, 3, 0).reshape(cin, k * k * cout)
        y = np.zeros((rows, cout))
        for i in range(k):
            for j in range(k):
                off, col = i * wp + j, (i * k + j) * cout
                y[:rows - off] += z[off:, col:col + cout]
        y += b
        y = np.ascontiguousarray(y.reshape(n, hp, wp, cout)[:, :h, :wd])
        return y, ("flat", xf, x.shape, stride)
    cols = _im2col(x, k, stride, ho, wo)
    y = cols @ _gemm_weights(w)
    y += b
    return y.reshape(n, ho, wo, cout), ("cols", cols, x.shape, stride)


def conv2d_backward(dy: np.ndarray, w: np.ndarray, cache, need_dx: bool = True):
    kind, data, x_shape, stride = cache
    n, h, wd, cin = x_shape
    cout, _, k, _ = w.shape
    pad = k // 2
    _, ho, wo, _ = dy.shape
    dy2 = dy.reshape(n * ho * wo, cout)
    db = dy2.sum(axis=0)
    if kind == "cols":
        dw = (data.T @ dy2).reshape(k, k, cin, cout).transpose(3, 2, 0, 1)
    else:
        hp, wp = h + 2 * pad, wd + 2 * pad
        dyf = np.zeros((n, hp, wp, cout))
        dyf[:, :h, :wd] = dy
        dyf = dyf.reshape(-1, cout)
        rows = dyf.shape[0]
        dw = np.empty_like(w)
        for i in range(k):
            for j in range(k):
                off = i * wp + j
                dw[:, :, i, j] = dyf[:rows - off].T @ data[off:]
    dw = np.ascontiguousarray(dw)
    if not need_dx:
        return None, dw, db
    if stride == 1 and cout <= cin:
        # input gradient of a "same" conv is a "same" conv with the kernel
        # flipped and its channel axes swapped
        wt = w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
        dx, _ = conv2d(dy, wt, np.zeros(cin))
        return dx, dw, db
    dcols = (dy2 @ _gemm_weights(w).T).reshape(n, ho, wo, k, k, cin)
    dxp = np.zeros((n, h + 2 * pad, wd + 2 * pad, cin))
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride, :] += \
                dcols[:, :, :, i, j, :]
    return dxp[:, pad:pad + h, pad:pad + wd, :], dw, db


def upsample2(x: np.ndarray) -> np.ndarray:
    return x.repeat(2, axis=1).repeat(2, axis=2)


def upsample2_backward(dy: np.ndarray) -> np.ndarray:
    n, h, w, c = dy.shape
    return dy.reshape(n, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return dy * (y > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return dy * y * (1.0 - y)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    d = pred - target
    return float(np.mean(d * d))


def mse_loss_backward(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
                state: AdamState) -> AdamState:
    """In-place Adam step over ``params`` (iterated in declaration order)."""
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
