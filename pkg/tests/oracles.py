"""Slow, obviously-correct reference implementations used only by tests."""

import heapq
import itertools
import math

import numpy as np


def naive_mse(a: np.ndarray, b: np.ndarray) -> float:
    total = 0
    h, w, c = a.shape
    for y in range(h):
        for x in range(w):
            for k in range(c):
                d = int(a[y, x, k]) - int(b[y, x, k])
                total += d * d
    return total / (h * w * c)


def naive_psnr(a, b, max_value=255.0) -> float:
    e = naive_mse(a, b)
    return math.inf if e == 0 else 10 * math.log10(max_value ** 2 / e)


def naive_ssim(a: np.ndarray, b: np.ndarray, win: int = 8) -> float:
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    h, w, ch = a.shape
    per_channel = []
    for k in range(ch):
        vals = []
        for y in range(h - win + 1):
            for x in range(w - win + 1):
                pa = a[y:y + win, x:x + win, k].astype(np.float64).ravel()
                pb = b[y:y + win, x:x + win, k].astype(np.float64).ravel()
                ma, mb = pa.mean(), pb.mean()
                va = ((pa - ma) ** 2).mean()
                vb = ((pb - mb) ** 2).mean()
                cov = ((pa - ma) * (pb - mb)).mean()
                vals.append((2 * ma * mb + c1) * (2 * cov + c2)
                            / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
        per_channel.append(sum(vals) / len(vals))
    return sum(per_channel) / ch


def huffman_cost(freqs: dict) -> int:
    """Total encoded bits of an optimal prefix code (sum of merge weights)."""
    w = [f for f in freqs.values() if f > 0]
    if len(w) == 1:
        return w[0]
    heapq.heapify(w)
    cost = 0
    while len(w) > 1:
        s = heapq.heappop(w) + heapq.heappop(w)
        cost += s
        heapq.heappush(w, s)
    return cost


def dct2_ortho(block: np.ndarray) -> np.ndarray:
    n = block.shape[0]
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            cu = math.sqrt(1 / n) if u == 0 else math.sqrt(2 / n)
            cv = math.sqrt(1 / n) if v == 0 else math.sqrt(2 / n)
            s = 0.0
            for x in range(n):
                for y in range(n):
                    s += block[x, y] * math.cos((2 * x + 1) * u * math.pi / (2 * n)) \
                        * math.cos((2 * y + 1) * v * math.pi / (2 * n))
            out[u, v] = cu * cv * s
    return out


def naive_conv_nchw(x, w, b, stride):
    """Direct zero-padded cross-correlation, NCHW input, (out,in,k,k) weights."""
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    y = np.zeros((n, cout, ho, wo))
    for i in range(ho):
        for j in range(wo):
            patch = xp[:, :, i * stride:i * stride + k, j * stride:j * stride + k]
            y[:, :, i, j] = np.tensordot(patch, w, axes=([1, 2, 3], [1, 2, 3])) + b
    return y


def serial_arrivals(sizes, bandwidth, latency):
    t, out = 0.0, []
    for s in sizes:
        t = t + latency + s / bandwidth
        out.append(t)
    return out


def best_first_intelligence(items, bandwidth, latency, intel_kinds):
    """Minimum over all orderings of the first intelligence arrival (brute force)."""
    best = math.inf
    for perm in itertools.permutations(items):
        t = 0.0
        for kind, size in perm:
            t += latency + size / bandwidth
            if kind in intel_kinds:
                best = min(best, t)
                break
    return best


def finite_difference_check(model, batch, eps=1e-6):
    """Largest per-tensor relative error between analytic and central-difference gradients."""
    _, grads = model.gradients(batch)
    worst = 0.0
    for name, p in model.params.items():
        num = np.zeros_like(p)
        flat, nflat = p.reshape(-1), num.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = model.gradients(batch)[0]
            flat[i] = keep - eps
            down = model.gradients(batch)[0]
            flat[i] = keep
            nflat[i] = (up - down) / (2 * eps)
        a = grads[name]
        denom = max(np.linalg.norm(a) + np.linalg.norm(num), 1e-12)
        worst = max(worst, float(np.linalg.norm(a - num) / denom))
    return worst
