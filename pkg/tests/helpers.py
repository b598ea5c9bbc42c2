"""Independent oracles used by the test suite.

These are deliberately naive, straight-line implementations written before
and apart from the library code they check: a queue BFS for flood fill, a
six-loop direct convolution, central finite differences, and a scalar Adam
recurrence.
"""

import math
from collections import deque

import numpy as np


def floodfill_bfs_oracle(pixels: np.ndarray, threshold: float) -> np.ndarray:
    """Queue-based BFS flood fill from the border; marks background pixels.

    A neighbor is marked when its Euclidean RGB distance to the already
    marked pixel it is reached from is strictly below the threshold.
    """
    h, w, _ = pixels.shape
    marked = np.zeros((h, w), dtype=bool)
    queue = deque()
    for r in range(h):
        for c in range(w):
            if r in (0, h - 1) or c in (0, w - 1):
                marked[r, c] = True
                queue.append((r, c))
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and not marked[rr, cc]:
                d = math.sqrt(float(((pixels[rr, cc] - pixels[r, c]) ** 2).sum()))
                if d < threshold:
                    marked[rr, cc] = True
                    queue.append((rr, cc))
    return marked


def conv2d_same_oracle(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Direct six-loop convolution, stride 1, SAME zero padding."""
    n, h, wd, ci = x.shape
    k = w.shape[0]
    co = w.shape[3]
    beg = (k - 1) // 2
    y = np.zeros((n, h, wd, co), dtype=np.float64)
    for b in range(n):
        for p in range(h):
            for q in range(wd):
                for o in range(co):
                    acc = 0.0
                    for u in range(k):
                        for v in range(k):
                            rr, cc = p + u - beg, q + v - beg
                            if 0 <= rr < h and 0 <= cc < wd:
                                for c in range(ci):
                                    acc += x[b, rr, cc, c] * w[u, v, c, o]
                    y[b, p, q, o] = acc + bias[o]
    return y


def finite_difference(f, arr: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f() with respect to arr, in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = arr[idx]
        arr[idx] = old + eps
        plus = f()
        arr[idx] = old - eps
        minus = f()
        arr[idx] = old
        grad[idx] = (plus - minus) / (2.0 * eps)
    return grad


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def adam_scalar_oracle(p0: float, grads, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    """Textbook Adam recurrence on one scalar parameter; returns the history."""
    p, m, v = p0, 0.0, 0.0
    history = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p = p - lr * m_hat / (math.sqrt(v_hat) + eps)
        history.append(p)
    return history
