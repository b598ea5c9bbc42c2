"""Forward and backward passes for every layer of the network.

Tensors are numpy float arrays, row-major, NHWC for activations.  Convolution
follows the flatten-the-filter formulation: image patches are gathered into a
matrix (one row per output position, one column per filter element) and
multiplied against the filter matrix, so each layer is a handful of GEMMs.

Each *_forward returns (output, cache); the matching backward consumes that
cache and produces exact gradients of the forward map.  Functions preserve
the dtype of their inputs: training runs in float32, gradient checks can run
the same code in float64.
"""

import numpy as np

from .errors import InvalidInputError, ShapeError
from .seeding import RngStream

Tensor = np.ndarray


def _same_pad(k: int) -> tuple:
    # total padding k - 1; the extra row/column goes to the bottom/right
    total = k - 1
    beg = total // 2
    return beg, total - beg


def _im2col(xpad: Tensor, k: int) -> Tensor:
    """Patch matrix of all k x k windows: (n * oh * ow, k * k * c)."""
    n = xpad.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(xpad, (k, k), axis=(1, 2))
    # (n, oh, ow, c, k, k) -> rows ordered by (n, oh, ow), columns by (k, k, c)
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * win.shape[1] * win.shape[2], k * k * xpad.shape[3])


def conv2d_forward(x: Tensor, w: Tensor, bias: Tensor) -> tuple:
    """2-d convolution, stride 1, SAME zero padding; spatial dims preserved.

    The patch matrix is kept in the cache so the weight gradient is a single
    GEMM later; peak memory scales with batch * h * w * k * k * c floats.
    """
    x, w, bias = np.asarray(x), np.asarray(w), np.asarray(bias)
    if x.ndim != 4 or w.ndim != 4 or w.shape[0] != w.shape[1]:
        raise ShapeError(f"conv2d expects x (n,h,w,c) and square kernel, got x {x.shape}, w {w.shape}")
    k, _, ci, co = w.shape
    if x.shape[3] != ci or bias.shape != (co,):
        raise ShapeError(f"channel mismatch: x {x.shape}, w {w.shape}, bias {bias.shape}")
    n, h, wd, _ = x.shape
    beg, end = _same_pad(k)
    xpad = np.pad(x, ((0, 0), (beg, end), (beg, end), (0, 0)))
    cols = _im2col(xpad, k)
    y = (cols @ w.reshape(k * k * ci, co) + bias).reshape(n, h, wd, co)
    return y, ((n, h, wd), cols, w)


def conv2d_backward(grad_y: Tensor, cache: tuple, input_grad: bool = True) -> tuple:
    """Gradients (grad_x, grad_w, grad_b); grad_x is None when input_grad=False."""
    (n, h, wd), cols, w = cache
    k, _, ci, co = w.shape
    if grad_y.shape != (n, h, wd, co):
        raise ShapeError(f"grad_y {grad_y.shape} does not match forward output {(n, h, wd, co)}")
    gy_flat = grad_y.reshape(-1, co)
    grad_b = gy_flat.sum(axis=0)
    grad_w = (cols.T @ gy_flat).reshape(k, k, ci, co)

    grad_x = None
    if input_grad:
        # scatter form of the transposed convolution: push each output
        # position's gradient back onto the k x k input window it read from
        beg, _ = _same_pad(k)
        gcols = (gy_flat @ w.reshape(k * k * ci, co).T).reshape(n, h, wd, k, k, ci)
        gxp = np.zeros((n, h + k - 1, wd + k - 1, ci), dtype=grad_y.dtype)
        for u in range(k):
            for v in range(k):
                gxp[:, u : u + h, v : v + wd, :] += gcols[:, :, :, u, v, :]
        grad_x = gxp[:, beg : beg + h, beg : beg + wd, :]
    return grad_x, grad_w, grad_b


def maxpool_forward(x: Tensor) -> tuple:
    """2 x 2 max pooling at stride 2 with SAME semantics: output is ceil(h/2)
    by ceil(w/2) and out-of-range window positions are ignored."""
    x = np.asarray(x)
    n, h, w, c = x.shape
    oh, ow = -(-h // 2), -(-w // 2)
    xpad = np.pad(x, ((0, 0), (0, 2 * oh - h), (0, 2 * ow - w), (0, 0)), constant_values=-np.inf)
    # windows flattened row-major: (0,0), (0,1), (1,0), (1,1)
    windows = (
        xpad.reshape(n, oh, 2, ow, 2, c).transpose(0, 1, 3, 2, 4, 5).reshape(n, oh, ow, 4, c)
    )
    idx = windows.argmax(axis=3)  # first maximum wins on ties
    y = np.take_along_axis(windows, idx[:, :, :, None, :], axis=3).squeeze(3)
    return y, ((n, h, w, c), idx)


def maxpool_backward(grad_y: Tensor, cache: tuple) -> Tensor:
    """Route each gradient element to its window's cached argmax position."""
    (n, h, w, c), idx = cache
    oh, ow = idx.shape[1], idx.shape[2]
    if grad_y.shape != (n, oh, ow, c):
        raise ShapeError(f"grad_y {grad_y.shape} does not match pooled shape {(n, oh, ow, c)}")
    gxp = np.zeros((n, 2 * oh, 2 * ow, c), dtype=grad_y.dtype)
    bi = np.arange(n)[:, None, None, None]
    ii = np.arange(oh)[None, :, None, None]
    jj = np.arange(ow)[None, None, :, None]
    cc = np.arange(c)[None, None, None, :]
    gxp[bi, 2 * ii + idx // 2, 2 * jj + idx % 2, cc] = grad_y
    return gxp[:, :h, :w, :]


def relu(x: Tensor) -> tuple:
    """Elementwise max(x, 0)."""
    x = np.asarray(x)
    return np.maximum(x, 0), x


def relu_backward(grad_y: Tensor, cache: Tensor) -> Tensor:
    # subgradient 0 at the kink
    return grad_y * (cache > 0)


def dropout(x: Tensor, keep_prob: float, rng: RngStream | None = None) -> tuple:
    """Zero each element with probability 1 - keep_prob, scale survivors by
    1 / keep_prob.  keep_prob = 1 is an exact identity and draws nothing."""
    if not 0.0 < keep_prob <= 1.0:
        raise InvalidInputError(f"keep_prob must be in (0, 1], got {keep_prob}")
    x = np.asarray(x)
    if keep_prob == 1.0:
        return x, (None, 1.0)
    if rng is None:
        raise InvalidInputError("dropout with keep_prob < 1 needs an rng")
    mask = rng.random(x.shape) < keep_prob
    y = (x * mask) / x.dtype.type(keep_prob)
    return y, (mask, keep_prob)


def dropout_backward(grad_y: Tensor, cache: tuple) -> Tensor:
    mask, keep_prob = cache
    if mask is None:
        return grad_y
    return (grad_y * mask) / grad_y.dtype.type(keep_prob)


def fc_forward(x: Tensor, w: Tensor, bias: Tensor) -> tuple:
    """Dense layer: y = x w + bias."""
    x, w, bias = np.asarray(x), np.asarray(w), np.asarray(bias)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or bias.shape != (w.shape[1],):
        raise ShapeError(f"fc shapes disagree: x {x.shape}, w {w.shape}, bias {bias.shape}")
    return x @ w + bias, (x, w)


def fc_backward(grad_y: Tensor, cache: tuple) -> tuple:
    x, w = cache
    if grad_y.shape != (x.shape[0], w.shape[1]):
        raise ShapeError(f"grad_y {grad_y.shape} does not match output {(x.shape[0], w.shape[1])}")
    return grad_y @ w.T, x.T @ grad_y, grad_y.sum(axis=0)


def softmax(logits: Tensor) -> Tensor:
    """Row-wise exp-normalize, stabilized by subtracting the row maximum."""
    logits = np.asarray(logits)
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(logits: Tensor, labels: Tensor) -> tuple:
    """Mean negative log-likelihood over the batch and its logits gradient."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    b, k = logits.shape
    if labels.shape != (b,):
        raise ShapeError(f"labels {labels.shape} do not match batch size {b}")
    if labels.min() < 0 or labels.max() >= k:
        raise InvalidInputError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(b), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(b), labels] -= grad.dtype.type(1.0)
    grad /= grad.dtype.type(b)
    return loss, grad


def _channel_window_sum(x: Tensor, radius: int) -> Tensor:
    # sum over channels [c - radius, c + radius], clipped to the valid range
    c = x.shape[-1]
    cs = np.concatenate([np.zeros(x.shape[:-1] + (1,), dtype=x.dtype), x.cumsum(axis=-1)], axis=-1)
    hi = np.minimum(np.arange(c) + radius + 1, c)
    lo = np.maximum(np.arange(c) - radius, 0)
    return cs[..., hi] - cs[..., lo]


def local_response_norm(
    x: Tensor, radius: int = 4, bias: float = 1.0, alpha: float = 0.001 / 9.0, beta: float = 0.75
) -> Tensor:
    """Across-channel local response normalization."""
    y, _ = lrn_forward(x, radius, bias, alpha, beta)
    return y


def lrn_forward(
    x: Tensor, radius: int = 4, bias: float = 1.0, alpha: float = 0.001 / 9.0, beta: float = 0.75
) -> tuple:
    x = np.asarray(x)
    denom = bias + alpha * _channel_window_sum(x * x, radius)
    scale = denom ** -beta
    return x * scale, (x, denom, scale, radius, alpha, beta)


def lrn_backward(grad_y: Tensor, cache: tuple) -> Tensor:
    x, denom, scale, radius, alpha, beta = cache
    # d y_c / d x_i = scale_c [c == i] - 2 alpha beta x_c denom_c^(-beta-1) x_i for i near c
    inner = grad_y * x * denom ** -(beta + 1)
    return grad_y * scale - 2.0 * alpha * beta * x * _channel_window_sum(inner, radius)
