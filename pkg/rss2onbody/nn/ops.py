"""Differentiable ops. Only what the extractor / predictor / discriminator blocks need, no broadcasting"""

from typing import Optional

import numpy as np

from ..errors import ShapeMismatchError
from .tensor import Tensor

CROSS_ENTROPY_EPS = 1e-12


def _needs_grad(*ts: Optional[Tensor]) -> bool:
    return any(t is not None and t.requires_grad for t in ts)


def _same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{op}: shapes {a.shape} and {b.shape} differ")


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False, op="constant")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return Tensor(
        a.data + b.data,
        _needs_grad(a, b),
        op="add",
        parents=(a, b),
        backward=lambda g: (g, g),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return Tensor(
        a.data - b.data,
        _needs_grad(a, b),
        op="sub",
        parents=(a, b),
        backward=lambda g: (g, -g),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    return Tensor(
        a.data * b.data,
        _needs_grad(a, b),
        op="mul",
        parents=(a, b),
        backward=lambda g: (g * b.data, g * a.data),
    )


def scale(a: Tensor, factor: float) -> Tensor:
    return Tensor(
        a.data * factor,
        a.requires_grad,
        op="scale",
        parents=(a,),
        backward=lambda g: (g * factor,),
    )


def sum_all(a: Tensor) -> Tensor:
    return Tensor(
        a.data.sum(),
        a.requires_grad,
        op="sum",
        parents=(a,),
        backward=lambda g: (np.full(a.shape, float(g)),),
    )


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeMismatchError(f"reshape: cannot reshape {a.shape} to {shape}") from e
    return Tensor(
        out,
        a.requires_grad,
        op="reshape",
        parents=(a,),
        backward=lambda g: (g.reshape(a.shape),),
    )


def flatten(a: Tensor) -> Tensor:
    """(N, ...) -> (N, prod(...))"""
    return reshape(a, (a.shape[0], -1))


def conv1d(
    x: Tensor, w: Tensor, b: Optional[Tensor] = None, stride: int = 1, padding: int = 0
) -> Tensor:
    """Cross-correlation of x (N, C, L) with w (O, C, K), zero padded by `padding` on both sides.

    Output length is (L + 2 padding - K) // stride + 1.
    """
    if x.data.ndim != 3 or w.data.ndim != 3:
        raise ShapeMismatchError(f"conv1d: expected 3-D input and kernel, got {x.shape}, {w.shape}")
    n, c, length = x.shape
    o, wc, k = w.shape
    if wc != c:
        raise ShapeMismatchError(f"conv1d: input has {c} channels, kernel expects {wc}")
    if b is not None and b.shape != (o,):
        raise ShapeMismatchError(f"conv1d: bias shape {b.shape}, expected {(o,)}")
    if stride < 1 or padding < 0:
        raise ShapeMismatchError("conv1d: stride must be >= 1 and padding >= 0")
    padded_len = length + 2 * padding
    if padded_len < k:
        raise ShapeMismatchError(f"conv1d: kernel width {k} exceeds padded input length {padded_len}")
    out_len = (padded_len - k) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    starts = np.arange(out_len) * stride
    idx = starts[None, :] + np.arange(k)[:, None]  # (K, out_len)
    cols = xp[:, :, idx]  # (N, C, K, out_len)
    cols_mat = cols.transpose(0, 3, 1, 2).reshape(n * out_len, c * k)
    w_mat = w.data.reshape(o, c * k)
    out = (cols_mat @ w_mat.T).reshape(n, out_len, o).transpose(0, 2, 1)
    if b is not None:
        out = out + b.data[None, :, None]

    def backward(g: np.ndarray):
        g_mat = g.transpose(0, 2, 1).reshape(n * out_len, o)
        gw = (g_mat.T @ cols_mat).reshape(o, c, k) if w.requires_grad else None
        gb = g.sum(axis=(0, 2)) if b is not None and b.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g_mat @ w_mat).reshape(n, out_len, c, k).transpose(0, 2, 3, 1)
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[:, :, starts + j] += gcols[:, :, j, :]
            gx = gxp[:, :, padding : padding + length]
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return Tensor(
        np.ascontiguousarray(out),
        _needs_grad(x, w, b),
        op="conv1d",
        parents=parents,
        backward=backward,
    )


def dense(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """x (N, in) @ w (in, out) + b (out,)"""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatchError(f"dense: cannot multiply {x.shape} by {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeMismatchError(f"dense: bias shape {b.shape}, expected {(w.shape[1],)}")
    out = x.data @ w.data
    if b is not None:
        out = out + b.data

    def backward(g: np.ndarray):
        gx = g @ w.data.T if x.requires_grad else None
        gw = x.data.T @ g if w.requires_grad else None
        if b is None:
            return (gx, gw)
        return (gx, gw, g.sum(axis=0) if b.requires_grad else None)

    parents = (x, w, b) if b is not None else (x, w)
    return Tensor(out, _needs_grad(x, w, b), op="dense", parents=parents, backward=backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor(
        np.where(mask, x.data, 0.0),
        x.requires_grad,
        op="relu",
        parents=(x,),
        backward=lambda g: (g * mask,),
    )


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax of a (N, K) matrix"""
    if x.data.ndim != 2:
        raise ShapeMismatchError(f"softmax: expected a matrix, got {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return Tensor(p, x.requires_grad, op="softmax", parents=(x,), backward=backward)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Column concatenation of (N, p) and (N, q)"""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeMismatchError(f"concat: cannot join {a.shape} and {b.shape}")
    split = a.shape[1]
    return Tensor(
        np.concatenate([a.data, b.data], axis=1),
        _needs_grad(a, b),
        op="concat",
        parents=(a, b),
        backward=lambda g: (g[:, :split], g[:, split:]),
    )


def stop_gradient(x: Tensor) -> Tensor:
    """Forward identity, cuts the graph: nothing flows back into x"""
    return Tensor(x.data, requires_grad=False, op="stop_gradient")


def one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ShapeMismatchError(f"labels must lie in [0, {classes})")
    out = np.zeros((labels.size, classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def cross_entropy_loss(
    probs: Tensor, target: np.ndarray, eps: float = CROSS_ENTROPY_EPS
) -> Tensor:
    """Mean over rows of -log p(true class). Probabilities below eps are clamped.

    The returned tensor carries `clamped`, the number of clamped rows.
    """
    target = np.asarray(target, dtype=np.float64)
    if probs.shape != target.shape or probs.data.ndim != 2:
        raise ShapeMismatchError(
            f"cross_entropy_loss: probabilities {probs.shape} vs target {target.shape}"
        )
    n = probs.shape[0]
    if n == 0:
        raise ShapeMismatchError("cross_entropy_loss: empty batch")
    picked = (probs.data * target).sum(axis=1)
    is_clamped = picked < eps
    safe = np.where(is_clamped, eps, picked)
    loss = float(np.mean(-np.log(safe)))

    def backward(g: np.ndarray):
        coeff = np.where(is_clamped, 0.0, -1.0 / (safe * n))
        return (float(g) * target * coeff[:, None],)

    out = Tensor(loss, probs.requires_grad, op="cross_entropy", parents=(probs,), backward=backward)
    out.clamped = int(is_clamped.sum())
    return out
