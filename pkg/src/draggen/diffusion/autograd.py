"""Minimal reverse-mode autodiff over numpy arrays.

The denoisers are small enough to train on CPU in float64, so the graph
is plain Python: every op returns a ``Var`` holding the value, its
parents, and a closure that routes the output gradient to them. Weights
are ``Param`` leaves whose ``.grad`` persists across backward calls
(zeroed by the optimizer), which lets one loss flow through several
forward passes sharing weights (reference pass, conditional and
unconditional branches).
"""

from __future__ import annotations

import numpy as np


class Var:
    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g


class Param(Var):
    """Trainable leaf; ``.grad`` persists until ``zero_grad``."""

    __slots__ = ("name",)

    def __init__(self, value, name: str = ""):
        super().__init__(value)
        self.grad = np.zeros_like(self.value)
        self.name = name


def backward(loss: Var, seed_grad=None) -> None:
    """Backpropagate from ``loss`` through the graph."""
    topo: list[Var] = []
    visited: set[int] = set()
    stack: list[tuple[Var, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    # fresh gradients for interior nodes; Params keep accumulating
    for node in topo:
        if not isinstance(node, Param):
            node.grad = None
    loss._accumulate(
        np.ones_like(loss.value) if seed_grad is None else seed_grad
    )
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def add(a: Var, b: Var) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value + b.value, (a, b))

    def bw(g):
        a._accumulate(_unbroadcast(g, a.value.shape))
        b._accumulate(_unbroadcast(g, b.value.shape))

    out._backward = bw
    return out


def sub(a: Var, b: Var) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value - b.value, (a, b))

    def bw(g):
        a._accumulate(_unbroadcast(g, a.value.shape))
        b._accumulate(_unbroadcast(-g, b.value.shape))

    out._backward = bw
    return out


def mul(a: Var, b: Var) -> Var:
    a, b = as_var(a), as_var(b)
    out = Var(a.value * b.value, (a, b))

    def bw(g):
        a._accumulate(_unbroadcast(g * b.value, a.value.shape))
        b._accumulate(_unbroadcast(g * a.value, b.value.shape))

    out._backward = bw
    return out


def scale(a: Var, s: float) -> Var:
    out = Var(a.value * s, (a,))
    out._backward = lambda g: a._accumulate(g * s)
    return out


def matmul(a: Var, b: Var) -> Var:
    """Batched matmul with numpy broadcasting on leading dims."""
    a, b = as_var(a), as_var(b)
    out = Var(a.value @ b.value, (a, b))

    def bw(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        a._accumulate(_unbroadcast(ga, a.value.shape))
        b._accumulate(_unbroadcast(gb, b.value.shape))

    out._backward = bw
    return out


def reshape(a: Var, shape) -> Var:
    orig = a.value.shape
    out = Var(a.value.reshape(shape), (a,))
    out._backward = lambda g: a._accumulate(g.reshape(orig))
    return out


def transpose(a: Var, axes) -> Var:
    inv = np.argsort(axes)
    out = Var(a.value.transpose(axes), (a,))
    out._backward = lambda g: a._accumulate(g.transpose(inv))
    return out


def concat(vars_: list[Var], axis: int) -> Var:
    vals = [v.value for v in vars_]
    out = Var(np.concatenate(vals, axis=axis), tuple(vars_))
    sizes = [v.shape[axis] for v in vals]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for v, lo, hi in zip(vars_, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            v._accumulate(g[tuple(idx)])

    out._backward = bw
    return out


def split(a: Var, sections: int, axis: int) -> list[Var]:
    pieces = np.split(a.value, sections, axis=axis)
    size = pieces[0].shape[axis]
    outs = []
    for i, piece in enumerate(pieces):
        out = Var(piece, (a,))

        def bw(g, i=i):
            full = np.zeros_like(a.value)
            idx = [slice(None)] * full.ndim
            idx[axis] = slice(i * size, (i + 1) * size)
            full[tuple(idx)] = g
            a._accumulate(full)

        out._backward = bw
        outs.append(out)
    return outs


def vsum(a: Var, axis=None, keepdims=False) -> Var:
    out = Var(a.value.sum(axis=axis, keepdims=keepdims), (a,))

    def bw(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.value.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.value.shape).copy())

    out._backward = bw
    return out


def mean(a: Var, axis=None, keepdims=False) -> Var:
    n = a.value.size if axis is None else a.value.shape[axis]
    return scale(vsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def silu(a: Var) -> Var:
    sig = 1.0 / (1.0 + np.exp(-a.value))
    out = Var(a.value * sig, (a,))
    out._backward = lambda g: a._accumulate(g * sig * (1.0 + a.value * (1.0 - sig)))
    return out


def softmax(a: Var, axis: int = -1) -> Var:
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Var(s, (a,))

    def bw(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        a._accumulate(s * (g - dot))

    out._backward = bw
    return out


def square(a: Var) -> Var:
    out = Var(a.value**2, (a,))
    out._backward = lambda g: a._accumulate(2.0 * a.value * g)
    return out


def mse(pred: Var, target: np.ndarray) -> Var:
    """Mean squared error against a constant target."""
    return mean(square(sub(pred, Var(target))))


# ---------------------------------------------------------------------------
# Structured ops (conv, norms, resampling)
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, k: int, stride: int, pad: int):
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    s0, s1, s2, s3 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(b, c, k, k, ho, wo),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
    )
    cols = windows.reshape(b, c * k * k, ho * wo)
    return np.ascontiguousarray(cols), ho, wo


def conv2d(x: Var, w: Var, bias: Var, stride: int = 1, pad: int = 1) -> Var:
    """x (B,C,H,W) * w (Cout,Cin,k,k) + bias (Cout,)."""
    b_, cin, h, win = x.value.shape
    cout, _, k, _ = w.value.shape
    cols, ho, wo = _im2col(x.value, k, stride, pad)
    wmat = w.value.reshape(cout, -1)
    y = np.matmul(wmat, cols)  # (B, Cout, L) via broadcasting
    y = y.reshape(b_, cout, ho, wo) + bias.value[None, :, None, None]
    out = Var(y, (x, w, bias))

    def bw(g):
        gl = np.ascontiguousarray(g.reshape(b_, cout, ho * wo))
        gw = np.matmul(gl, cols.transpose(0, 2, 1)).sum(axis=0)
        w._accumulate(gw.reshape(w.value.shape))
        bias._accumulate(g.sum(axis=(0, 2, 3)))
        dcols = np.matmul(wmat.T, gl).reshape(b_, cin, k, k, ho, wo)
        dxp = np.zeros((b_, cin, h + 2 * pad, win + 2 * pad))
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + ho * stride : stride, j : j + wo * stride : stride] += (
                    dcols[:, :, i, j]
                )
        dx = dxp[:, :, pad : pad + h, pad : pad + win] if pad else dxp
        x._accumulate(dx)

    out._backward = bw
    return out


def group_norm(x: Var, gamma: Var, beta: Var, groups: int, eps: float = 1e-5) -> Var:
    b, c, h, w = x.value.shape
    xg = x.value.reshape(b, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv).reshape(b, c, h, w)
    y = xhat * gamma.value[None, :, None, None] + beta.value[None, :, None, None]
    out = Var(y, (x, gamma, beta))

    def bw(g):
        gamma._accumulate((g * xhat).sum(axis=(0, 2, 3)))
        beta._accumulate(g.sum(axis=(0, 2, 3)))
        dxhat = (g * gamma.value[None, :, None, None]).reshape(b, groups, -1)
        xh = xhat.reshape(b, groups, -1)
        n = xh.shape[2]
        dx = (
            inv / n * (n * dxhat - dxhat.sum(axis=2, keepdims=True)
                       - xh * (dxhat * xh).sum(axis=2, keepdims=True))
        )
        x._accumulate(dx.reshape(b, c, h, w))

    out._backward = bw
    return out


def layer_norm(x: Var, gamma: Var | None = None, beta: Var | None = None,
               eps: float = 1e-6) -> Var:
    """Normalize over the last axis; affine terms optional."""
    mu = x.value.mean(axis=-1, keepdims=True)
    var = x.value.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.value - mu) * inv
    parents = [x]
    y = xhat
    if gamma is not None:
        y = y * gamma.value
        parents.append(gamma)
    if beta is not None:
        y = y + beta.value
        parents.append(beta)
    out = Var(y, tuple(parents))

    def bw(g):
        if beta is not None:
            beta._accumulate(_unbroadcast(g, beta.value.shape))
        if gamma is not None:
            gamma._accumulate(_unbroadcast(g * xhat, gamma.value.shape))
            gx = g * gamma.value
        else:
            gx = g
        n = x.value.shape[-1]
        dx = inv / n * (
            n * gx - gx.sum(axis=-1, keepdims=True)
            - xhat * (gx * xhat).sum(axis=-1, keepdims=True)
        )
        x._accumulate(dx)

    out._backward = bw
    return out


def upsample2(x: Var) -> Var:
    """Nearest-neighbor 2x upsampling of (B,C,H,W)."""
    out_val = x.value.repeat(2, axis=2).repeat(2, axis=3)
    out = Var(out_val, (x,))

    def bw(g):
        b, c, h2, w2 = g.shape
        x._accumulate(g.reshape(b, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)))

    out._backward = bw
    return out


def avgpool2(x: Var) -> Var:
    """2x average pooling of (B,C,H,W)."""
    b, c, h, w = x.value.shape
    v = x.value.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    out = Var(v, (x,))

    def bw(g):
        x._accumulate(
            (g / 4.0).repeat(2, axis=2).repeat(2, axis=3)
        )

    out._backward = bw
    return out
