"""Network building blocks on top of the autograd core."""

from __future__ import annotations

import numpy as np

from draggen.diffusion import autograd as ag
from draggen.diffusion.autograd import Param, Var


class Module:
    """Parameter container with deterministic attribute-order traversal."""

    def named_params(self, prefix: str = "") -> list[tuple[str, Param]]:
        out = []
        for key, val in self.__dict__.items():
            path = f"{prefix}{key}"
            if isinstance(val, Param):
                out.append((path, val))
            elif isinstance(val, Module):
                out.extend(val.named_params(prefix=path + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.extend(item.named_params(prefix=f"{path}.{i}."))
                    elif isinstance(item, Param):
                        out.append((f"{path}.{i}", item))
        return out

    def params(self) -> list[Param]:
        return [p for _, p in self.named_params()]

    def zero_grad(self) -> None:
        for p in self.params():
            p.grad[...] = 0.0

    def state_dict(self) -> dict:
        return {name: p.value.copy() for name, p in self.named_params()}

    def load_state_dict(self, state: dict) -> None:
        for name, p in self.named_params():
            if name not in state:
                raise KeyError(f"missing weight {name!r}")
            if state[name].shape != p.value.shape:
                raise ValueError(
                    f"weight {name!r} has shape {state[name].shape}, "
                    f"expected {p.value.shape}"
                )
            p.value[...] = state[name]


class Linear(Module):
    def __init__(self, din: int, dout: int, rng: np.random.Generator,
                 init: str = "he", bias: bool = True, init_std: float | None = None):
        if init == "zero":
            w = np.zeros((din, dout))
        elif init_std is not None:
            w = rng.normal(0.0, init_std, size=(din, dout))
        else:
            std = np.sqrt((2.0 if init == "he" else 1.0) / din)
            w = rng.normal(0.0, std, size=(din, dout))
        self.w = Param(w)
        self.b = Param(np.zeros(dout)) if bias else None

    def __call__(self, x: Var) -> Var:
        y = ag.matmul(x, self.w)
        return ag.add(y, self.b) if self.b is not None else y


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator,
                 stride: int = 1, init: str = "he", init_std: float | None = None):
        fan_in = cin * k * k
        if init == "zero":
            w = np.zeros((cout, cin, k, k))
        elif init_std is not None:
            w = rng.normal(0.0, init_std, size=(cout, cin, k, k))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(cout, cin, k, k))
        self.w = Param(w)
        self.b = Param(np.zeros(cout))
        self.stride = stride
        self.pad = k // 2

    def __call__(self, x: Var) -> Var:
        return ag.conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)


class GroupNorm(Module):
    def __init__(self, channels: int, groups: int = 8):
        self.gamma = Param(np.ones(channels))
        self.beta = Param(np.zeros(channels))
        self.groups = min(groups, channels)

    def __call__(self, x: Var) -> Var:
        return ag.group_norm(x, self.gamma, self.beta, self.groups)


class LayerNorm(Module):
    def __init__(self, dim: int, affine: bool = True):
        self.gamma = Param(np.ones(dim)) if affine else None
        self.beta = Param(np.zeros(dim)) if affine else None

    def __call__(self, x: Var) -> Var:
        return ag.layer_norm(x, self.gamma, self.beta)


class Attention(Module):
    """Multi-head attention whose keys/values can come from another source.

    ``__call__(q_src, kv_src)`` projects keys/values from ``kv_src``;
    passing precomputed ``(k, v)`` Vars instead reuses another pass's
    projections (reference-image conditioning).
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator,
                 kv_dim: int | None = None):
        kv_dim = kv_dim or dim
        self.wq = Linear(dim, dim, rng, init="xavier")
        self.wk = Linear(kv_dim, dim, rng, init="xavier")
        self.wv = Linear(kv_dim, dim, rng, init="xavier")
        self.wo = Linear(dim, dim, rng, init="xavier")
        self.heads = heads
        self.dim = dim

    def project_kv(self, kv_src: Var) -> tuple[Var, Var]:
        return self.wk(kv_src), self.wv(kv_src)

    def _split_heads(self, x: Var) -> Var:
        b, t, c = x.shape
        h = self.heads
        return ag.transpose(ag.reshape(x, (b, t, h, c // h)), (0, 2, 1, 3))

    def __call__(self, q_src: Var, kv_src: Var | None = None,
                 kv: tuple[Var, Var] | None = None) -> Var:
        if kv is None:
            kv = self.project_kv(kv_src if kv_src is not None else q_src)
        k, v = kv
        q = self._split_heads(self.wq(q_src))
        kh = self._split_heads(k)
        vh = self._split_heads(v)
        dh = self.dim // self.heads
        scores = ag.scale(ag.matmul(q, ag.transpose(kh, (0, 1, 3, 2))), dh**-0.5)
        att = ag.softmax(scores, axis=-1)
        o = ag.matmul(att, vh)
        b, _, t, _ = o.shape
        o = ag.reshape(ag.transpose(o, (0, 2, 1, 3)), (b, t, self.dim))
        return self.wo(o)


class Mlp(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def __call__(self, x: Var) -> Var:
        return self.fc2(ag.silu(self.fc1(x)))


def sinusoidal_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """Transformer-style timestep embedding, (B,) ints -> (B, dim)."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    args = np.asarray(t, dtype=np.float64)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


class TimeEmbedding(Module):
    def __init__(self, dim: int, rng: np.random.Generator):
        self.fc1 = Linear(dim, dim, rng)
        self.fc2 = Linear(dim, dim, rng)
        self.dim = dim

    def __call__(self, t: np.ndarray) -> Var:
        emb = Var(sinusoidal_embedding(t, self.dim))
        return self.fc2(ag.silu(self.fc1(emb)))


class GlobalImageEncoder(Module):
    """Small conv encoder producing one global token per image."""

    def __init__(self, out_dim: int, rng: np.random.Generator):
        self.conv1 = Conv2d(3, 16, 3, rng, stride=2)
        self.conv2 = Conv2d(16, 32, 3, rng, stride=2)
        self.conv3 = Conv2d(32, 64, 3, rng, stride=2)
        self.norm = GroupNorm(64, 8)
        self.proj = Linear(64, out_dim, rng)

    def __call__(self, images: np.ndarray) -> Var:
        """(B, H, W, 3) float images -> (B, out_dim)."""
        x = Var(np.ascontiguousarray(np.transpose(images, (0, 3, 1, 2))))
        x = ag.silu(self.conv1(x))
        x = ag.silu(self.conv2(x))
        x = ag.silu(self.norm(self.conv3(x)))
        pooled = ag.mean(ag.reshape(x, (*x.shape[:2], -1)), axis=2)
        return self.proj(pooled)


class AdamW:
    def __init__(self, params: list[Param], lr: float = 1e-4,
                 betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self._scratch = [np.empty_like(p.value) for p in params]

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.betas
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        inv_sqrt_bc2 = 1.0 / np.sqrt(bc2)
        for p, m, v, buf in zip(self.params, self.m, self.v, self._scratch):
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            np.multiply(g, g, out=buf)
            buf *= 1 - b2
            v += buf
            np.sqrt(v, out=buf)
            buf *= inv_sqrt_bc2
            buf += self.eps
            np.divide(m, buf, out=buf)
            if self.weight_decay:
                p.value -= self.lr * self.weight_decay * p.value
            buf *= self.lr / bc1
            p.value -= buf

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad[...] = 0.0
