"""Parameter store and the standard layers the model is assembled from."""

import hashlib

import numpy as np

from . import tensor as T
from .rng import RngStream
from .tensor import Tensor

__all__ = [
    "ParamStore", "Linear", "LayerNorm", "Conv2d", "MultiHeadAttention",
    "TransformerBlock", "sinusoidal_encoding", "causal_mask",
]


class ParamStore:
    """Named map of trainable tensors.

    Iteration order is always sorted by name; initialization is keyed on
    (seed, name) so parameter values do not depend on creation order.
    """

    def __init__(self, rng_seed):
        self.rng_seed = int(rng_seed)
        self._params = {}
        self._stream = RngStream(rng_seed, ("params",))

    def param(self, name, shape, init="normal", scale=1.0):
        if name in self._params:
            p = self._params[name]
            if p.shape != tuple(shape):
                raise ValueError(f"param {name} exists with shape {p.shape}, requested {tuple(shape)}")
            return p
        if init == "zeros":
            data = np.zeros(shape, dtype=np.float32)
        elif init == "ones":
            data = np.ones(shape, dtype=np.float32)
        elif init == "normal":
            g = self._stream.split(name).fresh()
            data = (g.standard_normal(shape) * scale).astype(np.float32)
        else:
            raise ValueError(f"unknown init {init!r}")
        p = Tensor(data, requires_grad=True)
        self._params[name] = p
        return p

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        return self._params[name]

    def __len__(self):
        return len(self._params)

    def names(self):
        return sorted(self._params)

    def items(self):
        return [(n, self._params[n]) for n in self.names()]

    def zero_grads(self):
        for p in self._params.values():
            p.grad = None

    def n_params(self):
        return sum(p.size for p in self._params.values())

    def assign(self, name, array):
        """Replace a parameter's values in place (shape must match)."""
        p = self._params[name]
        if p.data.shape != array.shape:
            raise ValueError(f"shape mismatch for {name}")
        p.data = np.asarray(array, dtype=p.data.dtype)

    def set_raw(self, name, array, requires_grad=True):
        self._params[name] = Tensor(np.asarray(array), requires_grad=requires_grad)

    def drop_prefix(self, prefix):
        """Remove all parameters under a name prefix (e.g. a discarded head)."""
        for name in [n for n in self._params if n.startswith(prefix)]:
            del self._params[name]

    def cast(self, dtype):
        """New store with every parameter cast (used for float64 grad checks)."""
        out = ParamStore(self.rng_seed)
        for n, p in self.items():
            out.set_raw(n, p.data.astype(dtype))
        return out

    def state_arrays(self):
        return {n: p.data.copy() for n, p in self.items()}

    def content_hash(self, names=None):
        """sha256 over (name, shape, bytes) of the selected parameters."""
        h = hashlib.sha256()
        for n in sorted(names) if names is not None else self.names():
            p = self._params[n]
            h.update(n.encode())
            h.update(str(p.shape).encode())
            h.update(np.ascontiguousarray(p.data).tobytes())
        return h.hexdigest()


# -- layers -------------------------------------------------------------------

class Linear:
    def __init__(self, store, name, d_in, d_out, bias=True):
        self.w = store.param(f"{name}.w", (d_in, d_out), scale=1.0 / np.sqrt(d_in))
        self.b = store.param(f"{name}.b", (d_out,), init="zeros") if bias else None

    def __call__(self, x):
        y = T.matmul(x, self.w)
        return T.add(y, self.b) if self.b is not None else y


class LayerNorm:
    def __init__(self, store, name, dim, eps=1e-5):
        self.gain = store.param(f"{name}.gain", (dim,), init="ones")
        self.bias = store.param(f"{name}.bias", (dim,), init="zeros")
        self.eps = eps

    def __call__(self, x):
        return T.layernorm(x, self.gain, self.bias, eps=self.eps)


class Conv2d:
    def __init__(self, store, name, c_in, c_out, kernel=3, stride=1, padding=1):
        fan_in = c_in * kernel * kernel
        self.w = store.param(f"{name}.w", (c_out, c_in, kernel, kernel), scale=np.sqrt(2.0 / fan_in))
        self.b = store.param(f"{name}.b", (c_out,), init="zeros")
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)


def sinusoidal_encoding(length, dim, dtype=np.float32):
    """Standard fixed sin/cos position table, shape (length, dim). Even dim."""
    if dim % 2:
        raise ValueError("encoding dim must be even")
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(dim // 2, dtype=np.float64)[None, :]
    angles = pos / (10000.0 ** (2 * i / dim))
    pe = np.zeros((length, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe.astype(dtype)


def causal_mask(length, dtype=np.float32):
    """Additive mask: 0 on/below the diagonal, large negative above."""
    m = np.triu(np.full((length, length), -1e9, dtype=dtype), k=1)
    return m


class MultiHeadAttention:
    def __init__(self, store, name, d_model, n_heads):
        if d_model % n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q = Linear(store, f"{name}.q", d_model, d_model)
        self.k = Linear(store, f"{name}.k", d_model, d_model)
        self.v = Linear(store, f"{name}.v", d_model, d_model)
        self.out = Linear(store, f"{name}.o", d_model, d_model)

    def __call__(self, x_q, x_kv, mask=None):
        """x_q (Tq, D), x_kv (Tk, D); mask is an additive (Tq, Tk) array."""
        Tq, D = x_q.shape
        Tk = x_kv.shape[0]
        q = self.q(x_q).reshape(Tq, self.n_heads, self.d_head).transpose(1, 0, 2)
        k = self.k(x_kv).reshape(Tk, self.n_heads, self.d_head).transpose(1, 0, 2)
        v = self.v(x_kv).reshape(Tk, self.n_heads, self.d_head).transpose(1, 0, 2)
        scores = T.matmul(q, k.transpose(0, 2, 1)) * (1.0 / np.sqrt(self.d_head))
        if mask is not None:
            scores = scores + Tensor(mask[None, :, :].astype(scores.dtype))
        attn = T.softmax(scores, axis=-1)
        ctx = T.matmul(attn, v)  # (H, Tq, dh)
        merged = ctx.transpose(1, 0, 2).reshape(Tq, D)
        return self.out(merged)


class TransformerBlock:
    """Pre-norm block: self-attention, optional cross-attention, then FFN."""

    def __init__(self, store, name, d_model, n_heads, ffn_dim, cross=False):
        self.ln1 = LayerNorm(store, f"{name}.ln1", d_model)
        self.attn = MultiHeadAttention(store, f"{name}.attn", d_model, n_heads)
        self.cross = None
        if cross:
            self.ln_c = LayerNorm(store, f"{name}.lnc", d_model)
            self.cross = MultiHeadAttention(store, f"{name}.xattn", d_model, n_heads)
        self.ln2 = LayerNorm(store, f"{name}.ln2", d_model)
        self.ffn1 = Linear(store, f"{name}.ffn1", d_model, ffn_dim)
        self.ffn2 = Linear(store, f"{name}.ffn2", ffn_dim, d_model)

    def __call__(self, x, memory=None, self_mask=None):
        h = self.ln1(x)
        x = x + self.attn(h, h, mask=self_mask)
        if self.cross is not None:
            x = x + self.cross(self.ln_c(x), memory)
        x = x + self.ffn2(T.gelu(self.ffn1(self.ln2(x))))
        return x
