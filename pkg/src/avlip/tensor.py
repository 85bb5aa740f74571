"""Dense tensors with reverse-mode automatic differentiation.

The op set is exactly the closure needed by the model: elementwise
arithmetic, matmul, conv2d, layernorm, softmax (+ fused cross-entropy),
gather, concat, slicing, relu/gelu, reductions, padding. Values are numpy
arrays (float32 for training, float64 for gradient checks, uint8 for raw
video); the graph is a define-by-run tape of closures.

NaN/Inf anywhere in a forward result is an error state; ``finite_checks``
toggles the per-op assertion (on by default, cheap at desk scale).
"""

import contextlib

import numpy as np

from .avt1 import read_avt1, write_avt1

__all__ = [
    "Tensor", "NonFiniteError", "backward", "no_grad", "finite_checks",
    "add", "mul", "matmul", "concat", "gather", "pad2d", "conv2d",
    "layernorm", "softmax", "softmax_cross_entropy", "relu", "gelu",
    "exp", "log", "tanh", "save_tensor", "load_tensor",
]

_GRAD_ENABLED = True
_FINITE_CHECKS = True

_FLOAT_DTYPES = (np.dtype("float32"), np.dtype("float64"))


class NonFiniteError(FloatingPointError):
    """A forward op produced NaN or Inf."""


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def finite_checks(enabled):
    global _FINITE_CHECKS
    prev = _FINITE_CHECKS
    _FINITE_CHECKS = enabled
    try:
        yield
    finally:
        _FINITE_CHECKS = prev


def _check_finite(data, op):
    if _FINITE_CHECKS and data.dtype in _FLOAT_DTYPES:
        if not np.isfinite(data).all():
            raise NonFiniteError(f"non-finite values out of op '{op}'")


class Tensor:
    """N-d array plus optional gradient tape node.

    ``data`` is always a numpy array; ``grad`` (same shape/dtype) appears
    after backward(). Tensors are treated as immutable once created.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "_op")

    def __init__(self, data, requires_grad=False, dtype=None, _parents=(), _backward_fn=None, _op="leaf"):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES and arr.dtype != np.dtype("uint8"):
            if np.issubdtype(arr.dtype, np.integer) or np.issubdtype(arr.dtype, np.floating):
                arr = arr.astype(np.float32)
            else:
                raise TypeError(f"unsupported dtype {arr.dtype}")
        if requires_grad and arr.dtype not in _FLOAT_DTYPES:
            raise TypeError(f"requires_grad needs a float tensor, got {arr.dtype}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward_fn = _backward_fn
        self._op = _op
        if _op != "leaf":
            _check_finite(arr, _op)

    # -- structure ----------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, grad={self.requires_grad}, op={self._op})"

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def astype(self, dtype):
        return _unary(self, self.data.astype(dtype), lambda g: g.astype(self.data.dtype), "astype")

    # -- tape ---------------------------------------------------------------

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        np.add(self.grad, g.astype(self.data.dtype, copy=False), out=self.grad)

    def backward(self, grad=None):
        """Reverse-mode sweep from this tensor (scalar unless grad given)."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() needs a scalar tensor (or an explicit output gradient)")
            grad = np.ones_like(self.data)
        topo, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad))
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return pow_scalar(self, p)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(x, dtype=None):
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def _track(*tensors):
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)


def _make(data, parents, backward_fn, op):
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward_fn=backward_fn, _op=op)
    t = Tensor(data, requires_grad=False, _op=op)
    return t


def _unbroadcast(grad, shape):
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _unary(x, data, dgrad, op):
    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(dgrad(g))
    return _make(data, (x,), backward_fn, op)


# -- arithmetic ---------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))
    return _make(data, (a, b), backward_fn, "add")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))
    return _make(data, (a, b), backward_fn, "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return _make(data, (a, b), backward_fn, "div")


def pow_scalar(x, p):
    x = as_tensor(x)
    p = float(p)
    data = x.data ** p
    return _unary(x, data, lambda g: g * p * x.data ** (p - 1.0), "pow")


def exp(x):
    x = as_tensor(x)
    data = np.exp(x.data)
    return _unary(x, data, lambda g: g * data, "exp")


def log(x):
    x = as_tensor(x)
    data = np.log(x.data)
    return _unary(x, data, lambda g: g / x.data, "log")


def tanh(x):
    x = as_tensor(x)
    data = np.tanh(x.data)
    return _unary(x, data, lambda g: g * (1.0 - data * data), "tanh")


def relu(x):
    x = as_tensor(x)
    data = np.maximum(x.data, 0)
    return _unary(x, data, lambda g: g * (x.data > 0), "relu")


_GELU_C = 0.7978845608028654  # sqrt(2/pi)


def gelu(x):
    """tanh-approximation GELU (smooth, matches its own analytic derivative)."""
    x = as_tensor(x)
    u = _GELU_C * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(u)
    data = 0.5 * x.data * (1.0 + t)

    def dgrad(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data ** 2)
        return g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du)
    return _unary(x, data, dgrad, "gelu")


# -- matmul / reductions ------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.shape))
    return _make(data, (a, b), backward_fn, "matmul")


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def dgrad(g):
        if axis is None:
            return np.broadcast_to(g, x.shape).astype(x.dtype, copy=False)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, x.shape)
    return _unary(x, np.asarray(data), dgrad, "sum")


def tmean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    if axis is None:
        n = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([x.shape[a] for a in axes]))
    s = tsum(x, axis=axis, keepdims=keepdims)
    return mul(s, 1.0 / n)


def reshape(x, shape):
    x = as_tensor(x)
    return _unary(x, x.data.reshape(shape), lambda g: g.reshape(x.shape), "reshape")


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = np.argsort(axes)
    return _unary(x, x.data.transpose(axes), lambda g: g.transpose(inv), "transpose")


def take(x, key):
    """Slicing / integer indexing with scatter-add backward."""
    x = as_tensor(x)
    data = x.data[key]

    def dgrad(g):
        buf = np.zeros_like(x.data)
        np.add.at(buf, key, g)
        return buf
    return _unary(x, data, dgrad, "take")


def gather(x, indices, axis=0):
    """Row lookup along an axis (embedding lookup is gather on axis 0)."""
    x = as_tensor(x)
    idx = np.asarray(indices)
    data = np.take(x.data, idx, axis=axis)

    def dgrad(g):
        buf = np.zeros_like(x.data)
        if axis == 0:
            np.add.at(buf, idx, g)
        else:
            moved = np.moveaxis(buf, axis, 0)
            np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        return buf
    return _unary(x, data, dgrad, "gather")


def concat(tensors, axis=0):
    ts = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])
    return _make(data, tuple(ts), backward_fn, "concat")


def pad2d(x, pad_top, pad_bottom, pad_left, pad_right, value=0.0):
    """Constant-pad the last two axes."""
    x = as_tensor(x)
    width = [(0, 0)] * (x.ndim - 2) + [(pad_top, pad_bottom), (pad_left, pad_right)]
    data = np.pad(x.data, width, constant_values=value)
    sl = tuple([slice(None)] * (x.ndim - 2)
               + [slice(pad_top, data.shape[-2] - pad_bottom),
                  slice(pad_left, data.shape[-1] - pad_right)])
    return _unary(x, data, lambda g: g[sl], "pad2d")


# -- fused neural ops ---------------------------------------------------------

def softmax(x, axis=-1):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def dgrad(g):
        gs = g * s
        return gs - s * gs.sum(axis=axis, keepdims=True)
    return _unary(x, s, dgrad, "softmax")


def softmax_cross_entropy(logits, targets):
    """Per-frame negative log-probabilities -log softmax(logits)[t, target[t]].

    logits: (T, C); targets: int sequence of length T. Stabilized by max
    subtraction.
    """
    x = as_tensor(logits)
    if x.ndim != 2:
        raise ValueError(f"logits must be (T, C), got {x.shape}")
    tgt = np.asarray(targets, dtype=np.int64)
    if tgt.ndim != 1 or tgt.shape[0] != x.shape[0]:
        raise ValueError("targets must be a length-T integer sequence")
    C = x.shape[1]
    if tgt.size and (tgt.min() < 0 or tgt.max() >= C):
        raise IndexError(f"target index out of range [0, {C})")
    z = x.data - x.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    nll = lse - z[np.arange(len(tgt)), tgt]

    def dgrad(g):
        p = np.exp(z - lse[:, None])
        p[np.arange(len(tgt)), tgt] -= 1.0
        return g[:, None] * p
    return _unary(x, nll.astype(x.dtype, copy=False), dgrad, "softmax_cross_entropy")


def layernorm(x, gain, bias, eps=1e-5):
    """Layer normalization over the last axis with learned gain/bias."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gain.data + bias.data

    def backward_fn(g):
        if gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.shape))
        if bias.requires_grad:
            bias._accumulate(_unbroadcast(g, bias.shape))
        if x.requires_grad:
            gy = g * gain.data
            m1 = gy.mean(axis=-1, keepdims=True)
            m2 = (gy * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gy - m1 - xhat * m2))
    return _make(data, (x, gain, bias), backward_fn, "layernorm")


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-d cross-correlation: x (N,C,H,W) * weight (F,C,kh,kw) -> (N,F,OH,OW).

    im2col + matmul so both directions run on BLAS.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if bias is not None:
        bias = as_tensor(bias)
    N, C, H, W = x.shape
    F, Cw, kh, kw = weight.shape
    if C != Cw:
        raise ValueError(f"channel mismatch: input {C} vs weight {Cw}")
    s, p = int(stride), int(padding)
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
    OH = (H + 2 * p - kh) // s + 1
    OW = (W + 2 * p - kw) // s + 1
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]
    # (N, C, OH, OW, kh, kw) -> (N*OH*OW, C*kh*kw)
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(N * OH * OW, C * kh * kw)
    w2 = weight.data.reshape(F, C * kh * kw)
    out2 = cols @ w2.T
    if bias is not None:
        out2 = out2 + bias.data[None, :]
    data = out2.reshape(N, OH, OW, F).transpose(0, 3, 1, 2)

    def backward_fn(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(N * OH * OW, F)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g2.sum(axis=0))
        if weight.requires_grad:
            weight._accumulate((g2.T @ cols).reshape(F, C, kh, kw))
        if x.requires_grad:
            gcols = (g2 @ w2).reshape(N, OH, OW, C, kh, kw).transpose(0, 3, 1, 2, 4, 5)
            gx = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gx[:, :, i : i + OH * s : s, j : j + OW * s : s] += gcols[:, :, :, :, i, j]
            x._accumulate(gx[:, :, p : p + H, p : p + W] if p else gx)
    return _make(data, tuple(t for t in (x, weight, bias) if t is not None), backward_fn, "conv2d")


# -- module-level backward (parameter map form) -------------------------------

def backward(loss, store=None):
    """Run reverse-mode autodiff from a scalar loss.

    With a ParamStore, returns {name: gradient array}; parameters the loss
    does not reach get zero gradients.
    """
    if loss.data.size != 1:
        raise ValueError("loss must be scalar")
    loss.backward()
    if store is None:
        return None
    grads = {}
    for name, p in store.items():
        grads[name] = p.grad if p.grad is not None else np.zeros_like(p.data)
    return grads


def save_tensor(path, t):
    write_avt1(path, t.data if isinstance(t, Tensor) else t)


def load_tensor(path, requires_grad=False):
    return Tensor(read_avt1(path), requires_grad=requires_grad)
