"""Adam with bias correction, plus the warmup-then-constant LR schedule.

The paper defers optimizer details to its training framework; Adam plus a
linear warmup into a constant rate is recorded in every run config.
"""

import numpy as np

__all__ = ["Adam", "adam_step", "warmup_constant_lr"]


def warmup_constant_lr(step_index, lr_max, warmup_steps):
    """Linear warmup over `warmup_steps`, constant afterwards (1-based steps)."""
    if warmup_steps <= 0:
        return lr_max
    return lr_max * min(1.0, step_index / warmup_steps)


def adam_step(store, grads, state, lr, betas=(0.9, 0.999), eps=1e-8, step_index=1, names=None):
    """One Adam update on the named parameters of `store`, in place.

    `state` is a dict carrying the first/second moment buffers between calls
    (pass the same dict every step). Missing gradient keys are an error.
    """
    b1, b2 = betas
    m = state.setdefault("m", {})
    v = state.setdefault("v", {})
    c1 = 1.0 - b1 ** step_index
    c2 = 1.0 - b2 ** step_index
    for name in (sorted(names) if names is not None else store.names()):
        if name not in grads:
            raise KeyError(f"missing gradient for parameter {name}")
        g = np.asarray(grads[name], dtype=np.float32)
        p = store[name]
        if name not in m:
            m[name] = np.zeros_like(p.data)
            v[name] = np.zeros_like(p.data)
        m[name] = b1 * m[name] + (1.0 - b1) * g
        v[name] = b2 * v[name] + (1.0 - b2) * (g * g)
        m_hat = m[name] / c1
        v_hat = v[name] / c2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    return store


class Adam:
    """Adam over a subset of a ParamStore (the whole store by default)."""

    def __init__(self, store, names=None, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, warmup_steps=0):
        self.store = store
        self.names = sorted(names) if names is not None else None
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.warmup_steps = warmup_steps
        self.state = {}
        self.step_index = 0

    def current_lr(self):
        return warmup_constant_lr(max(self.step_index, 1), self.lr, self.warmup_steps)

    def step(self, grads):
        self.step_index += 1
        lr = warmup_constant_lr(self.step_index, self.lr, self.warmup_steps)
        adam_step(self.store, grads, self.state, lr, self.betas, self.eps,
                  self.step_index, names=self.names)
