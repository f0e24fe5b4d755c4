"""Adam optimizer over named parameter collections."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class AdamState:
    """First/second moment estimates plus the shared step counter."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], st: AdamState) -> None:
    """One bias-corrected Adam update, in place. Parameters without a
    gradient this step are left untouched (their moments do not advance)."""
    st.step += 1
    b1, b2 = st.beta1, st.beta2
    c1 = 1.0 - b1 ** st.step
    c2 = 1.0 - b2 ** st.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ValueError(f"{name}: grad shape {g.shape} != param shape {p.data.shape}")
        m = st.m.get(name)
        if m is None:
            m = st.m[name] = np.zeros_like(p.data)
            st.v[name] = np.zeros_like(p.data)
        v = st.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p.data -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
