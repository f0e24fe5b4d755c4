"""Central finite-difference oracle for checking analytic gradients.

Checks run in 64-bit with h = 1e-3 and compare by relative L2 error.
Inputs near rectifier or pooling kinks are not comparable (the analytic
side returns a subgradient); callers keep samples away from those points.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor, backward

FD_STEP = 1e-3
FD_RTOL = 1e-5
KINK_MARGIN = 1e-4


def numerical_grad(fn, args: list[np.ndarray], wrt: int, h: float = FD_STEP) -> np.ndarray:
    """Central differences of a scalar-valued fn at args, wrt one argument."""
    base = [a.astype(np.float64, copy=True) for a in args]
    x = base[wrt]
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(fn(*base))
        flat[i] = orig - h
        fm = float(fn(*base))
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def analytic_grads(fn_t, args: list[np.ndarray]) -> list[np.ndarray]:
    """Run fn_t on leaf tensors under a tape and return their gradients."""
    leaves = [Tensor(a.astype(np.float64), requires_grad=True) for a in args]
    with Tape() as tape:
        out = fn_t(*leaves)
        backward(tape, out)
    return [l.grad if l.grad is not None else np.zeros_like(l.data) for l in leaves]


def rel_error(a: np.ndarray, n: np.ndarray) -> float:
    num = np.linalg.norm((a - n).reshape(-1))
    den = max(np.linalg.norm(n.reshape(-1)), 1e-12)
    return float(num / den)


def check_gradients(fn_t, fn_np, args: list[np.ndarray], rtol: float = FD_RTOL,
                    h: float = FD_STEP) -> dict[int, float]:
    """Compare analytic gradients of fn_t against finite differences of fn_np.

    fn_t maps Tensors to a scalar Tensor; fn_np is the same computation on
    numpy arrays. Returns the per-argument relative errors; raises on any
    error above rtol.
    """
    errors = {}
    analytic = analytic_grads(fn_t, args)
    for i in range(len(args)):
        num = numerical_grad(fn_np, args, i, h=h)
        err = rel_error(analytic[i], num)
        errors[i] = err
        if err > rtol:
            raise AssertionError(
                f"gradient wrt arg {i} off: rel err {err:.3e} > {rtol:.0e}")
    return errors


def away_from_kinks(x: np.ndarray, margin: float = KINK_MARGIN) -> np.ndarray:
    """Push values out of the +/-margin band around zero (relu kink)."""
    out = x.copy()
    small = np.abs(out) < margin
    out[small] = margin * np.where(out[small] >= 0, 1.0, -1.0) * 2.0
    return out


def untied(x: np.ndarray, rng: np.random.Generator, scale: float = 1e-2) -> np.ndarray:
    """Break ties so max-pool argmaxes are stable under the FD step."""
    ranks = rng.permuted(np.arange(x.size)).reshape(x.shape)
    return x + scale * ranks
