"""Dense tensors with tape-based reverse-mode differentiation.

The engine covers exactly the primitives the recurrent architectures need:
elementwise arithmetic with per-channel broadcasting, 2-D convolution and
its transpose, max pooling, batch normalization, and a logits cross-entropy
loss. Image-like data is always laid out (batch, channel, height, width).

Recording is explicit: ops append to the active :class:`Tape` (entered as a
context manager); ``backward(tape, loss)`` walks the tape once in reverse
and deposits ``.grad`` on leaf tensors. With no tape active every op is a
pure function, which is how evaluation runs.
"""

from __future__ import annotations

import ctypes
import struct

import numpy as np

from . import convops

DEFAULT_DTYPE = np.float32

_TAPE_STACK: list["Tape"] = []


def _tune_allocator():
    """Keep multi-MB activation buffers on the heap for reuse.

    glibc hands allocations above the mmap threshold straight back to the
    kernel on free; recurrent training then pays page-fault plus zeroing
    costs on every intermediate. Raising the thresholds makes those
    buffers recycle. Best effort; silently skipped off glibc.
    """
    try:
        libc = ctypes.CDLL("libc.so.6", use_errno=True)
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
    except Exception:
        pass


_tune_allocator()


class Tensor:
    """A dense n-d array of 32- or 64-bit reals."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, grad={self.requires_grad})"

    # operator sugar; every method defers to the op functions below
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __neg__(self):
        return neg(self)


class Tape:
    """Ordered record of primitive applications for one backward pass.

    A tape is confined to a single logical thread. Nodes are appended in
    execution order, which is a valid topological order, so the backward
    walk is a single reverse sweep.
    """

    def __init__(self):
        self.nodes: list[tuple[int, tuple, object]] = []
        self._out_ids: set[int] = set()

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward_fn):
        self.nodes.append((id(out), parents, backward_fn))
        self._out_ids.add(id(out))

    def clear(self):
        self.nodes.clear()
        self._out_ids.clear()


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _wrap(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _record(out: Tensor, parents: tuple[Tensor, ...], backward_fn):
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape.record(out, parents, backward_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss onto every leaf that wants them.

    The tape is cleared afterward and cannot be replayed.
    """
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    backward_seeded(tape, [(loss, np.ones_like(loss.data))])


def backward_seeded(tape: Tape, seeds) -> None:
    """Backward pass from explicit (tensor, gradient) seeds.

    This is what timestep checkpointing uses to push a carried gradient
    through one re-executed step's subgraph.
    """
    grads: dict[int, np.ndarray] = {}
    out_ids = tape._out_ids
    for t, g in seeds:
        g = np.asarray(g, dtype=t.dtype)
        if g.shape != t.data.shape:
            raise ValueError(f"seed shape {g.shape} != tensor shape {t.data.shape}")
        if id(t) not in out_ids:
            if t.requires_grad:
                t.grad = g if t.grad is None else t.grad + g
            continue
        tid = id(t)
        grads[tid] = grads[tid] + g if tid in grads else g
    nodes = tape.nodes
    for i in range(len(nodes) - 1, -1, -1):
        out_id, parents, fn = nodes[i]
        nodes[i] = None  # release closures and saved activations as we go
        g = grads.pop(out_id, None)
        if g is None:
            continue
        pgrads = fn(g)
        del g
        for p, pg in zip(parents, pgrads):
            if pg is None or not p.requires_grad:
                continue
            pid = id(p)
            if pid not in out_ids:
                # leaf: accumulate straight onto the tensor
                p.grad = pg if p.grad is None else p.grad + pg
            elif pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = pg
    tape.clear()


# ---------------------------------------------------------------------------
# Elementwise suite
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a = _wrap(a, getattr(b, "dtype", DEFAULT_DTYPE))
    b = _wrap(b, a.dtype)
    out = Tensor(a.data + b.data)

    def bk(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _record(out, (a, b), bk)


def sub(a, b) -> Tensor:
    a = _wrap(a, getattr(b, "dtype", DEFAULT_DTYPE))
    b = _wrap(b, a.dtype)
    out = Tensor(a.data - b.data)

    def bk(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _record(out, (a, b), bk)


def mul(a, b) -> Tensor:
    a = _wrap(a, getattr(b, "dtype", DEFAULT_DTYPE))
    b = _wrap(b, a.dtype)
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data

    def bk(g):
        ga = _unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return _record(out, (a, b), bk)


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    return _record(out, (a,), lambda g: (-g,))


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0))
    ad = a.data  # sign recovered in backward; avoids storing a mask

    def bk(g):
        return (g * (ad > 0),)

    return _record(out, (a,), bk)


def sigmoid(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        s = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(s)

    def bk(g):
        return (g * s * (1.0 - s),)

    return _record(out, (a,), bk)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape
    out = Tensor(a.data.reshape(shape))

    def bk(g):
        return (g.reshape(old),)

    return _record(out, (a,), bk)


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(np.asarray(a.data.sum(), dtype=a.dtype))
    shape = a.data.shape

    def bk(g):
        return (np.broadcast_to(g, shape).astype(a.dtype, copy=True),)

    return _record(out, (a,), bk)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(np.asarray(a.data.mean(), dtype=a.dtype))
    shape = a.data.shape

    def bk(g):
        return (np.broadcast_to(g / n, shape).astype(a.dtype, copy=True),)

    return _record(out, (a,), bk)


def channel_vector(v: Tensor) -> Tensor:
    """View a (C,) parameter as (1,C,1,1) for broadcasting against NCHW."""
    return reshape(v, (1, v.data.shape[0], 1, 1))


# ---------------------------------------------------------------------------
# Convolutions
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding="same", method: str | None = None) -> Tensor:
    """Cross-correlate x (B,Cin,H,W) with w (Cout,Cin,kh,kw)."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d expects 4-d input and kernel")
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError(
            f"channel mismatch: input has {x.data.shape[1]}, kernel expects {w.data.shape[1]}")
    if method is None:
        method = convops.pick_conv_method(w.data.shape[2:], stride, padding)
    if method == "fft":
        plan = convops.FftConvPlan(x.data, w.data)
        out = Tensor(plan.forward())

        def bk(g):
            gx, gw = plan.backward(g)
            return gx, gw

        return _record(out, (x, w), bk)

    pad_h, pad_w = convops.resolve_padding(padding, x.data.shape[2:], w.data.shape[2:], stride)
    y, cols = convops.conv2d_gemm(x.data, w.data, stride, pad_h, pad_w)
    # large patch matrices are recomputed in backward rather than retained
    keep_cols = cols if (cols is None or cols.nbytes < 2 ** 23) else None
    out = Tensor(y)

    def bk(g):
        return convops.conv2d_gemm_backward(g, x.data, w.data, keep_cols, stride, pad_h, pad_w)

    return _record(out, (x, w), bk)


def conv2d_transpose(x: Tensor, w: Tensor, stride: int = 2) -> Tensor:
    """Adjoint of the same-padded strided conv2d; doubles spatial dims at stride 2.

    Kernel layout is (Cin, Cout, kh, kw).
    """
    if x.data.shape[1] != w.data.shape[0]:
        raise ValueError(
            f"channel mismatch: input has {x.data.shape[1]}, kernel expects {w.data.shape[0]}")
    y = convops.conv2d_transpose_gemm(x.data, w.data, stride)
    out = Tensor(y)

    def bk(g):
        return convops.conv2d_transpose_gemm_backward(g, x.data, w.data, stride)

    return _record(out, (x, w), bk)


# ---------------------------------------------------------------------------
# Pooling
# ---------------------------------------------------------------------------

def maxpool2(x: Tensor) -> Tensor:
    """2x2/stride-2 max pool; odd trailing row/col is replicate-padded.

    Gradient routes to the first maximal position of each window in
    raster order.
    """
    b, c, h, w = x.data.shape
    xd = x.data
    ph, pw = h % 2, w % 2
    if ph or pw:
        xd = np.pad(xd, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="edge")
    quads = [xd[:, :, dy::2, dx::2] for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1))]
    od = np.maximum(np.maximum(quads[0], quads[1]), np.maximum(quads[2], quads[3]))
    out = Tensor(od)

    def bk(g):
        gp = np.zeros_like(xd)
        unassigned = np.ones(od.shape, dtype=bool)
        for (dy, dx), q in zip(((0, 0), (0, 1), (1, 0), (1, 1)), quads):
            m = unassigned & (q == od)
            gp[:, :, dy::2, dx::2][m] = g[m]
            unassigned &= ~m
        if ph or pw:
            gx = gp[:, :, :h, :w].copy()
            if ph:
                gx[:, :, h - 1, :] += gp[:, :, h, :w]
            if pw:
                gx[:, :, :, w - 1] += gp[:, :, :h, w]
            if ph and pw:
                gx[:, :, h - 1, w - 1] += gp[:, :, h, w]
            return (gx,)
        return (gp,)

    return _record(out, (x,), bk)


def global_max_pool(x: Tensor) -> Tensor:
    """Collapse spatial dims to 1x1, routing gradient to the argmax."""
    b, c, h, w = x.data.shape
    flat = x.data.reshape(b, c, -1)
    idx = flat.argmax(axis=-1)
    out = Tensor(np.take_along_axis(flat, idx[..., None], axis=-1).reshape(b, c, 1, 1))

    def bk(g):
        gf = np.zeros_like(flat)
        np.put_along_axis(gf, idx[..., None], g.reshape(b, c, 1), axis=-1)
        return (gf.reshape(b, c, h, w),)

    return _record(out, (x,), bk)


# ---------------------------------------------------------------------------
# Batch normalization
# ---------------------------------------------------------------------------

class BatchNormState:
    """Learnable per-channel scale/bias plus running statistics.

    Train mode normalizes with batch statistics (biased variance) and
    updates the running moments by exponential moving average; eval mode
    is a pure per-channel affine map built from the running moments.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 scale_init: float = 1.0, bias_init: float = 0.0, dtype=DEFAULT_DTYPE):
        self.scale = Tensor(np.full(channels, scale_init, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.full(channels, bias_init, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.eps = eps
        self.momentum = momentum

    @property
    def channels(self) -> int:
        return self.scale.data.shape[0]


def _bn_center(x: Tensor, st: BatchNormState, mode: str):
    """Shared statistics step: returns (x - mean) buffer, mean, inv_std, n.

    Modes: ``train`` uses batch statistics and advances the running
    moments; ``recompute`` uses batch statistics without touching them
    (checkpointed re-execution of a step already counted); ``eval`` uses
    the running moments.
    """
    if mode not in ("train", "eval", "recompute"):
        raise ValueError(f"mode must be 'train', 'eval' or 'recompute', got {mode!r}")
    if x.data.ndim != 4:
        raise ValueError("batchnorm expects NCHW input")
    if x.data.shape[0] == 0:
        raise ValueError("batchnorm on an empty batch")
    if x.data.shape[1] != st.channels:
        raise ValueError(f"channel mismatch: {x.data.shape[1]} vs {st.channels}")
    cview = (1, st.channels, 1, 1)
    n = x.data.shape[0] * x.data.shape[2] * x.data.shape[3]
    if mode == "eval":
        mean = st.running_mean.astype(x.dtype)
        var = st.running_var.astype(x.dtype)
        xc = x.data - mean.reshape(cview)
    else:
        mean = x.data.mean(axis=(0, 2, 3))
        xc = x.data - mean.reshape(cview)
        var = np.einsum("bchw,bchw->c", xc, xc) / n
        if mode == "train":
            m = st.momentum
            st.running_mean *= 1.0 - m
            st.running_mean += m * mean.astype(st.running_mean.dtype)
            st.running_var *= 1.0 - m
            st.running_var += m * var.astype(st.running_var.dtype)
    inv_std = 1.0 / np.sqrt(var + np.asarray(st.eps, dtype=x.dtype))
    return xc, mean, inv_std, n


def batchnorm(x: Tensor, st: BatchNormState, mode: str) -> Tensor:
    cview = (1, st.channels, 1, 1)
    scale, bias = st.scale, st.bias
    xc, mean, inv_std, n = _bn_center(x, st, mode)
    np.multiply(xc, (scale.data * inv_std).reshape(cview), out=xc)
    xc += bias.data.reshape(cview)
    out = Tensor(xc)
    xd = x.data  # normalized activity is recomputed in backward

    if mode != "eval":
        def bk(g):
            xh = (xd - mean.reshape(cview)) * inv_std.reshape(cview)
            gxh_sum = np.einsum("bchw,bchw->c", g, xh)
            gbias = g.sum(axis=(0, 2, 3))
            xh *= (gxh_sum / n).reshape(cview)
            gx = g - (gbias / n).reshape(cview)
            gx -= xh
            gx *= (scale.data * inv_std).reshape(cview)
            return gx, gxh_sum, gbias
    else:
        def bk(g):
            xh = (xd - mean.reshape(cview)) * inv_std.reshape(cview)
            gscale = np.einsum("bchw,bchw->c", g, xh)
            gbias = g.sum(axis=(0, 2, 3))
            gx = g * (scale.data * inv_std).reshape(cview)
            return gx, gscale, gbias

    return _record(out, (x, scale, bias), bk)


# ---------------------------------------------------------------------------
# Fused recurrent-cell pointwise chains. Semantically these are compositions
# of the elementwise suite above; fusing them keeps one output array per
# stage instead of one per arithmetic step, which is what lets batch-32
# recurrent training fit in memory.
# ---------------------------------------------------------------------------

def bn_sigmoid(x: Tensor, st: BatchNormState, mode: str) -> Tensor:
    """sigmoid(batchnorm(x)) in one node; identical statistics handling."""
    cview = (1, st.channels, 1, 1)
    scale, bias = st.scale, st.bias
    xc, mean, inv_std, n = _bn_center(x, st, mode)
    np.multiply(xc, (scale.data * inv_std).reshape(cview), out=xc)
    xc += bias.data.reshape(cview)
    np.negative(xc, out=xc)
    with np.errstate(over="ignore"):
        np.exp(xc, out=xc)
    xc += 1.0
    np.reciprocal(xc, out=xc)
    out = Tensor(xc)
    sd = out.data
    xd = x.data

    if mode != "eval":
        def bk(g):
            gb = g * sd
            gb *= 1.0 - sd  # grad at the BN output
            xh = (xd - mean.reshape(cview)) * inv_std.reshape(cview)
            gxh_sum = np.einsum("bchw,bchw->c", gb, xh)
            gbias = gb.sum(axis=(0, 2, 3))
            xh *= (gxh_sum / n).reshape(cview)
            gb -= (gbias / n).reshape(cview)
            gb -= xh
            gb *= (scale.data * inv_std).reshape(cview)
            return gb, gxh_sum, gbias
    else:
        def bk(g):
            gb = g * sd
            gb *= 1.0 - sd
            xh = (xd - mean.reshape(cview)) * inv_std.reshape(cview)
            gscale = np.einsum("bchw,bchw->c", gb, xh)
            gbias = gb.sum(axis=(0, 2, 3))
            gb *= (scale.data * inv_std).reshape(cview)
            return gb, gscale, gbias

    return _record(out, (x, scale, bias), bk)


def suppress(x: Tensor, h: Tensor, c_i: Tensor, alpha: Tensor, mu: Tensor) -> Tensor:
    """relu(x - relu((alpha.h + mu) . c_i)) with per-channel alpha, mu."""
    cview = (1, alpha.data.shape[0], 1, 1)
    av, mv = alpha.data.reshape(cview), mu.data.reshape(cview)
    q = av * h.data
    q += mv
    q *= c_i.data
    np.maximum(q, 0, out=q)
    np.subtract(x.data, q, out=q)
    out = Tensor(np.maximum(q, 0, out=q))
    zd, hd, cd = out.data, h.data, c_i.data

    def bk(g):
        gz = g * (zd > 0)
        lin = av * hd
        lin += mv
        inner = (lin * cd) > 0
        gq = gz * inner
        np.negative(gq, out=gq)
        gc = gq * lin
        gqc = gq * cd
        galpha = np.einsum("bchw,bchw->c", gqc, hd)
        gmu = gqc.sum(axis=(0, 2, 3))
        gh = gqc
        gh *= av
        return gz, gh, gc, galpha, gmu

    return _record(out, (x, h, c_i, alpha, mu), bk)


def facilitate(c_e: Tensor, z: Tensor, kappa: Tensor, omega: Tensor) -> Tensor:
    """relu(kappa.(c_e + z) + omega.(c_e . z)) with per-channel kappa, omega."""
    cview = (1, kappa.data.shape[0], 1, 1)
    kv, ov = kappa.data.reshape(cview), omega.data.reshape(cview)
    pre = c_e.data + z.data
    pre *= kv
    prod = c_e.data * z.data
    prod *= ov
    pre += prod
    del prod
    out = Tensor(np.maximum(pre, 0, out=pre))
    od, cd, zd = out.data, c_e.data, z.data

    def bk(g):
        gpre = g * (od > 0)
        gkappa = np.einsum("bchw,bchw->c", gpre, cd) + np.einsum("bchw,bchw->c", gpre, zd)
        prod = cd * zd
        gomega = np.einsum("bchw,bchw->c", gpre, prod)
        del prod
        gc = ov * zd
        gc += kv
        gc *= gpre
        gz = ov * cd
        gz += kv
        gz *= gpre
        return gc, gz, gkappa, gomega

    return _record(out, (c_e, z, kappa, omega), bk)


def gated_mix(gate: Tensor, h_prev: Tensor, candidate: Tensor) -> Tensor:
    """(1 - gate) . h_prev + gate . candidate."""
    gd = gate.data
    mixed = candidate.data - h_prev.data
    mixed *= gd
    mixed += h_prev.data
    out = Tensor(mixed)
    hd, cd = h_prev.data, candidate.data

    def bk(g):
        ggate = g * cd
        ggate -= g * hd
        gh = g - g * gd
        return ggate, gh, g * gd

    return _record(out, (gate, h_prev, candidate), bk)


def channel_blend(beta: Tensor, a: Tensor, b: Tensor) -> Tensor:
    """(1 - sigmoid(beta)) . a + sigmoid(beta) . b, beta broadcast per channel."""
    cview = (1, beta.data.shape[0], 1, 1)
    with np.errstate(over="ignore"):
        s = 1.0 / (1.0 + np.exp(-beta.data.reshape(cview)))
    mixed = b.data - a.data
    mixed *= s
    mixed += a.data
    out = Tensor(mixed)
    ad, bd = a.data, b.data

    def bk(g):
        diff = bd - ad
        diff *= g
        gbeta = diff.sum(axis=(0, 2, 3))
        gbeta *= (s * (1.0 - s)).reshape(-1)
        return gbeta, g - g * s, g * s

    return _record(out, (beta, a, b), bk)


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy computed stably from raw logits."""
    t = np.asarray(targets, dtype=logits.dtype)
    if t.shape != logits.data.shape:
        raise ValueError(f"target shape {t.shape} != logit shape {logits.data.shape}")
    if t.size and (t.min() < 0 or t.max() > 1):
        raise ValueError("targets must lie in [0, 1]")
    z = logits.data
    loss_el = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    out = Tensor(np.asarray(loss_el.mean(), dtype=logits.dtype))
    n = z.size

    def bk(g):
        with np.errstate(over="ignore"):
            s = 1.0 / (1.0 + np.exp(-z))
        return (g * (s - t) / n,)

    return _record(out, (logits,), bk)


# ---------------------------------------------------------------------------
# Serialization: 8-byte magic, u32 rank, u32 dims, little-endian values.
# ---------------------------------------------------------------------------

_MAGIC = {np.dtype(np.float32): b"GNTENS\x00\x01", np.dtype(np.float64): b"GNTENS\x00\x02"}
_MAGIC_REV = {v: np.dtype(k) for k, v in _MAGIC.items()}


def save_tensor(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array)
    magic = _MAGIC.get(arr.dtype)
    if magic is None:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(8)
        dtype = _MAGIC_REV.get(magic)
        if dtype is None:
            raise ValueError(f"{path}: not a tensor file (bad magic)")
        (rank,) = struct.unpack("<I", f.read(4))
        shape = struct.unpack(f"<{rank}I", f.read(4 * rank))
        data = np.frombuffer(f.read(), dtype=dtype.newbyteorder("<")).astype(dtype)
    n = int(np.prod(shape)) if shape else 1
    if data.size != n:
        raise ValueError(f"{path}: payload size {data.size} != shape {shape}")
    return data.reshape(shape)


def assert_finite(t: Tensor, what: str = "tensor") -> None:
    if not np.isfinite(t.data).all():
        raise FloatingPointError(f"{what} contains NaN or Inf")
