"""Low-level 2-D convolution kernels used by the tensor engine.

Two execution paths with identical semantics (cross-correlation over NCHW
tensors), selected per call:

* ``gemm``: im2col + BLAS matmul. Best for small kernels (1x1, 3x3, 4x4)
  and the only path supporting stride > 1.
* ``fft``: frequency-domain correlation with numba-jitted channel
  contractions. Much faster for large kernels (7x7, 15x15) at stride 1;
  on a single core this is what makes recurrent training feasible.

All functions here work on plain numpy arrays; autodiff wiring lives in
``tensor.py``.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.fft as sfft

_USE_NUMBA = os.environ.get("GROUPNETS_NO_NUMBA", "") != "1"

if _USE_NUMBA:
    from numba import njit
else:  # pragma: no cover - debugging escape hatch
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# Padding helpers
# ---------------------------------------------------------------------------

def same_padding(in_size: int, k: int, stride: int) -> tuple[int, int]:
    """(begin, end) zero padding so that out = ceil(in / stride)."""
    out = -(-in_size // stride)
    total = max((out - 1) * stride + k - in_size, 0)
    beg = total // 2
    return beg, total - beg


def conv_out_size(in_size: int, k: int, stride: int, pad: tuple[int, int]) -> int:
    return (in_size + pad[0] + pad[1] - k) // stride + 1


def resolve_padding(padding, in_hw, k_hw, stride) -> tuple[tuple[int, int], tuple[int, int]]:
    """Normalize a padding spec ('same' or int) to ((top,bottom),(left,right))."""
    if padding == "same":
        return same_padding(in_hw[0], k_hw[0], stride), same_padding(in_hw[1], k_hw[1], stride)
    if isinstance(padding, int):
        return (padding, padding), (padding, padding)
    raise ValueError(f"unsupported padding spec: {padding!r}")


def _pad_nchw(x, pad_h, pad_w):
    if pad_h == (0, 0) and pad_w == (0, 0):
        return x
    return np.pad(x, ((0, 0), (0, 0), pad_h, pad_w))


# ---------------------------------------------------------------------------
# im2col / col2im path
# ---------------------------------------------------------------------------

@njit(cache=True)
def _im2col_kernel(xp, cols, kh, kw, stride, oh, ow):
    b, c = xp.shape[0], xp.shape[1]
    for bb in range(b):
        for cc in range(c):
            plane = xp[bb, cc]
            row = cc * kh * kw
            for dy in range(kh):
                for dx in range(kw):
                    dst = cols[bb, row]
                    for y in range(oh):
                        src = plane[y * stride + dy]
                        base = y * ow
                        for x in range(ow):
                            dst[base + x] = src[x * stride + dx]
                    row += 1


@njit(cache=True)
def _col2im_kernel(cols, xp, kh, kw, stride, oh, ow):
    b, c = xp.shape[0], xp.shape[1]
    for bb in range(b):
        for cc in range(c):
            plane = xp[bb, cc]
            row = cc * kh * kw
            for dy in range(kh):
                for dx in range(kw):
                    src = cols[bb, row]
                    for y in range(oh):
                        dst = plane[y * stride + dy]
                        base = y * ow
                        for x in range(ow):
                            dst[x * stride + dx] += src[base + x]
                    row += 1


def im2col(x, k_hw, stride, pad_h, pad_w):
    """(B,C,H,W) -> (B, C*kh*kw, L) patch matrix, L = out_h*out_w."""
    xp = _pad_nchw(x, pad_h, pad_w)
    kh, kw = k_hw
    oh = (xp.shape[2] - kh) // stride + 1
    ow = (xp.shape[3] - kw) // stride + 1
    b, c = x.shape[:2]
    cols = np.empty((b, c * kh * kw, oh * ow), dtype=x.dtype)
    _im2col_kernel(np.ascontiguousarray(xp), cols, kh, kw, stride, oh, ow)
    return cols, (oh, ow)


def col2im(cols, x_shape, k_hw, stride, pad_h, pad_w, out_hw):
    """Adjoint of im2col: scatter-add patch columns back onto the image."""
    b, c, h, w = x_shape
    kh, kw = k_hw
    oh, ow = out_hw
    hp, wp = h + sum(pad_h), w + sum(pad_w)
    xp = np.zeros((b, c, hp, wp), dtype=cols.dtype)
    _col2im_kernel(np.ascontiguousarray(cols), xp, kh, kw, stride, oh, ow)
    return xp[:, :, pad_h[0]:hp - pad_h[1], pad_w[0]:wp - pad_w[1]]


def stacked_matmul(a2, x3, out=None):
    """(M,K) @ (B,K,L) -> (B,M,L) via per-slice BLAS.

    numpy's broadcast matmul pays a large per-stack dispatch cost on this
    shape pattern; a plain dot loop is an order of magnitude faster.
    """
    b, _, l = x3.shape
    m = a2.shape[0]
    if out is None:
        out = np.empty((b, m, l), dtype=x3.dtype)
    for i in range(b):
        np.dot(a2, x3[i], out=out[i])
    return out


def conv2d_gemm(x, w, stride, pad_h, pad_w):
    """Forward cross-correlation. Returns (y, cols) with cols kept for backward."""
    o = w.shape[0]
    if w.shape[2] == w.shape[3] == 1 and stride == 1 and pad_h == (0, 0) and pad_w == (0, 0):
        b, c, h, wd = x.shape
        y = stacked_matmul(w.reshape(o, c), x.reshape(b, c, h * wd))
        return y.reshape(b, o, h, wd), None
    cols, (oh, ow) = im2col(x, w.shape[2:], stride, pad_h, pad_w)
    y = stacked_matmul(np.ascontiguousarray(w.reshape(o, -1)), cols)
    return y.reshape(x.shape[0], o, oh, ow), cols


def conv2d_gemm_backward(g, x, w, cols, stride, pad_h, pad_w):
    """Gradients of conv2d_gemm wrt x and w."""
    b, o = g.shape[:2]
    kh, kw = w.shape[2:]
    gm = np.ascontiguousarray(g.reshape(b, o, -1))
    if kh == kw == 1 and stride == 1 and pad_h == (0, 0) and pad_w == (0, 0):
        c = x.shape[1]
        gx = stacked_matmul(np.ascontiguousarray(w.reshape(o, c).T), gm).reshape(x.shape)
        gw = _batched_outer(gm, x.reshape(b, c, -1)).reshape(w.shape)
        return gx, gw
    if cols is None:
        cols, _ = im2col(x, (kh, kw), stride, pad_h, pad_w)
    gw = _batched_outer(gm, cols).reshape(w.shape)
    gcols = stacked_matmul(np.ascontiguousarray(w.reshape(o, -1).T), gm)
    gx = col2im(gcols, x.shape, (kh, kw), stride, pad_h, pad_w, g.shape[2:])
    return gx, gw


def _batched_outer(a, b):
    """sum_i a[i] @ b[i].T for stacks (B,M,L), (B,N,L) -> (M,N)."""
    m, n = a.shape[1], b.shape[1]
    acc = np.zeros((m, n), dtype=a.dtype)
    tmp = np.empty((m, n), dtype=a.dtype)
    for i in range(a.shape[0]):
        np.dot(a[i], b[i].T, out=tmp)
        acc += tmp
    return acc


# ---------------------------------------------------------------------------
# Transpose convolution (stride-s upsampling), defined as the exact adjoint
# of conv2d(., w.transpose(1,0,2,3), stride, 'same') on the doubled canvas.
# ---------------------------------------------------------------------------

def conv2d_transpose_gemm(x, w, stride):
    """x: (B,Cin,h,w), w: (Cin,Cout,kh,kw) -> (B,Cout,h*s,w*s)."""
    b, ci, h, wd = x.shape
    co, kh, kw = w.shape[1:]
    oh, ow = h * stride, wd * stride
    pad_h = same_padding(oh, kh, stride)
    pad_w = same_padding(ow, kw, stride)
    gcols = stacked_matmul(np.ascontiguousarray(w.reshape(ci, -1).T), x.reshape(b, ci, -1))
    y = col2im(gcols, (b, co, oh, ow), (kh, kw), stride, pad_h, pad_w, (h, wd))
    return y


def conv2d_transpose_gemm_backward(g, x, w, stride):
    b, ci, h, wd = x.shape
    co, kh, kw = w.shape[1:]
    oh, ow = h * stride, wd * stride
    pad_h = same_padding(oh, kh, stride)
    pad_w = same_padding(ow, kw, stride)
    cols, _ = im2col(g, (kh, kw), stride, pad_h, pad_w)  # (B, Cout*kh*kw, h*wd)
    gx = stacked_matmul(np.ascontiguousarray(w.reshape(ci, -1)), cols).reshape(x.shape)
    gw = _batched_outer(x.reshape(b, ci, -1), cols).reshape(w.shape)
    return gx, gw


# ---------------------------------------------------------------------------
# FFT path. Frequency contractions are the hot spot; numba kernels run on
# the natural (batch, channel, freq) layout so no transposes are needed.
# ---------------------------------------------------------------------------

@njit(cache=True, fastmath=True)
def _freq_fwd(xf, wf, out):
    # out[b,o] += sum_i xf[b,i] * conj(wf[o,i])
    nb, ni, nf = xf.shape
    no = wf.shape[0]
    for b in range(nb):
        for o in range(no):
            acc = out[b, o]
            for i in range(ni):
                xv = xf[b, i]
                wv = wf[o, i]
                for f in range(nf):
                    acc[f] += xv[f] * wv[f].conjugate()


@njit(cache=True, fastmath=True)
def _freq_gx(gf, wf, out):
    # out[b,i] += sum_o gf[b,o] * wf[o,i]
    nb, no, nf = gf.shape
    ni = wf.shape[1]
    for b in range(nb):
        for o in range(no):
            gv = gf[b, o]
            for i in range(ni):
                acc = out[b, i]
                wv = wf[o, i]
                for f in range(nf):
                    acc[f] += gv[f] * wv[f]


@njit(cache=True, fastmath=True)
def _freq_gw(xf, gf, out):
    # out[o,i] += sum_b xf[b,i] * conj(gf[b,o])
    nb, ni, nf = xf.shape
    no = gf.shape[1]
    for b in range(nb):
        for o in range(no):
            gv = gf[b, o]
            for i in range(ni):
                acc = out[o, i]
                xv = xf[b, i]
                for f in range(nf):
                    acc[f] += xv[f] * gv[f].conjugate()


def _rfft2_flat(a, nh, nw):
    f = sfft.rfft2(a, s=(nh, nw))
    return np.ascontiguousarray(f.reshape(a.shape[0], a.shape[1], -1)), f.shape[-2:]


def _crop_wrapped(c, p, n, size, axis):
    """Rows j of the 'same' output live at (j - p) mod n of the circular result."""
    if p == 0:
        return c.take(range(size), axis=axis)
    head = c.take(range(n - p, n), axis=axis)
    tail = c.take(range(0, size - p), axis=axis)
    return np.concatenate((head, tail), axis=axis)


class FftConvPlan:
    """One forward conv via FFT.

    The plan keeps references to the input arrays (already alive on the
    tape) and recomputes their transforms in backward instead of caching
    them; that trades two cheap FFT batches for a few hundred MB of peak
    memory at recurrent-model scale.
    """

    def __init__(self, x, w):
        kh, kw = w.shape[2:]
        h, wd = x.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError("fft conv path expects odd kernels")
        self.x, self.w = x, w
        self.x_shape, self.w_shape = x.shape, w.shape
        self.ph, self.pw = (kh - 1) // 2, (kw - 1) // 2
        self.nh = sfft.next_fast_len(h + kh - 1, real=True)
        self.nw = sfft.next_fast_len(wd + kw - 1, real=True)
        self.cdtype = np.complex64 if x.dtype == np.float32 else np.complex128
        self.fshape = None
        self.xf = self.wf = None

    def _transforms(self):
        # cached from forward until backward consumes them
        if self.xf is None:
            self.xf, self.fshape = _rfft2_flat(self.x, self.nh, self.nw)
            self.wf, _ = _rfft2_flat(self.w, self.nh, self.nw)
        return self.xf, self.wf

    def _irfft2(self, f_flat, b, c):
        f = f_flat.reshape(b, c, *self.fshape)
        return sfft.irfft2(f, s=(self.nh, self.nw))

    def forward(self):
        b = self.x_shape[0]
        o = self.w_shape[0]
        xf, wf = self._transforms()
        yf = np.zeros((b, o, xf.shape[-1]), dtype=self.cdtype)
        _freq_fwd(xf, wf, yf)
        y = self._irfft2(yf, b, o)
        h, wd = self.x_shape[2:]
        y = _crop_wrapped(y, self.ph, self.nh, h, axis=2)
        return _crop_wrapped(y, self.pw, self.nw, wd, axis=3)

    def backward(self, g):
        b, ci = self.x_shape[:2]
        o = self.w_shape[0]
        h, wd = self.x_shape[2:]
        kh, kw = self.w_shape[2:]
        xf, wf = self._transforms()
        self.xf = self.wf = None
        gbuf = np.zeros((b, o, self.nh, self.nw), dtype=g.dtype)
        gbuf[:, :, :h, :wd] = g
        gf = np.ascontiguousarray(sfft.rfft2(gbuf).reshape(b, o, -1))
        del gbuf
        # grad x: convolution (no conjugate), crop starts at p
        gxf = np.zeros((b, ci, gf.shape[-1]), dtype=self.cdtype)
        _freq_gx(gf, wf, gxf)
        gx = np.ascontiguousarray(
            self._irfft2(gxf, b, ci)[:, :, self.ph:self.ph + h, self.pw:self.pw + wd])
        del gxf, wf
        # grad w: correlate g against x, wrapped crop at kernel size
        gwf = np.zeros((o, ci, gf.shape[-1]), dtype=self.cdtype)
        _freq_gw(xf, gf, gwf)
        gw = self._irfft2(gwf, o, ci)
        gw = _crop_wrapped(gw, self.ph, self.nh, kh, axis=2)
        gw = _crop_wrapped(gw, self.pw, self.nw, kw, axis=3)
        return gx, gw


FFT_MIN_KERNEL = 7


def pick_conv_method(k_hw, stride, padding) -> str:
    if stride == 1 and padding == "same" and min(k_hw) >= FFT_MIN_KERNEL and k_hw[0] % 2 == 1 and k_hw[1] % 2 == 1:
        return "fft"
    return "gemm"
