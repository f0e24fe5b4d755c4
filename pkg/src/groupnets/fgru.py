"""The fGRU recurrent unit: a two-stage (suppress, then facilitate) gated
convolutional state update.

One step takes an instantaneous external drive X and the persistent state
H[t-1], both (B, K, h, w), and produces H[t]:

    G_I = sigmoid(BN(U_I * H[t-1]))                    gain gate
    C_I = BN(W_I * (H[t-1] . G_I))                     suppressive interactions
    Z   = relu(X - relu((alpha.H[t-1] + mu) . C_I))    suppressed drive
    G_E = sigmoid(BN(U_E * Z))                         mix gate
    C_E = BN(W_E * Z)                                  facilitatory interactions
    Hc  = relu(kappa.(C_E + Z) + omega.(C_E . Z))      candidate state
    H[t] = (1 - G_E) . H[t-1] + G_E . Hc

where ``*`` is convolution, ``.`` elementwise product, and alpha, mu,
kappa, omega are per-channel coefficients. Every one of the four BN sites
has an independent state per timestep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import BatchNormState, Tensor

BN_SITES = ("bn_gain", "bn_ci", "bn_mix", "bn_ce")


@dataclass
class FGruConfig:
    channels: int
    spatial_kernel: int = 15       # W_I / W_E extent; 1 makes the unit strictly local
    gate_kernel: int = 1           # U_I / U_E extent
    timesteps: int = 8
    use_topdown_blend_gate: bool = False
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1
    bn_scale_init: float = 0.1

    def __post_init__(self):
        if self.channels <= 0:
            raise ValueError("channels must be positive")
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        if self.spatial_kernel % 2 == 0 or self.gate_kernel % 2 == 0:
            raise ValueError("kernel sizes must be odd")


@dataclass
class FGruParams:
    """All learnable symbols of one fGRU instance."""

    config: FGruConfig
    u_gain: Tensor = None     # gate kernel producing G_I
    u_mix: Tensor = None      # gate kernel producing G_E
    w_suppress: Tensor = None
    w_facilitate: Tensor = None
    alpha: Tensor = None
    mu: Tensor = None
    kappa: Tensor = None
    omega: Tensor = None
    beta: Tensor = None       # top-down blend gate bias, optional
    bn: dict = field(default_factory=dict)  # site name -> list per timestep

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for name in ("u_gain", "u_mix", "w_suppress", "w_facilitate",
                     "alpha", "mu", "kappa", "omega", "beta"):
            t = getattr(self, name)
            if t is not None:
                out[f"{prefix}{name}"] = t
        for site in BN_SITES:
            for t_idx, st in enumerate(self.bn[site]):
                out[f"{prefix}{site}.t{t_idx}.scale"] = st.scale
                out[f"{prefix}{site}.t{t_idx}.bias"] = st.bias
        return out

    def named_buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for site in BN_SITES:
            for t_idx, st in enumerate(self.bn[site]):
                out[f"{prefix}{site}.t{t_idx}.running_mean"] = st.running_mean
                out[f"{prefix}{site}.t{t_idx}.running_var"] = st.running_var
        return out


def _kernel(rng: np.random.Generator, c_out: int, c_in: int, k: int, dtype) -> Tensor:
    limit = 1.0 / np.sqrt(c_in * k * k)
    w = rng.uniform(-limit, limit, size=(c_out, c_in, k, k)).astype(dtype)
    return Tensor(w, requires_grad=True)


def init_fgru(cfg: FGruConfig, rng: np.random.Generator, dtype=np.float32) -> FGruParams:
    """Initialize one fGRU.

    Gate biases follow the chrono scheme: per channel, b = log(u) with
    u ~ U[1, T-1] (T floored at 2), the gain-gate BN bias gets -b and the
    mix-gate BN bias +b, so effective time constants span the unroll
    horizon. BN scales start at 0.1 to keep the sigmoids in their
    sensitive range; additive coefficients (mu, kappa) start at 0 and
    multiplicative ones (alpha, omega) at 0.1; beta starts at 0 so the
    blend gate is initially indifferent.
    """
    k = cfg.channels
    p = FGruParams(config=cfg)
    p.u_gain = _kernel(rng, k, k, cfg.gate_kernel, dtype)
    p.u_mix = _kernel(rng, k, k, cfg.gate_kernel, dtype)
    p.w_suppress = _kernel(rng, k, k, cfg.spatial_kernel, dtype)
    p.w_facilitate = _kernel(rng, k, k, cfg.spatial_kernel, dtype)
    p.alpha = Tensor(np.full(k, 0.1, dtype=dtype), requires_grad=True)
    p.mu = Tensor(np.zeros(k, dtype=dtype), requires_grad=True)
    p.kappa = Tensor(np.zeros(k, dtype=dtype), requires_grad=True)
    p.omega = Tensor(np.full(k, 0.1, dtype=dtype), requires_grad=True)
    if cfg.use_topdown_blend_gate:
        p.beta = Tensor(np.zeros(k, dtype=dtype), requires_grad=True)

    horizon = max(cfg.timesteps, 2)
    b = np.log(rng.uniform(1.0, horizon - 1.0 if horizon > 2 else 1.0 + 1e-12, size=k)).astype(dtype)
    for site in BN_SITES:
        states = []
        for _ in range(cfg.timesteps):
            st = BatchNormState(k, eps=cfg.bn_eps, momentum=cfg.bn_momentum,
                                scale_init=cfg.bn_scale_init, dtype=dtype)
            if site == "bn_gain":
                st.bias.data[:] = -b
            elif site == "bn_mix":
                st.bias.data[:] = b
            states.append(st)
        p.bn[site] = states
    return p


def fgru_step(x: Tensor, h_prev: Tensor, p: FGruParams, t: int, mode: str) -> Tensor:
    """Advance the recurrent state by one timestep (see module docstring)."""
    cfg = p.config
    if x.shape != h_prev.shape:
        raise ValueError(f"drive shape {x.shape} != state shape {h_prev.shape}")
    if not (0 <= t < cfg.timesteps):
        raise ValueError(f"timestep {t} outside [0, {cfg.timesteps})")

    gain = T.bn_sigmoid(T.conv2d(h_prev, p.u_gain), p.bn["bn_gain"][t], mode)
    c_i = T.batchnorm(T.conv2d(T.mul(h_prev, gain), p.w_suppress), p.bn["bn_ci"][t], mode)
    z = T.suppress(x, h_prev, c_i, p.alpha, p.mu)
    mix = T.bn_sigmoid(T.conv2d(z, p.u_mix), p.bn["bn_mix"][t], mode)
    c_e = T.batchnorm(T.conv2d(z, p.w_facilitate), p.bn["bn_ce"][t], mode)
    candidate = T.facilitate(c_e, z, p.kappa, p.omega)
    return T.gated_mix(mix, h_prev, candidate)


def topdown_blend(h_low: Tensor, h_fgru_out: Tensor, beta: Tensor) -> Tensor:
    """Gated blend of a top-down fGRU output back into the low-level state:
    (1 - sigmoid(beta)) . h_fgru_out + sigmoid(beta) . h_low."""
    if h_low.shape != h_fgru_out.shape:
        raise ValueError(f"shape mismatch: {h_low.shape} vs {h_fgru_out.shape}")
    return T.channel_blend(beta, h_fgru_out, h_low)
