"""The TD+H recurrent convolutional architecture and its lesioned variants.

The backbone runs a bottom-up to top-down sweep per timestep: an input
conv block drives a low-level fGRU with spatial (horizontal) kernels; its
state is pooled and pushed through a downsampling conv pathway into a
strictly-local high-level fGRU; an upsampling transpose-conv pathway
brings the result back to full resolution where a third, strictly-local
fGRU integrates it with the low-level state through a gated blend.

Variants lesion this loop:

* ``tdh``: horizontal and top-down feedback (the full model)
* ``td``:  low-level fGRU kernel shrunk to 1x1 (no horizontal spread)
* ``h``:   the integrating fGRU removed, so the down/up pathways cannot
           reach the output
* ``bu``:  both lesions and a single timestep (pure feedforward)

The classification readout consumes the final low-level state; a dense
per-pixel head replaces it for segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .fgru import FGruConfig, FGruParams, fgru_step, init_fgru, topdown_blend
from .tensor import BatchNormState, Tensor

VARIANTS = ("tdh", "td", "h", "bu")


@dataclass
class ArchitectureConfig:
    variant: str = "tdh"
    timesteps: int = 8
    image_size: int = 128
    input_channels: int = 1
    channels: int = 20                 # input conv block, fGRU1, US output
    input_conv_kernel: int = 7
    fgru1_kernel: int = 15             # forced to 1 by td/bu lesions
    ds_channels: tuple = (32, 128)
    ds_convs_per_stack: int = 3
    ds_kernel: int = 3
    us_kernel: int = 4
    task: str = "classification"       # or "segmentation"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.task not in ("classification", "segmentation"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.variant in ("td", "bu"):
            self.fgru1_kernel = 1
        if self.variant == "bu":
            self.timesteps = 1

    @property
    def has_topdown(self) -> bool:
        return self.variant in ("tdh", "td")


@dataclass
class ForwardTrace:
    """Per-timestep snapshots of the recurrent states (numpy copies)."""

    h1: list = field(default_factory=list)
    h2: list = field(default_factory=list)
    h1_pre_integration: list = field(default_factory=list)

    def __len__(self):
        return len(self.h1)


class ModelState:
    """Every learnable tensor and normalization buffer of one model."""

    def __init__(self, cfg: ArchitectureConfig):
        self.config = cfg
        self.conv1_w = self.conv1_b = self.conv2_w = self.conv2_b = None
        self.fgru1: FGruParams = None
        self.bn_mid: list[BatchNormState] = []
        self.ds: list[list[dict]] = []
        self.fgru2: FGruParams = None
        self.us: list[dict] = []
        self.fgru3: FGruParams | None = None
        self.bn_out: BatchNormState = None
        self.head_w1 = self.head_b1 = self.head_w2 = self.head_b2 = None

    def named_parameters(self) -> dict[str, Tensor]:
        out = {
            "conv1.w": self.conv1_w, "conv1.b": self.conv1_b,
            "conv2.w": self.conv2_w, "conv2.b": self.conv2_b,
        }
        out.update(self.fgru1.named_parameters("fgru1."))
        for t, st in enumerate(self.bn_mid):
            out[f"bn_mid.t{t}.scale"] = st.scale
            out[f"bn_mid.t{t}.bias"] = st.bias
        for si, stack in enumerate(self.ds):
            for li, layer in enumerate(stack):
                out[f"ds{si}.conv{li}.w"] = layer["w"]
                for t, st in enumerate(layer["bn"]):
                    out[f"ds{si}.conv{li}.bn.t{t}.scale"] = st.scale
                    out[f"ds{si}.conv{li}.bn.t{t}.bias"] = st.bias
        out.update(self.fgru2.named_parameters("fgru2."))
        for li, layer in enumerate(self.us):
            out[f"us{li}.w"] = layer["w"]
            for t, st in enumerate(layer["bn"]):
                out[f"us{li}.bn.t{t}.scale"] = st.scale
                out[f"us{li}.bn.t{t}.bias"] = st.bias
        if self.fgru3 is not None:
            out.update(self.fgru3.named_parameters("fgru3."))
        out["bn_out.scale"] = self.bn_out.scale
        out["bn_out.bias"] = self.bn_out.bias
        out.update({"head.w1": self.head_w1, "head.b1": self.head_b1,
                    "head.w2": self.head_w2, "head.b2": self.head_b2})
        return out

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        out.update(self.fgru1.named_buffers("fgru1."))
        for t, st in enumerate(self.bn_mid):
            out[f"bn_mid.t{t}.running_mean"] = st.running_mean
            out[f"bn_mid.t{t}.running_var"] = st.running_var
        for si, stack in enumerate(self.ds):
            for li, layer in enumerate(stack):
                for t, st in enumerate(layer["bn"]):
                    out[f"ds{si}.conv{li}.bn.t{t}.running_mean"] = st.running_mean
                    out[f"ds{si}.conv{li}.bn.t{t}.running_var"] = st.running_var
        out.update(self.fgru2.named_buffers("fgru2."))
        for li, layer in enumerate(self.us):
            for t, st in enumerate(layer["bn"]):
                out[f"us{li}.bn.t{t}.running_mean"] = st.running_mean
                out[f"us{li}.bn.t{t}.running_var"] = st.running_var
        if self.fgru3 is not None:
            out.update(self.fgru3.named_buffers("fgru3."))
        out["bn_out.running_mean"] = self.bn_out.running_mean
        out["bn_out.running_var"] = self.bn_out.running_var
        return out

    def all_bn_states(self) -> list[BatchNormState]:
        states = list(self.bn_mid) + [self.bn_out]
        for p in (self.fgru1, self.fgru2, self.fgru3):
            if p is not None:
                for site in p.bn.values():
                    states.extend(site)
        for stack in self.ds:
            for layer in stack:
                states.extend(layer["bn"])
        for layer in self.us:
            states.extend(layer["bn"])
        return states


def _conv_init(rng, c_out, c_in, k, dtype):
    limit = 1.0 / np.sqrt(c_in * k * k)
    return Tensor(rng.uniform(-limit, limit, size=(c_out, c_in, k, k)).astype(dtype),
                  requires_grad=True)


def _tconv_init(rng, c_in, c_out, k, dtype):
    limit = 1.0 / np.sqrt(c_in * k * k)
    return Tensor(rng.uniform(-limit, limit, size=(c_in, c_out, k, k)).astype(dtype),
                  requires_grad=True)


def _bias(c, dtype):
    return Tensor(np.zeros((1, c, 1, 1), dtype=dtype), requires_grad=True)


def _bn_per_timestep(c, t, dtype):
    return [BatchNormState(c, dtype=dtype) for _ in range(t)]


def build_model(cfg: ArchitectureConfig, rng: np.random.Generator,
                dtype=np.float32) -> ModelState:
    """Initialize a model; the parameter set is a pure function of cfg."""
    m = ModelState(cfg)
    k, c = cfg.input_conv_kernel, cfg.channels
    tt = cfg.timesteps
    m.conv1_w = _conv_init(rng, c, cfg.input_channels, k, dtype)
    m.conv1_b = _bias(c, dtype)
    m.conv2_w = _conv_init(rng, c, c, k, dtype)
    m.conv2_b = _bias(c, dtype)

    m.fgru1 = init_fgru(FGruConfig(channels=c, spatial_kernel=cfg.fgru1_kernel,
                                   timesteps=tt), rng, dtype)
    m.bn_mid = _bn_per_timestep(c, tt, dtype)

    widths = (c,) + tuple(cfg.ds_channels)
    for si in range(len(cfg.ds_channels)):
        stack = []
        for li in range(cfg.ds_convs_per_stack):
            c_in = widths[si] if li == 0 else widths[si + 1]
            stack.append({
                "w": _conv_init(rng, widths[si + 1], c_in, cfg.ds_kernel, dtype),
                "bn": _bn_per_timestep(widths[si + 1], tt, dtype),
            })
        m.ds.append(stack)

    m.fgru2 = init_fgru(FGruConfig(channels=cfg.ds_channels[-1], spatial_kernel=1,
                                   timesteps=tt), rng, dtype)

    us_widths = (cfg.ds_channels[-1], cfg.ds_channels[0], c)
    for li in range(2):
        m.us.append({
            "w": _tconv_init(rng, us_widths[li], us_widths[li + 1], cfg.us_kernel, dtype),
            "bn": _bn_per_timestep(us_widths[li + 1], tt, dtype),
        })

    if cfg.has_topdown:
        m.fgru3 = init_fgru(FGruConfig(channels=c, spatial_kernel=1, timesteps=tt,
                                       use_topdown_blend_gate=True), rng, dtype)

    m.bn_out = BatchNormState(c, dtype=dtype)

    # both heads are a pair of 1x1 convs with one output channel each
    m.head_w1 = _conv_init(rng, 1, c, 1, dtype)
    m.head_b1 = _bias(1, dtype)
    m.head_w2 = _conv_init(rng, 1, 1, 1, dtype)
    m.head_b2 = _bias(1, dtype)
    return m


def _input_block(m: ModelState, images: Tensor) -> Tensor:
    h = T.add(T.conv2d(images, m.conv1_w), m.conv1_b)
    h = T.relu(h)
    return T.add(T.conv2d(h, m.conv2_w), m.conv2_b)


def _ds_path(m: ModelState, h1: Tensor, t: int, mode: str) -> Tensor:
    d = T.maxpool2(T.batchnorm(h1, m.bn_mid[t], mode))
    for si, stack in enumerate(m.ds):
        for layer in stack:
            d = T.batchnorm(T.relu(T.conv2d(d, layer["w"])), layer["bn"][t], mode)
        if si == 0:
            d = T.maxpool2(d)
    return d


def _us_path(m: ModelState, h2: Tensor, t: int, mode: str) -> Tensor:
    u = h2
    for layer in m.us:
        u = T.batchnorm(T.relu(T.conv2d_transpose(u, layer["w"], stride=2)), layer["bn"][t], mode)
    return u


def readout(m: ModelState, h1_final: Tensor, mode: str) -> Tensor:
    """conv1x1 -> relu -> global max pool -> conv1x1, emitting one signed
    logit per image (the final layer is intentionally unrectified)."""
    r = T.batchnorm(h1_final, m.bn_out, mode)
    r = T.relu(T.add(T.conv2d(r, m.head_w1), m.head_b1))
    r = T.global_max_pool(r)
    r = T.add(T.conv2d(r, m.head_w2), m.head_b2)
    return T.reshape(r, (r.shape[0],))


def segmentation_readout(m: ModelState, h1_final: Tensor, mode: str) -> Tensor:
    """Per-pixel head: two 1x1 convs with bias, rectified between, emitting
    signed mask logits of shape (B, 1, S, S)."""
    r = T.batchnorm(h1_final, m.bn_out, mode)
    r = T.relu(T.add(T.conv2d(r, m.head_w1), m.head_b1))
    return T.add(T.conv2d(r, m.head_w2), m.head_b2)


def _check_images(m: ModelState, images) -> Tensor:
    if not isinstance(images, Tensor):
        images = Tensor(np.asarray(images), dtype=m.conv1_w.dtype)
    _, c_in, hh, ww = images.shape
    if hh != ww:
        raise ValueError(f"expected square input, got {hh}x{ww}")
    if c_in != m.config.input_channels:
        raise ValueError(f"expected {m.config.input_channels} input channels, got {c_in}")
    return images


def _init_states(m: ModelState, b: int, s: int) -> tuple[Tensor, Tensor]:
    dtype = m.conv1_w.dtype
    h1 = Tensor(np.zeros((b, m.config.channels, s, s), dtype=dtype))
    h2 = Tensor(np.zeros((b, m.config.ds_channels[-1], s // 4, s // 4), dtype=dtype))
    return h1, h2


def _step(m: ModelState, drive: Tensor, h1: Tensor, h2: Tensor, t: int,
          mode: str) -> tuple[Tensor, Tensor, Tensor]:
    """One full bottom-up/top-down sweep; returns (h1, h2, h1_pre_integration)."""
    cfg = m.config
    h1 = fgru_step(drive, h1, m.fgru1, t, mode)
    pre = h1
    if cfg.has_topdown:
        d = _ds_path(m, h1, t, mode)
        h2 = fgru_step(d, h2, m.fgru2, t, mode)
        u = _us_path(m, h2, t, mode)
        integrated = fgru_step(u, h1, m.fgru3, t, mode)
        h1 = topdown_blend(h1, integrated, m.fgru3.beta)
    return h1, h2, pre


def _head(m: ModelState, h1: Tensor, mode: str) -> Tensor:
    if m.config.task == "classification":
        return readout(m, h1, mode)
    return segmentation_readout(m, h1, mode)


def forward(m: ModelState, images, mode: str = "eval",
            want_trace: bool = False) -> tuple[Tensor, ForwardTrace]:
    """Run the per-timestep bottom-up/top-down loop and read out logits.

    The variants that cannot route the down/up pathways to the output
    (``h``, ``bu``) skip computing them; results are identical because the
    integrating fGRU is the only connection back to the low-level state.
    """
    cfg = m.config
    images = _check_images(m, images)
    drive = _input_block(m, images)  # constant across timesteps
    h1, h2 = _init_states(m, images.shape[0], images.shape[2])
    trace = ForwardTrace()

    for t in range(cfg.timesteps):
        h1, h2, pre = _step(m, drive, h1, h2, t, mode)
        if want_trace:
            trace.h1_pre_integration.append(pre.data.copy())
            trace.h1.append(h1.data.copy())
            trace.h2.append(h2.data.copy())

    return _head(m, h1, mode), trace


def loss(logits: Tensor, labels, task: str = "classification") -> Tensor:
    """Mean binary cross-entropy from logits (pixel-averaged for masks)."""
    labels = np.asarray(labels, dtype=logits.dtype)
    return T.bce_with_logits(logits, labels)


def _naive_tape_bytes(cfg: ArchitectureConfig, batch: int, size: int) -> int:
    """Rough upper bound on retained bytes for a fully taped train step."""
    def unit(c, s):
        return 4 * batch * c * s * s

    c = cfg.channels
    step = 12 * unit(c, size)
    if cfg.fgru1_kernel >= 7:
        nf = (size + cfg.fgru1_kernel) ** 2 // 2
        step += 2 * 8 * (batch * c + c * c) * nf
    if cfg.has_topdown:
        step += 15 * unit(c, size)                      # fgru3, blend, bn_mid
        step += 8 * unit(cfg.ds_channels[0], size // 2)
        step += 20 * unit(cfg.ds_channels[1], size // 4)
        step += 4 * unit(cfg.ds_channels[0], size // 2)  # upsampling pathway
    return cfg.timesteps * step + 4 * unit(c, size)


# above this retained-graph size, training re-executes one timestep at a
# time instead of keeping the whole unrolled graph alive
CHECKPOINT_BYTES = int(1.2e9)


def train_batch(m: ModelState, images, targets, checkpoint: bool | None = None) -> float:
    """One training forward/backward; gradients accumulate onto ``.grad``.

    When the fully unrolled graph would not fit comfortably in memory
    (``checkpoint`` defaults to that estimate), the loop stores only the
    recurrent states at step boundaries and re-executes one step's
    subgraph at a time during the backward sweep. Gradients are identical
    to differentiating the fully retained graph.
    """
    cfg = m.config
    images = _check_images(m, images)
    if checkpoint is None:
        checkpoint = _naive_tape_bytes(cfg, images.shape[0], images.shape[2]) > CHECKPOINT_BYTES
    if not checkpoint:
        with T.Tape() as tape:
            logits, _ = forward(m, images, "train")
            l = loss(logits, targets, cfg.task)
            loss_value = l.item()
            T.backward(tape, l)
        return loss_value

    # stats-updating forward, retaining only the boundary states
    drive = _input_block(m, images)
    h1, h2 = _init_states(m, images.shape[0], images.shape[2])
    h1_states, h2_states = [h1.data], [h2.data]
    for t in range(cfg.timesteps):
        h1, h2, _ = _step(m, drive, h1, h2, t, "train")
        h1_states.append(h1.data)
        h2_states.append(h2.data)

    # loss and gradient at the final low-level state
    h1_leaf = Tensor(h1_states[-1], requires_grad=True)
    with T.Tape() as tape:
        logits = _head(m, h1_leaf, "train")
        l = loss(logits, targets, cfg.task)
        loss_value = l.item()
        T.backward(tape, l)
    g_h1 = h1_leaf.grad
    g_h2 = None
    g_drive = None

    # re-execute each step under its own short tape, newest first
    for t in range(cfg.timesteps - 1, -1, -1):
        h1_in = Tensor(h1_states[t], requires_grad=True)
        h2_in = Tensor(h2_states[t], requires_grad=True)
        drive_in = Tensor(drive.data, requires_grad=True)
        with T.Tape() as tape:
            h1_out, h2_out, _ = _step(m, drive_in, h1_in, h2_in, t, "recompute")
            seeds = [(h1_out, g_h1)]
            if g_h2 is not None and h2_out is not h2_in:
                seeds.append((h2_out, g_h2))
            T.backward_seeded(tape, seeds)
        g_h1 = h1_in.grad if h1_in.grad is not None else np.zeros_like(h1_in.data)
        g_h2 = h2_in.grad
        if drive_in.grad is not None:
            g_drive = drive_in.grad if g_drive is None else g_drive + drive_in.grad

    # input conv block
    if g_drive is not None:
        with T.Tape() as tape:
            d2 = _input_block(m, images)
            T.backward_seeded(tape, [(d2, g_drive)])
    return loss_value
