"""Recurrent convolutional networks with horizontal and top-down feedback,
synthetic perceptual-grouping challenges, and human-consistency statistics."""

from .tensor import Tensor, Tape, backward
from .fgru import FGruConfig, FGruParams, fgru_step, init_fgru, topdown_blend
from .models import ArchitectureConfig, ModelState, build_model, forward

__all__ = [
    "Tensor", "Tape", "backward",
    "FGruConfig", "FGruParams", "fgru_step", "init_fgru", "topdown_blend",
    "ArchitectureConfig", "ModelState", "build_model", "forward",
]

__version__ = "0.1.0"
