"""Recurrent-cell memory laboratory.

Implements a family of recurrent cells (plain recurrence, gated cells, a
gateless interpolation cell, and a gated cell with trainable periodic
scaling of its write path), closed-form memory analysis for each, five
macro-models assembled from them, reverse-mode gradients with AdaGrad, and
desk-scale task data (a detect-"A" probe task, plain-text language
modeling, CoNLL-U tagging/parsing).
"""

from .cells import CellKind, CellSpec, InputMode
from .models import Model, ModelConfig, ModelKind

__version__ = "0.1.0"

__all__ = [
    "CellKind",
    "CellSpec",
    "InputMode",
    "Model",
    "ModelConfig",
    "ModelKind",
    "__version__",
]
