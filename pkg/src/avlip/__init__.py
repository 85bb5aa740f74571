"""Desk-scale audio-visual self-supervised lipreading pipeline on a synthetic
parametric talking-face corpus: masked cluster prediction pretraining with
iterative pseudo-label refinement, seq2seq finetuning, speaker probing,
region ablation and saliency analysis."""

__version__ = "0.1.0"

from .tensor import Tensor, backward, no_grad  # noqa: F401
from .nn import ParamStore  # noqa: F401
from .rng import RngStream  # noqa: F401
