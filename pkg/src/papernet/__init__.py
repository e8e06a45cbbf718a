"""Compact EEG classifier with a self-contained numerical stack.

The package covers the whole pipeline: band-pass preprocessing and
standardization (:mod:`papernet.dsp`), dataset handling and weight files
(:mod:`papernet.data`), a tape-based autodiff tensor core
(:mod:`papernet.tensor`), the layer zoo and model assembly
(:mod:`papernet.layers`, :mod:`papernet.model`), the optimization protocol
(:mod:`papernet.training`), evaluation statistics (:mod:`papernet.metrics`),
and finite-difference verification (:mod:`papernet.checks`).
"""

from .model import VARIANTS, ModelGraph, build_papernet, count_parameters, forward
from .tensor import ComputationTape, Tensor, backward, gradcheck
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "ComputationTape",
    "ModelGraph",
    "Tensor",
    "TrainConfig",
    "VARIANTS",
    "backward",
    "build_papernet",
    "count_parameters",
    "forward",
    "gradcheck",
    "train",
    "__version__",
]
