"""clicklab: losses, matching, attention, and click-simulation metrics for
interactive segmentation, at desk scale and fully deterministic."""

__version__ = "0.1.0"

from .core import binarize, iou, pt_map, rng_stream  # noqa: F401
from .losses import LossOutput, make_loss  # noqa: F401
from .adaptive import AflDiagnostics, AflParams, afl, gamma_a, mu  # noqa: F401
