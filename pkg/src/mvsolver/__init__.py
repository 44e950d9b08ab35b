"""Two-view neural solver for arithmetic word problems.

A text encoder feeds two structurally different equation decoders (one
expands goals top-down, one composes quantities bottom-up); a contrastive
loss ties their intermediate representations together, and an optional
second-phase discriminator picks between their predictions.
"""

from .kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
