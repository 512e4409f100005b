"""refold: speaker embeddings from constant-volume 2D/1D reshaping.

A self-contained numpy implementation of a time-pooled spectrogram
encoder family: tensor engine with reverse-mode autodiff, mel frontend,
stage planner, network blocks, margin objectives, an analytic MAC cost
model with budget bands, a two-stage training recipe, and a cosine /
equal-error-rate evaluation harness, all wired into one CLI.
"""

from .errors import ConfigError, ContractError, NumericError, RefoldError

__all__ = [
    "ConfigError",
    "ContractError",
    "NumericError",
    "RefoldError",
]

__version__ = "0.1.0"
