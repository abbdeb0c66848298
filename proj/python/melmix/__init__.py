"""TVC-GMM mel-spectrogram modelling and over-smoothness diagnostics."""

from ._melmix import (
    Model,
    generate_default,
    log_spectral_distance,
    mel_spectrogram,
    sharpen,
    smooth,
    var_laplacian,
)

__all__ = [
    "Model",
    "generate_default",
    "log_spectral_distance",
    "mel_spectrogram",
    "sharpen",
    "smooth",
    "var_laplacian",
]
