from ._fastmnmf import (  # noqa: F401
    NotPositiveDefiniteError,
    ShapeMismatchError,
    SingularDemixerError,
    fit_distributed,
    fit_full,
    is_jointly_diagonalizable,
    istft,
    sdr,
    sdr_improvement,
    separate,
    simulate,
    stft,
)

__all__ = [
    "NotPositiveDefiniteError",
    "ShapeMismatchError",
    "SingularDemixerError",
    "fit_distributed",
    "fit_full",
    "is_jointly_diagonalizable",
    "istft",
    "sdr",
    "sdr_improvement",
    "separate",
    "simulate",
    "stft",
]
