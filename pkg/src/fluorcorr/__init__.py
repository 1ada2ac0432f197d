"""Spectra and frequency-resolved, homodyned photon correlations of detuned resonance fluorescence."""

__version__ = "0.1.0"

from .correlations import (  # noqa: E402
    CorrelationTrace,
    DensityMatrix,
    Spectrum,
    filtered_g2,
    g2_homodyned,
    spectrum,
    steady_state,
    two_time,
)
from .model import HomodyneFraction, SensorParams, SystemParams  # noqa: E402

__all__ = [
    "CorrelationTrace",
    "DensityMatrix",
    "HomodyneFraction",
    "SensorParams",
    "Spectrum",
    "SystemParams",
    "filtered_g2",
    "g2_homodyned",
    "spectrum",
    "steady_state",
    "two_time",
]
