"""Characterisation toolkit for pulsed SPDC photon-pair sources.

Filter integrals (:mod:`.filters`), temporal gating (:mod:`.gating`), pair
splitting statistics (:mod:`.pair_statistics`), closed-form count
probabilities (:mod:`.forward_model`), a pulse-level Monte Carlo
(:mod:`.monte_carlo`) and the inversion of measured counts into figures of
merit (:mod:`.estimator`).
"""

from .estimator import (
    Calibration,
    MeasurementRecord,
    PerformanceReport,
    bell_threshold,
    decompose_losses,
    estimate,
    fidelity_from_rate,
)
from .filters import (
    Cascade,
    FabryPerot,
    Gaussian,
    Rectangular,
    Tabulated,
    Trapezoid,
    Triangular,
    calibrate_trapezoid,
    detuning_sweep,
    spectral_integrals,
)
from .forward_model import Channel, ChannelParams, CountProbabilities, SourceParams, predict
from .gating import PulseGate, fwhm_to_delta_t, k_t
from .monte_carlo import SimConfig, SimCounts, simulate, sweep_p0

__version__ = "0.1.0"
