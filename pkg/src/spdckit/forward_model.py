"""Per-gate count and coincidence probabilities from physical parameters.

The closed forms keep pair-number terms up to double pairs::

    p_a   = 2 p0 I1 X_A K_T + P_NA
    p_tc  = 2 p0 I2 X_A X_B K_T
    p_ac  = 4 (p0 I1)^2 X_A X_B K_T^2  ( = (p_a - P_NA)(p_b - P_NB) )
    p_nab = (p_a - P_NA) P_NB + (p_b - P_NB) P_NA + P_NA P_NB
    p_c   = p_tc + p_ac + p_nab

:func:`poisson_count_probabilities` gives the untruncated values for a
Poisson pair number, which the Monte Carlo simulator samples exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .errors import ApproximationWarning, NumericalError, ValidationError
from .filters import UNITY, FilterSpec, SpectralEnvelope, SpectralIntegrals, spectral_integrals
from .gating import PulseGate, k_t

X_SMALL_LIMIT = 0.1
P0I1_SMALL_LIMIT = 0.2


def _unit(name, v, upper_open=False):
    ok = 0.0 <= v < 1.0 if upper_open else 0.0 <= v <= 1.0
    if not (isinstance(v, (int, float)) and ok):
        raise ValidationError(f"{name} must lie in [0, 1{')' if upper_open else ']'}, got {v!r}")


@dataclass(frozen=True)
class Channel:
    """One detection channel: coupler ratio, in-line transmission, detector."""

    r: float
    t: float
    eta: float
    p_dark: float = 0.0

    def __post_init__(self):
        for name in ("r", "t", "eta"):
            _unit(name, getattr(self, name))
        _unit("p_dark", self.p_dark, upper_open=True)

    @property
    def x(self) -> float:
        """Total frequency-independent transmission r * t * eta."""
        return self.r * self.t * self.eta


@dataclass(frozen=True)
class ChannelParams:
    a: Channel
    b: Channel

    def __post_init__(self):
        if self.a.r + self.b.r > 1 + 1e-12:
            raise ValidationError("coupler output ratios must satisfy r_a + r_b <= 1")

    @classmethod
    def from_transmissions(cls, x_a, x_b, p_dark_a=0.0, p_dark_b=0.0) -> "ChannelParams":
        """Channels with all loss lumped into ``t`` behind a 50/50 coupler."""
        if not (0 <= x_a <= 0.5 and 0 <= x_b <= 0.5):
            raise ValidationError("lumped transmissions behind a 50/50 coupler must be <= 0.5")
        return cls(Channel(0.5, 2 * x_a, 1.0, p_dark_a), Channel(0.5, 2 * x_b, 1.0, p_dark_b))


@dataclass(frozen=True)
class SourceParams:
    """Pair source: ``p0`` is the peak pair probability density per pulse per GHz."""

    p0: float
    filter: FilterSpec
    pulse_gate: PulseGate
    envelope: SpectralEnvelope = UNITY
    detuning: float = 0.0
    band: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        if not (isinstance(self.p0, (int, float)) and math.isfinite(self.p0) and self.p0 >= 0):
            raise ValidationError(f"p0 must be >= 0, got {self.p0!r}")

    def integrals(self) -> SpectralIntegrals:
        return spectral_integrals(self.filter, self.envelope, self.detuning, band=self.band)


@dataclass(frozen=True)
class CountProbabilities:
    p_a: float
    p_b: float
    p_tc: float
    p_ac: float
    p_nab: float
    p_c: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("p_a", "p_b", "p_c", "p_tc", "p_ac", "p_nab")}


def _regime_warnings(p0_i1, x_a, x_b):
    if p0_i1 > P0I1_SMALL_LIMIT:
        warnings.warn(f"p0*I1 = {p0_i1:.3g} exceeds {P0I1_SMALL_LIMIT}: double-pair "
                      "truncation is strained", ApproximationWarning, stacklevel=3)
    if max(x_a, x_b) > X_SMALL_LIMIT:
        warnings.warn(f"channel transmission {max(x_a, x_b):.3g} exceeds {X_SMALL_LIMIT}: "
                      "small-loss approximation is strained", ApproximationWarning, stacklevel=3)


def count_probabilities(p0_i1: float, ratio_i1_over_i2: float, k_t: float,
                        x_a: float, x_b: float, p_dark_a: float = 0.0,
                        p_dark_b: float = 0.0) -> CountProbabilities:
    """Truncated closed forms in terms of the aggregate quantities.

    ``ratio_i1_over_i2`` is I1/I2 at the operating detuning (``inf`` when
    no pair can pass the filter jointly).
    """
    _regime_warnings(p0_i1, x_a, x_b)
    sa = 2 * p0_i1 * x_a * k_t
    sb = 2 * p0_i1 * x_b * k_t
    p_tc = 0.0 if math.isinf(ratio_i1_over_i2) else 2 * (p0_i1 / ratio_i1_over_i2) * x_a * x_b * k_t
    p_ac = 4 * p0_i1**2 * x_a * x_b * k_t**2
    if not math.isclose(p_ac, sa * sb, rel_tol=1e-12, abs_tol=1e-300):
        raise NumericalError("accidental-coincidence forms disagree")
    p_nab = sa * p_dark_b + sb * p_dark_a + p_dark_a * p_dark_b
    return CountProbabilities(
        p_a=sa + p_dark_a,
        p_b=sb + p_dark_b,
        p_tc=p_tc,
        p_ac=p_ac,
        p_nab=p_nab,
        p_c=p_tc + p_ac + p_nab,
    )


def poisson_count_probabilities(p0_i1: float, ratio_i1_over_i2: float, k_t: float,
                                x_a: float, x_b: float, p_dark_a: float = 0.0,
                                p_dark_b: float = 0.0) -> CountProbabilities:
    """Exact click probabilities for a Poisson number of pairs per pulse.

    Photons of one pair share an emission time, so a pair inside the gate
    leaves no click on A with probability ``(1 - F_s x_a)(1 - F_i x_a)``.
    Averaging over frequency and time and summing the Poisson series gives::

        P(no A)        = (1 - P_NA) exp(-K_T p0I1 (2 x_a - x_a^2 / r))
        P(no A, no B)  = (1 - P_NA)(1 - P_NB) exp(-K_T p0I1 (2 s - s^2 / r)),  s = x_a + x_b

    with ``r = I1/I2``. The coincidence split reported is the one the
    estimator infers: ``p_ac = (p_a - P_NA)(p_b - P_NB)``,
    ``p_nab = p_a p_b - p_ac`` and ``p_tc = p_c - p_a p_b``.
    """
    inv_r = 0.0 if math.isinf(ratio_i1_over_i2) else 1.0 / ratio_i1_over_i2
    s = x_a + x_b
    lam_a = k_t * p0_i1 * (2 * x_a - x_a * x_a * inv_r)
    lam_b = k_t * p0_i1 * (2 * x_b - x_b * x_b * inv_r)
    lam_ab = k_t * p0_i1 * (2 * s - s * s * inv_r)
    q_a = (1 - p_dark_a) * math.exp(-lam_a)
    q_b = (1 - p_dark_b) * math.exp(-lam_b)
    q_ab = (1 - p_dark_a) * (1 - p_dark_b) * math.exp(-lam_ab)
    p_a = -math.expm1(-lam_a) * (1 - p_dark_a) + p_dark_a
    p_b = -math.expm1(-lam_b) * (1 - p_dark_b) + p_dark_b
    # 1 - q_a - q_b + q_ab, written as p_a p_b + q_a q_b (exp(tau) - 1)
    tau = lam_a + lam_b - lam_ab
    p_c = p_a * p_b + q_a * q_b * math.expm1(tau)
    p_ac = (p_a - p_dark_a) * (p_b - p_dark_b)
    return CountProbabilities(
        p_a=p_a,
        p_b=p_b,
        p_tc=p_c - p_a * p_b,
        p_ac=p_ac,
        p_nab=p_a * p_b - p_ac,
        p_c=p_c,
    )


def _terms(src: SourceParams, integrals: SpectralIntegrals | None):
    si = integrals if integrals is not None else src.integrals()
    return src.p0 * si.i1, si.ratio_i1_over_i2, k_t(src.pulse_gate)


def predict(src: SourceParams, ch: ChannelParams,
            integrals: SpectralIntegrals | None = None) -> CountProbabilities:
    """Truncated closed-form probabilities for a source and channel pair.

    Pass precomputed ``integrals`` to skip the quadrature.
    """
    p0_i1, ratio, kt = _terms(src, integrals)
    return count_probabilities(p0_i1, ratio, kt, ch.a.x, ch.b.x, ch.a.p_dark, ch.b.p_dark)


def predict_poisson(src: SourceParams, ch: ChannelParams,
                    integrals: SpectralIntegrals | None = None) -> CountProbabilities:
    p0_i1, ratio, kt = _terms(src, integrals)
    return poisson_count_probabilities(p0_i1, ratio, kt, ch.a.x, ch.b.x,
                                       ch.a.p_dark, ch.b.p_dark)
