"""Inversion of measured singles and coincidences into source figures of merit.

Given per-gate probabilities ``p_a``, ``p_b``, ``p_c`` and a calibration
(I1/I2 at the operating detuning ``r``, gate factor ``K_T``, dark-count
probabilities), the estimates are::

    p_ac   = (p_a - P_NA)(p_b - P_NB)
    p_nab  = (p_a - P_NA) P_NB + (p_b - P_NB) P_NA + P_NA P_NB
    p_tc   = p_c - p_ac - p_nab            (= p_c - p_a p_b)
    p0 I1  = p_ac / (2 K_T r p_tc)
    X_A    = r p_tc / (p_b - P_NB),   X_B = r p_tc / (p_a - P_NA)
    F_sys  = 1 / (1 + 2 (p_ac + p_nab) / p_tc)
    F_SPDC = 1 / (1 + 2 p_ac / p_tc)

Standard errors come from first-order propagation of the multinomial
covariance of the three click indicators over ``gates`` pulses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    ApproximationWarning,
    EstimationError,
    NoExcessCoincidencesError,
    ValidationError,
)

BELL_LIMIT = 1 / math.sqrt(2)


@dataclass(frozen=True)
class Calibration:
    """Quantities fixed once before a measurement campaign.

    ``r_tau_*`` is the coupler ratio times line/filter transmission measured
    by reverse propagation; with ``eta_*`` it allows the fibre coupling
    efficiency to be separated out of the fitted transmissions.
    """

    ratio_i1_over_i2: float
    k_t: float
    p_dark_a: float = 0.0
    p_dark_b: float = 0.0
    r_tau_a: float | None = None
    r_tau_b: float | None = None
    eta_a: float | None = None
    eta_b: float | None = None

    def __post_init__(self):
        if not self.ratio_i1_over_i2 >= 1:
            raise ValidationError(f"I1/I2 ratio must be >= 1, got {self.ratio_i1_over_i2!r}")
        if not 0 < self.k_t <= 1:
            raise ValidationError(f"k_t must lie in (0, 1], got {self.k_t!r}")
        for name in ("p_dark_a", "p_dark_b"):
            if not 0 <= getattr(self, name) < 1:
                raise ValidationError(f"{name} must lie in [0, 1)")
        for name in ("r_tau_a", "r_tau_b", "eta_a", "eta_b"):
            v = getattr(self, name)
            if v is not None and not 0 < v <= 1:
                raise ValidationError(f"{name} must lie in (0, 1]")

    @classmethod
    def from_model(cls, src, ch=None, **extra) -> "Calibration":
        """Calibration implied by a :class:`~spdckit.forward_model.SourceParams`."""
        from .gating import k_t

        si = src.integrals()
        darks = {}
        if ch is not None:
            darks = {"p_dark_a": ch.a.p_dark, "p_dark_b": ch.b.p_dark}
        return cls(si.ratio_i1_over_i2, k_t(src.pulse_gate), **{**darks, **extra})


@dataclass(frozen=True)
class MeasurementRecord:
    gates: int
    counts_a: int
    counts_b: int
    coincidences: int
    label: str = ""
    fluorescence_mw: float | None = None

    def __post_init__(self):
        if self.gates <= 0:
            raise ValidationError("gates must be positive")
        for name in ("counts_a", "counts_b", "coincidences"):
            v = getattr(self, name)
            if not 0 <= v <= self.gates:
                raise ValidationError(f"{name} must lie in [0, gates], got {v!r}")
        if self.coincidences > min(self.counts_a, self.counts_b):
            raise ValidationError("coincidences cannot exceed either singles count")

    @property
    def probabilities(self) -> tuple[float, float, float]:
        n = self.gates
        return self.counts_a / n, self.counts_b / n, self.coincidences / n

    def covariance(self) -> np.ndarray:
        """Covariance of (p_a, p_b, p_c); C is the joint event A and B."""
        pa, pb, pc = self.probabilities
        cov = np.array([
            [pa * (1 - pa), pc - pa * pb, pc * (1 - pa)],
            [pc - pa * pb, pb * (1 - pb), pc * (1 - pb)],
            [pc * (1 - pa), pc * (1 - pb), pc * (1 - pc)],
        ])
        return cov / self.gates


class Quantity(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class PerformanceReport:
    label: str
    p0_i1: Quantity
    x_a: Quantity
    x_b: Quantity
    f_sys: Quantity
    f_spdc: Quantity
    bell_margin: float
    p_tc: float
    p_ac: float
    p_nab: float
    c_f_a: float | None = None
    c_f_b: float | None = None
    p0_i1_max_spdc: float | None = None
    p0_i1_window_sys: tuple[float, float] | None = None
    fluorescence_mw: float | None = None

    def as_dict(self) -> dict:
        out = {"label": self.label}
        for name in ("p0_i1", "x_a", "x_b", "f_sys", "f_spdc"):
            q = getattr(self, name)
            out[name] = q.value
            out[name + "_stderr"] = q.stderr
        out.update(
            bell_margin=self.bell_margin,
            c_f_a=self.c_f_a,
            c_f_b=self.c_f_b,
            p0_i1_max_spdc=self.p0_i1_max_spdc,
            p0_i1_window_sys=list(self.p0_i1_window_sys) if self.p0_i1_window_sys else None,
            p_tc=self.p_tc,
            p_ac=self.p_ac,
            p_nab=self.p_nab,
            fluorescence_mw=self.fluorescence_mw,
        )
        return out


def _point_and_jacobian(p_a, p_b, p_c, cal: Calibration):
    na, nb = cal.p_dark_a, cal.p_dark_b
    r, kt = cal.ratio_i1_over_i2, cal.k_t
    a, b = p_a - na, p_b - nb
    if a <= 0 or b <= 0:
        raise EstimationError(
            f"singles do not exceed dark counts (p_a - P_NA = {a:.3g}, p_b - P_NB = {b:.3g})"
        )
    s = p_a * p_b
    q = a * b
    tau = p_c - s
    if tau <= 0:
        raise NoExcessCoincidencesError(
            f"no excess coincidences: p_c = {p_c:.4g} does not exceed the accidental and "
            f"noise floor {s:.4g}; check the link or the noise level"
        )
    mu = q / (2 * kt * r * tau)
    x_a = r * tau / b
    x_b = r * tau / a
    d_sys = tau + 2 * s
    d_spdc = tau + 2 * q
    f_sys = tau / d_sys
    f_spdc = tau / d_spdc
    point = np.array([mu, x_a, x_b, f_sys, f_spdc])
    # rows: mu, x_a, x_b, f_sys, f_spdc ; columns: d/dp_a, d/dp_b, d/dp_c
    jac = np.array([
        [mu * (1 / a + p_b / tau), mu * (1 / b + p_a / tau), -mu / tau],
        [-r * p_b / b, -r * (p_a / b + tau / b**2), r / b],
        [-r * (p_b / a + tau / a**2), -r * p_a / a, r / a],
        [-2 * p_b * (s + tau) / d_sys**2, -2 * p_a * (s + tau) / d_sys**2, 2 * s / d_sys**2],
        [-2 * (q * p_b + tau * b) / d_spdc**2, -2 * (q * p_a + tau * a) / d_spdc**2,
         2 * q / d_spdc**2],
    ])
    return point, jac, (tau, q, s - q)


def figures_of_merit(p_a: float, p_b: float, p_c: float, cal: Calibration) -> dict:
    """Point estimates from probabilities (no uncertainties)."""
    point, _, (p_tc, p_ac, p_nab) = _point_and_jacobian(p_a, p_b, p_c, cal)
    names = ("p0_i1", "x_a", "x_b", "f_sys", "f_spdc")
    out = dict(zip(names, map(float, point)))
    out.update(p_tc=p_tc, p_ac=p_ac, p_nab=p_nab)
    return out


def estimate(m: MeasurementRecord, cal: Calibration) -> PerformanceReport:
    """Figures of merit with first-order standard errors for one record."""
    p_a, p_b, p_c = m.probabilities
    point, jac, (p_tc, p_ac, p_nab) = _point_and_jacobian(p_a, p_b, p_c, cal)
    cov = jac @ m.covariance() @ jac.T
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    q = [Quantity(float(v), float(e)) for v, e in zip(point, err)]

    c_f_a = c_f_b = None
    if cal.r_tau_a is not None and cal.eta_a is not None:
        c_f_a = decompose_losses(q[1].value, cal.r_tau_a, cal.eta_a)
    if cal.r_tau_b is not None and cal.eta_b is not None:
        c_f_b = decompose_losses(q[2].value, cal.r_tau_b, cal.eta_b)

    return PerformanceReport(
        label=m.label,
        p0_i1=q[0],
        x_a=q[1],
        x_b=q[2],
        f_sys=q[3],
        f_spdc=q[4],
        bell_margin=q[3].value - BELL_LIMIT,
        p_tc=p_tc,
        p_ac=p_ac,
        p_nab=p_nab,
        c_f_a=c_f_a,
        c_f_b=c_f_b,
        p0_i1_max_spdc=bell_threshold(cal),
        p0_i1_window_sys=system_bell_window(cal, q[1].value, q[2].value),
        fluorescence_mw=m.fluorescence_mw,
    )


def decompose_losses(x_i: float, r_tau_i: float, eta_i: float) -> float:
    """Fibre coupling efficiency ``x / (r_tau * eta)``; warns when above 1."""
    if not (0 < r_tau_i <= 1 and 0 < eta_i <= 1):
        raise ValidationError("r_tau and eta must lie in (0, 1]")
    c_f = x_i / (r_tau_i * eta_i)
    if c_f > 1:
        warnings.warn(f"coupling efficiency {c_f:.3g} > 1: calibration is inconsistent",
                      ApproximationWarning, stacklevel=2)
    return c_f


def fidelity_from_rate(p0_i1: float, cal: Calibration) -> float:
    """Intrinsic source fidelity predicted from the in-band pair probability."""
    if p0_i1 < 0:
        raise ValidationError("p0_i1 must be >= 0")
    return 1.0 / (1.0 + 4.0 * p0_i1 * cal.k_t * cal.ratio_i1_over_i2)


def bell_threshold(cal: Calibration) -> float:
    """Largest p0*I1 keeping the intrinsic fidelity at or above 1/sqrt(2)."""
    return (math.sqrt(2) - 1) / (4 * cal.k_t * cal.ratio_i1_over_i2)


def system_bell_window(cal: Calibration, x_a: float, x_b: float) -> tuple[float, float] | None:
    """Range of p0*I1 for which the noise-inclusive fidelity reaches 1/sqrt(2).

    Dark counts push the lower end up from zero; multi-pair emission caps
    the upper end. Returns None when no pair probability reaches the limit.
    """
    kt, r = cal.k_t, cal.ratio_i1_over_i2
    na, nb = cal.p_dark_a, cal.p_dark_b
    c = math.sqrt(2) - 1
    qa = 8 * kt * kt * x_a * x_b
    qb = 4 * kt * (x_a * nb + x_b * na) - 2 * c * kt * x_a * x_b / r
    qc = 2 * na * nb
    # qa, qc >= 0, so both roots are <= 0 unless qb < 0
    if qa <= 0 or qb >= 0:
        return None
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        return None
    root = math.sqrt(disc)
    hi = (-qb + root) / (2 * qa)
    lo = 2 * qc / (-qb + root) if qc > 0 else 0.0
    if hi <= 0:
        return None
    return (max(lo, 0.0), hi)


def max_system_fidelity(cal: Calibration, x_a: float, x_b: float) -> tuple[float, float]:
    """(p0*I1, F_sys) at the optimum balancing dark-count and multi-pair noise."""
    kt, r = cal.k_t, cal.ratio_i1_over_i2
    na, nb = cal.p_dark_a, cal.p_dark_b
    mu = math.sqrt(na * nb / (4 * kt * kt * x_a * x_b))
    if mu == 0:
        return 0.0, 1.0
    q = r * (2 * kt * mu + nb / x_b + na / x_a + na * nb / (2 * mu * x_a * x_b * kt))
    return mu, 1.0 / (1.0 + 2.0 * q)


def cw_probability(rate_hz: float, dead_time_ns: float) -> float:
    """Approximate per-window probability for a continuous-wave source.

    Multiplies a measured rate by the detector dead time, which then plays
    the role of the inverse repetition rate. Heuristic only: there is no
    quantitative CW theory behind it, so nothing in the toolkit calls it
    implicitly.
    """
    if rate_hz < 0 or dead_time_ns <= 0:
        raise ValidationError("rate must be >= 0 and dead time > 0")
    return rate_hz * dead_time_ns * 1e-9
