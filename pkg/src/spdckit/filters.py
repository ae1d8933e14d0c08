"""Spectral filter shapes and the singles / coincidence filtering integrals.

All offsets are in GHz relative to the filter centre frequency. For a filter
transmission ``F`` and spectral envelope ``G`` the two integrals are::

    i1    = integral F(u) G(u) du
    i2(d) = integral F(u) G(u) F(2d - u) G(2d - u) du

with the detuning ``d = nu_p / 2 - nu_F`` (degeneracy frequency minus filter
centre). ``i2`` is the autoconvolution of the envelope-weighted transmission
evaluated at ``2 d``; keep the factor of two in mind when reading sweeps.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .errors import QuadratureError, ValidationError

# Gaussian shapes are treated as zero beyond exp(-x^2) < 1e-30.
GAUSSIAN_TAIL = math.sqrt(math.log(1e30))
DEFAULT_REL_TOL = 1e-9

DEFAULT_DWDM_FWHM = 73.0
DEFAULT_DWDM_RATIO = 1.14
DEFAULT_FP_FSR = 50.0
DEFAULT_FP_FINESSE = 31.5


def _out(values):
    arr = np.asarray(values, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


# --------------------------------------------------------------------------
# filter shapes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterSpec:
    """Base class for filter transmission shapes.

    Subclasses implement ``transmission`` (vectorised over numpy arrays),
    ``support`` and ``breakpoints``. ``center_frequency`` (THz) is optional
    and only needed to place an absolutely-positioned spectral envelope.
    """

    center_frequency: float | None = field(default=None, kw_only=True)

    def transmission(self, offset):
        raise NotImplementedError

    def support(self) -> tuple[float, float] | None:
        """Finite (effective) support ``(lo, hi)`` or None when unbounded."""
        raise NotImplementedError

    def breakpoints(self, lo: float, hi: float) -> list[float]:
        """Kinks, edges and sharp peaks inside ``[lo, hi]`` for quadrature."""
        return []

    @property
    def is_even(self) -> bool:
        return True

    @property
    def kind(self) -> str:
        return type(self).__name__


def _require_positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class Rectangular(FilterSpec):
    full_width: float

    def __post_init__(self):
        _require_positive("full_width", self.full_width)

    def transmission(self, offset):
        u = np.abs(np.asarray(offset, dtype=float))
        return _out(np.where(u <= self.full_width / 2, 1.0, 0.0))

    def support(self):
        return (-self.full_width / 2, self.full_width / 2)

    def breakpoints(self, lo, hi):
        return [-self.full_width / 2, self.full_width / 2]


@dataclass(frozen=True)
class Triangular(FilterSpec):
    base_half_width: float

    def __post_init__(self):
        _require_positive("base_half_width", self.base_half_width)

    def transmission(self, offset):
        u = np.abs(np.asarray(offset, dtype=float))
        return _out(np.clip(1.0 - u / self.base_half_width, 0.0, 1.0))

    def support(self):
        return (-self.base_half_width, self.base_half_width)

    def breakpoints(self, lo, hi):
        return [-self.base_half_width, 0.0, self.base_half_width]


@dataclass(frozen=True)
class Gaussian(FilterSpec):
    """exp(-u^2 / w^2) with ``w`` the half width at 1/e."""

    one_over_e_half_width: float

    def __post_init__(self):
        _require_positive("one_over_e_half_width", self.one_over_e_half_width)

    def transmission(self, offset):
        u = np.asarray(offset, dtype=float) / self.one_over_e_half_width
        return _out(np.exp(-u * u))

    def support(self):
        half = GAUSSIAN_TAIL * self.one_over_e_half_width
        return (-half, half)

    def breakpoints(self, lo, hi):
        return [0.0]


@dataclass(frozen=True)
class Trapezoid(FilterSpec):
    """Flat top of full width ``plateau_width`` with linear skirts to ``base_width``."""

    plateau_width: float
    base_width: float

    def __post_init__(self):
        _require_positive("base_width", self.base_width)
        if not (0 <= self.plateau_width < self.base_width):
            raise ValidationError(
                f"trapezoid needs 0 <= plateau_width < base_width, "
                f"got {self.plateau_width!r}, {self.base_width!r}"
            )

    def transmission(self, offset):
        u = np.abs(np.asarray(offset, dtype=float))
        skirt = (self.base_width - self.plateau_width) / 2
        return _out(np.clip((self.base_width / 2 - u) / skirt, 0.0, 1.0))

    def support(self):
        return (-self.base_width / 2, self.base_width / 2)

    def breakpoints(self, lo, hi):
        a, b = self.plateau_width / 2, self.base_width / 2
        return [-b, -a, a, b] if a > 0 else [-b, 0.0, b]

    @property
    def fwhm(self) -> float:
        return (self.plateau_width + self.base_width) / 2


@dataclass(frozen=True)
class FabryPerot(FilterSpec):
    """Airy transmission of a lossless etalon, peaks at multiples of ``fsr``."""

    fsr: float
    finesse: float

    def __post_init__(self):
        _require_positive("fsr", self.fsr)
        _require_positive("finesse", self.finesse)

    @property
    def coefficient(self) -> float:
        return (2 * self.finesse / math.pi) ** 2

    def transmission(self, offset):
        s = np.sin(math.pi * np.asarray(offset, dtype=float) / self.fsr)
        return _out(1.0 / (1.0 + self.coefficient * s * s))

    def support(self):
        return None

    def breakpoints(self, lo, hi):
        k0, k1 = math.ceil(lo / self.fsr), math.floor(hi / self.fsr)
        return [k * self.fsr for k in range(k0, k1 + 1)]


@dataclass(frozen=True)
class Cascade(FilterSpec):
    """Filters in series: the transmission is the product of the members."""

    members: tuple[FilterSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValidationError("cascade needs at least one member")
        for m in self.members:
            if not isinstance(m, FilterSpec):
                raise ValidationError(f"cascade member {m!r} is not a FilterSpec")

    def transmission(self, offset):
        out = np.ones_like(np.asarray(offset, dtype=float))
        for m in self.members:
            out = out * m.transmission(offset)
        return _out(out)

    def support(self):
        finite = [s for s in (m.support() for m in self.members) if s is not None]
        if not finite:
            return None
        lo = max(s[0] for s in finite)
        hi = min(s[1] for s in finite)
        return (lo, hi) if lo < hi else (0.0, 0.0)

    def breakpoints(self, lo, hi):
        pts = []
        for m in self.members:
            pts.extend(m.breakpoints(lo, hi))
        return pts

    @property
    def is_even(self):
        return all(m.is_even for m in self.members)


@dataclass(frozen=True)
class Tabulated(FilterSpec):
    """Sampled transmission, linearly interpolated and zero outside the table."""

    offsets: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        xs = tuple(float(x) for x in self.offsets)
        ys = tuple(float(y) for y in self.values)
        object.__setattr__(self, "offsets", xs)
        object.__setattr__(self, "values", ys)
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValidationError("tabulated filter needs >= 2 (offset, transmission) pairs")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValidationError("tabulated offsets must be strictly increasing")
        if any(not (0.0 <= y <= 1.0) for y in ys):
            raise ValidationError("tabulated transmissions must lie in [0, 1]")

    @classmethod
    def from_csv(cls, path, **kwargs) -> "Tabulated":
        """Load a two-column ``offset_GHz,transmission`` file (header optional)."""
        xs, ys = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    x, y = float(row[0]), float(row[1])
                except ValueError:
                    if not xs:  # header line
                        continue
                    raise ValidationError(f"{path}: bad row {row!r}") from None
                xs.append(x)
                ys.append(y)
        return cls(tuple(xs), tuple(ys), **kwargs)

    def transmission(self, offset):
        return _out(np.interp(np.asarray(offset, dtype=float), self.offsets, self.values,
                              left=0.0, right=0.0))

    def support(self):
        return (self.offsets[0], self.offsets[-1])

    def breakpoints(self, lo, hi):
        return list(self.offsets)

    @property
    def is_even(self):
        xs = np.asarray(self.offsets)
        if not math.isclose(xs[0], -xs[-1], rel_tol=1e-12, abs_tol=1e-12):
            return False
        mirrored = np.interp(-xs, xs, self.values, left=0.0, right=0.0)
        return bool(np.allclose(mirrored, self.values, rtol=0, atol=1e-12))


def transmission(spec: FilterSpec, offset):
    """Transmission of ``spec`` at ``offset`` GHz from its centre (scalar or array)."""
    return spec.transmission(offset)


# --------------------------------------------------------------------------
# spectral envelope (phase matching)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralEnvelope:
    def bind(self, filter_center: float | None) -> Callable:
        """Return ``g(offset)`` with offsets measured from the filter centre."""
        raise NotImplementedError

    @property
    def is_unity(self) -> bool:
        return False


@dataclass(frozen=True)
class UnityEnvelope(SpectralEnvelope):
    def bind(self, filter_center):
        return lambda u: _out(np.ones_like(np.asarray(u, dtype=float)))

    @property
    def is_unity(self):
        return True


@dataclass(frozen=True)
class GaussianEnvelope(SpectralEnvelope):
    """Gaussian of full width ``fwhm`` (GHz) centred at ``center`` (THz).

    With ``center=None`` the envelope is centred on the filter.
    """

    fwhm: float
    center: float | None = None

    def __post_init__(self):
        _require_positive("fwhm", self.fwhm)

    def bind(self, filter_center):
        shift = 0.0
        if self.center is not None:
            if filter_center is None:
                raise ValidationError(
                    "an absolutely centred envelope needs the filter center_frequency"
                )
            shift = (self.center - filter_center) * 1e3
        k = 4 * math.log(2) / self.fwhm**2

        def g(u):
            x = np.asarray(u, dtype=float) - shift
            return _out(np.exp(-k * x * x))

        return g


@dataclass(frozen=True)
class TabulatedEnvelope(SpectralEnvelope):
    offsets: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        # reuse the table validation
        Tabulated(self.offsets, self.values)
        object.__setattr__(self, "offsets", tuple(map(float, self.offsets)))
        object.__setattr__(self, "values", tuple(map(float, self.values)))

    def bind(self, filter_center):
        xs, ys = self.offsets, self.values
        return lambda u: _out(np.interp(np.asarray(u, dtype=float), xs, ys, left=0.0, right=0.0))


UNITY = UnityEnvelope()


# --------------------------------------------------------------------------
# integrals
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralIntegrals:
    """Filtering integrals at one detuning (GHz).

    ``quadrature_abs_tol`` is the absolute quadrature tolerance expressed as a
    fraction of ``i1``; ``achieved_error`` is the summed error estimate (GHz).
    """

    i1: float
    i2: float
    i2_max: float
    detuning: float
    ratio_i1_over_i2max: float
    quadrature_abs_tol: float
    achieved_error: float = 0.0

    @property
    def ratio_i1_over_i2(self) -> float:
        """I1/I2 at the stored detuning, the ratio the estimator needs."""
        return self.i1 / self.i2 if self.i2 > 0 else math.inf


def _window(spec: FilterSpec, band) -> tuple[float, float]:
    sup = spec.support()
    if band is not None:
        lo, hi = map(float, band)
        if not lo < hi:
            raise ValidationError(f"integration band must satisfy lo < hi, got {band!r}")
        if sup is not None:
            lo, hi = max(lo, sup[0]), min(hi, sup[1])
        return lo, hi
    if sup is None:
        raise ValidationError(
            f"{spec.kind} has unbounded support: cascade it with a finite filter "
            "or pass an explicit integration band"
        )
    return sup


class _Integrator:
    def __init__(self, spec, envelope, band, rel_tol):
        if not rel_tol > 0:
            raise ValidationError("quadrature tolerance must be positive")
        self.lo, self.hi = _window(spec, band)
        self.rel_tol = rel_tol
        self.breaks = sorted(set(spec.breakpoints(self.lo, self.hi)))
        F = spec.transmission
        if envelope.is_unity:
            self.f = F
        else:
            g = envelope.bind(spec.center_frequency)
            self.f = lambda u: F(u) * g(u)
        # first pass fixes the absolute scale for the tolerance
        rough, _ = self._integrate(self.f, self.lo, self.hi, self.breaks, 0.0, 1e-6)
        self.abs_tol = rel_tol * max(abs(rough), np.finfo(float).tiny)
        self.i1, self.i1_err = self._integrate(self.f, self.lo, self.hi, self.breaks,
                                               self.abs_tol, 0.0, check=True)
        if not self.i1 > 0:
            raise ValidationError(f"{spec.kind} transmits nothing inside the window")

    @staticmethod
    def _integrate(func, lo, hi, breaks, abs_tol, rel_tol, check=False):
        if hi <= lo:
            return 0.0, 0.0
        pts = [lo] + [p for p in breaks if lo < p < hi] + [hi]
        seg_tol = abs_tol / (len(pts) - 1)
        total = err = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            for a, b in zip(pts, pts[1:]):
                if b <= a:
                    continue
                val, e = quad(func, a, b, epsabs=seg_tol, epsrel=rel_tol, limit=400)[:2]
                total += val
                err += e
        if check and err > abs_tol:
            raise QuadratureError(
                f"quadrature did not converge: error estimate {err:.3g} exceeds "
                f"tolerance {abs_tol:.3g}",
                achieved=err,
            )
        return total, err

    def i2(self, detuning: float) -> tuple[float, float]:
        s = 2.0 * detuning
        lo, hi = max(self.lo, s - self.hi), min(self.hi, s - self.lo)
        if hi <= lo:
            return 0.0, 0.0
        breaks = sorted(set(self.breaks) | {s - p for p in self.breaks})
        f = self.f
        return self._integrate(lambda u: f(u) * f(s - u), lo, hi, breaks,
                               self.abs_tol, 0.0, check=True)


def spectral_integrals(
    spec: FilterSpec,
    envelope: SpectralEnvelope = UNITY,
    detuning: float = 0.0,
    *,
    band: tuple[float, float] | None = None,
    rel_tol: float = DEFAULT_REL_TOL,
) -> SpectralIntegrals:
    """Compute I1, I2(detuning) and I1/I2max by adaptive quadrature.

    Raises ``ValidationError`` for an unbounded filter without ``band`` and
    ``QuadratureError`` when the error estimate exceeds ``rel_tol * I1``.
    """
    integ = _Integrator(spec, envelope, band, rel_tol)
    i2_max, e0 = integ.i2(0.0)
    i2, e1 = (i2_max, e0) if detuning == 0 else integ.i2(detuning)
    return SpectralIntegrals(
        i1=integ.i1,
        i2=i2,
        i2_max=i2_max,
        detuning=float(detuning),
        ratio_i1_over_i2max=integ.i1 / i2_max,
        quadrature_abs_tol=rel_tol,
        achieved_error=integ.i1_err + e0 + e1,
    )


@dataclass(frozen=True)
class SweepPoint:
    detuning: float
    i2_normalized: float
    transmission: float


def detuning_sweep(
    spec: FilterSpec,
    envelope: SpectralEnvelope = UNITY,
    d_min: float = -50.0,
    d_max: float = 50.0,
    n_points: int = 201,
    *,
    band: tuple[float, float] | None = None,
    rel_tol: float = DEFAULT_REL_TOL,
) -> list[SweepPoint]:
    """I2(d)/I2max and the filter transmission F(d) on a uniform grid."""
    if int(n_points) != n_points or n_points < 2:
        raise ValidationError("n_points must be an integer >= 2")
    if not d_min < d_max:
        raise ValidationError("d_min must be smaller than d_max")
    integ = _Integrator(spec, envelope, band, rel_tol)
    i2_max, _ = integ.i2(0.0)
    grid = np.linspace(d_min, d_max, int(n_points))
    return [
        SweepPoint(float(d), integ.i2(float(d))[0] / i2_max, float(spec.transmission(d)))
        for d in grid
    ]


# --------------------------------------------------------------------------
# shape helpers
# --------------------------------------------------------------------------


def calibrate_trapezoid(target_fwhm: float, target_ratio: float,
                        rel_tol: float = 1e-11) -> Trapezoid:
    """Trapezoid with the given FWHM whose I1/I2max equals ``target_ratio``.

    The FWHM of a linear trapezoid is (plateau + base) / 2, so the plateau is
    the only free parameter; it is found by root bracketing on the
    quadrature ratio. ``target_ratio`` must lie in (1, 1.5]; 1.5 is the
    triangle limit (zero plateau).
    """
    _require_positive("target_fwhm", target_fwhm)
    if not (1.0 < target_ratio <= 1.5):
        raise ValidationError(f"target_ratio must lie in (1, 1.5], got {target_ratio!r}")

    def shape(p):
        return Trapezoid(p, 2 * target_fwhm - p)

    def resid(p):
        return spectral_integrals(shape(p), rel_tol=rel_tol).ratio_i1_over_i2max - target_ratio

    lo, hi = 0.0, target_fwhm * (1 - 1e-9)
    r_lo, r_hi = resid(lo), resid(hi)
    if abs(r_lo) <= 1e-9:
        return shape(lo)
    if r_lo < 0 or r_hi > 0:
        raise ValidationError(f"no trapezoid reaches ratio {target_ratio} at FWHM {target_fwhm}")
    p = brentq(resid, lo, hi, xtol=1e-12 * target_fwhm, rtol=1e-14)
    return shape(p)


def fwhm(spec: FilterSpec, search_limit: float | None = None) -> float:
    """Full width at half maximum of the central passband (even filters)."""
    peak = float(spec.transmission(0.0))
    if peak <= 0:
        raise ValidationError("filter transmits nothing at its centre")
    sup = spec.support()
    if search_limit is None:
        if sup is not None:
            search_limit = max(abs(sup[0]), abs(sup[1]))
        elif isinstance(spec, FabryPerot):
            search_limit = spec.fsr / 2
        else:
            raise ValidationError("unbounded filter: pass search_limit")
    half = peak / 2
    grid = np.linspace(0.0, 1.01 * search_limit, 20001)
    below = np.nonzero(spec.transmission(grid) < half)[0]
    if below.size == 0:
        raise ValidationError("transmission never drops to half maximum")
    i = below[0]
    right = brentq(lambda u: float(spec.transmission(u)) - half, grid[i - 1], grid[i],
                   xtol=1e-12)
    return 2 * right


@lru_cache(maxsize=None)
def default_dwdm() -> Trapezoid:
    """Trapezoidal DWDM model calibrated to 73 GHz FWHM and I1/I2max = 1.14."""
    return calibrate_trapezoid(DEFAULT_DWDM_FWHM, DEFAULT_DWDM_RATIO)


def dwdm_fabry_perot(fsr: float = DEFAULT_FP_FSR, finesse: float = DEFAULT_FP_FINESSE) -> Cascade:
    return Cascade((default_dwdm(), FabryPerot(fsr, finesse)))


def builtin_cases(nominal_width: float = 100.0) -> list[tuple[str, FilterSpec]]:
    """The five reference shapes: rectangle, triangle, Gaussian, DWDM, DWDM+FP.

    The analytic shapes get a FWHM of ``nominal_width``; their I1/I2max does
    not depend on it.
    """
    return [
        ("Rectangular", Rectangular(nominal_width)),
        ("Triangular", Triangular(nominal_width)),
        ("Gaussian", Gaussian(nominal_width / (2 * math.sqrt(math.log(2))))),
        ("DWDM", default_dwdm()),
        ("DWDM + FP", dwdm_fabry_perot()),
    ]

