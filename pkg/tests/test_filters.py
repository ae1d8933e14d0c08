import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdckit import filters as flt
from spdckit.errors import QuadratureError, ValidationError

# ---- independent oracles -------------------------------------------------

def trapezoid_ratio(plateau, base):
    # I1 = (a+b)/2 and I2max = int F^2 = (2a+b)/3 for a linear trapezoid
    return 3 * (plateau + base) / (2 * (2 * plateau + base))


def grid_i2(spec, detuning, lo, hi, h):
    """Riemann sum of (F*F)(2d) on a grid containing 2d; exact at the ends for finite support."""
    n = int(round((hi - lo) / h))
    u = lo + h * np.arange(n + 1)
    f = spec.transmission(u)
    g = spec.transmission(2 * detuning - u)
    return h * float(np.dot(f, g)), h * float(f.sum())


ANALYTIC = [
    (flt.Rectangular(100.0), 1.0),
    (flt.Triangular(100.0), 1.5),
    (flt.Gaussian(60.0), math.sqrt(2)),
    (flt.Trapezoid(30.0, 90.0), trapezoid_ratio(30.0, 90.0)),
]


# ---- transmission --------------------------------------------------------

def test_rectangular_examples():
    f = flt.Rectangular(100.0)
    assert f.transmission(0.0) == 1.0
    assert f.transmission(50.0) == 1.0
    assert f.transmission(60.0) == 0.0
    assert isinstance(f.transmission(1.0), float)
    np.testing.assert_array_equal(f.transmission(np.array([-51.0, 0.0, 51.0])), [0, 1, 0])


def test_fabry_perot_airy_values():
    fp = flt.FabryPerot(50.0, 31.5)
    assert fp.transmission(0.0) == pytest.approx(1.0)
    assert fp.transmission(50.0) == pytest.approx(1.0)
    expected = 1 / (1 + (2 * 31.5 / math.pi) ** 2)
    assert fp.transmission(25.0) == pytest.approx(expected, rel=1e-12)
    assert fp.support() is None


def test_cascade_is_product():
    a, b = flt.Trapezoid(20.0, 80.0), flt.FabryPerot(50.0, 10.0)
    u = np.linspace(-60, 60, 97)
    np.testing.assert_allclose(flt.Cascade((a, b)).transmission(u),
                               a.transmission(u) * b.transmission(u), rtol=0, atol=0)


def test_tabulated_interpolates_and_vanishes_outside():
    t = flt.Tabulated((-1.0, 0.0, 1.0), (0.0, 1.0, 0.0))
    assert t.transmission(0.5) == pytest.approx(0.5)
    assert t.transmission(2.0) == 0.0
    assert t.is_even
    assert not flt.Tabulated((-1.0, 0.0, 2.0), (0.0, 1.0, 0.0)).is_even


@pytest.mark.parametrize("bad", [
    lambda: flt.Rectangular(0.0),
    lambda: flt.Triangular(-1.0),
    lambda: flt.Gaussian(float("nan")),
    lambda: flt.Trapezoid(10.0, 10.0),
    lambda: flt.Trapezoid(-1.0, 10.0),
    lambda: flt.FabryPerot(50.0, 0.0),
    lambda: flt.Tabulated((0.0, 0.0), (1.0, 1.0)),
    lambda: flt.Tabulated((0.0, 1.0), (1.0, 1.5)),
    lambda: flt.Tabulated((0.0,), (1.0,)),
])
def test_invalid_shapes_rejected(bad):
    with pytest.raises(ValidationError):
        bad()


def test_tabulated_from_csv(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("offset_ghz,transmission\n-50,0\n0,1\n50,0\n")
    t = flt.Tabulated.from_csv(p)
    si = flt.spectral_integrals(t)
    assert si.ratio_i1_over_i2max == pytest.approx(1.5, rel=1e-9)
    p.write_text("offset_ghz,transmission\n-50,0\nzero,1\n")
    with pytest.raises(ValidationError):
        flt.Tabulated.from_csv(p)


# ---- integrals against closed forms -------------------------------------

@pytest.mark.parametrize("spec,ratio", ANALYTIC, ids=lambda x: getattr(x, "kind", ""))
def test_ratio_matches_closed_form(spec, ratio):
    si = flt.spectral_integrals(spec)
    assert si.ratio_i1_over_i2max == pytest.approx(ratio, rel=1e-8)
    assert si.achieved_error <= 3 * si.quadrature_abs_tol * si.i1


@pytest.mark.parametrize("spec,ratio", ANALYTIC, ids=lambda x: getattr(x, "kind", ""))
@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_ratio_is_scale_invariant(spec, ratio, lam):
    widths = {f.name: lam * getattr(spec, f.name) for f in dataclasses.fields(spec)
              if f.name != "center_frequency"}
    scaled = type(spec)(**widths)
    si = flt.spectral_integrals(scaled)
    assert si.ratio_i1_over_i2max == pytest.approx(ratio, rel=1e-8)
    assert si.i1 == pytest.approx(lam * flt.spectral_integrals(spec).i1, rel=1e-8)


def test_rectangle_detuned_quarter_width():
    si = flt.spectral_integrals(flt.Rectangular(100.0), detuning=25.0)
    assert si.i2 / si.i2_max == pytest.approx(0.5, abs=1e-9)
    assert si.ratio_i1_over_i2 == pytest.approx(2.0, rel=1e-9)


def test_fully_detuned_ratio_is_infinite():
    si = flt.spectral_integrals(flt.Rectangular(100.0), detuning=60.0)
    assert si.i2 == 0.0
    assert math.isinf(si.ratio_i1_over_i2)


@pytest.mark.parametrize("name,spec", flt.builtin_cases())
def test_i2_bounded_by_i1(name, spec):
    band = (-60.0, 60.0) if spec.support() is None else None
    si = flt.spectral_integrals(spec, band=band)
    for d in np.linspace(-40, 40, 9):
        i2 = flt.spectral_integrals(spec, detuning=float(d), band=band).i2
        assert i2 <= si.i2_max * (1 + 1e-9)
    assert si.i2_max <= si.i1 * (1 + 1e-9)


# ---- quadrature against a grid convolution ------------------------------

@pytest.mark.parametrize("name,spec,lo,hi,h", [
    ("gaussian", flt.Gaussian(30.0), -300.0, 300.0, 0.01),
    ("triangle", flt.Triangular(40.0), -40.0, 40.0, 0.002),
    ("dwdm", flt.default_dwdm(), -50.0, 50.0, 0.002),
    ("dwdm+fp", flt.dwdm_fabry_perot(), -50.0, 50.0, 0.002),
])
@pytest.mark.parametrize("d", [0.0, 5.0, 12.5])
def test_quadrature_matches_grid_convolution(name, spec, lo, hi, h, d):
    si = flt.spectral_integrals(spec, detuning=d, rel_tol=1e-7)
    i2_grid, i1_grid = grid_i2(spec, d, lo, hi, h)
    tol = 1e-6 * si.i1
    assert abs(si.i1 - i1_grid) <= tol
    assert abs(si.i2 - i2_grid) <= tol


def test_quadrature_failure_reports_achieved_error():
    with pytest.raises(QuadratureError) as info:
        flt.spectral_integrals(flt.Gaussian(1.0), rel_tol=1e-17)
    assert info.value.achieved > 0


def test_unbounded_filter_needs_band():
    fp = flt.FabryPerot(50.0, 31.5)
    with pytest.raises(ValidationError):
        flt.spectral_integrals(fp)
    with pytest.raises(ValidationError):
        flt.spectral_integrals(flt.Cascade((fp,)))
    si = flt.spectral_integrals(fp, band=(-25.0, 25.0))
    assert si.i1 > 0


def test_nonpositive_tolerance_rejected():
    with pytest.raises(ValidationError):
        flt.spectral_integrals(flt.Rectangular(1.0), rel_tol=0.0)


# ---- cascades ------------------------------------------------------------

def test_single_member_cascade_equals_member():
    t = flt.default_dwdm()
    assert flt.spectral_integrals(flt.Cascade((t,))).ratio_i1_over_i2max == pytest.approx(
        flt.spectral_integrals(t).ratio_i1_over_i2max, rel=1e-10)


def test_cascade_order_independent():
    a, b = flt.default_dwdm(), flt.FabryPerot(50.0, 31.5)
    r1 = flt.spectral_integrals(flt.Cascade((a, b))).ratio_i1_over_i2max
    r2 = flt.spectral_integrals(flt.Cascade((b, a))).ratio_i1_over_i2max
    assert r1 == pytest.approx(r2, rel=1e-10)


def test_cascade_support_is_intersection():
    c = flt.Cascade((flt.Rectangular(100.0), flt.Triangular(20.0)))
    assert c.support() == (-20.0, 20.0)


# ---- envelopes -----------------------------------------------------------

def test_wide_envelope_approaches_unity():
    spec = flt.default_dwdm()
    bare = flt.spectral_integrals(spec)
    wide = flt.spectral_integrals(spec, flt.GaussianEnvelope(1e7))
    assert wide.ratio_i1_over_i2max == pytest.approx(bare.ratio_i1_over_i2max, rel=1e-6)


def test_narrow_envelope_raises_ratio_towards_gaussian():
    spec = flt.Rectangular(100.0)
    si = flt.spectral_integrals(spec, flt.GaussianEnvelope(5.0))
    assert si.ratio_i1_over_i2max == pytest.approx(math.sqrt(2), rel=1e-6)


def test_absolute_envelope_needs_filter_center():
    env = flt.GaussianEnvelope(50.0, center=193.1)
    with pytest.raises(ValidationError):
        flt.spectral_integrals(flt.Rectangular(100.0), env)
    si = flt.spectral_integrals(flt.Rectangular(100.0, center_frequency=193.1), env)
    assert si.i1 > 0


def test_tabulated_envelope():
    env = flt.TabulatedEnvelope((-1000.0, 1000.0), (1.0, 1.0))
    si = flt.spectral_integrals(flt.Triangular(10.0), env)
    assert si.ratio_i1_over_i2max == pytest.approx(1.5, rel=1e-9)


# ---- detuning sweep ------------------------------------------------------

def test_sweep_rectangle_is_triangle():
    w = 100.0
    sw = flt.detuning_sweep(flt.Rectangular(w), d_min=-60, d_max=60, n_points=121)
    for p in sw:
        assert p.i2_normalized == pytest.approx(max(0.0, 1 - 2 * abs(p.detuning) / w), abs=1e-6)


@pytest.mark.parametrize("name,spec", flt.builtin_cases())
def test_sweep_symmetric_with_peak_at_zero(name, spec):
    sw = flt.detuning_sweep(spec, d_min=-40, d_max=40, n_points=81)
    y = np.array([p.i2_normalized for p in sw])
    np.testing.assert_allclose(y, y[::-1], atol=1e-9)
    assert np.argmax(y) == 40
    assert y[40] == pytest.approx(1.0)


def test_fabry_perot_secondary_maxima_near_half_fsr():
    sw = flt.detuning_sweep(flt.dwdm_fabry_perot(), d_min=-50, d_max=50, n_points=1001)
    y = np.array([p.i2_normalized for p in sw])
    d = np.array([p.detuning for p in sw])
    peaks = [d[i] for i in range(1, len(y) - 1) if y[i] > y[i - 1] and y[i] > y[i + 1]]
    secondary = sorted(p for p in peaks if 10 < abs(p) < 35)
    assert len(secondary) == 2
    # the trapezoid slope pulls the peaks slightly inside FSR/2 = 25
    assert all(20 < abs(p) <= 25 for p in secondary)
    assert secondary[0] == pytest.approx(-secondary[1], abs=1e-9)


def test_sweep_validation():
    with pytest.raises(ValidationError):
        flt.detuning_sweep(flt.Rectangular(1.0), n_points=1)
    with pytest.raises(ValidationError):
        flt.detuning_sweep(flt.Rectangular(1.0), d_min=1, d_max=0)


# ---- trapezoid calibration and FWHM --------------------------------------

def test_calibrate_default_dwdm():
    t = flt.default_dwdm()
    # oracle: solve 3(a+b)/(2(2a+b)) = 1.14 with (a+b)/2 = 73
    s = 146.0
    a = (3 * s / (2 * 1.14) - s)
    assert t.plateau_width == pytest.approx(a, rel=1e-8)
    assert t.plateau_width == pytest.approx(46.1, abs=0.01)
    assert t.base_width == pytest.approx(99.9, abs=0.01)
    assert flt.fwhm(t) == pytest.approx(73.0, rel=1e-9)


@given(st.floats(1.01, 1.5), st.floats(1.0, 500.0))
def test_calibrate_round_trip(ratio, width):
    t = flt.calibrate_trapezoid(width, ratio)
    assert trapezoid_ratio(t.plateau_width, t.base_width) == pytest.approx(ratio, rel=1e-8)
    assert (t.plateau_width + t.base_width) / 2 == pytest.approx(width, rel=1e-12)


def test_calibrate_limits():
    assert flt.calibrate_trapezoid(50.0, 1.5).plateau_width == pytest.approx(0.0, abs=1e-9)
    near_rect = flt.calibrate_trapezoid(50.0, 1.0001)
    assert near_rect.plateau_width / near_rect.base_width > 0.999
    for bad in (1.0, 1.6, 0.5):
        with pytest.raises(ValidationError):
            flt.calibrate_trapezoid(50.0, bad)


def test_fwhm_of_builtins():
    widths = {name: flt.fwhm(spec) for name, spec in flt.builtin_cases()}
    for name in ("Rectangular", "Triangular", "Gaussian"):
        assert widths[name] == pytest.approx(100.0, rel=1e-9)
    assert widths["DWDM"] == pytest.approx(73.0, rel=1e-9)
    # the FP tooth sets the cascade bandwidth: FSR / finesse
    assert widths["DWDM + FP"] == pytest.approx(50 / 31.5, rel=0.01)


@given(st.sampled_from(ANALYTIC), st.floats(-200.0, 200.0))
def test_filters_are_even(case, u):
    spec, _ = case
    assert spec.is_even
    assert spec.transmission(u) == pytest.approx(spec.transmission(-u), abs=1e-15)
