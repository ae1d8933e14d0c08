"""Acceptance criteria 1-9.

Each test records one PASS/FAIL line, printed inline (``-s``) and repeated in
the terminal summary. Run with ``pytest tests/test_acceptance.py -s``.
"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdckit import filters as flt
from spdckit import pair_statistics as ps
from spdckit.cli import cmd_filters
from spdckit.estimator import (
    BELL_LIMIT,
    Calibration,
    bell_threshold,
    decompose_losses,
    estimate,
    figures_of_merit,
    fidelity_from_rate,
    max_system_fidelity,
    system_bell_window,
)
from spdckit.formats import read_measurements, records_to_csv
from spdckit.forward_model import (
    ChannelParams,
    SourceParams,
    count_probabilities,
    predict,
    predict_poisson,
)
from spdckit.gating import PulseGate, k_t
from spdckit.monte_carlo import SimConfig, simulate

GATE = PulseGate.from_fwhm(20.3, 20.0)
DARK_A, DARK_B = 1.9e-4, 1.5e-4
X_A, X_B = 0.0178, 0.0170


def test_criterion_1_filter_table(acceptance_report):
    expected = {"Rectangular": 1.00, "Triangular": 1.50, "Gaussian": 1.41, "DWDM": 1.14,
                "DWDM + FP": 2.09}
    t0 = time.perf_counter()
    rows = cmd_filters(None)
    elapsed = time.perf_counter() - t0
    got = {r["filter"]: r["ratio_i1_over_i2max"] for r in rows}
    misses = {k: got[k] for k, v in expected.items() if abs(got[k] - v) > 0.02}
    detail = ", ".join(f"{k} {got[k]:.3f} (want {v:.2f})" for k, v in expected.items())
    ok = not misses and elapsed < 5.0
    acceptance_report("1 filter table", ok, f"{detail}; {elapsed:.2f} s")
    assert elapsed < 5.0
    assert not misses, f"outside +-0.02: {misses}"


def test_criterion_2_gate_factor(acceptance_report):
    kt = k_t(GATE)
    ok = abs(kt - 0.75) <= 0.01
    acceptance_report("2 gate factor", ok, f"K_T = {kt:.4f} (want 0.75 +- 0.01)")
    assert ok


def test_criterion_3_loss_decomposition(acceptance_report):
    product = 0.301 * 0.74 * 0.080
    c_f = decompose_losses(0.0178, 0.301, 0.080)
    ok = abs(product - 0.0178) < 5e-5 and abs(c_f - 0.74) <= 0.01
    acceptance_report("3 loss decomposition", ok,
                      f"0.301*0.74*0.080 = {product:.5f}, C_F = {c_f:.4f} (want 0.74 +- 0.01)")
    assert ok


def test_criterion_4_bell_thresholds(acceptance_report):
    t1 = bell_threshold(Calibration(1.14, 0.75, DARK_A, DARK_B))
    t2 = bell_threshold(Calibration(2.09, 0.75, DARK_A, DARK_B))
    w1 = system_bell_window(Calibration(1.14, 0.75, DARK_A, DARK_B), X_A, X_B)
    w2 = system_bell_window(Calibration(2.09, 0.75, DARK_A, DARK_B), X_A, X_B)
    ok = abs(t1 - 0.121) <= 0.005 and abs(t2 - 0.066) <= 0.005
    acceptance_report(
        "4 Bell thresholds", ok,
        f"F_SPDC limit {t1:.4f} / {t2:.4f} (want 0.121 / 0.066 +- 0.005); "
        f"noise-inclusive F_sys limit {w1[1]:.4f} / {w2[1]:.4f}")
    assert ok


def test_criterion_5_combinatorics(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst_closed = worst_norm = 0.0
    for x_a, x_b in rng.uniform(0.0, 0.5, size=(1000, 2)):
        ch = ps.SplitChannels(float(x_a), float(x_b))
        a2 = sum(ps.splitting_pmf(1, ch, a, b) for a in (1, 2) for b in range(0, 3 - a))
        a7 = sum(ps.splitting_pmf(2, ch, a, b) for a in range(1, 4) for b in range(1, 5 - a))
        worst_closed = max(worst_closed,
                           abs(ps.p_at_least_one(ch) / a2 - 1),
                           abs(ps.p_coincidence_two_pairs(ch) / a7 - 1))
        for n in range(6):
            total = sum(ps.splitting_pmf(n, ch, a, b)
                        for a in range(2 * n + 1) for b in range(2 * n + 1 - a))
            worst_norm = max(worst_norm, abs(total - 1))
    elapsed = time.perf_counter() - t0
    ok = worst_closed <= 1e-12 and worst_norm <= 1e-12 and elapsed < 10
    acceptance_report("5 pair combinatorics", ok,
                      f"closed-form rel err {worst_closed:.1e}, normalisation err "
                      f"{worst_norm:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_6_analytic_round_trip(acceptance_report):
    src = SourceParams(1.0, flt.default_dwdm(), GATE)
    si = src.integrals()
    cal = Calibration.from_model(src, p_dark_a=DARK_A, p_dark_b=DARK_B)
    worst = 0.0
    for mu in np.geomspace(1e-3, 0.1, 10):
        for xa in np.geomspace(1e-3, 0.05, 10):
            for xb in np.geomspace(1e-3, 0.05, 10):
                ch = ChannelParams.from_transmissions(xa, xb, DARK_A, DARK_B)
                cp = predict(SourceParams(mu / si.i1, src.filter, GATE), ch, si)
                est = figures_of_merit(cp.p_a, cp.p_b, cp.p_c, cal)
                worst = max(worst, abs(est["p0_i1"] / mu - 1), abs(est["x_a"] / xa - 1),
                            abs(est["x_b"] / xb - 1))
    ok = worst <= 1e-12
    acceptance_report("6 analytic round trip", ok, f"max rel err {worst:.2e} over 1000 points")
    assert ok


def test_criterion_7_monte_carlo_closure(acceptance_report):
    t0 = time.perf_counter()
    spec = flt.default_dwdm()
    si = flt.spectral_integrals(spec)
    src = SourceParams(0.05 / si.i1, spec, GATE)
    ch = ChannelParams.from_transmissions(X_A, X_B, DARK_A, DARK_B)
    counts = simulate(SimConfig(src, ch, 100_000_000, seed=20240607))
    trunc, exact = predict(src, ch, si), predict_poisson(src, ch, si)

    checks, notes = [], []
    for name, se in (("p_a", counts.se_a), ("p_b", counts.se_b), ("p_c", counts.se_c)):
        emp, t, p = getattr(counts, name), getattr(trunc, name), getattr(exact, name)
        bias = abs(p - t)
        checks.append(abs(emp - t) <= 3 * se + bias)
        checks.append(abs(emp - p) <= 3 * se)
        notes.append(f"{name} {(emp - t) / se:+.1f} sigma vs truncated "
                     f"(bias {bias / t:.1%}), {(emp - p) / se:+.1f} sigma vs Poisson")

    # the estimator sees the simulated data only through the measurement CSV
    [record] = read_measurements(records_to_csv([counts.to_record("mc")]))
    cal = Calibration.from_model(src, ch)
    rep = estimate(record, cal)
    ideal = figures_of_merit(exact.p_a, exact.p_b, exact.p_c, cal)
    for key, truth in (("p0_i1", 0.05), ("x_a", X_A), ("x_b", X_B)):
        q = getattr(rep, key)
        bias = abs(ideal[key] - truth)
        checks.append(abs(q.value - truth) <= 3 * q.stderr + bias)
        notes.append(f"{key} {q.value:.5g} +- {q.stderr:.2g} (truth {truth}, bias {bias:.2g})")
    elapsed = time.perf_counter() - t0
    checks.append(elapsed < 300)
    ok = all(checks)
    acceptance_report("7 Monte Carlo closure", ok, "; ".join(notes) + f"; {elapsed:.1f} s")
    assert ok


def _fidelity_sweep(mu_values, ratio, kt, xa, xb, na, nb):
    cal = Calibration(ratio, kt, na, nb)
    out = []
    for mu in mu_values:
        cp = count_probabilities(mu, ratio, kt, xa, xb, na, nb)
        f = figures_of_merit(cp.p_a, cp.p_b, cp.p_c, cal)
        out.append((f["f_sys"], f["f_spdc"]))
    return np.array(out)


def _trend_holds(fids):
    f_sys, f_spdc = fids[:, 0], fids[:, 1]
    gap = f_spdc - f_sys
    return bool(np.all(f_spdc >= f_sys) and np.all(np.diff(f_sys) < 0)
                and np.all(np.diff(f_spdc) < 0) and np.all(np.diff(gap) < 0))


def test_criterion_8_fidelity_trend(acceptance_report):
    t0 = time.perf_counter()
    mus = np.linspace(0.01, 0.15, 57)
    main = _fidelity_sweep(mus, 1.14, 0.75, X_A, X_B, DARK_A, DARK_B)
    main_ok = _trend_holds(main)
    mu_star, _ = max_system_fidelity(Calibration(1.14, 0.75, DARK_A, DARK_B), X_A, X_B)
    failures = []

    # above the noise optimum F_sys falls with p0; below it dark counts dominate
    @settings(max_examples=200, deadline=None)
    @given(st.floats(1.0, 2.5), st.floats(0.3, 1.0), st.floats(1e-3, 0.05),
           st.floats(1e-3, 0.05), st.floats(1e-6, 5e-4), st.floats(1e-6, 5e-4))
    def prop(ratio, kt, xa, xb, na, nb):
        cal = Calibration(ratio, kt, na, nb)
        lo = max_system_fidelity(cal, xa, xb)[0] * 1.01
        if lo >= 0.15:
            return
        fids = _fidelity_sweep(np.linspace(lo, 0.15, 25), ratio, kt, xa, xb, na, nb)
        if not _trend_holds(fids):
            failures.append((ratio, kt, xa, xb, na, nb))
        assert _trend_holds(fids)

    try:
        prop()
    except AssertionError:
        pass
    # without dark counts both fidelities coincide
    quiet = _fidelity_sweep(mus, 1.14, 0.75, X_A, X_B, 0.0, 0.0)
    quiet_ok = bool(np.allclose(quiet[:, 0], quiet[:, 1], rtol=0, atol=1e-12))
    elapsed = time.perf_counter() - t0
    ok = main_ok and quiet_ok and not failures and elapsed < 30
    acceptance_report(
        "8 fidelity ordering and trend", ok,
        f"p0I1 in [0.01, 0.15]: F_sys {main[0, 0]:.3f} -> {main[-1, 0]:.3f}, F_SPDC "
        f"{main[0, 1]:.3f} -> {main[-1, 1]:.3f}, gap {main[0, 1] - main[0, 0]:.3f} -> "
        f"{main[-1, 1] - main[-1, 0]:.3f}; F_sys peaks at p0I1 = {mu_star:.4f}; "
        f"200 random noisy configurations {'ok' if not failures else failures[-1]}; "
        f"noise-free gap zero {quiet_ok}; {elapsed:.1f} s")
    assert ok


def test_criterion_9_detuning(acceptance_report):
    worst_sym, peak_ok = 0.0, True
    for name, spec in flt.builtin_cases():
        sw = flt.detuning_sweep(spec, d_min=-60, d_max=60, n_points=121)
        y = np.array([p.i2_normalized for p in sw])
        worst_sym = max(worst_sym, float(np.max(np.abs(y - y[::-1]))))
        peak_ok &= int(np.argmax(y)) == 60 and bool(np.all(y <= y[60] * (1 + 1e-12)))
    w = 100.0
    rect = flt.detuning_sweep(flt.Rectangular(w), d_min=-60, d_max=60, n_points=241)
    tri_err = max(abs(p.i2_normalized - max(0.0, 1 - 2 * abs(p.detuning) / w)) for p in rect)
    ok = worst_sym <= 1e-9 and peak_ok and tri_err <= 1e-6
    acceptance_report("9 detuning", ok,
                      f"asymmetry {worst_sym:.1e}, peak at d=0 {peak_ok}, rectangle vs "
                      f"triangle {tri_err:.1e}")
    assert ok


def test_bell_limit_constant():
    assert BELL_LIMIT == pytest.approx(1 / math.sqrt(2))
    assert fidelity_from_rate(0.0, Calibration(1.14, 0.75)) == 1.0
