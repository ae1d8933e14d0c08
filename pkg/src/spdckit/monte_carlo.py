"""Pulse-level Monte Carlo of pair generation, filtering, splitting and gating.

Per pulse:

1. the pair number is Poisson with mean ``p0 * integral_band G``, sampled as a
   Poisson draw over the bare band width thinned by the envelope ``G``;
2. each pair gets a signal offset ``u`` uniform over the band (idler at
   ``2d - u``) and one emission time shared by both photons, Gaussian with
   intensity ``exp(-t^2 / delta_t^2)``;
3. each photon passes the filter with probability ``F(offset)`` and then
   lands on A with probability ``x_a``, on B with ``x_b``, or is lost;
4. a photon is registered only if ``|t| <= T / 2``;
5. each detector adds a dark click with probability ``P_N``;
6. detectors are threshold detectors; a coincidence is a click on both.

Pulses are processed in fixed blocks of :data:`BLOCK_PULSES`. Every block
draws from its own Philox stream keyed by ``(seed, stream, block index)``, so
the result does not depend on how blocks are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .estimator import MeasurementRecord
from .forward_model import ChannelParams, SourceParams

BLOCK_PULSES = 1 << 20
BAND_EDGE_LIMIT = 1e-6
BAND_MARGIN = 1.05


@dataclass(frozen=True)
class SimConfig:
    src: SourceParams
    ch: ChannelParams
    n_pulses: int
    seed: int = 0
    band: tuple[float, float] | None = None
    workers: int = 1
    stream: int = 0

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValidationError("n_pulses must be a positive integer")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass(frozen=True)
class SimCounts:
    n_gates: int
    singles_a: int
    singles_b: int
    coincidences: int

    def __post_init__(self):
        if self.coincidences > min(self.singles_a, self.singles_b):
            raise ValidationError("coincidences cannot exceed either singles count")

    def __add__(self, other: "SimCounts") -> "SimCounts":
        return SimCounts(self.n_gates + other.n_gates, self.singles_a + other.singles_a,
                         self.singles_b + other.singles_b, self.coincidences + other.coincidences)

    def _p(self, k):
        return k / self.n_gates

    def _se(self, k):
        p = k / self.n_gates
        return math.sqrt(p * (1 - p) / self.n_gates)

    @property
    def p_a(self):
        return self._p(self.singles_a)

    @property
    def p_b(self):
        return self._p(self.singles_b)

    @property
    def p_c(self):
        return self._p(self.coincidences)

    @property
    def se_a(self):
        return self._se(self.singles_a)

    @property
    def se_b(self):
        return self._se(self.singles_b)

    @property
    def se_c(self):
        return self._se(self.coincidences)

    def as_dict(self) -> dict:
        return {
            "n_gates": self.n_gates,
            "singles_a": self.singles_a,
            "singles_b": self.singles_b,
            "coincidences": self.coincidences,
            "p_a": self.p_a,
            "p_b": self.p_b,
            "p_c": self.p_c,
            "se_a": self.se_a,
            "se_b": self.se_b,
            "se_c": self.se_c,
        }

    def to_record(self, label: str = "", fluorescence_mw: float | None = None) -> MeasurementRecord:
        return MeasurementRecord(self.n_gates, self.singles_a, self.singles_b,
                                 self.coincidences, label=label, fluorescence_mw=fluorescence_mw)


def default_band(src: SourceParams) -> tuple[float, float]:
    """Band centred on the degeneracy offset that covers the filter support."""
    sup = src.filter.support()
    if sup is None:
        if src.band is None:
            raise ValidationError("filter has unbounded support; give a simulation band")
        sup = src.band
    d = src.detuning
    half = BAND_MARGIN * max(abs(sup[0] - d), abs(sup[1] - d))
    return (d - half, d + half)


def check_band(src: SourceParams, band: tuple[float, float]) -> None:
    """Reject sampling windows that cut into the filter passband.

    Signals are drawn over ``band`` and idlers fall in its mirror image
    about the degeneracy offset; both must cover the filter.
    """
    lo, hi = map(float, band)
    if not lo < hi:
        raise ValidationError(f"band must satisfy lo < hi, got {band!r}")
    d = src.detuning
    edges = np.array([lo, hi, 2 * d - hi, 2 * d - lo])
    worst = float(np.max(src.filter.transmission(edges)))
    if worst > BAND_EDGE_LIMIT:
        raise ValidationError(f"simulation band {band!r} too narrow: filter transmission "
                              f"{worst:.3g} at a band edge")
    sup = src.filter.support()
    if sup is not None:
        for a, b in ((lo, hi), (2 * d - hi, 2 * d - lo)):
            if a > sup[0] or b < sup[1]:
                raise ValidationError(f"simulation band {band!r} does not cover the filter "
                                      f"support {sup!r}")


@dataclass(frozen=True)
class _Plan:
    src: SourceParams
    x_a: float
    x_b: float
    p_dark_a: float
    p_dark_b: float
    band: tuple[float, float]
    seed: int
    stream: int


def _simulate_block(plan: _Plan, index: int, n: int) -> SimCounts:
    ss = np.random.SeedSequence([plan.seed, plan.stream, index])
    rng = np.random.Generator(np.random.Philox(ss))
    src = plan.src
    lo, hi = plan.band
    pg = src.pulse_gate

    counts = rng.poisson(src.p0 * (hi - lo), size=n)
    total = int(counts.sum())
    pulse = np.repeat(np.arange(n), counts)
    u = rng.uniform(lo, hi, size=total)
    if not src.envelope.is_unity:
        g = src.envelope.bind(src.filter.center_frequency)
        keep = rng.random(total) < g(u)
        pulse, u = pulse[keep], u[keep]
        total = u.size
    t = rng.normal(0.0, pg.delta_t / math.sqrt(2.0), size=total)
    in_gate = np.abs(t) <= pg.gate_T / 2

    click_a = rng.random(n) < plan.p_dark_a
    click_b = rng.random(n) < plan.p_dark_b
    for offset in (u, 2 * src.detuning - u):
        passed = rng.random(total) < src.filter.transmission(offset)
        route = rng.random(total)
        hit = passed & in_gate
        click_a[pulse[hit & (route < plan.x_a)]] = True
        click_b[pulse[hit & (route >= plan.x_a) & (route < plan.x_a + plan.x_b)]] = True

    return SimCounts(n, int(click_a.sum()), int(click_b.sum()), int((click_a & click_b).sum()))


def _run_block(args):
    return _simulate_block(*args)


def simulate(cfg: SimConfig) -> SimCounts:
    """Simulate ``cfg.n_pulses`` gated pulses and count singles and coincidences."""
    band = cfg.band if cfg.band is not None else default_band(cfg.src)
    check_band(cfg.src, band)
    plan = _Plan(cfg.src, cfg.ch.a.x, cfg.ch.b.x, cfg.ch.a.p_dark, cfg.ch.b.p_dark,
                 (float(band[0]), float(band[1])), int(cfg.seed), int(cfg.stream))
    n_blocks = -(-int(cfg.n_pulses) // BLOCK_PULSES)
    jobs = [(plan, i, min(BLOCK_PULSES, cfg.n_pulses - i * BLOCK_PULSES)) for i in range(n_blocks)]
    if cfg.workers == 1 or n_blocks == 1:
        parts = map(_run_block, jobs)
        return sum(parts, SimCounts(0, 0, 0, 0))
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return sum(pool.map(_run_block, jobs), SimCounts(0, 0, 0, 0))


def sweep_p0(cfg: SimConfig, p0_values: Sequence[float]) -> list[tuple[float, SimCounts]]:
    """Simulate each ``p0`` on its own stream; point ``i`` uses stream ``cfg.stream + i``."""
    out = []
    for i, p0 in enumerate(p0_values):
        point = replace(cfg, src=replace(cfg.src, p0=float(p0)), stream=cfg.stream + i)
        out.append((float(p0), simulate(point)))
    return out
