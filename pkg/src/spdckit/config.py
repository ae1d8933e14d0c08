"""TOML configuration file for the command-line tool.

Sections mirror the library types; unknown keys anywhere are rejected. Units
are fixed: GHz for spectral widths and offsets, THz for absolute
frequencies, ns for durations, MHz for the repetition rate, probabilities
per gate for dark counts. Example::

    schema_version = 1

    [filter]
    kind = "cascade"
    members = [
        { kind = "dwdm" },
        { kind = "fabry_perot", fsr = 50.0, finesse = 31.5 },
    ]

    [gate]
    pulse_fwhm = 20.3
    gate_T = 20.0
    rep_rate = 2.0

    [source]
    p0_i1 = 0.05

    [channels.a]
    r = 0.5
    t = 0.445
    eta = 0.080
    p_dark = 1.9e-4

    [channels.b]
    r = 0.5
    t = 0.447
    eta = 0.076
    p_dark = 1.5e-4

    [simulation]
    n_pulses = 10000000
    seed = 1
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import filters as flt
from .errors import ValidationError
from .estimator import Calibration
from .forward_model import Channel, ChannelParams, SourceParams
from .gating import PulseGate, k_t
from .monte_carlo import SimConfig

SCHEMA_VERSION = 1


class ConfigError(ValidationError):
    pass


def _take(table, where, required=(), optional=()):
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    unknown = set(table) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(sorted(unknown))}")
    missing = [k for k in required if k not in table]
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(missing)}")
    return table


def _num(table, key, where, default=None):
    v = table.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


_FILTER_FIELDS = {
    "rectangular": (("full_width",), ()),
    "triangular": (("base_half_width",), ()),
    "gaussian": (("one_over_e_half_width",), ()),
    "trapezoid": (("plateau_width", "base_width"), ()),
    "fabry_perot": (("fsr", "finesse"), ()),
    "cascade": (("members",), ()),
    "tabulated": (("path",), ()),
    "dwdm": ((), ("fwhm", "ratio")),
}


def parse_filter(table, base_dir: Path, where="filter", extra=()) -> flt.FilterSpec:
    kind = table.get("kind") if isinstance(table, dict) else None
    if kind not in _FILTER_FIELDS:
        raise ConfigError(f"{where}.kind must be one of {', '.join(_FILTER_FIELDS)}, got {kind!r}")
    req, opt = _FILTER_FIELDS[kind]
    _take(table, where, ("kind",) + req, opt + ("center_frequency",) + tuple(extra))
    center = _num(table, "center_frequency", where)
    kw = {"center_frequency": center}
    try:
        if kind == "rectangular":
            return flt.Rectangular(_num(table, "full_width", where), **kw)
        if kind == "triangular":
            return flt.Triangular(_num(table, "base_half_width", where), **kw)
        if kind == "gaussian":
            return flt.Gaussian(_num(table, "one_over_e_half_width", where), **kw)
        if kind == "trapezoid":
            return flt.Trapezoid(_num(table, "plateau_width", where),
                                 _num(table, "base_width", where), **kw)
        if kind == "fabry_perot":
            return flt.FabryPerot(_num(table, "fsr", where), _num(table, "finesse", where), **kw)
        if kind == "cascade":
            members = table["members"]
            if not isinstance(members, list):
                raise ConfigError(f"{where}.members must be a list of filter tables")
            return flt.Cascade(tuple(parse_filter(m, base_dir, f"{where}.members[{i}]")
                                     for i, m in enumerate(members)), **kw)
        if kind == "tabulated":
            path = base_dir / str(table["path"])
            if not path.is_file():
                raise ConfigError(f"{where}.path: file {path} does not exist")
            return flt.Tabulated.from_csv(path, **kw)
        fwhm = _num(table, "fwhm", where, flt.DEFAULT_DWDM_FWHM)
        ratio = _num(table, "ratio", where, flt.DEFAULT_DWDM_RATIO)
        if (fwhm, ratio) == (flt.DEFAULT_DWDM_FWHM, flt.DEFAULT_DWDM_RATIO) and center is None:
            return flt.default_dwdm()
        shape = flt.calibrate_trapezoid(fwhm, ratio)
        return flt.Trapezoid(shape.plateau_width, shape.base_width, **kw)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_envelope(table, base_dir: Path) -> flt.SpectralEnvelope:
    kind = table.get("kind") if isinstance(table, dict) else None
    if kind == "unity":
        _take(table, "envelope", ("kind",))
        return flt.UNITY
    if kind == "gaussian":
        _take(table, "envelope", ("kind", "fwhm"), ("center",))
        return flt.GaussianEnvelope(_num(table, "fwhm", "envelope"),
                                    _num(table, "center", "envelope"))
    if kind == "tabulated":
        _take(table, "envelope", ("kind", "path"))
        path = base_dir / str(table["path"])
        if not path.is_file():
            raise ConfigError(f"envelope.path: file {path} does not exist")
        tab = flt.Tabulated.from_csv(path)
        return flt.TabulatedEnvelope(tab.offsets, tab.values)
    raise ConfigError(f"envelope.kind must be unity, gaussian or tabulated, got {kind!r}")


def _band(value, where):
    if value is None:
        return None
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"{where}: expected [lo, hi] in GHz")
    return (float(value[0]), float(value[1]))


@dataclass
class ToolkitConfig:
    base_dir: Path = field(default_factory=Path.cwd)
    filter: flt.FilterSpec | None = None
    filters: list[tuple[str, flt.FilterSpec]] | None = None
    envelope: flt.SpectralEnvelope = flt.UNITY
    gate: PulseGate | None = None
    source: dict = field(default_factory=dict)
    channels: ChannelParams | None = None
    calibration: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    def _need(self, name):
        if getattr(self, name) is None:
            raise ConfigError(f"config has no [{name}] section")
        return getattr(self, name)

    def integrals(self, detuning=None):
        return flt.spectral_integrals(
            self._need("filter"), self.envelope,
            self.source.get("detuning", 0.0) if detuning is None else detuning,
            band=self.source.get("band"),
        )

    def source_params(self, p0_i1: float | None = None) -> SourceParams:
        self._need("gate")
        src = self.source
        p0 = src.get("p0")
        if p0_i1 is None:
            p0_i1 = src.get("p0_i1")
        if p0_i1 is not None:
            p0 = p0_i1 / self.integrals().i1
        if p0 is None:
            raise ConfigError("[source] needs p0 or p0_i1")
        return SourceParams(p0, self.filter, self.gate, self.envelope,
                            src.get("detuning", 0.0), src.get("band"))

    def calibration_params(self) -> Calibration:
        cal = dict(self.calibration)
        if "ratio_i1_over_i2" not in cal:
            cal["ratio_i1_over_i2"] = self.integrals().ratio_i1_over_i2
        if "k_t" not in cal:
            cal["k_t"] = k_t(self._need("gate"))
        if self.channels is not None:
            cal.setdefault("p_dark_a", self.channels.a.p_dark)
            cal.setdefault("p_dark_b", self.channels.b.p_dark)
        return Calibration(**cal)

    def sim_config(self, seed: int | None = None, p0_i1: float | None = None) -> SimConfig:
        sim = self.simulation
        if "n_pulses" not in sim:
            raise ConfigError("[simulation] needs n_pulses")
        return SimConfig(
            self.source_params(p0_i1),
            self._need("channels"),
            n_pulses=sim["n_pulses"],
            seed=sim.get("seed", 0) if seed is None else seed,
            band=sim.get("band"),
            workers=sim.get("workers", 1),
        )


def _int(table, key, where, default=None, lo=None):
    v = table.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or (lo is not None and v < lo):
        raise ConfigError(f"{where}.{key}: expected an integer >= {lo}, got {v!r}")
    return v


def parse_config(data: dict, base_dir: Path | str = ".") -> ToolkitConfig:
    base_dir = Path(base_dir)
    _take(data, "config", ("schema_version",),
          ("filter", "filters", "envelope", "gate", "source", "channels", "calibration",
           "simulation", "sweep"))
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {data['schema_version']!r} "
                          f"(expected {SCHEMA_VERSION})")
    cfg = ToolkitConfig(base_dir=base_dir)
    try:
        if "filter" in data:
            cfg.filter = parse_filter(data["filter"], base_dir)
        if "filters" in data:
            if not isinstance(data["filters"], list):
                raise ConfigError("filters must be an array of tables")
            cfg.filters = []
            for i, entry in enumerate(data["filters"]):
                name = entry.get("name") if isinstance(entry, dict) else None
                if not isinstance(name, str):
                    raise ConfigError(f"filters[{i}].name must be a string")
                cfg.filters.append((name, parse_filter(entry, base_dir, f"filters[{i}]",
                                                       extra=("name",))))
        if "envelope" in data:
            cfg.envelope = parse_envelope(data["envelope"], base_dir)
        if "gate" in data:
            g = _take(data["gate"], "gate", ("gate_T",), ("delta_t", "pulse_fwhm", "rep_rate"))
            if ("delta_t" in g) == ("pulse_fwhm" in g):
                raise ConfigError("gate: give exactly one of delta_t, pulse_fwhm")
            rep = _num(g, "rep_rate", "gate", 2.0)
            if "delta_t" in g:
                cfg.gate = PulseGate(_num(g, "delta_t", "gate"), _num(g, "gate_T", "gate"), rep)
            else:
                cfg.gate = PulseGate.from_fwhm(_num(g, "pulse_fwhm", "gate"),
                                               _num(g, "gate_T", "gate"), rep)
        if "source" in data:
            s = _take(data["source"], "source", (), ("p0", "p0_i1", "detuning", "band"))
            if "p0" in s and "p0_i1" in s:
                raise ConfigError("source: give at most one of p0, p0_i1")
            cfg.source = {k: _num(s, k, "source") for k in ("p0", "p0_i1", "detuning") if k in s}
            if "band" in s:
                cfg.source["band"] = _band(s["band"], "source.band")
        if "channels" in data:
            chans = _take(data["channels"], "channels", ("a", "b"))
            parsed = []
            for name in ("a", "b"):
                c = _take(chans[name], f"channels.{name}", ("r", "t", "eta"), ("p_dark",))
                w = f"channels.{name}"
                parsed.append(Channel(_num(c, "r", w), _num(c, "t", w), _num(c, "eta", w),
                                      _num(c, "p_dark", w, 0.0)))
            cfg.channels = ChannelParams(*parsed)
        if "calibration" in data:
            keys = ("ratio_i1_over_i2", "k_t", "p_dark_a", "p_dark_b", "r_tau_a", "r_tau_b",
                    "eta_a", "eta_b")
            c = _take(data["calibration"], "calibration", (), keys)
            cfg.calibration = {k: _num(c, k, "calibration") for k in c}
        if "simulation" in data:
            s = _take(data["simulation"], "simulation", ("n_pulses",),
                      ("seed", "band", "workers", "p0_i1_values"))
            sim = {"n_pulses": _int(s, "n_pulses", "simulation", lo=1)}
            if "seed" in s:
                sim["seed"] = _int(s, "seed", "simulation", lo=0)
            if "workers" in s:
                sim["workers"] = _int(s, "workers", "simulation", lo=1)
            if "band" in s:
                sim["band"] = _band(s["band"], "simulation.band")
            if "p0_i1_values" in s:
                vals = s["p0_i1_values"]
                if not isinstance(vals, list) or not vals:
                    raise ConfigError("simulation.p0_i1_values must be a non-empty list")
                sim["p0_i1_values"] = [_num({"v": v}, "v", "simulation.p0_i1_values")
                                       for v in vals]
            cfg.simulation = sim
        if "sweep" in data:
            s = _take(data["sweep"], "sweep", (), ("d_min", "d_max", "n_points"))
            cfg.sweep = {k: _num(s, k, "sweep") for k in ("d_min", "d_max") if k in s}
            if "n_points" in s:
                cfg.sweep["n_points"] = _int(s, "n_points", "sweep", lo=2)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> ToolkitConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, path.parent)
