"""Command-line entry point: ``spdckit {filters,sweep,predict,simulate,estimate}``.

Exit status is 0 on success, 1 for invalid input (config, CSV, parameters)
and 2 when a numerical procedure fails (quadrature, no excess coincidences).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import filters as flt
from .config import ToolkitConfig, load_config
from .errors import NumericalError, ValidationError
from .estimator import estimate
from .formats import dumps_json, read_measurements, records_to_csv, table, write_csv
from .forward_model import predict, predict_poisson
from .gating import k_t
from .monte_carlo import simulate, sweep_p0

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args, required=True) -> ToolkitConfig | None:
    if args.config is None:
        if required:
            raise ValidationError(f"'{args.command}' needs --config")
        return None
    return load_config(args.config)


def cmd_filters(cfg: ToolkitConfig | None) -> list[dict]:
    """One row per filter: FWHM and I1/I2max at zero detuning.

    Rows come from the config's ``filters`` list, else its single ``filter``,
    else the five built-in reference shapes. An empty list gives an empty table.
    """
    if cfg is not None and cfg.filters is not None:
        cases = cfg.filters
    elif cfg is not None and cfg.filter is not None:
        cases = [("filter", cfg.filter)]
    else:
        cases = flt.builtin_cases()
    rows = []
    for name, spec in cases:
        si = flt.spectral_integrals(spec)
        try:
            width = flt.fwhm(spec)
        except ValidationError:
            width = None
        rows.append({"filter": name, "bandwidth_ghz": width,
                     "ratio_i1_over_i2max": si.ratio_i1_over_i2max,
                     "i1_ghz": si.i1, "i2_max_ghz": si.i2_max})
    return rows


def cmd_sweep(cfg: ToolkitConfig, d_min=None, d_max=None, n_points=None) -> list[dict]:
    sw = cfg.sweep
    d_min = sw.get("d_min", -50.0) if d_min is None else d_min
    d_max = sw.get("d_max", 50.0) if d_max is None else d_max
    n_points = sw.get("n_points", 201) if n_points is None else n_points
    spec = cfg._need("filter")
    points = flt.detuning_sweep(spec, cfg.envelope, d_min, d_max, n_points,
                                band=cfg.source.get("band"))
    return [{"detuning_ghz": p.detuning, "transmission": p.transmission,
             "i2_over_i2max": p.i2_normalized} for p in points]


def cmd_predict(cfg: ToolkitConfig, poisson=False) -> dict:
    src = cfg.source_params()
    ch = cfg._need("channels")
    si = src.integrals()
    cp = (predict_poisson if poisson else predict)(src, ch, si)
    return {
        "model": "poisson" if poisson else "truncated",
        "inputs": {
            "p0": src.p0,
            "p0_i1": src.p0 * si.i1,
            "i1_ghz": si.i1,
            "ratio_i1_over_i2": si.ratio_i1_over_i2,
            "detuning_ghz": si.detuning,
            "k_t": k_t(src.pulse_gate),
            "x_a": ch.a.x,
            "x_b": ch.b.x,
            "p_dark_a": ch.a.p_dark,
            "p_dark_b": ch.b.p_dark,
        },
        "probabilities": cp.as_dict(),
    }


def cmd_simulate(cfg: ToolkitConfig, seed=None) -> tuple[dict, list]:
    """Run the simulation (or a p0*I1 sweep); returns JSON dict and records."""
    values = cfg.simulation.get("p0_i1_values")
    sim = cfg.sim_config(seed=seed)
    i1 = cfg.integrals().i1
    if values:
        runs = [(p0 * i1, c) for p0, c in sweep_p0(sim, [v / i1 for v in values])]
    else:
        runs = [(sim.src.p0 * i1, simulate(sim))]
    records = [c.to_record(label=f"sim-{i:03d}") for i, (_, c) in enumerate(runs)]
    doc = {
        "seed": int(sim.seed),
        "n_pulses": int(sim.n_pulses),
        "runs": [{"label": r.label, "p0_i1": p, **c.as_dict()}
                 for r, (p, c) in zip(records, runs)],
    }
    return doc, records


def cmd_estimate(measurements: str, cfg: ToolkitConfig) -> tuple[dict, list]:
    text = Path(measurements).read_text()
    records = read_measurements(text, measurements)
    cal = cfg.calibration_params()
    reports = [estimate(m, cal) for m in records]
    doc = {
        "calibration": {k: getattr(cal, k) for k in cal.__dataclass_fields__},
        "reports": [r.as_dict() for r in reports],
    }
    return doc, reports


def _rows(dicts, keys):
    return [[d[k] for k in keys] for d in dicts]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--format", choices=("json", "csv", "table"), default=None)

    p = argparse.ArgumentParser(prog="spdckit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("filters", parents=[common], help="I1/I2max table for filter shapes")
    s = sub.add_parser("sweep", parents=[common], help="I2 versus detuning (CSV)")
    s.add_argument("--d-min", type=float)
    s.add_argument("--d-max", type=float)
    s.add_argument("--n-points", type=int)
    pr = sub.add_parser("predict", parents=[common], help="closed-form count probabilities")
    pr.add_argument("--poisson", action="store_true",
                    help="exact Poisson multi-pair model instead of the truncated forms")
    sm = sub.add_parser("simulate", parents=[common], help="Monte Carlo count simulation")
    sm.add_argument("--seed", type=int, help="override simulation.seed (unsigned 64-bit)")
    sm.add_argument("--measurements", help="also write the measurement CSV to this path")
    e = sub.add_parser("estimate", parents=[common], help="figures of merit from a CSV")
    e.add_argument("measurements", help="measurement CSV file")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fmt = args.format
    try:
        if args.command == "filters":
            rows = cmd_filters(_config(args, required=False))
            keys = ["filter", "bandwidth_ghz", "ratio_i1_over_i2max"]
            if fmt == "json":
                text = dumps_json(rows)
            elif fmt == "csv":
                text = write_csv(keys, _rows(rows, keys))
            else:
                text = table(keys, _rows(rows, keys))
        elif args.command == "sweep":
            rows = cmd_sweep(_config(args), args.d_min, args.d_max, args.n_points)
            keys = ["detuning_ghz", "transmission", "i2_over_i2max"]
            if fmt == "json":
                text = dumps_json(rows)
            elif fmt == "table":
                text = table(keys, _rows(rows, keys))
            else:
                text = write_csv(keys, _rows(rows, keys))
        elif args.command == "predict":
            doc = cmd_predict(_config(args), poisson=args.poisson)
            if fmt == "table":
                probs = doc["probabilities"]
                text = table(["quantity", "value"], [[k, v] for k, v in probs.items()])
            elif fmt == "csv":
                probs = doc["probabilities"]
                text = write_csv(list(probs), [list(probs.values())])
            else:
                text = dumps_json(doc)
        elif args.command == "simulate":
            doc, records = cmd_simulate(_config(args), seed=args.seed)
            if args.measurements:
                Path(args.measurements).write_text(records_to_csv(records))
            if fmt == "csv":
                text = records_to_csv(records)
            elif fmt == "table":
                keys = ["label", "p0_i1", "n_gates", "singles_a", "singles_b", "coincidences"]
                text = table(keys, _rows(doc["runs"], keys))
            else:
                text = dumps_json(doc)
        else:
            doc, reports = cmd_estimate(args.measurements, _config(args))
            keys = ["label", "p0_i1", "p0_i1_stderr", "x_a", "x_a_stderr", "x_b",
                    "x_b_stderr", "f_sys", "f_spdc", "bell_margin", "c_f_a", "c_f_b"]
            if fmt == "json":
                text = dumps_json(doc)
            elif fmt == "csv":
                text = write_csv(keys, _rows(doc["reports"], keys))
            else:
                text = table(keys, _rows(doc["reports"], keys))
        _emit(text, args.out)
    except NumericalError as exc:
        print(f"spdckit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, OSError) as exc:
        print(f"spdckit: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main():
    sys.exit(run())
