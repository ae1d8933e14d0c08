"""Serialisation: deterministic JSON, measurement CSV, plain-text tables.

Measurement CSV schema (one record per row)::

    label,gates,counts_a,counts_b,coincidences[,fluorescence_mw]

JSON output keeps insertion order and rounds every float to 12 significant
digits, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Sequence

from .errors import ValidationError
from .estimator import MeasurementRecord

MEASUREMENT_FIELDS = ("label", "gates", "counts_a", "counts_b", "coincidences")
OPTIONAL_FIELD = "fluorescence_mw"
SIG_DIGITS = 12


def _round(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.{SIG_DIGITS}g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_round(obj), indent=2, allow_nan=False) + "\n"


def fmt_float(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return f"{x:.{SIG_DIGITS}g}"


def write_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt_float(v) for v in row])
    return buf.getvalue()


def records_to_csv(records: Sequence[MeasurementRecord]) -> str:
    with_fluo = any(r.fluorescence_mw is not None for r in records)
    header = MEASUREMENT_FIELDS + ((OPTIONAL_FIELD,) if with_fluo else ())
    rows = []
    for r in records:
        row = [r.label, r.gates, r.counts_a, r.counts_b, r.coincidences]
        if with_fluo:
            row.append(r.fluorescence_mw)
        rows.append(row)
    return write_csv(header, rows)


def _parse_int(text, where):
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"{where}: expected an integer, got {text!r}") from None


def read_measurements(text: str, source: str = "<csv>") -> list[MeasurementRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise ValidationError(f"{source}: empty measurement file") from None
    if header not in (MEASUREMENT_FIELDS, MEASUREMENT_FIELDS + (OPTIONAL_FIELD,)):
        raise ValidationError(f"{source}: header must be {','.join(MEASUREMENT_FIELDS)}"
                              f"[,{OPTIONAL_FIELD}], got {','.join(header)}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        where = f"{source}:{lineno}"
        if len(row) != len(header):
            raise ValidationError(f"{where}: expected {len(header)} fields, got {len(row)}")
        fluo = None
        if len(row) == 6 and row[5].strip():
            try:
                fluo = float(row[5])
            except ValueError:
                raise ValidationError(f"{where}: bad fluorescence_mw {row[5]!r}") from None
        try:
            records.append(MeasurementRecord(
                gates=_parse_int(row[1], where),
                counts_a=_parse_int(row[2], where),
                counts_b=_parse_int(row[3], where),
                coincidences=_parse_int(row[4], where),
                label=row[0],
                fluorescence_mw=fluo,
            ))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return records


def table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    cells = [list(header)] + [[v if isinstance(v, str) else fmt_short(v) for v in r] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def fmt_short(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, int):
        return str(x)
    return f"{x:.4g}"
