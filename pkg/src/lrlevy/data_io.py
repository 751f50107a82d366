"""CSV/JSON ingestion and report emission.

Loaders never crash on bad rows: every rejected or suspicious row is itemized
in an :class:`IngestReport`. Only structural problems (unreadable file,
missing header columns, nothing usable) raise.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .calibration import CalibrationResult, OptionChain, Quote, TraceEntry
from .errors import EmptyChain, InsufficientData, IoError, LRError, ParseError
from .fourier_pricing import PriceGrid
from .levy_models import model_from_dict, model_to_dict
from .shadow_rate import PairHistory, ShadowRatePoint

CHAIN_COLUMNS = ("strike", "maturity_years", "kind", "mid")
PAIR_COLUMNS = ("date", "price_s", "price_z")
BENCHMARK_COLUMNS = ("date", "yield")
SHADOW_COLUMNS = ("date", "r_bar", "diffusion", "jump_wedge", "flag")

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class Violation:
    row: int
    rule: str
    detail: str


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_accepted: int = 0
    violations: list[Violation] = field(default_factory=list)

    def flag(self, row: int, rule: str, detail: str) -> None:
        self.violations.append(Violation(row, rule, detail))

    def rules_for(self, row: int) -> list[str]:
        return [v.rule for v in self.violations if v.row == row]


def parse_number(text: str, row: int | None = None, column: str | None = None) -> float:
    """Strict decimal parse: no thousands separators, no locale forms."""
    s = text.strip()
    if not _NUMBER.match(s):
        raise ParseError(f"not a plain decimal number: {text!r}", row, column)
    return float(s)


def parse_date(text: str, row: int | None = None, column: str | None = "date") -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise ParseError(f"not an ISO-8601 date: {text!r}", row, column) from exc


def _open_rows(path, required: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = [h.strip() for h in (reader.fieldnames or [])]
            missing = [c for c in required if c not in header]
            if missing:
                raise ParseError(f"missing columns {missing} in header {header}", 1)
            reader.fieldnames = header
            return [(i + 2, row) for i, row in enumerate(reader)]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed CSV in {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# option chains


def load_option_chain(
    path, spot: float, as_of: dt.date | None = None, rate: float = 0.0, div_yield: float = 0.0,
    tol: float = 1e-12,
) -> tuple[OptionChain, IngestReport]:
    """Read ``strike,maturity_years,kind,mid`` rows and vet static bounds.

    Unparseable rows are rejected. Parsed rows that breach an upper bound,
    the discounted intrinsic lower bound, or strike convexity stay in the
    chain with weight 0 and are listed in the report.
    """
    report = IngestReport()
    quotes: list[tuple[int, Quote]] = []
    for line, row in _open_rows(path, CHAIN_COLUMNS):
        report.rows_read += 1
        try:
            strike = parse_number(row["strike"] or "", line, "strike")
            maturity = parse_number(row["maturity_years"] or "", line, "maturity_years")
            mid = parse_number(row["mid"] or "", line, "mid")
            kind = (row["kind"] or "").strip().lower()
            if kind in ("c", "p"):
                kind = {"c": "call", "p": "put"}[kind]
            quotes.append((line, Quote(strike, maturity, kind, mid)))
        except (ParseError, LRError) as exc:
            report.flag(line, "parse", str(exc))
    if not quotes:
        raise EmptyChain(f"no usable quotes in {path}")

    bad: set[int] = set()
    for line, q in quotes:
        disc = math.exp(-rate * q.maturity)
        fwd_s = spot * math.exp(-div_yield * q.maturity)
        if q.kind == "call":
            upper, lower = fwd_s, max(fwd_s - q.strike * disc, 0.0)
        else:
            upper, lower = q.strike * disc, max(q.strike * disc - fwd_s, 0.0)
        if q.mid > upper + tol:
            report.flag(line, "upper bound", f"mid {q.mid} above {upper:.6g}")
            bad.add(line)
        if q.mid < lower - tol:
            report.flag(line, "lower bound", f"mid {q.mid} below {lower:.6g}")
            bad.add(line)
    bad |= _butterfly_violations(quotes, report, tol)

    chain = OptionChain(
        spot,
        tuple(dataclasses.replace(q, weight=0.0) if line in bad else q for line, q in quotes),
        as_of,
        div_yield,
    )
    report.rows_accepted = len(quotes) - len(bad)
    return chain, report


def _butterfly_violations(quotes, report: IngestReport, tol: float) -> set[int]:
    """Flag the middle strike of any adjacent triple with negative convexity."""
    flagged = set()
    groups: dict[tuple[float, str], list[tuple[int, Quote]]] = {}
    for line, q in quotes:
        groups.setdefault((q.maturity, q.kind), []).append((line, q))
    for rows in groups.values():
        rows.sort(key=lambda lq: lq[1].strike)
        for (_, a), (line, b), (_, c) in zip(rows, rows[1:], rows[2:]):
            if not a.strike < b.strike < c.strike:
                continue
            wa = (c.strike - b.strike) / (c.strike - a.strike)
            interp = wa * a.mid + (1 - wa) * c.mid
            if b.mid > interp + tol:
                report.flag(line, "butterfly", f"mid {b.mid} above the chord value {interp:.6g}")
                flagged.add(line)
    return flagged


# ---------------------------------------------------------------------------
# paired histories and benchmarks


def load_pair_history(path) -> tuple[PairHistory, IngestReport]:
    """Read ``date,price_s,price_z``; rows missing either leg are dropped and reported."""
    report = IngestReport()
    leg_s: dict[dt.date, float] = {}
    leg_z: dict[dt.date, float] = {}
    for line, row in _open_rows(path, PAIR_COLUMNS):
        report.rows_read += 1
        try:
            date = parse_date(row["date"] or "", line)
        except ParseError as exc:
            report.flag(line, "parse", str(exc))
            continue
        if date in leg_s or date in leg_z:
            report.flag(line, "duplicate date", date.isoformat())
            continue
        for column, store in (("price_s", leg_s), ("price_z", leg_z)):
            text = (row[column] or "").strip()
            if not text:
                continue
            try:
                value = parse_number(text, line, column)
            except ParseError as exc:
                report.flag(line, "parse", str(exc))
                continue
            if not (value > 0 and math.isfinite(value)):
                report.flag(line, "nonpositive price", f"{column}={value}")
                continue
            store[date] = value
    common = set(leg_s) & set(leg_z)
    for date in sorted((set(leg_s) | set(leg_z)) - common):
        report.flag(0, "unmatched date", date.isoformat())
    if not common:
        raise InsufficientData(f"no dates with both prices in {path}")
    report.rows_accepted = len(common)
    return PairHistory.from_legs({d: leg_s[d] for d in common}, {d: leg_z[d] for d in common}), report


def load_benchmark(path) -> tuple[dict[dt.date, float], IngestReport]:
    report = IngestReport()
    out: dict[dt.date, float] = {}
    for line, row in _open_rows(path, BENCHMARK_COLUMNS):
        report.rows_read += 1
        try:
            out[parse_date(row["date"] or "", line)] = parse_number(row["yield"] or "", line, "yield")
        except ParseError as exc:
            report.flag(line, "parse", str(exc))
    report.rows_accepted = len(out)
    return dict(sorted(out.items())), report


# ---------------------------------------------------------------------------
# emission


def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _to_jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dt.date):
        return obj.isoformat()
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    return obj


def calibration_to_dict(result: CalibrationResult) -> dict:
    return {
        "theta_star": model_to_dict(result.theta_star),
        "r_bar_star": result.r_bar_star,
        "rmse": result.rmse,
        "relative_rmse": result.relative_rmse,
        "iterations": result.iterations,
        "converged": result.converged,
        "sigma_s": result.sigma_s,
        "sigma_z": result.sigma_z,
        "trace": [
            {"rate": e.rate, "rmse": e.rmse, "theta": model_to_dict(e.theta), "next_rate": e.next_rate}
            for e in result.trace
        ],
    }


def _float(v) -> float:
    # non-finite floats are stored as the strings "nan", "inf", "-inf"
    return float(v)


def calibration_from_dict(data: dict) -> CalibrationResult:
    return CalibrationResult(
        theta_star=model_from_dict(data["theta_star"]),
        r_bar_star=_float(data["r_bar_star"]),
        rmse=_float(data["rmse"]),
        relative_rmse=_float(data["relative_rmse"]),
        iterations=int(data["iterations"]),
        trace=[
            TraceEntry(_float(e["rate"]), _float(e["rmse"]), model_from_dict(e["theta"]), _float(e["next_rate"]))
            for e in data["trace"]
        ],
        converged=bool(data["converged"]),
        sigma_s=_float(data["sigma_s"]),
        sigma_z=_float(data["sigma_z"]),
    )


def write_json(data: Any, path) -> None:
    try:
        Path(path).write_text(json.dumps(_to_jsonable(data), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc.msg}", exc.lineno) from exc


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, dt.date):
        return v.isoformat()
    return str(v)


def shadow_series_rows(series: Sequence[ShadowRatePoint]) -> list[tuple]:
    return [(p.date, p.r_bar, p.diffusion_component, p.jump_wedge, p.flag) for p in series]


def price_grid_rows(grid: PriceGrid) -> list[tuple]:
    return [(float(k), float(math.exp(k)), float(p)) for k, p in zip(grid.log_strikes, grid.prices)]


def emit_report(obj: Any, path, fmt: str | None = None) -> Path:
    """Write a calibration result, shadow series or price grid as JSON or CSV.

    The format defaults to the file suffix.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "json").lower()
    if fmt not in ("json", "csv"):
        raise IoError(f"unsupported report format {fmt!r}")
    if isinstance(obj, CalibrationResult):
        if fmt == "json":
            write_json(calibration_to_dict(obj), path)
        else:
            rows = [(i, e.rate, e.rmse, e.next_rate, json.dumps(model_to_dict(e.theta))) for i, e in enumerate(obj.trace)]
            write_csv(path, ("iteration", "rate", "rmse", "next_rate", "theta"), rows)
    elif isinstance(obj, PriceGrid):
        rows = price_grid_rows(obj)
        if fmt == "json":
            write_json({"discount": obj.discount, "rows": rows}, path)
        else:
            write_csv(path, ("log_strike", "strike", "price"), rows)
    elif isinstance(obj, (list, tuple)) and all(isinstance(p, ShadowRatePoint) for p in obj):
        rows = shadow_series_rows(obj)
        if fmt == "json":
            write_json([dict(zip(SHADOW_COLUMNS, r)) for r in rows], path)
        else:
            write_csv(path, SHADOW_COLUMNS, rows)
    else:
        raise IoError(f"do not know how to emit {type(obj).__name__}")
    return path
