"""Plain-text file formats: count data, traces, final parameters, KKT reports.

Floats are written with 17 significant digits so every file round-trips
exactly.
"""
from __future__ import annotations

import csv
import io
import re
from pathlib import Path

import numpy as np

from .diagnostics import KKTReport
from .engine import IterationRecord, RunTrace
from .models.competing_risks import CompetingRisksData

DATA_HEADER = ("j", "N_alive", "c", "b1", "a2", "b2")
TRACE_HEADER = ("k", "beta", "loglik", "divergence_from_prev", "step_norm",
                "inner_evals", "inner_accepted")
MIXTURE_HEADER = ("x",)
_N0 = re.compile(r"#\s*N0\s*=\s*(\S+)\s*$")


class DataFormatError(ValueError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int, path=None):
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_text(path, text: str):
    Path(path).write_text(text, encoding="utf-8", newline="")


# --------------------------------------------------------------------------
# competing-risks counts

def format_cr_data(data: CompetingRisksData) -> str:
    lines = [f"# N0={data.N}", ",".join(DATA_HEADER)]
    for j in range(data.m):
        row = (j + 1, data.N_alive[j], data.c[j], data.b1[j], data.a2[j], data.b2[j])
        lines.append(",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_cr_data(path, data: CompetingRisksData):
    _write_text(path, format_cr_data(data))


def _parse_int(token: str, what: str, line: int, path) -> int:
    try:
        return int(token.strip())
    except ValueError:
        raise DataFormatError(f"{what} must be an integer, got {token.strip()!r}", line, path) from None


def parse_cr_data(text: str, path=None) -> CompetingRisksData:
    n0 = None
    header_seen = False
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            match = _N0.match(line)
            if match:
                if n0 is not None:
                    raise DataFormatError("N0 given twice", lineno, path)
                n0 = _parse_int(match.group(1), "N0", lineno, path)
            continue
        fields = [f.strip() for f in line.split(",")]
        if not header_seen:
            if tuple(fields) != DATA_HEADER:
                raise DataFormatError(f"expected header {','.join(DATA_HEADER)}", lineno, path)
            header_seen = True
            continue
        if len(fields) != len(DATA_HEADER):
            raise DataFormatError(f"expected {len(DATA_HEADER)} fields, got {len(fields)}",
                                  lineno, path)
        vals = [_parse_int(f, name, lineno, path) for f, name in zip(fields, DATA_HEADER)]
        if vals[0] != len(rows) + 1:
            raise DataFormatError(f"interval index {vals[0]} out of order", lineno, path)
        if min(vals) < 0:
            raise DataFormatError("counts must be nonnegative", lineno, path)
        rows.append((lineno, vals))
    last = len(text.splitlines()) or 1
    if n0 is None:
        raise DataFormatError("missing '# N0=<int>' line", last, path)
    if not header_seen:
        raise DataFormatError("missing header line", last, path)
    if not rows:
        raise DataFormatError("no interval rows", last, path)
    prev = n0
    for lineno, vals in rows:
        if vals[1] > prev:
            raise DataFormatError("N_alive increases", lineno, path)
        prev = vals[1]
    arr = np.array([v for _, v in rows], dtype=np.int64)
    return CompetingRisksData(n0, arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5])


def read_cr_data(path) -> CompetingRisksData:
    return parse_cr_data(Path(path).read_text(encoding="utf-8"), path=path)


# --------------------------------------------------------------------------
# mixture observations

def write_mixture_data(path, x):
    _write_text(path, "x\n" + "".join(fmt(v) + "\n" for v in np.asarray(x, dtype=float)))


def read_mixture_data(path) -> np.ndarray:
    out = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not out and line == "x":
            continue
        try:
            out.append(float(line))
        except ValueError:
            raise DataFormatError(f"not a number: {line!r}", lineno, path) from None
    if not out:
        raise DataFormatError("no observations", max(len(lines), 1), path)
    return np.array(out)


# --------------------------------------------------------------------------
# traces

def format_trace(trace: RunTrace) -> str:
    names = trace.param_names or tuple(f"theta_{i + 1}" for i in range(trace.final_theta.size))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER + tuple(names))
    for r in trace.records:
        writer.writerow([fmt(r.k), fmt(float(r.beta)), fmt(r.loglik), fmt(r.divergence_from_prev),
                         fmt(r.step_norm), fmt(r.inner_evals), fmt(r.inner_accepted)]
                        + [fmt(float(v)) for v in r.theta])
    return buf.getvalue()


def write_trace(path, trace: RunTrace):
    _write_text(path, format_trace(trace))


def read_trace(path) -> RunTrace:
    """Records and parameter names; the termination reason is not stored."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0][:len(TRACE_HEADER)]) != TRACE_HEADER:
        raise DataFormatError("not a trace file", 1, path)
    names = tuple(rows[0][len(TRACE_HEADER):])
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise DataFormatError(f"expected {len(rows[0])} fields, got {len(row)}", lineno, path)
        try:
            k, beta, ll, div, step, evals, acc = row[:len(TRACE_HEADER)]
            records.append(IterationRecord(int(k), float(beta), np.array([float(v) for v in row[7:]]),
                                           float(ll), float(div), float(step), int(evals), int(acc)))
        except ValueError as exc:
            raise DataFormatError(str(exc), lineno, path) from None
    return RunTrace(records, termination="unknown", param_names=names)


def write_final_params(path, names, theta):
    lines = ["name,value"] + [f"{n},{fmt(float(v))}" for n, v in zip(names, theta)]
    _write_text(path, "\n".join(lines) + "\n")


def read_final_params(path) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return {name: float(value) for name, value in rows[1:]}


def format_kkt_report(report: KKTReport, names, labels, loglik: float) -> str:
    lines = [
        f"loglik {fmt(loglik)}",
        f"gradient_norm {fmt(report.gradient_norm)}",
        f"scaled_gradient_norm {fmt(report.scaled_gradient_norm(loglik))}",
        f"residual_norm {fmt(report.residual_norm)}",
        f"multipliers_nonnegative {str(report.multipliers_nonnegative).lower()}",
        f"degenerate {str(report.degenerate).lower()}",
        f"active_terms {len(report.active_set)}",
    ]
    for idx, lam in zip(report.active_set, report.multipliers):
        tag = " selected" if idx in report.selected else ""
        lines.append(f"  {labels[idx]} lambda={fmt(lam)}{tag}")
    if report.residual is not None:
        lines.append("residual_by_parameter")
        lines += [f"  {n} {fmt(float(v))}" for n, v in zip(names, report.residual)]
    return "\n".join(lines) + "\n"
