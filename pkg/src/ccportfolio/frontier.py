"""Target-return sweeps and their CSV / JSON / SVG renderings."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .approximation import build_program
from .market_data import MomentEstimates
from .solver import SolveOptions, solve
from .uncertainty import UncertainReturnModel

__all__ = ["FrontierRow", "FrontierTable", "tau_grid", "sweep", "sweep_all", "emit", "read_csv", "parse_tau_range"]


@dataclass(frozen=True)
class FrontierRow:
    tau: float
    x: tuple[float, ...]
    risk: float
    status: str


@dataclass
class FrontierTable:
    kind: str
    beta: float
    rows: list[FrontierRow] = field(default_factory=list)
    assets: tuple[str, ...] = ()

    def __post_init__(self):
        taus = [r.tau for r in self.rows]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("frontier rows must have strictly increasing tau")

    def optimal_rows(self) -> list[FrontierRow]:
        return [r for r in self.rows if r.status == "optimal"]

    def row(self, tau: float, tol: float = 1e-9) -> FrontierRow:
        for r in self.rows:
            if abs(r.tau - tau) <= tol:
                return r
        raise KeyError(tau)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "beta": self.beta,
            "assets": list(self.assets),
            "rows": [
                {
                    "tau": r.tau,
                    "x": list(r.x),
                    "risk": r.risk if r.status == "optimal" else None,
                    "status": r.status,
                }
                for r in self.rows
            ],
        }


def tau_grid(start: float, end: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, rounded to kill accumulated float drift."""
    if not step > 0:
        raise ValueError("tau step must be positive")
    if start > end:
        return []
    count = int(math.floor((end - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(count)]


def sweep(
    model: UncertainReturnModel,
    moments: MomentEstimates,
    kind: str,
    tau_start: float,
    tau_end: float,
    tau_step: float,
    options: SolveOptions | None = None,
) -> FrontierTable:
    """Solve ``kind`` at every tau of the grid; infeasible taus stay in the table."""
    rows = []
    for tau in tau_grid(tau_start, tau_end, tau_step):
        program = build_program(kind, model.with_target(tau=tau), moments)
        sol = solve(program, options)
        risk = sol.objective if sol.optimal else float("nan")
        rows.append(FrontierRow(tau, tuple(float(v) for v in sol.x), float(risk), sol.status))
    return FrontierTable(kind, model.beta, rows, tuple(moments.assets))


def _csv_text(table: FrontierTable) -> str:
    n = len(table.assets) or max((len(r.x) for r in table.rows), default=0)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tau", *(f"x_{i + 1}" for i in range(n)), "risk", "status"])
    for r in table.rows:
        if r.status == "optimal":
            writer.writerow([repr(r.tau), *(repr(v) for v in r.x), repr(r.risk), r.status])
        else:
            writer.writerow([repr(r.tau), *([""] * n), "", r.status])
    return buf.getvalue()


def emit(table: FrontierTable, fmt: str, path: str | Path) -> Path:
    """Write ``table`` as csv, json or svg. Raises OSError on I/O failure."""
    path = Path(path)
    if fmt == "csv":
        path.write_text(_csv_text(table), encoding="utf-8")
    elif fmt == "json":
        path.write_text(json.dumps(table.to_dict(), indent=2) + "\n", encoding="utf-8")
    elif fmt == "svg":
        if not table.optimal_rows():
            raise ValueError("nothing to plot: the table has no optimal rows")
        from .plotting import render_frontier

        render_frontier(table, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_csv(path: str | Path, kind: str = "custom", beta: float = float("nan")) -> FrontierTable:
    """Inverse of the csv writer (weights of non-optimal rows come back empty)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = len(header) - 3
        rows = []
        for rec in reader:
            status = rec[-1]
            x = tuple(float(v) for v in rec[1 : 1 + n]) if status == "optimal" else ()
            risk = float(rec[-2]) if rec[-2] else float("nan")
            rows.append(FrontierRow(float(rec[0]), x, risk, status))
    return FrontierTable(kind, beta, rows)


def parse_tau_range(text: str) -> tuple[float, float, float]:
    """'start:end:step' -> floats."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"tau range must look like start:end:step, got {text!r}")
    start, end, step = (float(p) for p in parts)
    if not step > 0:
        raise ValueError("tau step must be positive")
    return start, end, step


def sweep_all(
    model: UncertainReturnModel,
    moments: MomentEstimates,
    kinds: Sequence[str],
    tau_start: float,
    tau_end: float,
    tau_step: float,
    options: SolveOptions | None = None,
) -> dict[str, FrontierTable]:
    return {k: sweep(model, moments, k, tau_start, tau_end, tau_step, options) for k in kinds}
