"""Price ingestion, period returns and nominal moment estimates.

Returns are simple returns in percent; moments use the population
(divide-by-T) convention.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    CsvFormatError,
    DegenerateSample,
    InputError,
    MisalignedSeries,
    NonPositivePrice,
)

__all__ = [
    "PriceSeries",
    "ReturnMatrix",
    "MomentEstimates",
    "read_prices_csv",
    "compute_returns",
    "estimate_moments",
]


@dataclass(frozen=True)
class PriceSeries:
    asset_id: str
    dates: tuple[dt.date, ...]
    prices: tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.prices):
            raise InputError(f"{self.asset_id}: dates and prices differ in length")
        if len(self.dates) < 2:
            raise DegenerateSample(f"{self.asset_id}: need at least 2 observations")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise MisalignedSeries(f"{self.asset_id}: dates must be strictly increasing")
        bad = [p for p in self.prices if not (p > 0 and np.isfinite(p))]
        if bad:
            raise NonPositivePrice(f"{self.asset_id}: non-positive price {bad[0]!r}")

    @classmethod
    def from_pairs(cls, asset_id: str, pairs: Sequence[tuple[str | dt.date, float]]):
        dates = tuple(d if isinstance(d, dt.date) else dt.date.fromisoformat(d) for d, _ in pairs)
        return cls(asset_id, dates, tuple(float(p) for _, p in pairs))


@dataclass(frozen=True)
class ReturnMatrix:
    asset_ids: tuple[str, ...]
    returns: np.ndarray  # shape (n, T), percent
    dates: tuple[dt.date, ...] = ()  # period end dates, length T when known

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2 or r.shape[0] != len(self.asset_ids):
            raise InputError("returns must be an n x T matrix matching asset_ids")
        if not np.all(np.isfinite(r)):
            raise InputError("returns must be finite")
        object.__setattr__(self, "returns", r)

    @property
    def n_periods(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class MomentEstimates:
    mu0: np.ndarray
    sigma: np.ndarray
    assets: tuple[str, ...] = field(default=())

    def __post_init__(self):
        mu0 = np.asarray(self.mu0, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float)
        n = mu0.size
        if sigma.shape != (n, n):
            raise InputError(f"sigma must be {n}x{n}, got {sigma.shape}")
        scale = max(1.0, float(np.abs(sigma).max(initial=0.0)))
        if np.abs(sigma - sigma.T).max(initial=0.0) > 1e-12 * scale:
            raise InputError("sigma is not symmetric")
        if np.any(np.diag(sigma) < 0):
            raise InputError("sigma has a negative variance")
        if n and np.linalg.eigvalsh(sigma).min() < -1e-9 * scale:
            raise InputError("sigma is not positive semidefinite")
        assets = tuple(self.assets) or tuple(f"asset_{i + 1}" for i in range(n))
        if len(assets) != n:
            raise InputError("assets and mu0 differ in length")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "assets", assets)

    @property
    def n(self) -> int:
        return self.mu0.size

    def to_dict(self) -> dict:
        return {
            "assets": list(self.assets),
            "mu0": self.mu0.tolist(),
            "sigma": self.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MomentEstimates":
        try:
            return cls(
                mu0=np.asarray(data["mu0"], dtype=float),
                sigma=np.asarray(data["sigma"], dtype=float),
                assets=tuple(data.get("assets") or ()),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"invalid moments document: {exc}") from exc

    def to_json(self) -> str:
        # json emits repr() floats, which round-trip doubles exactly
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MomentEstimates":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def read_prices_csv(source: str | Path | io.TextIOBase) -> list[PriceSeries]:
    """Parse a long-format ``date,asset,price`` CSV into price series.

    Parsing is strict: the header must match exactly, every row needs three
    fields, dates must be ISO-8601 and prices finite numbers. Errors carry
    the 1-based line number of the offending row.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return read_prices_csv(fh)

    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise DegenerateSample("empty price file")
    if [h.strip() for h in header] != ["date", "asset", "price"]:
        raise CsvFormatError(f"expected header 'date,asset,price', got {','.join(header)!r}", line=1)

    rows: dict[str, list[tuple[dt.date, float]]] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise CsvFormatError(f"expected 3 fields, got {len(row)}", line=line)
        raw_date, asset, raw_price = (cell.strip() for cell in row)
        try:
            date = dt.date.fromisoformat(raw_date)
        except ValueError:
            raise CsvFormatError(f"bad date {raw_date!r}", line=line) from None
        try:
            price = float(raw_price)
        except ValueError:
            raise CsvFormatError(f"bad price {raw_price!r}", line=line) from None
        if not np.isfinite(price):
            raise CsvFormatError(f"non-finite price {raw_price!r}", line=line)
        if price <= 0:
            raise NonPositivePrice(f"line {line}: non-positive price {price!r}")
        if not asset:
            raise CsvFormatError("empty asset label", line=line)
        rows.setdefault(asset, []).append((date, price))

    if not rows:
        raise DegenerateSample("price file has no observations")
    series = []
    for asset, obs in rows.items():
        obs.sort(key=lambda p: p[0])
        series.append(PriceSeries(asset, tuple(d for d, _ in obs), tuple(p for _, p in obs)))
    return series


def _quarter(d: dt.date) -> tuple[int, int]:
    return d.year, (d.month - 1) // 3


def _resample(series: PriceSeries, period: str | int) -> dict[object, tuple[dt.date, float]]:
    """Map period key -> (date, price) for the observation kept in that period."""
    if period == "quarterly":
        out: dict[object, tuple[dt.date, float]] = {}
        for d, p in zip(series.dates, series.prices):
            out[_quarter(d)] = (d, p)  # later dates overwrite: last obs of quarter
        return out
    return {d: (d, p) for d, p in zip(series.dates, series.prices)}


def compute_returns(prices: Sequence[PriceSeries], period: str | int = 1) -> ReturnMatrix:
    """Simple percent returns on a common grid.

    ``period`` is either ``"quarterly"`` (last observation of each calendar
    quarter) or a positive integer k (every k-th observation of the common
    date grid, starting from the first).
    """
    if not prices:
        raise DegenerateSample("no price series given")
    if period != "quarterly":
        if isinstance(period, str) and not period.isdigit() or isinstance(period, float):
            raise InputError(f"unknown period {period!r}")
        period = int(period)
        if period < 1:
            raise InputError(f"period step must be a positive integer, got {period!r}")

    sampled = [_resample(s, period) for s in prices]
    keys = set(sampled[0])
    for s in sampled[1:]:
        keys &= set(s)
    unit = "quarters" if period == "quarterly" else "dates"
    for s, series in zip(sampled, prices):
        if set(s) != keys:
            raise MisalignedSeries(f"{series.asset_id}: {unit} differ from the other series")
    grid = sorted(keys)
    if isinstance(period, int):
        grid = grid[::period]
    if len(grid) < 2:
        raise DegenerateSample("fewer than 2 common observations after resampling")

    levels = np.array([[s[key][1] for key in grid] for s in sampled])
    returns = 100.0 * (levels[:, 1:] - levels[:, :-1]) / levels[:, :-1]
    end_dates = tuple(sampled[0][key][0] for key in grid[1:])
    return ReturnMatrix(tuple(s.asset_id for s in prices), returns, end_dates)


def estimate_moments(returns: ReturnMatrix) -> MomentEstimates:
    r = returns.returns
    n_periods = r.shape[1]
    if n_periods < 2:
        raise DegenerateSample(f"need T >= 2 return periods, got {n_periods}")
    mu0 = r.mean(axis=1)
    centered = r - mu0[:, None]
    sigma = centered @ centered.T / n_periods
    sigma = 0.5 * (sigma + sigma.T)
    return MomentEstimates(mu0=mu0, sigma=sigma, assets=returns.asset_ids)
