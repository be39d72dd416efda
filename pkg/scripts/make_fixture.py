"""Regenerate src/ccportfolio/data/nifty_prices.csv.

Quarterly prices are synthetic: returns are mu0 + chol(sigma) z with z
centred and whitened so that the population moments of the returns
reproduce the bundled preset exactly.
"""

import datetime as dt
from pathlib import Path

import numpy as np

from ccportfolio.presets import ASSETS, MU0, SIGMA

T = 20
START = dt.date(2017, 6, 30)


def quarter_ends(start: dt.date, count: int) -> list[dt.date]:
    out, y, m = [], start.year, start.month
    for _ in range(count):
        nxt = dt.date(y + (m == 12), m % 12 + 1, 1)
        out.append(nxt - dt.timedelta(days=1))
        m += 3
        if m > 12:
            y, m = y + 1, m - 12
    return out


def main(path: Path) -> None:
    rng = np.random.default_rng(20170630)
    z = rng.standard_normal((len(MU0), T))
    z -= z.mean(axis=1, keepdims=True)
    # whiten so that z z^T / T == I
    cov = z @ z.T / T
    z = np.linalg.solve(np.linalg.cholesky(cov), z)
    returns = MU0[:, None] + np.linalg.cholesky(SIGMA) @ z
    prices = 100.0 * np.cumprod(np.hstack([np.ones((len(MU0), 1)), 1 + returns / 100]), axis=1)
    dates = quarter_ends(START, T + 1)
    lines = ["date,asset,price"]
    for i, asset in enumerate(ASSETS):
        lines += [f"{d.isoformat()},{asset},{float(p)!r}" for d, p in zip(dates, prices[i])]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main(Path(__file__).resolve().parents[1] / "src" / "ccportfolio" / "data" / "nifty_prices.csv")
