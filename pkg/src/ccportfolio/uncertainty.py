"""Uncertain expected returns mu(zeta) = mu0 + sum_j zeta_j * shift_j.

The perturbation family is described only through componentwise mean
bounds and, optionally, standard deviations of the independent components
zeta_j.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np

from .errors import InvalidModel, InvalidWeights

__all__ = [
    "BasicShifts",
    "PerturbationFamily",
    "UncertainReturnModel",
    "effective_mean_coefficients",
    "worst_case_mean_return",
    "check_simplex",
]


def _vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidModel(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class BasicShifts:
    """L shift directions stored as an L x n matrix (row j is shift j)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if m.ndim != 2 or m.shape[0] < 1:
            raise InvalidModel("need at least one shift vector")
        if not np.all(np.isfinite(m)):
            raise InvalidModel("shift entries must be finite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def diagonal(cls, scales) -> "BasicShifts":
        """One shift per asset, shift j moving only asset j by scales[j]."""
        return cls(np.diag(_vector(scales, "scales")))

    @property
    def n_factors(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_assets(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class PerturbationFamily:
    mean_lower: np.ndarray
    mean_upper: np.ndarray
    std: Optional[np.ndarray] = None
    independent: bool = True

    def __post_init__(self):
        lo = _vector(self.mean_lower, "mean_lower")
        hi = _vector(self.mean_upper, "mean_upper")
        if lo.shape != hi.shape:
            raise InvalidModel("mean_lower and mean_upper differ in length")
        if np.any(lo > hi):
            raise InvalidModel("mean_lower must not exceed mean_upper")
        object.__setattr__(self, "mean_lower", lo)
        object.__setattr__(self, "mean_upper", hi)
        if self.std is not None:
            s = _vector(self.std, "std")
            if s.shape != lo.shape:
                raise InvalidModel("std must have one entry per perturbation factor")
            if np.any(s < 0):
                raise InvalidModel("std entries must be non-negative")
            object.__setattr__(self, "std", s)

    @property
    def n_factors(self) -> int:
        return self.mean_lower.size


@dataclass(frozen=True)
class UncertainReturnModel:
    mu0: np.ndarray
    shifts: BasicShifts
    family: PerturbationFamily
    beta: float = 0.95
    tau: float = 0.0

    def __post_init__(self):
        mu0 = _vector(self.mu0, "mu0")
        object.__setattr__(self, "mu0", mu0)
        if not 0.0 < self.beta < 1.0:
            raise InvalidModel(f"beta must lie in (0, 1), got {self.beta!r}")
        if not np.isfinite(self.tau):
            raise InvalidModel("tau must be finite")
        if self.shifts.n_assets != mu0.size:
            raise InvalidModel("shift vectors must have one entry per asset")
        if self.shifts.n_factors != self.family.n_factors:
            raise InvalidModel("number of shifts differs from number of perturbation factors")

    @property
    def n(self) -> int:
        return self.mu0.size

    def with_target(self, tau: float | None = None, beta: float | None = None) -> "UncertainReturnModel":
        return replace(
            self,
            tau=self.tau if tau is None else float(tau),
            beta=self.beta if beta is None else float(beta),
        )

    def factor_loadings(self, x) -> np.ndarray:
        """w_j = shift_j . x, the exposure of the portfolio to factor j."""
        return self.shifts.matrix @ np.asarray(x, dtype=float)

    def portfolio_returns(self, x, zeta) -> np.ndarray:
        """mu(zeta)^T x for each row of ``zeta`` (shape (count, L))."""
        x = np.asarray(x, dtype=float)
        return self.mu0 @ x + np.asarray(zeta, dtype=float) @ self.factor_loadings(x)

    def to_dict(self) -> dict:
        fam = self.family
        return {
            "mu0": self.mu0.tolist(),
            "shifts": self.shifts.matrix.tolist(),
            "mean_lower": fam.mean_lower.tolist(),
            "mean_upper": fam.mean_upper.tolist(),
            "std": None if fam.std is None else fam.std.tolist(),
            "beta": self.beta,
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UncertainReturnModel":
        try:
            family = PerturbationFamily(
                mean_lower=data["mean_lower"],
                mean_upper=data["mean_upper"],
                std=data.get("std"),
                independent=bool(data.get("independent", True)),
            )
            return cls(
                mu0=data["mu0"],
                shifts=BasicShifts(data["shifts"]),
                family=family,
                beta=float(data.get("beta", 0.95)),
                tau=float(data.get("tau", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidModel(f"invalid model document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "UncertainReturnModel":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidModel(f"invalid JSON: {exc}") from exc


def effective_mean_coefficients(
    model: UncertainReturnModel, bound_side: Literal["lower", "upper"] = "lower"
) -> np.ndarray:
    """mu0 + sum_j shift_j * m_j for the chosen bound side."""
    if bound_side == "lower":
        m = model.family.mean_lower
    elif bound_side == "upper":
        m = model.family.mean_upper
    else:
        raise ValueError(f"bound_side must be 'lower' or 'upper', got {bound_side!r}")
    return model.mu0 + model.shifts.matrix.T @ m


def check_simplex(x, n: int | None = None, tol: float = 1e-8) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and x.size != n:
        raise InvalidWeights(f"expected {n} weights, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidWeights("weights must be finite")
    if abs(x.sum() - 1.0) > tol or np.any(x < -tol):
        raise InvalidWeights("weights must be non-negative and sum to 1")
    return x


def worst_case_mean_return(model: UncertainReturnModel, x) -> float:
    """Smallest E[mu(zeta)]^T x over admissible perturbation means.

    Each factor contributes E[zeta_j] * w_j with w_j = shift_j . x, so the
    minimum takes m^L where w_j >= 0 and m^U where w_j < 0.
    """
    x = check_simplex(x, model.n)
    w = model.factor_loadings(x)
    fam = model.family
    worst = np.where(w >= 0, fam.mean_lower, fam.mean_upper)
    return float(model.mu0 @ x + w @ worst)
