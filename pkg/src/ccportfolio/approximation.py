"""Deterministic convex surrogates of the ambiguous chance constraint.

Every builder returns a :class:`ConvexProgram` of the form::

    minimize    0.5 x^T Q x
    subject to  a_k^T x <= b_k                       (linear)
                0.5 x^T H_k x + g_k^T x + c_k <= 0   (quadratic)
                sum(x) = 1,  x >= 0

with Q the covariance matrix. The surrogate replaces
Prob{mu(zeta)^T x >= tau} >= beta by E[gamma(tau - mu(zeta)^T x)] <= 1 - beta
for a generating function gamma, then bounds the expectation using only
the moment information of the perturbation family.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, MissingMeanBounds, MissingStd, NonConvexSurrogate
from .market_data import MomentEstimates
from .uncertainty import UncertainReturnModel, effective_mean_coefficients

__all__ = [
    "GeneratingFunctionSpec",
    "GENERATING_FUNCTIONS",
    "verify_generating_function",
    "QuadConstraint",
    "ConvexProgram",
    "build_nominal",
    "build_piecewise_linear",
    "build_bernstein",
    "build_piecewise_quadratic",
    "build_program",
    "piecewise_quadratic_value",
    "KINDS",
]

PSD_TOL_OBJECTIVE = -1e-9
PSD_TOL_SURROGATE = -1e-8


# -- generating functions ---------------------------------------------------


def indicator(t):
    """1 for t > 0, else 0: the function every generator must dominate."""
    return np.where(np.asarray(t, dtype=float) > 0, 1.0, 0.0)


@dataclass(frozen=True)
class GeneratingFunctionSpec:
    kind: str
    evaluator: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t):
        return self.evaluator(np.asarray(t, dtype=float))


def _piecewise_linear(t):
    return np.maximum(0.0, 1.0 + t)


def _piecewise_quadratic(t):
    return (1.0 + t) * np.maximum(0.0, 1.0 + t)


GENERATING_FUNCTIONS = {
    "piecewise_linear": GeneratingFunctionSpec("piecewise_linear", _piecewise_linear),
    "exponential": GeneratingFunctionSpec("exponential", np.exp),
    "piecewise_quadratic": GeneratingFunctionSpec("piecewise_quadratic", _piecewise_quadratic),
}


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    first_violation: float | None = None


@dataclass
class GeneratorReport:
    kind: str
    checks: list[PropertyCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def verify_generating_function(
    spec: GeneratingFunctionSpec,
    lo: float = -10.0,
    hi: float = 10.0,
    step: float = 1e-3,
    far_left: float = -1e6,
) -> GeneratorReport:
    """Grid check of the generator properties.

    Checks non-negativity, monotonicity, midpoint convexity on consecutive
    grid triples, gamma(0) >= 1, decay to 0 at ``far_left`` and domination
    of the 0/1 indicator. Each check records the first violating t.
    """
    if lo > -10.0 or hi < 10.0:
        raise ValueError("grid must cover at least [-10, 10]")
    n = int(round((hi - lo) / step)) + 1
    t = np.linspace(lo, hi, n)
    with np.errstate(over="ignore", invalid="ignore"):
        g = spec(t)
    scale = np.maximum(1.0, np.abs(g))
    tol = 1e-12

    def check(name, mask, where=t):
        idx = np.flatnonzero(mask)
        return PropertyCheck(name, not idx.size, float(where[idx[0]]) if idx.size else None)

    mid_gap = g[1:-1] - 0.5 * (g[:-2] + g[2:])
    g0 = float(spec(np.array([0.0]))[0])
    g_far = float(spec(np.array([far_left]))[0])
    checks = [
        check("non_negative", g < -tol),
        check("non_decreasing", np.diff(g) < -tol * scale[1:], t[1:]),
        check("convex", mid_gap > tol * scale[1:-1], t[1:-1]),
        check("at_zero", np.array([g0 < 1.0]), np.array([0.0])),
        check("vanishes_left", np.array([abs(g_far) > 1e-12]), np.array([far_left])),
        check("dominates_indicator", g < indicator(t) - tol),
    ]
    return GeneratorReport(spec.kind, checks)


# -- canonical program --------------------------------------------------------


def _sym(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(m).min()) if m.size else 0.0


@dataclass(frozen=True)
class QuadConstraint:
    """0.5 x^T H x + g^T x + c <= 0."""

    H: np.ndarray
    g: np.ndarray
    c: float
    label: str = ""

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.g @ x + self.c)


@dataclass(frozen=True)
class ConvexProgram:
    Q: np.ndarray
    A: np.ndarray  # linear rows, shape (m, n): A x <= b
    b: np.ndarray
    linear_labels: tuple[str, ...] = ()
    quad: tuple[QuadConstraint, ...] = ()
    kind: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise DimensionMismatch(f"objective matrix must be square, got {Q.shape}")
        scale = max(1.0, float(np.abs(Q).max(initial=0.0)))
        if np.abs(Q - Q.T).max(initial=0.0) > 1e-12 * scale:
            raise DimensionMismatch("objective matrix is not symmetric")
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise DimensionMismatch("A and b disagree on the number of rows")
        labels = tuple(self.linear_labels) or tuple(f"linear_{k}" for k in range(b.size))
        if len(labels) != b.size:
            raise DimensionMismatch("one label per linear constraint required")
        quad = []
        for k, qc in enumerate(self.quad):
            H = np.asarray(qc.H, dtype=float)
            g = np.asarray(qc.g, dtype=float).reshape(-1)
            if H.shape != (n, n) or g.size != n:
                raise DimensionMismatch(f"quadratic constraint {k} has wrong dimensions")
            quad.append(QuadConstraint(_sym(H), g, float(qc.c), qc.label or f"quad_{k}"))
        object.__setattr__(self, "Q", _sym(Q))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "linear_labels", labels)
        object.__setattr__(self, "quad", tuple(quad))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def n_general(self) -> int:
        """Number of linear + quadratic constraints (bounds excluded)."""
        return self.b.size + len(self.quad)

    @property
    def labels(self) -> tuple[str, ...]:
        """Labels of all inequalities: linear, quadratic, then x_i >= 0."""
        return (
            self.linear_labels
            + tuple(q.label for q in self.quad)
            + tuple(f"x_{i + 1} >= 0" for i in range(self.n))
        )

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x)

    def general_values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lin = self.A @ x - self.b
        quad = [q.value(x) for q in self.quad]
        return np.concatenate([lin, quad])

    def constraint_values(self, x) -> np.ndarray:
        """f_k(x) for every inequality f_k <= 0, in :attr:`labels` order."""
        x = np.asarray(x, dtype=float)
        return np.concatenate([self.general_values(x), -x])

    def constraint_gradients(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        rows = [self.A]
        if self.quad:
            rows.append(np.array([q.H @ x + q.g for q in self.quad]))
        rows.append(-np.eye(self.n))
        return np.vstack(rows)

    def min_eigenvalues(self) -> tuple[float, list[float]]:
        return _min_eig(self.Q), [_min_eig(q.H) for q in self.quad]

    def max_violation(self, x) -> float:
        """Largest violation of any inequality or of sum(x) = 1."""
        x = np.asarray(x, dtype=float)
        viol = max(0.0, float(self.constraint_values(x).max(initial=-np.inf)))
        return max(viol, abs(float(x.sum()) - 1.0))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "meta": self.meta,
            "objective_Q": self.Q.tolist(),
            "linear_ineqs": [
                {"a": a.tolist(), "b": float(bk), "label": lab}
                for a, bk, lab in zip(self.A, self.b, self.linear_labels)
            ],
            "quad_ineqs": [
                {"H": q.H.tolist(), "g": q.g.tolist(), "c": q.c, "label": q.label} for q in self.quad
            ],
            "equality": "sum(x) = 1",
            "bounds": "x >= 0",
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConvexProgram":
        Q = np.asarray(data["objective_Q"], dtype=float)
        lin = data.get("linear_ineqs", [])
        return cls(
            Q=Q,
            A=np.array([row["a"] for row in lin], dtype=float).reshape(-1, Q.shape[0]),
            b=np.array([row["b"] for row in lin], dtype=float),
            linear_labels=tuple(row.get("label", "") for row in lin),
            quad=tuple(
                QuadConstraint(np.asarray(q["H"]), np.asarray(q["g"]), float(q["c"]), q.get("label", ""))
                for q in data.get("quad_ineqs", [])
            ),
            kind=data.get("kind", "custom"),
            meta=dict(data.get("meta", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# -- builders -----------------------------------------------------------------

KINDS = ("nominal", "piecewise_linear", "bernstein", "piecewise_quadratic")


def _require_bounds(model: UncertainReturnModel) -> None:
    fam = model.family
    if fam is None or fam.mean_lower is None or fam.mean_upper is None:
        raise MissingMeanBounds("the perturbation family needs mean bounds")


def _warn_negative_shifts(model: UncertainReturnModel) -> None:
    if np.any(model.shifts.matrix < 0):
        warnings.warn(
            "negative shift entries: the lower-mean-bound surrogate is only a valid bound "
            "for non-negative shift/weight products",
            stacklevel=3,
        )


def _check_dims(model: UncertainReturnModel, moments: MomentEstimates) -> None:
    if model.n != moments.n:
        raise DimensionMismatch(f"model has {model.n} assets, moments have {moments.n}")


def build_nominal(moments: MomentEstimates, tau: float) -> ConvexProgram:
    return ConvexProgram(
        Q=moments.sigma,
        A=-moments.mu0[None, :],
        b=np.array([-float(tau)]),
        linear_labels=("nominal return >= tau",),
        kind="nominal",
        meta={"tau": float(tau)},
    )


def build_piecewise_linear(model: UncertainReturnModel, moments: MomentEstimates) -> ConvexProgram:
    """Surrogate from gamma(t) = [1 + t]_+.

    1 + tau - mu_eff^T x <= 1 - beta, i.e. mu_eff^T x >= tau + beta, with
    mu_eff built from the lower mean bounds. The branch E[0] <= 1 - beta
    holds for any beta < 1 and is not emitted.
    """
    _require_bounds(model)
    _check_dims(model, moments)
    _warn_negative_shifts(model)
    mu_eff = effective_mean_coefficients(model, "lower")
    return ConvexProgram(
        Q=moments.sigma,
        A=-mu_eff[None, :],
        b=np.array([-(model.tau + model.beta)]),
        linear_labels=("piecewise-linear surrogate (zero branch dropped)",),
        kind="piecewise_linear",
        meta={"tau": model.tau, "beta": model.beta},
    )


def build_bernstein(model: UncertainReturnModel, moments: MomentEstimates) -> ConvexProgram:
    """Surrogate from gamma(t) = exp(t): mu_eff^T x >= tau - ln(1 - beta)."""
    _require_bounds(model)
    _check_dims(model, moments)
    _warn_negative_shifts(model)
    mu_eff = effective_mean_coefficients(model, "lower")
    return ConvexProgram(
        Q=moments.sigma,
        A=-mu_eff[None, :],
        b=np.array([-(model.tau - math.log(1.0 - model.beta))]),
        linear_labels=("bernstein surrogate",),
        kind="bernstein",
        meta={"tau": model.tau, "beta": model.beta},
    )


def piecewise_quadratic_value(model: UncertainReturnModel, x) -> float:
    """Direct evaluation of the piecewise-quadratic surrogate, minus (1 - beta).

    With a = 1 + tau - mu0^T x and w = shifts @ x::

        a^2 + sum_j w_j^2 s_j^2 + (w . m^U)^2 - 2 a (w . m^L) - (1 - beta)
    """
    fam = model.family
    x = np.asarray(x, dtype=float)
    a = 1.0 + model.tau - model.mu0 @ x
    w = model.factor_loadings(x)
    s = fam.std if fam.std is not None else np.zeros_like(w)
    return float(
        a * a + np.sum(w * w * s * s) + (w @ fam.mean_upper) ** 2 - 2.0 * a * (w @ fam.mean_lower) - (1.0 - model.beta)
    )


def build_piecewise_quadratic(model: UncertainReturnModel, moments: MomentEstimates) -> ConvexProgram:
    """Surrogate from gamma(t) = (1 + t) [1 + t]_+, a single convex quadratic.

    Requires mean bounds, standard deviations and independent components.
    Raises :class:`NonConvexSurrogate` when the expanded Hessian has an
    eigenvalue below -1e-8, which can happen for asymmetric mean bounds.
    """
    _require_bounds(model)
    _check_dims(model, moments)
    fam = model.family
    if fam.std is None:
        raise MissingStd("the piecewise-quadratic surrogate needs standard deviations")
    if not fam.independent:
        raise MissingStd("the piecewise-quadratic surrogate needs independent perturbations")
    _warn_negative_shifts(model)

    M = model.shifts.matrix
    mu0 = model.mu0
    alpha = 1.0 + model.tau
    up = M.T @ fam.mean_upper
    low = M.T @ fam.mean_lower
    half_H = (
        np.outer(mu0, mu0)
        + M.T @ np.diag(fam.std**2) @ M
        + np.outer(up, up)
        + np.outer(mu0, low)
        + np.outer(low, mu0)
    )
    H = _sym(2.0 * half_H)
    g = -2.0 * alpha * (mu0 + low)
    c = alpha * alpha - (1.0 - model.beta)

    lam = _min_eig(H)
    if lam < PSD_TOL_SURROGATE:
        raise NonConvexSurrogate(f"surrogate Hessian has eigenvalue {lam:.3e} < {PSD_TOL_SURROGATE:g}")
    return ConvexProgram(
        Q=moments.sigma,
        A=np.zeros((0, model.n)),
        b=np.zeros(0),
        quad=(QuadConstraint(H, g, c, "piecewise-quadratic surrogate (zero branch dropped)"),),
        kind="piecewise_quadratic",
        meta={"tau": model.tau, "beta": model.beta},
    )


_BUILDERS = {
    "piecewise_linear": build_piecewise_linear,
    "bernstein": build_bernstein,
    "piecewise_quadratic": build_piecewise_quadratic,
}


def build_program(kind: str, model: UncertainReturnModel, moments: MomentEstimates) -> ConvexProgram:
    """Dispatch on ``kind``; ``nominal`` uses the moments' mean and model.tau."""
    if kind == "nominal":
        return build_nominal(moments, model.tau)
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}") from None
    return builder(model, moments)
