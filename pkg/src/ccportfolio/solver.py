"""Primal log-barrier interior-point solver for simplex-constrained QCQPs.

The budget equality sum(x) = 1 is eliminated with an orthonormal null-space
basis, so Newton steps run in n - 1 free variables. A phase-1 problem
(minimize the largest violation of the linear/quadratic constraints while
keeping x > 0) supplies a strictly feasible start or an infeasibility
certificate. No randomness anywhere: identical inputs give identical
iterates.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import nnls

from .approximation import PSD_TOL_OBJECTIVE, PSD_TOL_SURROGATE, ConvexProgram
from .errors import DimensionMismatch, NonConvexRejected

__all__ = [
    "SolveOptions",
    "Solution",
    "FeasibilityResult",
    "solve",
    "feasibility_phase",
    "kkt_residual",
    "estimate_multipliers",
]

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"
NONCONVEX = "nonconvex_rejected"

# final barrier parameter satisfies m / t <= GAP_FACTOR * tol_kkt
GAP_FACTOR = 0.1
CENTERING_TOL = 1e-12
MAX_BACKTRACK = 80
# weights below this are treated as zero when phase 1 ends on a face
FACE_SNAP = 1e-6


@dataclass(frozen=True)
class SolveOptions:
    tol_kkt: float = 1e-8
    tol_feas: float = 1e-9
    max_iterations: int = 200
    barrier_mu_reduction: float = 0.2

    def __post_init__(self):
        if self.tol_kkt <= 0 or self.tol_feas <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.barrier_mu_reduction < 1.0:
            raise ValueError("barrier_mu_reduction must lie in (0, 1)")


@dataclass
class Solution:
    status: str
    x: np.ndarray
    objective: float
    kkt_residual: float
    active_constraints: tuple[str, ...] = ()
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    violation: float = 0.0
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def to_dict(self) -> dict:
        def finite(v):
            return None if v is None or not np.isfinite(v) else float(v)

        return {
            "status": self.status,
            "x": self.x.tolist(),
            "objective": finite(self.objective),
            "kkt_residual": finite(self.kkt_residual),
            "active_constraints": list(self.active_constraints),
            "multipliers": self.multipliers.tolist(),
            "violation": finite(self.violation),
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Solution":
        def num(v):
            return float("nan") if v is None else float(v)

        return cls(
            status=data["status"],
            x=np.asarray(data["x"], dtype=float),
            objective=num(data.get("objective")),
            kkt_residual=num(data.get("kkt_residual")),
            active_constraints=tuple(data.get("active_constraints", ())),
            multipliers=np.asarray(data.get("multipliers", []), dtype=float),
            violation=num(data.get("violation", 0.0)),
            iterations=int(data.get("iterations", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass
class FeasibilityResult:
    feasible: bool
    x: np.ndarray
    violation: float  # max general-constraint value at x; < 0 means strictly interior
    iterations: int = 0


# -- helpers ------------------------------------------------------------------


def _null_space(n: int) -> np.ndarray:
    _, _, vt = np.linalg.svd(np.ones((1, n)))
    return vt[1:].T


def _newton_step(hess, grad) -> np.ndarray:
    """-hess^{-1} grad, falling back to least squares when the barrier
    Hessian is numerically singular (iterates pressed against a face)."""
    try:
        return -np.linalg.solve(hess, grad)
    except np.linalg.LinAlgError:
        return -np.linalg.lstsq(hess, grad, rcond=None)[0]


def _check_program(program: ConvexProgram) -> None:
    if program.n < 1:
        raise DimensionMismatch("program has no variables")
    lam_q, lam_h = program.min_eigenvalues()
    if lam_q < PSD_TOL_OBJECTIVE * max(1.0, np.abs(program.Q).max()):
        raise NonConvexRejected(f"objective matrix has eigenvalue {lam_q:.3e}")
    for q, lam in zip(program.quad, lam_h):
        if lam < PSD_TOL_SURROGATE:
            raise NonConvexRejected(f"{q.label}: Hessian has eigenvalue {lam:.3e}")


def _quad_hessian_sum(program: ConvexProgram, weights) -> np.ndarray:
    out = np.zeros((program.n, program.n))
    for q, wk in zip(program.quad, weights):
        out += wk * q.H
    return out


def kkt_residual(program: ConvexProgram, x, multipliers) -> float:
    """Largest KKT violation at x for the given inequality multipliers.

    ``multipliers`` follow :attr:`ConvexProgram.labels` order. The budget
    multiplier is the least-squares choice, which amounts to removing the
    mean of the stationarity vector.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(multipliers, dtype=float)
    F = program.constraint_values(x)
    if lam.shape != F.shape:
        raise DimensionMismatch(f"expected {F.size} multipliers, got {lam.size}")
    r = program.Q @ x + program.constraint_gradients(x).T @ lam
    r = r - r.mean()
    stationarity = float(np.abs(r).max(initial=0.0))
    complementarity = float(np.abs(lam * F).max(initial=0.0))
    dual = float(np.maximum(0.0, -lam).max(initial=0.0))
    return max(stationarity, complementarity, dual)


def estimate_multipliers(program: ConvexProgram, x, active_tol: float = 1e-7) -> np.ndarray:
    """Non-negative least-squares multipliers on the near-active constraints."""
    x = np.asarray(x, dtype=float)
    F = program.constraint_values(x)
    G = program.constraint_gradients(x)
    active = np.flatnonzero(F >= -active_tol)
    e = np.ones((program.n, 1))
    mat = np.hstack([G[active].T, e, -e])
    coef, _ = nnls(mat, -(program.Q @ x))
    lam = np.zeros(F.size)
    lam[active] = coef[: active.size]
    return lam


# -- phase 1 ------------------------------------------------------------------


def feasibility_phase(program: ConvexProgram, options: SolveOptions | None = None) -> FeasibilityResult:
    """Find a point of the simplex interior with every constraint slack.

    Solves min s s.t. f_k(x) <= s, sum(x) = 1, x > 0 by a barrier method.
    Stops early once the iterate is strictly feasible; otherwise the
    converged s is the minimized maximal violation and serves as the
    infeasibility evidence.
    """
    options = options or SolveOptions()
    n = program.n
    m = program.n_general
    x = np.full(n, 1.0 / n)
    if n == 1 or m == 0:
        viol = float(program.general_values(x).max(initial=-np.inf)) if m else -np.inf
        return FeasibilityResult(viol <= options.tol_feas, x, viol)

    Z = _null_space(n)
    J = np.zeros((n + 1, n))  # (y, s) -> (x, s)
    J[:n, : n - 1] = Z
    J[n, n - 1] = 1.0

    def values(xv):
        return program.general_values(xv)

    def phi(xv, s, t):
        slack = s - values(xv)
        if np.any(slack <= 0) or np.any(xv <= 0):
            return np.inf
        return t * s - np.log(slack).sum() - np.log(xv).sum()

    f0 = values(x)
    s = float(f0.max()) + max(1.0, abs(float(f0.max())))
    t = 1.0
    iters = 0
    # margin for early exit: a clearly interior point for phase 2
    margin = 1e-6 * max(1.0, float(np.abs(f0).max()))
    while True:
        for _ in range(options.max_iterations):
            F = values(x)
            if F.max() < -margin:
                return FeasibilityResult(True, x, float(F.max()), iters)
            slack = s - F
            G = program.constraint_gradients(x)[:m]
            inv = 1.0 / slack
            grad = np.zeros(n + 1)
            grad[:n] = G.T @ inv - 1.0 / x
            grad[n] = t - inv.sum()
            hess = np.zeros((n + 1, n + 1))
            hess[:n, :n] = (G.T * inv**2) @ G + np.diag(1.0 / x**2)
            if program.quad:
                hess[:n, :n] += _quad_hessian_sum(program, inv[program.b.size :])
            hess[:n, n] = hess[n, :n] = -(G.T @ inv**2)
            hess[n, n] = float((inv**2).sum())
            gr = J.T @ grad
            hr = J.T @ hess @ J
            step = _newton_step(hr, gr)
            dec = float(-gr @ step)
            iters += 1
            if dec / 2 <= CENTERING_TOL:
                break
            dz = J @ step
            base = phi(x, s, t)
            alpha = 1.0
            for _ in range(MAX_BACKTRACK):
                val = phi(x + alpha * dz[:n], s + alpha * dz[n], t)
                if val <= base - 0.25 * alpha * dec:
                    break
                alpha *= 0.5
            else:
                break
            x = x + alpha * dz[:n]
            s = s + alpha * dz[n]
        if (m + n) / t <= GAP_FACTOR * options.tol_feas:
            break
        if iters >= options.max_iterations:
            log.warning("phase 1 stopped after %d Newton steps", iters)
            break
        t /= options.barrier_mu_reduction

    viol = float(values(x).max())
    feasible = viol <= options.tol_feas
    if not feasible:
        # feasible set confined to a face: x > 0 keeps s slightly positive,
        # so judge the snapped point instead
        snapped = np.where(x < FACE_SNAP, 0.0, x)
        snapped /= snapped.sum()
        feasible = float(values(snapped).max()) <= options.tol_feas
    return FeasibilityResult(feasible, x, viol, iters)


# -- phase 2 ------------------------------------------------------------------


def _barrier_solve(program, x, shift, options):
    """Path-following from strictly feasible x; returns (x, t, iters, converged)."""
    n = program.n
    m_all = program.n_general + n
    Z = _null_space(n)
    nq0 = program.b.size
    shift_all = np.concatenate([np.full(program.n_general, shift), np.zeros(n)])

    def values(xv):
        return program.constraint_values(xv) - shift_all

    def phi(xv, t):
        F = values(xv)
        if np.any(F >= 0):
            return np.inf
        return t * program.objective(xv) - np.log(-F).sum()

    t = 1.0
    iters = 0
    target = m_all / (GAP_FACTOR * options.tol_kkt)
    while True:
        for _ in range(options.max_iterations):
            F = values(x)
            G = program.constraint_gradients(x)
            inv = 1.0 / (-F)
            grad = t * (program.Q @ x) + G.T @ inv
            hess = t * program.Q + (G.T * inv**2) @ G
            if program.quad:
                hess += _quad_hessian_sum(program, inv[nq0 : program.n_general])
            gr = Z.T @ grad
            hr = Z.T @ hess @ Z
            dy = _newton_step(hr, gr)
            dec = float(-gr @ dy)
            iters += 1
            if dec / 2 <= CENTERING_TOL:
                break
            dx = Z @ dy
            base = phi(x, t)
            alpha = 1.0
            for _ in range(MAX_BACKTRACK):
                if phi(x + alpha * dx, t) <= base - 0.25 * alpha * dec:
                    break
                alpha *= 0.5
            else:
                # merit decrease below floating-point resolution
                break
            x_new = x + alpha * dx
            if np.abs(x_new - x).max() <= 4 * np.finfo(float).eps:
                break  # stagnated: slacks are at rounding level
            x = x_new
            if iters >= options.max_iterations:
                return x, t, iters, False
        if t >= target:
            return x, t, iters, True
        if iters >= options.max_iterations:
            return x, t, iters, False
        t = min(t / options.barrier_mu_reduction, target)


def _polish(program: ConvexProgram, x, lam, active_idx, tol_feas):
    """Newton on the KKT equations of the identified active set.

    Returns (x, lam) refined, or None when the refinement leaves the
    feasible set or produces a negative multiplier.
    """
    n = program.n
    nl, ng = program.b.size, program.n_general
    k = active_idx.size
    x = x.copy()
    lam_a = lam[active_idx].copy()
    nu = 0.0
    e = np.ones(n)
    for _ in range(20):
        F = program.constraint_values(x)[active_idx]
        G = program.constraint_gradients(x)[active_idx]
        hess = program.Q.copy()
        for j, idx in enumerate(active_idx):
            if nl <= idx < ng:
                hess += lam_a[j] * program.quad[idx - nl].H
        r_stat = program.Q @ x + G.T @ lam_a + nu * e
        r = np.concatenate([r_stat, F, [x.sum() - 1.0]])
        if np.abs(r).max() <= 1e-15 * max(1.0, np.abs(program.Q).max()):
            break
        kkt = np.zeros((n + k + 1, n + k + 1))
        kkt[:n, :n] = hess
        kkt[:n, n : n + k] = G.T
        kkt[n : n + k, :n] = G
        kkt[:n, -1] = e
        kkt[-1, :n] = e
        step = np.linalg.lstsq(kkt, -r, rcond=None)[0]
        x = x + step[:n]
        lam_a = lam_a + step[n : n + k]
        nu = nu + step[-1]
    if np.any(lam_a < 0) or program.max_violation(x) > tol_feas:
        return None
    bounds = active_idx[active_idx >= ng] - ng
    snapped = x.copy()
    snapped[bounds] = 0.0  # Newton leaves ~1e-17 residue on active bounds
    if program.max_violation(snapped) <= tol_feas:
        x = snapped
    out = np.zeros_like(lam)
    out[active_idx] = lam_a
    return x, out


def _face_minimizer(program: ConvexProgram, zero) -> np.ndarray | None:
    """argmin 0.5 x'Qx s.t. sum(x) = 1, x[zero] = 0, ignoring other constraints."""
    free = np.setdiff1d(np.arange(program.n), zero)
    if free.size == 0:
        return None
    m = free.size
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = program.Q[np.ix_(free, free)]
    kkt[:m, m] = kkt[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    if np.any(sol[:m] < 0):
        return None
    x = np.zeros(program.n)
    x[free] = sol[:m]
    return x


def _precondition(program: ConvexProgram):
    """Centre and normalise linear rows; exact on the simplex since sum(x) = 1.

    a.x <= b becomes (a - c 1).x / k <= (b - c) / k with c = mean(a) and
    k = ||a - c 1||. Rows with k ~ 0 are constant on the simplex and are
    split off: returns (program, kept row indices, their k, constant-row
    values c - b).
    """
    A, b = program.A, program.b
    c = A.mean(axis=1)
    A = A - c[:, None]
    k = np.linalg.norm(A, axis=1)
    keep = np.flatnonzero(k > 1e-12 * np.maximum(1.0, np.linalg.norm(program.A, axis=1)))
    const = np.setdiff1d(np.arange(b.size), keep)
    work = replace(
        program,
        A=A[keep] / k[keep, None],
        b=(b[keep] - c[keep]) / k[keep],
        linear_labels=tuple(program.linear_labels[i] for i in keep),
    )
    return work, keep, k[keep], c[const] - b[const]


def solve(program: ConvexProgram, options: SolveOptions | None = None) -> Solution:
    """Minimize 0.5 x^T Q x over the program's feasible set.

    Multipliers, KKT residual and violation are reported against
    ``program`` as given, not against the internally rescaled copy.
    """
    options = options or SolveOptions()
    _check_program(program)
    work, keep, k, const_values = _precondition(program)
    if const_values.size and const_values.max() > options.tol_feas:
        x = np.full(program.n, 1.0 / program.n)
        return Solution(INFEASIBLE, x, program.objective(x), np.inf, violation=float(const_values.max()))
    sol = _solve(work, options)
    if sol.status == INFEASIBLE:
        sol.violation = float(program.general_values(sol.x).max())
        return sol
    nl = program.b.size
    lam = np.zeros(len(program.labels))
    lam[keep] = sol.multipliers[: keep.size] / k
    lam[nl:] = sol.multipliers[keep.size :]
    sol.multipliers = lam
    sol.kkt_residual = kkt_residual(program, sol.x, lam)
    sol.violation = program.max_violation(sol.x)
    sol.objective = program.objective(sol.x)
    if sol.status == OPTIMAL and (sol.kkt_residual > options.tol_kkt or sol.violation > options.tol_feas):
        sol.status = MAX_ITER
    return sol


def _solve(program: ConvexProgram, options: SolveOptions) -> Solution:
    n = program.n

    if n == 1:
        x = np.ones(1)
        viol = program.max_violation(x)
        status = OPTIMAL if viol <= options.tol_feas else INFEASIBLE
        lam = np.zeros(program.n_general + 1)
        return Solution(status, x, program.objective(x), 0.0 if status == OPTIMAL else np.inf,
                        violation=viol, multipliers=lam)

    phase1 = feasibility_phase(program, options)
    if not phase1.feasible:
        return Solution(
            INFEASIBLE,
            phase1.x,
            program.objective(phase1.x),
            np.inf,
            violation=phase1.violation,
            iterations=phase1.iterations,
        )
    # feasible set with (numerically) empty interior: relax by a hair
    shift = 0.0 if phase1.violation < 0 else phase1.violation + 1e-12

    x, t, iters, converged = _barrier_solve(program, phase1.x, shift, options)
    F = program.constraint_values(x) - np.concatenate([np.full(program.n_general, shift), np.zeros(n)])
    lam = 1.0 / (t * (-F))
    kkt = kkt_residual(program, x, lam)
    active_idx = np.flatnonzero(lam >= -F)
    polished = _polish(program, x, lam, active_idx, options.tol_feas) if converged else None
    if polished is not None:
        px, plam = polished
        pkkt = kkt_residual(program, px, plam)
        scale = max(1.0, abs(program.objective(x)))
        if pkkt < kkt and program.objective(px) <= program.objective(x) + 1e-12 * scale:
            x, lam, kkt = px, plam, pkkt
    if converged and kkt > options.tol_kkt:
        # degenerate active set (a single feasible vertex, a row duplicating
        # a bound): the Newton polish is singular. Snap the active bounds,
        # try the budget-only optimum on that face, certify with NNLS.
        bounds = active_idx[active_idx >= program.n_general] - program.n_general
        sx = x.copy()
        sx[bounds] = 0.0
        sx /= sx.sum()
        for cand in (_face_minimizer(program, bounds), sx):
            if cand is None or program.max_violation(cand) > options.tol_feas:
                continue
            clam = estimate_multipliers(program, cand, active_tol=options.tol_feas)
            ckkt = kkt_residual(program, cand, clam)
            if ckkt < kkt:
                x, lam, kkt = cand, clam, ckkt
    active = tuple(program.labels[i] for i in active_idx)
    status = OPTIMAL if converged and kkt <= options.tol_kkt else MAX_ITER
    if status != OPTIMAL:
        log.warning("solver stopped without certificate: kkt=%.3e after %d steps", kkt, iters)
    return Solution(
        status,
        x,
        program.objective(x),
        kkt,
        active_constraints=active,
        multipliers=lam,
        violation=program.max_violation(x),
        iterations=phase1.iterations + iters,
    )
