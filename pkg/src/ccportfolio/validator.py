"""Monte Carlo evidence for the chance constraint.

For a candidate allocation x, sample perturbations zeta from concrete
members of the ambiguity family and estimate Prob{mu(zeta)^T x >= tau}
with a Wilson score interval. The verdict is ``pass`` when the lower
bound reaches beta, ``fail`` when the upper bound is below beta, and
``inconclusive`` otherwise.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InvalidDistribution
from .uncertainty import PerturbationFamily, UncertainReturnModel, check_simplex

__all__ = [
    "ScenarioDistribution",
    "DistributionResult",
    "ValidationReport",
    "wilson_interval",
    "sample_scenarios",
    "default_suite",
    "validate",
]

Z95 = 1.959963984540054
MEAN_TOL = 1e-6


@dataclass(frozen=True)
class ScenarioDistribution:
    """Independent per-component law for zeta.

    ``point_mass`` uses ``loc``; ``uniform`` draws from [low, high];
    ``truncated_normal`` is N(loc, scale^2) restricted to [low, high].
    """

    kind: str
    loc: np.ndarray | None = None
    scale: np.ndarray | None = None
    low: np.ndarray | None = None
    high: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        for attr in ("loc", "scale", "low", "high"):
            val = getattr(self, attr)
            if val is not None:
                object.__setattr__(self, attr, np.asarray(val, dtype=float).reshape(-1))
        required = {
            "point_mass": ("loc",),
            "uniform": ("low", "high"),
            "truncated_normal": ("loc", "scale", "low", "high"),
        }
        if self.kind not in required:
            raise InvalidDistribution(f"unknown distribution kind {self.kind!r}")
        sizes = set()
        for attr in required[self.kind]:
            val = getattr(self, attr)
            if val is None:
                raise InvalidDistribution(f"{self.kind} needs {attr}")
            sizes.add(val.size)
        if len(sizes) != 1:
            raise InvalidDistribution("parameter vectors differ in length")
        if self.low is not None and self.high is not None and np.any(self.low > self.high):
            raise InvalidDistribution("low must not exceed high")
        if self.kind == "truncated_normal" and np.any(self.scale < 0):
            raise InvalidDistribution("scale must be non-negative")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def size(self) -> int:
        return (self.loc if self.loc is not None else self.low).size

    def _truncnorm_ab(self):
        safe = np.where(self.scale > 0, self.scale, 1.0)
        return (self.low - self.loc) / safe, (self.high - self.loc) / safe, safe

    def mean(self) -> np.ndarray:
        if self.kind == "point_mass":
            return self.loc.copy()
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high)
        a, b, safe = self._truncnorm_ab()
        m = stats.truncnorm.mean(a, b, loc=self.loc, scale=safe)
        return np.where(self.scale > 0, m, self.loc)

    def std(self) -> np.ndarray:
        if self.kind == "point_mass":
            return np.zeros(self.size)
        if self.kind == "uniform":
            return (self.high - self.low) / math.sqrt(12.0)
        a, b, safe = self._truncnorm_ab()
        return np.where(self.scale > 0, stats.truncnorm.std(a, b, loc=self.loc, scale=safe), 0.0)

    def check_family(self, family: PerturbationFamily) -> None:
        if self.size != family.n_factors:
            raise InvalidDistribution(f"{self.name}: {self.size} components, family has {family.n_factors}")
        m = self.mean()
        bad = (m < family.mean_lower - MEAN_TOL) | (m > family.mean_upper + MEAN_TOL)
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise InvalidDistribution(
                f"{self.name}: component {j + 1} mean {m[j]:.6g} outside "
                f"[{family.mean_lower[j]:g}, {family.mean_upper[j]:g}]"
            )

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "name": self.name}
        for attr in ("loc", "scale", "low", "high"):
            val = getattr(self, attr)
            if val is not None:
                out[attr] = val.tolist()
        return out


def sample_scenarios(
    dist: ScenarioDistribution,
    count: int,
    seed: int | np.random.SeedSequence,
    family: PerturbationFamily | None = None,
) -> np.ndarray:
    """Draw ``count`` independent zeta vectors, shape (count, L)."""
    if count < 1:
        raise InvalidDistribution("count must be >= 1")
    if family is not None:
        dist.check_family(family)
    rng = np.random.default_rng(seed)
    if dist.kind == "point_mass":
        return np.tile(dist.loc, (count, 1))
    if dist.kind == "uniform":
        return rng.uniform(dist.low, dist.high, size=(count, dist.size))
    a, b, safe = dist._truncnorm_ab()
    draws = stats.truncnorm.rvs(a, b, loc=dist.loc, scale=safe, size=(count, dist.size), random_state=rng)
    return np.where(dist.scale > 0, draws, dist.loc)


def wilson_interval(successes: int, count: int, z: float = Z95) -> tuple[float, float]:
    if count <= 0:
        raise ValueError("count must be positive")
    p = successes / count
    z2 = z * z
    denom = 1.0 + z2 / count
    centre = (p + z2 / (2 * count)) / denom
    half = z * math.sqrt(p * (1 - p) / count + z2 / (4 * count * count)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def box_vertices(family: PerturbationFamily) -> list[ScenarioDistribution]:
    out = []
    for corner in itertools.product((0, 1), repeat=family.n_factors):
        loc = np.where(np.array(corner, dtype=bool), family.mean_upper, family.mean_lower)
        tag = "".join("U" if c else "L" for c in corner)
        out.append(ScenarioDistribution("point_mass", loc=loc, name=f"point_mass[{tag}]"))
    return out


def truncated_normals(family: PerturbationFamily) -> list[ScenarioDistribution]:
    """Truncated normals centred at each mean bound, symmetric 3-sigma window."""
    if family.std is not None:
        scale = family.std
    else:
        scale = (family.mean_upper - family.mean_lower) / 6.0
    out = []
    for side, loc in (("lower", family.mean_lower), ("upper", family.mean_upper)):
        out.append(
            ScenarioDistribution(
                "truncated_normal",
                loc=loc,
                scale=scale,
                low=loc - 3.0 * scale,
                high=loc + 3.0 * scale,
                name=f"truncated_normal[{side}]",
            )
        )
    return out


def default_suite(family: PerturbationFamily) -> list[ScenarioDistribution]:
    """Box-vertex point masses, uniform on the box, truncated normals at both bounds."""
    uniform = ScenarioDistribution("uniform", low=family.mean_lower, high=family.mean_upper, name="uniform[box]")
    return [*box_vertices(family), uniform, *truncated_normals(family)]


@dataclass
class DistributionResult:
    name: str
    probability: float
    count: int
    lower: float
    upper: float
    verdict: str

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)


@dataclass
class ValidationReport:
    x: np.ndarray
    tau: float
    beta: float
    results: list[DistributionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.verdict == "pass" for r in self.results)

    def failures(self) -> list[DistributionResult]:
        return [r for r in self.results if r.verdict == "fail"]

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "tau": self.tau,
            "beta": self.beta,
            "results": [
                {
                    "distribution": r.name,
                    "probability": r.probability,
                    "count": r.count,
                    "ci_lower": r.lower,
                    "ci_upper": r.upper,
                    "half_width": r.half_width,
                    "verdict": r.verdict,
                }
                for r in self.results
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        width = max([len("distribution")] + [len(r.name) for r in self.results])
        head = f"{'distribution':<{width}}  {'P(return >= tau)':>16}  {'95% CI':>19}  verdict"
        lines = [f"tau = {self.tau:g}, beta = {self.beta:g}", head, "-" * len(head)]
        for r in self.results:
            ci = f"[{r.lower:.5f}, {r.upper:.5f}]"
            lines.append(f"{r.name:<{width}}  {r.probability:>16.6f}  {ci:>19}  {r.verdict}")
        return "\n".join(lines) + "\n"


def _verdict(lower: float, upper: float, beta: float) -> str:
    if lower >= beta:
        return "pass"
    if upper < beta:
        return "fail"
    return "inconclusive"


def validate(
    x,
    model: UncertainReturnModel,
    dists: list[ScenarioDistribution] | None = None,
    count: int = 100_000,
    seed: int = 0,
) -> ValidationReport:
    """Empirical satisfaction probability of mu(zeta)^T x >= model.tau.

    Each distribution draws from its own child of ``SeedSequence(seed)``,
    so results do not depend on evaluation order.
    """
    x = check_simplex(x, model.n)
    if dists is None:
        dists = default_suite(model.family)
    children = np.random.SeedSequence(seed).spawn(len(dists))
    report = ValidationReport(x, model.tau, model.beta)
    for dist, child in zip(dists, children):
        zeta = sample_scenarios(dist, count, child, model.family)
        ok = int(np.count_nonzero(model.portfolio_returns(x, zeta) >= model.tau))
        lo, hi = wilson_interval(ok, count)
        report.results.append(DistributionResult(dist.name, ok / count, count, lo, hi, _verdict(lo, hi, model.beta)))
    return report
