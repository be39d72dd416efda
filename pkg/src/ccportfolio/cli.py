"""Command-line entry point: ``ccportfolio {estimate,solve,frontier,validate}``.

Exit codes: 0 success, 2 input or configuration error, 3 infeasible,
4 solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import presets
from .approximation import KINDS, build_program
from .errors import InputError, PortfolioError
from .frontier import emit, parse_tau_range, sweep
from .market_data import MomentEstimates, compute_returns, estimate_moments, read_prices_csv
from .solver import INFEASIBLE, Solution, solve
from .uncertainty import UncertainReturnModel
from .validator import validate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_CONVERGED = 4

log = logging.getLogger("ccportfolio")


class ConfigError(InputError):
    pass


@dataclass
class RunConfig:
    """Settings for one run: file config first, then command-line flags on top."""

    command: str = ""
    prices: str | None = None
    period: str = "quarterly"
    model: str | None = None
    moments: str | None = None
    preset: str | None = None
    solution: str | None = None
    kind: str = "piecewise_linear"
    tau: float | None = None
    beta: float | None = None
    tau_range: str | None = None
    count: int = 100_000
    seed: int = 0
    out: str | None = None
    out_csv: str | None = None
    out_svg: str | None = None
    out_json: str | None = None

    @classmethod
    def merge(cls, file_values: dict, flags: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(file_values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged = dict(file_values)
        merged.update({k: v for k, v in flags.items() if k in known and v is not None})
        return cls(**merged)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from exc


def _check_writable(path: str | None) -> None:
    if path is None:
        return
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if p.is_dir():
        raise ConfigError(f"output path {path} is a directory")
    if not parent.is_dir() or not os.access(parent, os.W_OK) or (p.exists() and not os.access(p, os.W_OK)):
        raise ConfigError(f"output path {path} is not writable")


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_inputs(cfg: RunConfig) -> tuple[UncertainReturnModel, MomentEstimates]:
    if cfg.preset is not None:
        if cfg.preset not in presets.PRESETS:
            raise ConfigError(f"unknown preset {cfg.preset!r}")
        model, moments = presets.paper_model(), presets.paper_moments()
    elif cfg.model is None or cfg.moments is None:
        raise ConfigError("give --preset or both --model and --moments")
    else:
        model = UncertainReturnModel.from_json(_read_text(cfg.model, "model"))
        moments = MomentEstimates.from_json(_read_text(cfg.moments, "moments"))
    # explicit model/moments files override preset parts when both are given
    if cfg.preset is not None and cfg.model is not None:
        model = UncertainReturnModel.from_json(_read_text(cfg.model, "model"))
    if cfg.preset is not None and cfg.moments is not None:
        moments = MomentEstimates.from_json(_read_text(cfg.moments, "moments"))
    return model.with_target(tau=cfg.tau, beta=cfg.beta), moments


def _check_kind(kind: str, allow_all: bool = False) -> list[str]:
    if allow_all and kind == "all":
        return list(KINDS)
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    return [kind]


# -- subcommands --------------------------------------------------------------
def cmd_estimate(cfg: RunConfig) -> int:
    if cfg.prices is None:
        raise ConfigError("estimate needs a prices CSV")
    _check_writable(cfg.out)
    period: str | int = cfg.period
    if isinstance(period, str) and period.isdigit():
        period = int(period)
    moments = estimate_moments(compute_returns(read_prices_csv(cfg.prices), period))
    _write(moments.to_json(), cfg.out)
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    _check_kind(cfg.kind)
    _check_writable(cfg.out)
    model, moments = _load_inputs(cfg)
    sol = solve(build_program(cfg.kind, model, moments))
    doc = {"kind": cfg.kind, "tau": model.tau, "beta": model.beta, "assets": list(moments.assets)}
    doc.update(sol.to_dict())
    _write(json.dumps(doc, indent=2) + "\n", cfg.out)
    if sol.optimal:
        return EXIT_OK
    if sol.status == INFEASIBLE:
        log.error("infeasible: max constraint violation %.6g", sol.violation)
        return EXIT_INFEASIBLE
    log.error("solver stopped without convergence (%s)", sol.status)
    return EXIT_NOT_CONVERGED


def _per_kind_path(path: str, kind: str, many: bool) -> str:
    if not many:
        return path
    p = Path(path)
    return str(p.with_name(f"{p.stem}-{kind}{p.suffix}"))


def cmd_frontier(cfg: RunConfig) -> int:
    kinds = _check_kind(cfg.kind, allow_all=True)
    start, end, step = parse_tau_range(cfg.tau_range) if cfg.tau_range else presets.TAU_GRID
    outputs = {"csv": cfg.out_csv, "svg": cfg.out_svg, "json": cfg.out_json}
    many = len(kinds) > 1
    for path in outputs.values():
        if path is not None:
            for k in kinds:
                _check_writable(_per_kind_path(path, k, many))
    model, moments = _load_inputs(cfg)

    code = EXIT_OK
    for kind in kinds:
        table = sweep(model, moments, kind, start, end, step)
        for fmt, path in outputs.items():
            if path is None:
                continue
            if fmt == "svg" and not table.optimal_rows():
                log.warning("%s: no optimal rows, skipping %s", kind, path)
                continue
            emit(table, fmt, _per_kind_path(path, kind, many))
        if not any(outputs.values()):
            sys.stdout.write(json.dumps(table.to_dict(), indent=2) + "\n")
        if any(r.status not in ("optimal", INFEASIBLE) for r in table.rows):
            code = EXIT_NOT_CONVERGED
    return code


def cmd_validate(cfg: RunConfig) -> int:
    if cfg.solution is None:
        raise ConfigError("validate needs a solution JSON")
    _check_writable(cfg.out)
    try:
        doc = json.loads(_read_text(cfg.solution, "solution"))
        sol = Solution.from_dict(doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solution document: {exc}") from exc
    if cfg.tau is None and "tau" in doc:
        cfg.tau = float(doc["tau"])
    if cfg.beta is None and "beta" in doc:
        cfg.beta = float(doc["beta"])
    if cfg.preset is not None or cfg.moments is not None:
        model, _ = _load_inputs(cfg)
    else:
        model = _model_only(cfg)
    report = validate(sol.x, model, count=cfg.count, seed=cfg.seed)
    sys.stdout.write(report.to_text())
    if cfg.out is not None:
        _write(report.to_json(), cfg.out)
    return EXIT_OK


def _model_only(cfg: RunConfig) -> UncertainReturnModel:
    if cfg.model is None:
        raise ConfigError("give --preset or --model")
    model = UncertainReturnModel.from_json(_read_text(cfg.model, "model"))
    return model.with_target(tau=cfg.tau, beta=cfg.beta)


COMMANDS = {"estimate": cmd_estimate, "solve": cmd_solve, "frontier": cmd_frontier, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccportfolio", description="Robust chance-constrained portfolio selection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with default settings; flags override it")

    def inputs(p):
        p.add_argument("--model", help="uncertain return model JSON")
        p.add_argument("--moments", help="moment estimates JSON")
        p.add_argument("--preset", choices=presets.PRESETS, help="built-in model and moments")
        p.add_argument("--tau", type=float, help="target return (percent)")
        p.add_argument("--beta", type=float, help="required satisfaction probability")

    p = sub.add_parser("estimate", help="estimate nominal moments from a price CSV")
    p.add_argument("prices", nargs="?", help="long-format CSV with header date,asset,price")
    p.add_argument("--period", help="'quarterly' or a step k over the common date grid")
    p.add_argument("--out", help="moments JSON (default: stdout)")
    common(p)

    p = sub.add_parser("solve", help="solve one program")
    inputs(p)
    p.add_argument("--kind", help=f"one of {', '.join(KINDS)}")
    p.add_argument("--out", help="solution JSON (default: stdout)")
    common(p)

    p = sub.add_parser("frontier", help="sweep the target return")
    inputs(p)
    p.add_argument("--kind", help=f"one of {', '.join(KINDS)}, or 'all'")
    p.add_argument("--tau-range", dest="tau_range", help="start:end:step (default 1.5:3.5:0.2)")
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-svg", dest="out_svg")
    p.add_argument("--out-json", dest="out_json")
    common(p)

    p = sub.add_parser("validate", help="Monte Carlo check of a solution")
    p.add_argument("solution", nargs="?", help="solution JSON written by 'solve'")
    inputs(p)
    p.add_argument("--count", type=int, help="samples per distribution (default 100000)")
    p.add_argument("--seed", type=int, help="base random seed (default 0)")
    p.add_argument("--out", help="report JSON")
    common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        flags = vars(args)
        cfg = RunConfig.merge(_load_config(flags.pop("config", None)), flags)
        return COMMANDS[cfg.command](cfg)
    except (PortfolioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
