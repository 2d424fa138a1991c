"""Command-line entry point: ``aoipreempt <command> [flags]``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import inversion
from .aoi import MomentError, aoi_transform, mean_aoi
from .dist import ModelParams, parse_distribution
from .optimize import sweep, thetas_from_text
from .simulator import POLICIES, P2THETA, SimConfig, simulate

COMMANDS = ("mean", "transform", "tail", "sweep", "simulate", "validate")
EXIT_VALIDATION = 1
EXIT_SPEC = 2

DEFAULTS = {
    "lambda": None,
    "theta": "inf",
    "dist": None,
    "s_grid": "0.1:10:0.1",
    "nu_grid": None,
    "epsilon": None,
    "theta_grid": None,
    "events": 1_000_000,
    "reps": 10,
    "seed": 0,
    "warmup": 0.1,
    "out": None,
    "format": None,
    "threads": 1,
    "policy": P2THETA,
}


class SpecError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_SPEC, message)


def _fail(code: int, message: str):
    sys.stderr.write(json.dumps({"error": message, "exit_code": code}) + "\n")
    raise SystemExit(code)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aoipreempt", description="Stationary AoI under threshold preemption.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON or YAML file whose keys mirror the flags")
    parser.add_argument("--lambda", dest="lambda_", metavar="RATE")
    parser.add_argument("--theta", help="threshold, or 'inf'")
    parser.add_argument("--dist", help="exp:MU | det:D | mix:W,det=D,exp=MU")
    parser.add_argument("--s-grid", dest="s_grid", help="'a:b:step' or comma list")
    parser.add_argument("--nu-grid", dest="nu_grid")
    parser.add_argument("--epsilon")
    parser.add_argument("--theta-grid", dest="theta_grid")
    parser.add_argument("--events", help="arrivals per replication (1e6 style accepted)")
    parser.add_argument("--reps")
    parser.add_argument("--seed")
    parser.add_argument("--warmup")
    parser.add_argument("--policy", choices=sorted(POLICIES))
    parser.add_argument("--out")
    parser.add_argument("--format", choices=("text", "json", "csv"))
    parser.add_argument("--threads")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    opts = dict(DEFAULTS)
    if args.config:
        try:
            loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise SpecError(f"cannot read config: {exc}") from None
        if not isinstance(loaded, dict):
            raise SpecError("config must be a mapping")
        for key, value in loaded.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise SpecError(f"unknown config key {key!r}")
            opts[key] = value
    for key in DEFAULTS:
        value = getattr(args, "lambda_" if key == "lambda" else key, None)
        if value is not None:
            opts[key] = value
    return opts


def _float(value, name):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SpecError(f"--{name.replace('_', '-')} expects a number, got {value!r}") from None


def _int(value, name):
    x = _float(value, name)
    if not x.is_integer():
        raise SpecError(f"--{name} expects an integer, got {value!r}")
    return int(x)


def _grid(value, name):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    try:
        return thetas_from_text(str(value))
    except ValueError:
        raise SpecError(f"malformed --{name.replace('_', '-')} {value!r}") from None


def model_from(opts: dict, theta=None) -> ModelParams:
    if opts["lambda"] is None or opts["dist"] is None:
        raise SpecError("--lambda and --dist are required")
    try:
        service = parse_distribution(str(opts["dist"]))
        theta = _float(opts["theta"], "theta") if theta is None else theta
        return ModelParams(_float(opts["lambda"], "lambda"), theta, service)
    except ValueError as exc:
        raise SpecError(str(exc)) from None


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(x)) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_mean(opts):
    m = model_from(opts)
    a = aoi_transform(m)
    payload = {
        "mean_aoi": mean_aoi(a),
        "q": a.constants.q,
        "p0": a.constants.p0,
        "p1": a.constants.p1,
        "mean_cycle": a.mean_cycle,
        "rho": m.rho,
    }
    if opts["format"] == "json":
        text = json.dumps(payload, indent=2) + "\n"
    else:
        text = "".join(f"{k}: {v:.9g}\n" for k, v in payload.items())
    _emit(text, opts["out"])
    return 0


def cmd_transform(opts):
    a = aoi_transform(model_from(opts))
    s = np.asarray(_grid(opts["s_grid"], "s_grid"))
    phi = np.real(a.phi(s))
    _emit(_csv(("s", "phi"), zip(s, phi)), opts["out"])
    return 0


def cmd_tail(opts):
    a = aoi_transform(model_from(opts))
    if opts["epsilon"] is not None:
        eps = _float(opts["epsilon"], "epsilon")
        try:
            nu = inversion.find_threshold(a, eps)
        except ValueError as exc:
            raise SpecError(str(exc)) from None
        if opts["format"] == "csv":
            text = _csv(("epsilon", "nu"), [(eps, nu)])
        else:
            text = json.dumps({"epsilon": eps, "nu": nu}, indent=2) + "\n"
        _emit(text, opts["out"])
        return 0
    if opts["nu_grid"] is None:
        hi = 10.0 * mean_aoi(a)
        nu = np.linspace(hi / 100.0, hi, 100)
    else:
        nu = np.asarray(_grid(opts["nu_grid"], "nu_grid"))
    if np.any(nu <= 0):
        raise SpecError("--nu-grid values must be positive")
    prob = inversion.ccdf(a, nu, warn=False)
    _emit(_csv(("nu", "ccdf"), zip(nu, prob)), opts["out"])
    return 0


def cmd_sweep(opts):
    m = model_from(opts, theta=0.0)
    thetas = None if opts["theta_grid"] is None else _grid(opts["theta_grid"], "theta_grid")
    result = sweep(m.lam, m.service, thetas)
    if opts["format"] == "json":
        text = json.dumps(
            {
                "grid": [["inf" if math.isinf(t) else t, v] for t, v in result.grid],
                "best_theta": "inf" if math.isinf(result.best_theta) else result.best_theta,
                "best_mean": result.best_mean,
            },
            indent=2,
        ) + "\n"
    else:
        text = result.to_csv()
    _emit(text, opts["out"])
    return 0


def sim_config(opts) -> SimConfig:
    try:
        return SimConfig(
            model=model_from(opts),
            policy=str(opts["policy"]),
            horizon_events=_int(opts["events"], "events"),
            warmup_fraction=_float(opts["warmup"], "warmup"),
            replications=_int(opts["reps"], "reps"),
            seed=_int(opts["seed"], "seed"),
            nu_grid=None if opts["nu_grid"] is None else _grid(opts["nu_grid"], "nu_grid"),
        )
    except ValueError as exc:
        raise SpecError(str(exc)) from None


def cmd_simulate(opts):
    cfg = sim_config(opts)
    result = simulate(cfg, threads=_int(opts["threads"], "threads"))
    out = opts["out"]
    if opts["format"] == "csv":
        _emit(result.ccdf_csv(), out)
        return 0
    _emit(result.to_json() + "\n", out)
    if out:
        Path(out).with_suffix(".ccdf.csv").write_text(result.ccdf_csv())
    return 0


def cmd_validate(opts):
    cfg = sim_config(opts)
    if cfg.policy != P2THETA:
        raise SpecError("validate compares against the analytic P2theta model only")
    a = aoi_transform(cfg.model)
    analytic = mean_aoi(a)
    result = simulate(cfg, threads=_int(opts["threads"], "threads"))
    hw = result.mean_aoi_ci_halfwidth
    checks = {
        "mean_aoi": {
            "analytic": analytic,
            "simulated": result.mean_aoi,
            "tolerance": 3.0 * hw,
            "pass": abs(result.mean_aoi - analytic) <= 3.0 * hw,
        },
        "p0": {
            "analytic": a.constants.p0,
            "simulated": result.p0_empirical,
            "tolerance": 3.0 * result.p0_stderr,
            "pass": abs(result.p0_empirical - a.constants.p0) <= max(3.0 * result.p0_stderr, 1e-12),
        },
    }
    ok = all(c["pass"] for c in checks.values())
    if opts["format"] == "json":
        text = json.dumps({"pass": ok, "checks": checks}, indent=2) + "\n"
    else:
        text = "".join(
            f"{'PASS' if c['pass'] else 'FAIL'} {name}: analytic={c['analytic']:.6f} "
            f"simulated={c['simulated']:.6f} tolerance={c['tolerance']:.2e}\n"
            for name, c in checks.items()
        )
    _emit(text, opts["out"])
    return 0 if ok else EXIT_VALIDATION


HANDLERS = {
    "mean": cmd_mean,
    "transform": cmd_transform,
    "tail": cmd_tail,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        return HANDLERS[args.command](opts)
    except (SpecError, MomentError) as exc:
        _fail(EXIT_SPEC, str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
