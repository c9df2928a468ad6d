"""Command-line entry point: ``run``, ``forward``, ``check`` and ``sweep``.

Config files are INI-style, flat ``key = value`` pairs grouped per module::

    [experiment]
    nonlinearity = S2
    lambda_list = 0, 3
    noise_level = 0.05
    seed = 4
    starts = zero, sine

    [grid]
    N = 64
    M = 16

    [optimizer]
    method = FixedStepCG
    gamma = 1e-3
    iters = 2000

    [carleman]
    family = ParabolicQuadratic

Any key in ``[carleman]`` other than ``family`` is passed to the weight
function (``nu``, ``rho``, ``X``, ``T``, ``x0``, ``eta``).

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from .experiments import ExperimentConfig, ExperimentError, canonical_preset, preset_config, run_preset
from .forward import add_noise, differentiate_trace, extract_trace, study_problem, solve_forward, write_trace_csv
from .grid import build_grid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _words(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


_KEYS = {
    "experiment": {
        "preset": str, "nonlinearity": str, "lambda_list": _floats, "beta": float,
        "noise_level": float, "seed": int, "starts": _words, "slice_x": float,
        "workers": int, "output_dir": str,
    },
    "grid": {"N": int, "M": int},
    "optimizer": {
        "method": str, "gamma": float, "iters": int, "R": float, "metric": str, "restart": _opt_int,
    },
}


def read_config(path) -> dict:
    """Parse an INI config into ``ExperimentConfig`` keyword overrides."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict = {}
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "carleman":
            if "family" in items:
                out["cwf_family"] = items.pop("family")
            params = {}
            for k, v in items.items():
                params[k] = None if v.strip().lower() == "none" else float(v)
            out["cwf_params"] = params
            continue
        if section not in _KEYS:
            raise ConfigError(f"unknown config section [{section}]; use {sorted(_KEYS) + ['carleman']}")
        for k, v in items.items():
            if k not in _KEYS[section]:
                raise ConfigError(f"unknown key {k!r} in [{section}]")
            try:
                out[k] = _KEYS[section][k](v)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{k}: {v!r}") from exc
    return out


def _experiment_config(args, **extra) -> ExperimentConfig:
    overrides = read_config(args.config) if args.config else {}
    preset = overrides.pop("preset", None) or args.preset
    overrides.update(extra)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.iters is not None:
        overrides["iters"] = args.iters
    if args.workers is not None:
        overrides["workers"] = args.workers
    try:
        return preset_config(preset, **overrides)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _print_report(report) -> None:
    x = report.x_slice
    for r in report.runs:
        print(f"lambda={r.lam:g} start={r.start} E({x:g})={r.line_error.at(x):.4f}")
    print(f"wall time {report.wall_time:.1f}s")


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    report = run_preset(cfg, write=True)
    _print_report(report)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        lams = _floats(args.lambda_)
    except ValueError as exc:
        raise ConfigError(f"bad --lambda list {args.lambda_!r}") from exc
    cfg = _experiment_config(args, lambda_list=lams)
    report = run_preset(cfg, write=True)
    _print_report(report)
    return EXIT_OK


def cmd_forward(args) -> int:
    try:
        grid = build_grid(args.N, args.M)
        spec = study_problem(args.nonlinearity)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    u = solve_forward(spec, grid)
    trace = extract_trace(u, grid)
    if args.noise > 0:
        trace = add_noise(trace, args.noise, args.seed)
    trace = differentiate_trace(trace, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    np.savetxt(out / "u.csv", u, delimiter=",", fmt="%.17g")
    print(f"max|u| = {np.abs(u).max():.6g}; wrote {out / 'trace.csv'} and {out / 'u.csv'}")
    return EXIT_OK


def cmd_check(args) -> int:
    from . import diagnostics

    results = diagnostics.run_all(seed=args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="carleman-cauchy", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_args(sp, preset_required):
        sp.add_argument("--preset", required=preset_required, default="custom")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default $CARLEMAN_CAUCHY_OUT or ./results)")
        sp.add_argument("--config", help="INI config overriding preset fields")
        sp.add_argument("--iters", type=int)
        sp.add_argument("--workers", type=int)

    run = sub.add_parser("run", help="run a preset and write its report")
    experiment_args(run, True)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a preset over a list of lambda values")
    experiment_args(sweep, False)
    sweep.add_argument("--lambda", dest="lambda_", required=True, help="comma-separated, e.g. 0,1,3")
    sweep.set_defaults(func=cmd_sweep)

    fwd = sub.add_parser("forward", help="solve the forward problem and dump the lateral traces")
    fwd.add_argument("--nonlinearity", default="S1")
    fwd.add_argument("--N", type=int, default=128)
    fwd.add_argument("--M", type=int, default=32)
    fwd.add_argument("--noise", type=float, default=0.0)
    fwd.add_argument("--seed", type=int, default=0)
    fwd.add_argument("--out", default="forward")
    fwd.set_defaults(func=cmd_forward)

    chk = sub.add_parser("check", help="gradient, projection and convexity self-checks")
    chk.add_argument("--seed", type=int, default=0)
    chk.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "preset", None) is not None and args.command in ("run", "sweep"):
            canonical_preset(args.preset)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
