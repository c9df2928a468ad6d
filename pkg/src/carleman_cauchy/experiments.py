"""End-to-end reconstruction runs, the line-error metric and report files."""
from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from .carleman import CwfSpec
from .forward import (
    NONLINEARITIES,
    add_noise,
    differentiate_trace,
    extract_trace,
    study_problem,
    solve_forward,
    write_trace_csv,
)
from .functional import FunctionalConfig, TikhonovFunctional, build_extension
from .grid import Grid, build_grid
from .optimize import OptimizerConfig, minimize

__all__ = [
    "OUTPUT_ENV",
    "ExperimentError",
    "START_FUNCTIONS",
    "PRESETS",
    "ExperimentConfig",
    "LineErrorCurve",
    "RunResult",
    "ExperimentReport",
    "preset_config",
    "line_error",
    "start_field",
    "run_preset",
    "write_report",
]

OUTPUT_ENV = "CARLEMAN_CAUCHY_OUT"


class ExperimentError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


START_FUNCTIONS = {
    "zero": lambda x, t: 0.0 * x * t,
    "quadratic": lambda x, t: (x - 1.0) ** 2 * (t + 1.0),
    "sine": lambda x, t: np.sin(x - 1.0) ** 2 * t**2,
}

PRESETS = {
    "fig1-s1": dict(nonlinearity="S1"),
    "fig1-s2": dict(nonlinearity="S2"),
    "fig2-slices": dict(nonlinearity="S1"),
    "fig3-starts": dict(nonlinearity="S1", lambda_list=(3.0,), starts=("zero", "quadratic", "sine")),
    "fig4-linear": dict(nonlinearity="Zero"),
    "custom": dict(),
}

_ALIASES = {
    "fig1s1": "fig1-s1",
    "fig1s2": "fig1-s2",
    "fig2slices": "fig2-slices",
    "fig3starts": "fig3-starts",
    "fig4linear": "fig4-linear",
    "custom": "custom",
}


def canonical_preset(name: str) -> str:
    key = name.lower().replace("-", "").replace("_", "")
    if key not in _ALIASES:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return _ALIASES[key]


@dataclass
class ExperimentConfig:
    preset: str = "custom"
    N: int = 128
    M: int = 32
    nonlinearity: str = "S1"
    lambda_list: tuple = (0.0, 1.0, 3.0)
    beta: float = 0.00063
    noise_level: float = 0.05
    seed: int = 0
    starts: tuple = ("zero",)
    slice_x: float = 0.6
    cwf_family: str = "ParabolicQuadratic"
    cwf_params: dict = field(default_factory=dict)
    method: str = "FixedStepCG"
    gamma: float = 1e-3
    iters: int = 10_000
    R: float = math.inf
    metric: str = "h2"
    restart: Optional[int] = None
    workers: int = 1
    output_dir: Optional[str] = None

    def __post_init__(self):
        self.lambda_list = tuple(float(v) for v in self.lambda_list)
        self.starts = tuple(self.starts)
        for s in self.starts:
            if s not in START_FUNCTIONS:
                raise ValueError(f"unknown start function {s!r}; choose from {sorted(START_FUNCTIONS)}")
        if not self.lambda_list:
            raise ValueError("lambda_list is empty")
        if self.noise_level < 0:
            raise ValueError("noise_level must be nonnegative")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}; choose from {sorted(NONLINEARITIES)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        # fail at config time rather than deep inside a run
        self.grid()
        self.optimizer(None)
        for lam in self.lambda_list:
            self.functional_config(lam)

    def echo(self) -> dict:
        """Config fields that determine the numbers (no paths, no worker count)."""
        d = asdict(self)
        d.pop("output_dir")
        d.pop("workers")
        d["lambda_list"] = list(self.lambda_list)
        d["starts"] = list(self.starts)
        d["R"] = None if math.isinf(self.R) else self.R
        return d

    def grid(self) -> Grid:
        return build_grid(self.N, self.M)

    def optimizer(self, v0: np.ndarray) -> OptimizerConfig:
        return OptimizerConfig(method=self.method, gamma=self.gamma, iters=self.iters, R=self.R,
                               v0=v0, metric=self.metric, restart=self.restart)

    def functional_config(self, lam: float) -> FunctionalConfig:
        return FunctionalConfig(lam=lam, beta=self.beta, cwf=CwfSpec(self.cwf_family, lam=lam, **self.cwf_params))


def preset_config(name: str, **overrides) -> ExperimentConfig:
    canon = canonical_preset(name)
    kw = dict(PRESETS[canon])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(preset=canon, **kw)


@dataclass
class LineErrorCurve:
    x_vals: np.ndarray
    E_vals: np.ndarray
    excluded: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    diagnostic: str = ""

    def at(self, x: float) -> float:
        k = int(np.argmin(np.abs(self.x_vals - x)))
        return float(self.E_vals[k])

    def on(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        sel = (self.x_vals >= lo - 1e-12) & (self.x_vals <= hi + 1e-12)
        return self.x_vals[sel], self.E_vals[sel]


def line_error(u_rec: np.ndarray, u_true: np.ndarray, grid: Grid) -> LineErrorCurve:
    """Relative L2-in-time error on each grid line ``x = x_i``."""
    u_rec = grid.check_field(u_rec, "u_rec")
    u_true = grid.check_field(u_true, "u_true")
    num = np.sqrt(grid.tau * np.sum((u_rec - u_true) ** 2, axis=1))
    den = np.sqrt(grid.tau * np.sum(u_true**2, axis=1))
    ok = den > 0
    excluded = np.flatnonzero(~ok)
    diag = ""
    if not ok.any():
        diag = "u_true vanishes on every grid line; line error undefined"
        warnings.warn(diag, stacklevel=2)
    elif excluded.size:
        diag = f"excluded {excluded.size} zero-norm line(s)"
    x = np.asarray(grid.x_nodes)[ok]
    return LineErrorCurve(x, num[ok] / den[ok], excluded, diag)


def start_field(name: str, grid: Grid, free: np.ndarray) -> np.ndarray:
    """Starting function sampled on the grid and zeroed on the pinned columns."""
    v0 = grid.sample(START_FUNCTIONS[name])
    v0[~free] = 0.0
    return v0


@dataclass
class RunResult:
    lam: float
    start: str
    line_error: LineErrorCurve
    u_rec_slice: np.ndarray
    J_history: np.ndarray
    restarts: list


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    x_slice: float
    t_nodes: np.ndarray
    u_true_slice: np.ndarray
    runs: list
    wall_time: float = 0.0
    versions: dict = field(default_factory=dict)

    def run(self, lam: float, start: str = "zero") -> RunResult:
        for r in self.runs:
            if r.lam == float(lam) and r.start == start:
                return r
        raise KeyError((lam, start))

    def to_json(self) -> dict:
        return {
            "config": self.config.echo(),
            "x_slice": self.x_slice,
            "versions": self.versions,
            "t": self.t_nodes.tolist(),
            "u_true_slice": self.u_true_slice.tolist(),
            "runs": [
                {
                    "lambda": r.lam,
                    "start": r.start,
                    "seed": self.config.seed,
                    "E_at_slice": r.line_error.at(self.x_slice),
                    "line_error": {"x": r.line_error.x_vals.tolist(), "E": r.line_error.E_vals.tolist(),
                                   "excluded": r.line_error.excluded.tolist()},
                    "u_rec_slice": r.u_rec_slice.tolist(),
                    "J_history": r.J_history.tolist(),
                    "restarts": list(r.restarts),
                }
                for r in self.runs
            ],
        }


def _versions() -> dict:
    from . import __version__

    return {"carleman_cauchy": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _prepare(cfg: ExperimentConfig):
    stage = "forward"
    try:
        grid = cfg.grid()
        spec = study_problem(cfg.nonlinearity)
        u_true = solve_forward(spec, grid)
        stage = "trace"
        clean = extract_trace(u_true, grid)
        trace = differentiate_trace(add_noise(clean, cfg.noise_level, cfg.seed), grid)
        stage = "extension"
        F = build_extension(trace, grid)
    except Exception as exc:
        raise ExperimentError(stage, f"{exc} (config: {cfg.echo()})") from exc
    return grid, spec, u_true, trace, F


def _solve_one(cfg: ExperimentConfig, lam: float, start: str):
    grid, spec, u_true, trace, F = _prepare(cfg)
    try:
        J = TikhonovFunctional(cfg.functional_config(lam), F, spec, trace, grid)
        traj = minimize(cfg.optimizer(start_field(start, grid, J.free)), J)
    except Exception as exc:
        raise ExperimentError("minimize", f"lambda={lam}, start={start}: {exc} (config: {cfg.echo()})") from exc
    return traj.final + F, traj.J_history, traj.restarts


def run_preset(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Forward solve, noisy traces, minimization per (lambda, start), line errors.

    With ``write`` the report lands in ``cfg.output_dir`` (or ``$CARLEMAN_CAUCHY_OUT``).
    """
    t0 = time.perf_counter()
    grid, spec, u_true, trace, F = _prepare(cfg)
    jobs = [(lam, s) for s in cfg.starts for lam in cfg.lambda_list]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            outs = list(pool.map(_solve_one, [cfg] * len(jobs), *zip(*jobs)))
    else:
        outs = [_solve_one(cfg, lam, s) for lam, s in jobs]

    i_slice = grid.nearest_x_index(cfg.slice_x)
    x_slice = float(grid.x_nodes[i_slice])
    runs = []
    for (lam, s), (u_rec, hist, restarts) in zip(jobs, outs):
        runs.append(RunResult(lam, s, line_error(u_rec, u_true, grid), u_rec[i_slice].copy(), hist, restarts))
    report = ExperimentReport(cfg, x_slice, np.array(grid.t_nodes), u_true[i_slice].copy(), runs,
                              wall_time=time.perf_counter() - t0, versions=_versions())
    if write:
        out = cfg.output_dir or os.environ.get(OUTPUT_ENV, "results")
        write_report(report, out, trace=trace)
    return report


def _fmt(lam: float) -> str:
    return f"{lam:g}"


def write_report(report: ExperimentReport, out_dir, trace=None) -> list[Path]:
    """Write ``report.json``, line-error and slice CSVs; remove them all on failure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    multi_start = len(report.config.starts) > 1
    try:
        path = out / "report.json"
        path.write_text(json.dumps(report.to_json(), indent=1))
        written.append(path)
        for r in report.runs:
            name = f"line_error_lambda{_fmt(r.lam)}"
            if multi_start:
                name += f"_start-{r.start}"
            path = out / f"{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x", "E"])
                for x, e in zip(r.line_error.x_vals, r.line_error.E_vals):
                    w.writerow([repr(float(x)), repr(float(e))])
            written.append(path)
        path = out / f"slice_x{report.config.slice_x:g}.csv"
        cols = ["t", "u_true"] + [
            f"u_rec_lambda{_fmt(r.lam)}" + (f"_start-{r.start}" if multi_start else "") for r in report.runs
        ]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for j, t in enumerate(report.t_nodes):
                w.writerow([repr(float(t)), repr(float(report.u_true_slice[j]))]
                           + [repr(float(r.u_rec_slice[j])) for r in report.runs])
        written.append(path)
        if trace is not None:
            path = out / "trace.csv"
            write_trace_csv(trace, path)
            written.append(path)
        path = out / "timing.json"
        path.write_text(json.dumps({"wall_time_seconds": report.wall_time}))
        written.append(path)
    except Exception as exc:
        for p in written:
            p.unlink(missing_ok=True)
        raise ExperimentError("write", str(exc)) from exc
    return written
