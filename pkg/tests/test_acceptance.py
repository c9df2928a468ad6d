"""Acceptance criteria, one test each, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also repeated in the terminal summary.  The full presets take a few
minutes in total on one core.
"""
import json
import time

import numpy as np
import pytest

from carleman_cauchy.diagnostics import (
    contraction_run,
    convexity_violations,
    gradient_error,
    projection_properties,
    variational_inequality,
)
from carleman_cauchy.experiments import ExperimentError, preset_config, run_preset
from carleman_cauchy.forward import NONLINEARITIES, ProblemSpec, solve_forward
from carleman_cauchy.grid import build_grid

LINES = []


def report(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    LINES.append(line)
    print(line)
    return ok


def info(criterion, detail):
    line = f"INFO criterion {criterion}: {detail}"
    LINES.append(line)
    print(line)


_runs = {}


def preset_run(name, tmp_root):
    if name not in _runs:
        out = tmp_root / name
        t0 = time.perf_counter()
        rep = run_preset(preset_config(name, output_dir=str(out)))
        _runs[name] = (rep, out, time.perf_counter() - t0)
    return _runs[name]


@pytest.fixture(scope="module")
def tmp_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


# -- 1 -------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["fig1-s1", "fig1-s2", "fig4-linear"])
def test_criterion_1_figure_reproduction(name, tmp_root):
    rep, _, wall = preset_run(name, tmp_root)
    e0, e3 = rep.run(0.0).line_error.at(0.6), rep.run(3.0).line_error.at(0.6)
    ok = 0.03 <= e3 <= 0.15 and e3 < e0 and wall <= 300
    assert report(f"1 [{name}]", ok, f"E(0.6; lambda=3) = {e3:.4f} in [0.03, 0.15], "
                  f"E(0.6; lambda=0) = {e0:.4f}, wall time {wall:.0f}s <= 300s")


@pytest.mark.parametrize("name", ["fig1-s1", "fig1-s2", "fig4-linear"])
def test_invariant_weight_improves_most_columns(name, tmp_root):
    # invariant from the experiments module, not a numbered criterion
    rep, _, _ = preset_run(name, tmp_root)
    x, e0 = rep.run(0.0).line_error.on(0.6, 1.0)
    _, e3 = rep.run(3.0).line_error.on(0.6, 1.0)
    frac = float(np.mean(e3 <= e0))
    line = f"{'PASS' if frac >= 0.8 else 'FAIL'} invariant [{name}]: E(x; lambda=3) <= E(x; lambda=0) " \
           f"on {frac:.1%} of {x.size} columns in [0.6, 1] (>= 80%)"
    LINES.append(line)
    print(line)
    assert frac >= 0.8


def test_criterion_1_literal_nodal_step_diverges():
    # the preset's step lives in the H^2 geometry; the nodal-gradient reading
    # with gamma = 1e-8 is shown here to blow up, which is why it is not used
    cfg = preset_config("fig1-s1", metric="l2", gamma=1e-8, lambda_list=(3.0,))
    with pytest.raises(ExperimentError) as err:
        run_preset(cfg, write=False)
    info(1, f"nodal gradient with gamma = 1e-8 at lambda = 3: {str(err.value).split(' (config')[0]}")


# -- 2 -------------------------------------------------------------------------


def test_criterion_2_start_insensitivity(tmp_root):
    rep, _, _ = preset_run("fig3-starts", tmp_root)
    curves = [r.line_error.on(0.6, 1.0)[1] for r in rep.runs]
    worst = max(np.abs(a - b).max() for k, a in enumerate(curves) for b in curves[k + 1:])
    assert report(2, worst <= 0.05, f"max pairwise |dE| on [0.6, 1] = {worst:.2e} <= 0.05 over {len(curves)} starts")


# -- 3 -------------------------------------------------------------------------


def test_criterion_3_gradient_correctness():
    errs = {(n, lam): gradient_error(n, lam) for n in ("S1", "S2", "Zero") for lam in (0.0, 1.0, 3.0)}
    worst = max(errs.values())
    assert report(3, worst <= 1e-5, f"max relative gradient error {worst:.2e} <= 1e-5 (8x8, 9 cases)")


# -- 4 -------------------------------------------------------------------------


def _mms_error(N, M):
    S = NONLINEARITIES["S1"]
    u = lambda x, t: np.sin(np.pi * x) * np.cos(2 * t) + x * t
    u_t = lambda x, t: -2 * np.sin(np.pi * x) * np.sin(2 * t) + x
    u_xx = lambda x, t: -np.pi**2 * np.sin(np.pi * x) * np.cos(2 * t)
    spec = ProblemSpec(S, G=lambda x, t: u_t(x, t) - u_xx(x, t) - S.value(u(x, t), x, t),
                       f=lambda x: u(x, -0.5), g=lambda t: u(0.0, t), p=lambda t: u(1.0, t))
    g = build_grid(N, M)
    return np.abs(solve_forward(spec, g) - g.sample(u)).max()


def test_criterion_4a_manufactured_order():
    e1, e2 = _mms_error(16, 16), _mms_error(32, 64)
    assert report("4a", e1 / e2 >= 1.8, f"error ratio {e1 / e2:.2f} >= 1.8 from (16,16) to (32,64)")


def test_criterion_4b_heat_kernel():
    # first-order time stepping: the peak error is about pi^2 tau / (2e) = 3.5e-3
    # at M = 512, so the 1e-3 target is out of reach for this scheme
    g = build_grid(128, 512)
    zero = lambda *a: 0.0 * sum(np.asarray(v, dtype=float) for v in a)
    spec = ProblemSpec("Zero", G=zero, f=lambda x: np.sin(np.pi * x), g=zero, p=zero)
    exact = g.sample(lambda x, t: np.exp(-np.pi**2 * (t + 0.5)) * np.sin(np.pi * x))
    err = np.abs(solve_forward(spec, g) - exact).max()
    assert report("4b", err <= 1e-3, f"heat kernel max-node error {err:.2e} <= 1e-3 at (128, 512)")


# -- 5 -------------------------------------------------------------------------


def test_criterion_5_convexity_surrogate():
    bad, ratio = convexity_violations(pairs=200, lam=3.0, beta=0.00063, R=10.0)
    assert report(5, bad == 0, f"{bad} violations of gap >= (beta/2)|h|^2 - 1e-9 in 200 pairs "
                  f"(S1, 128x32, R = 10, min gap/|h|^2 = {ratio:.3g})")


# -- 6 -------------------------------------------------------------------------


def test_criterion_6_contraction():
    q, ratio, dist = contraction_run(lam=3.0, beta=0.00063, iters=2000)
    q2, ratio2, dist2 = contraction_run(lam=1.0, beta=0.5, iters=4000)
    ok = ratio <= q + 0.05 and ratio2 <= q2 + 0.05 and dist2 <= 1e-6
    info(6, f"beta 0.00063, lambda = 3: distance to minimizer after 2000 steps {dist:.2e} "
         f"(q = 1 - {1 - q:.1e}, so full convergence needs far more steps)")
    assert report(6, ok, f"ratios <= q + 0.05 (beta 0.00063: 1 - ratio {1 - ratio:.2e} vs 1 - q {1 - q:.2e}; "
                  f"beta 0.5: {ratio2:.4f} vs {q2:.4f}); final distance {dist2:.1e} <= 1e-6 at beta 0.5")


# -- 7 -------------------------------------------------------------------------


def test_criterion_7_projection():
    idem, excess = projection_properties(pairs=1000)
    vi = variational_inequality(samples=100)
    ok = idem and excess <= 1e-12 and vi <= 1e-8
    assert report(7, ok, f"idempotent={idem}, nonexpansive excess {excess:.1e} <= 1e-12, "
                  f"variational inequality {vi:.2e} <= 1e-8")


# -- 8 -------------------------------------------------------------------------


def test_criterion_8_determinism(tmp_root):
    rep, out, _ = preset_run("fig1-s1", tmp_root)
    again = tmp_root / "fig1-s1-again"
    rep2 = run_preset(preset_config("fig1-s1", output_dir=str(again)))
    files = sorted(p.name for p in out.iterdir() if p.name != "timing.json")
    same = all((out / f).read_bytes() == (again / f).read_bytes() for f in files)
    same &= json.dumps(rep.to_json()) == json.dumps(rep2.to_json())
    assert report(8, same, f"{len(files)} report files bit-identical across two runs")
