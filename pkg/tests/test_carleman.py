import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carleman_cauchy.carleman import (
    FAMILIES,
    CwfDomainError,
    CwfSpec,
    convergence_exponent,
    cwf_log,
    cwf_value,
    cwf_weight_grid,
    lambda_for_noise,
)
from carleman_cauchy.grid import build_grid


def specs(lam):
    return [
        CwfSpec("GenericExp", lam=lam, psi=lambda x, t: 1.0 + np.sum(np.atleast_1d(x) ** 2, axis=-1) - np.asarray(t) ** 2),
        CwfSpec("EllipticInvPower", lam=lam, nu=2.0, rho=0.2, X=1.0),
        CwfSpec("ParabolicInvPower", lam=lam, nu=3.0, rho=0.3, X=2.0, T=0.5),
        CwfSpec("ParabolicQuadratic", lam=lam),
        CwfSpec("HyperbolicQuadratic", lam=lam, x0=(0.1, -0.2), eta=0.4),
    ]


@pytest.mark.parametrize("spec", specs(0.0), ids=FAMILIES)
def test_lambda_zero_gives_one(spec):
    assert cwf_value(spec, np.array([0.3, 0.4]), 0.2) == 1.0


def test_parabolic_quadratic_value():
    spec = CwfSpec("ParabolicQuadratic", lam=3.0)
    assert cwf_value(spec, 1.0, 0.0) == pytest.approx(math.exp(3.0), rel=1e-15)
    assert math.exp(3.0) == pytest.approx(20.0855, abs=1e-4)
    assert cwf_value(spec, 1.0, 0.0) > cwf_value(spec, 0.5, 0.0) > cwf_value(spec, 0.5, 0.4)


def test_independent_psi_evaluation():
    x, t = np.array([0.4, 0.3, -0.2]), 0.35
    xbar2 = 0.3**2 + 0.2**2
    lam = 1.7
    cases = {
        "EllipticInvPower": (CwfSpec("EllipticInvPower", lam=lam, nu=2.5, rho=0.1, X=1.5),
                             lam * (0.4 + xbar2 / 1.5**2 + 0.1) ** -2.5),
        "ParabolicInvPower": (CwfSpec("ParabolicInvPower", lam=lam, nu=2.5, rho=0.1, X=1.5, T=0.7),
                              lam * (0.4 + xbar2 / 1.5**2 + t**2 / 0.49 + 0.1) ** -2.5),
        "ParabolicQuadratic": (CwfSpec("ParabolicQuadratic", lam=lam), lam * (0.16 + xbar2 - t**2)),
        "HyperbolicQuadratic": (CwfSpec("HyperbolicQuadratic", lam=lam, x0=(0.0, 0.1, 0.0), eta=0.5),
                                lam * (0.16 + 0.04 + 0.04 - 0.5 * t**2)),
    }
    for name, (spec, expected) in cases.items():
        assert cwf_log(spec, x, t) == pytest.approx(expected, rel=1e-12), name
        assert math.log(cwf_value(spec, x, t)) == pytest.approx(expected, rel=1e-12), name


def test_inverse_power_domain_error():
    spec = CwfSpec("EllipticInvPower", lam=1.0, nu=2.0, rho=0.1)
    with pytest.raises(CwfDomainError):
        cwf_value(spec, -0.5, 0.0)


def test_inverse_power_default_nu_warns():
    with pytest.warns(UserWarning, match="nu"):
        spec = CwfSpec("ParabolicInvPower", lam=1.0)
    assert spec.nu == 2.0


@pytest.mark.parametrize("kw", [dict(family="Nope"), dict(lam=-1.0), dict(family="GenericExp"),
                                dict(family="HyperbolicQuadratic", eta=1.5),
                                dict(family="EllipticInvPower", nu=0.5),
                                dict(family="EllipticInvPower", nu=2.0, rho=0.7)])
def test_invalid_specs_rejected(kw):
    with pytest.raises(ValueError):
        CwfSpec(**kw)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0, 1), t=st.floats(-0.5, 0.5), lam=st.floats(0, 5), dlam=st.floats(0.01, 2))
def test_weight_at_least_one_and_increasing_where_psi_positive(x, t, lam, dlam):
    spec = CwfSpec("ParabolicQuadratic", lam=lam)
    psi = x * x - t * t
    if psi >= 0:
        assert cwf_value(spec, x, t) >= 1.0
    if psi > 1e-9:
        bigger = CwfSpec("ParabolicQuadratic", lam=lam + dlam)
        assert cwf_value(bigger, x, t) > cwf_value(spec, x, t)


def test_weight_grid_lambda_zero():
    g = build_grid(16, 8)
    np.testing.assert_array_equal(cwf_weight_grid(CwfSpec(lam=0.0), g), 1.0)


def test_weight_grid_study_extremes_and_symmetry():
    g = build_grid(128, 32)
    w = cwf_weight_grid(CwfSpec("ParabolicQuadratic", lam=3.0), g)
    assert w.max() == pytest.approx(math.exp(6.0), rel=1e-14)
    i, j = np.unravel_index(np.argmax(w), w.shape)
    assert (g.x_nodes[i], g.t_nodes[j]) == (1.0, 0.0)
    np.testing.assert_allclose(w, w[:, ::-1], rtol=1e-14)
    lo = np.flatnonzero(w.ravel() == w.min())
    corners = {(g.x_nodes[k // 33], g.t_nodes[k % 33]) for k in lo}
    assert corners == {(0.0, -0.5), (0.0, 0.5)}


def test_weight_grid_other_families_run():
    g = build_grid(8, 8)
    for spec in specs(1.0):
        w = cwf_weight_grid(spec, g)
        assert w.shape == g.shape and np.all(w > 0)


def test_lambda_for_noise():
    m = 0.7
    assert lambda_for_noise(math.exp(-2 * m), m) == pytest.approx(1.0, rel=1e-14)
    assert lambda_for_noise(0.01, 1.0) == pytest.approx(math.log(10), rel=1e-14)
    assert lambda_for_noise(0.001, 1.0) > lambda_for_noise(0.01, 1.0)


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 2.0])
def test_lambda_for_noise_rejects_bad_delta(delta):
    with pytest.raises(ValueError):
        lambda_for_noise(delta, 1.0)


def test_convergence_exponent():
    assert convergence_exponent(0.2, 1.0) == pytest.approx(0.05)
    assert convergence_exponent(10.0, 1.0) == 0.5
