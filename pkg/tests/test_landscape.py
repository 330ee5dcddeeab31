import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import d1, drift_from_definition, fd_partials, rel_err_field

from colloid_sb.landscape import (
    K_BOLTZMANN, ConstantLandscape, LandscapeParams, eval_diffusion, eval_drift, eval_free_energy,
    eval_partials, eval_partials_du,
)

P = LandscapeParams()
FIELDS = ("D1", "D2", "D1_x", "D1_u", "D2_x", "D2_u", "D2_xx", "D2_xu", "D2_uu")


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-12)


def test_default_parameters():
    assert (P.a, P.b, P.c, P.d, P.f) == (10.0, 2.1, 0.75, 4.5e-3, 0.5e-3)
    assert P.k_B == 1.38066e-23 and P.theta == 293.0


@pytest.mark.parametrize("kw", [{"d": 0.0}, {"f": -1e-3}, {"theta": 0.0}, {"k_B": -1.0}])
def test_invalid_parameters_rejected(kw):
    with pytest.raises(ValueError):
        LandscapeParams(**kw)


def test_free_energy_examples():
    assert eval_free_energy(2.1, 0.0, P) == 0.0
    for u in (-3.0, 0.4, 7.0):
        assert eval_free_energy(P.b + P.c * u, u, P) == pytest.approx(0.0, abs=1e-35)
    expected = 10 * K_BOLTZMANN * 293 * 1.0 ** 2
    assert eval_free_energy(3.1, 0.0, P) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(4.0453e-20, rel=1e-4)


def test_diffusion_examples():
    assert eval_diffusion(2.1, 0.0, P) == pytest.approx(5.0e-3, rel=1e-12)
    assert eval_diffusion(1e3, 0.0, P) == pytest.approx(0.5e-3, rel=1e-12)
    assert eval_diffusion(-1e3, 0.0, P) == pytest.approx(0.5e-3, rel=1e-12)
    assert eval_diffusion(3.1, 0.0, P) == pytest.approx(4.5e-3 * np.exp(-1.0) + 0.5e-3, rel=1e-12)


def test_drift_examples():
    assert eval_drift(2.1, 0.0, P) == 0.0
    assert eval_drift(2.5, 0.0, P) < 0 < eval_drift(1.5, 0.0, P)
    oracle = drift_from_definition(3.1, 0.0, P)
    assert rel_err(eval_drift(3.1, 0.0, P), oracle) < 1e-6


def test_drift_closed_form_matches_definition_on_grid():
    x, u = np.meshgrid(np.linspace(0, 6, 25), np.linspace(-5, 5, 21))
    got = eval_drift(x, u, P)
    oracle = drift_from_definition(x, u, P)
    assert np.max(np.abs(got - oracle)) < 1e-6 * np.max(np.abs(oracle))


def test_partials_at_symmetry_point():
    lp = eval_partials(2.1, 0.0, P)
    assert lp.D2_x == 0.0 and lp.D2_u == 0.0
    assert lp.D1_x == pytest.approx(-0.109, rel=1e-12)
    fd = fd_partials(2.1, 0.0, P)
    assert rel_err(lp.D1_x, fd["D1_x"]) < 1e-6


def test_partials_match_finite_differences_random_points():
    rng = np.random.default_rng(20)
    x = rng.uniform(0, 6, 20)
    u = rng.uniform(-3, 6, 20)
    lp = eval_partials(x, u, P).as_dict()
    fd = fd_partials(x, u, P)
    for name in FIELDS:
        assert np.max(rel_err_field(lp[name], fd[name])) < 1e-6, name


def test_partials_du_match_finite_differences():
    rng = np.random.default_rng(21)
    x = rng.uniform(0, 6, 20)
    u = rng.uniform(-3, 6, 20)
    got = eval_partials_du(x, u, P).as_dict()
    for name in FIELDS:
        fd = d1(lambda b: getattr(eval_partials(x, b, P), name), u, 1e-3)
        assert np.max(rel_err_field(got[name], fd)) < 1e-6, name


@given(st.floats(-10, 10), st.floats(-20, 20))
def test_control_partials_proportional_to_state_partials(x, u):
    lp = eval_partials(x, u, P)
    assert lp.D2_u + P.c * lp.D2_x == pytest.approx(0.0, abs=1e-15)
    assert lp.D1_u + P.c * lp.D1_x == pytest.approx(0.0, abs=1e-15)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_diffusion_bounds_and_finiteness(x, u):
    d2 = eval_diffusion(x, u, P)
    assert P.f <= d2 <= P.d + P.f
    assert all(np.isfinite(v) for v in eval_partials(x, u, P).as_dict().values())


@settings(max_examples=50)
@given(st.floats(1e-3, 1e3))
def test_drift_invariant_under_temperature_rescaling(lam):
    x = np.linspace(0, 6, 31)
    u = np.linspace(-4, 4, 31)
    scaled = LandscapeParams(theta=P.theta * lam)
    # exact closed form is k_B theta free; the definition-based route cancels it numerically
    assert np.max(np.abs(eval_drift(x, u, scaled) - eval_drift(x, u, P))) <= 1e-12
    a = drift_from_definition(x, u, scaled)
    b = drift_from_definition(x, u, P)
    # the difference-quotient route only cancels k_B theta up to a few ulps of F'/(k_B theta)
    assert np.max(np.abs(a - b)) <= 1e-10


def test_diffusion_lower_bound_on_domain_grid():
    x, u = np.meshgrid(np.linspace(0, 6, 301), np.linspace(-20, 20, 801))
    assert abs(eval_diffusion(x, u, P).min() - P.f) < 1e-9


def test_constant_landscape_stub():
    stub = ConstantLandscape(0.3, 0.0)
    x = np.linspace(0, 6, 4)
    assert np.all(stub.drift(x, 1.0) == 0.3)
    assert np.all(stub.diffusion(x, 1.0) == 0.0)
    lp = stub.partials(x, np.zeros(4))
    assert np.all(lp.D1_x == 0) and np.all(lp.D2 == 0)
