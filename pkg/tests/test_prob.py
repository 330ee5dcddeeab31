import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from colloid_sb.prob import (
    RHO0, RHOT, TruncNormSpec, distance, kde, mh_sample, silverman_bandwidth, truncnorm_cdf,
    truncnorm_pdf, write_density_csv, write_samples_csv,
)


def ks_critical(n, alpha=0.01):
    return stats.kstwo.ppf(1 - alpha, n)


def test_endpoint_specs():
    assert (RHO0.mu, RHO0.sigma, RHO0.lo, RHO0.hi) == (0.0, 0.2, 0.0, 6.0)
    assert (RHOT.mu, RHOT.sigma, RHOT.lo, RHOT.hi) == (5.0, 0.1, 0.0, 6.0)


def test_half_normal_normalisation():
    # rho_0 is centred on the left wall, so exactly half the normal mass survives
    assert RHO0.mass == pytest.approx(0.5, abs=1e-15)
    assert RHO0.pdf(0.0) == pytest.approx(2 / (0.2 * np.sqrt(2 * np.pi)), rel=1e-12)


@pytest.mark.parametrize("spec", [RHO0, RHOT, TruncNormSpec(2.5, 3.0)])
def test_quadrature_mass(spec):
    mass, _ = integrate.quad(spec.pdf, spec.lo, spec.hi, points=[spec.mu], limit=200, epsabs=1e-13)
    assert abs(mass - 1.0) < 1e-8


@pytest.mark.parametrize("spec", [RHO0, RHOT])
def test_against_scipy_truncnorm(spec):
    ref = stats.truncnorm((spec.lo - spec.mu) / spec.sigma, (spec.hi - spec.mu) / spec.sigma,
                          loc=spec.mu, scale=spec.sigma)
    x = np.linspace(-1, 7, 97)
    assert np.allclose(spec.pdf(x), ref.pdf(x), rtol=1e-10, atol=1e-300)
    assert np.allclose(spec.cdf(x), ref.cdf(x), rtol=1e-10, atol=1e-14)
    assert spec.mean() == pytest.approx(ref.mean(), rel=1e-10)


def test_outside_support_is_zero():
    assert truncnorm_pdf(-0.01, RHOT) == 0.0 and truncnorm_pdf(6.01, RHOT) == 0.0
    assert truncnorm_cdf(-5.0, RHOT) == 0.0 and truncnorm_cdf(9.0, RHOT) == 1.0


@pytest.mark.parametrize("kw", [{"sigma": 0.0}, {"sigma": -1.0}, {"lo": 3.0, "hi": 3.0}])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        TruncNormSpec(**{"mu": 0.0, "sigma": 1.0, **kw})


@settings(max_examples=30)
@given(st.floats(0.001, 0.999))
def test_ppf_inverts_cdf(q):
    assert RHOT.cdf(RHOT.ppf(q)) == pytest.approx(q, abs=1e-9)


@pytest.mark.parametrize("spec", [RHO0, RHOT])
def test_mh_ks_below_critical_value(spec):
    samples = mh_sample(spec, 1000, seed=0)
    assert samples.min() >= spec.lo and samples.max() <= spec.hi
    assert distance(samples, spec)["ks"] < ks_critical(1000)


def test_mh_deterministic_per_seed():
    a = mh_sample(RHO0, 200, seed=4)
    b = mh_sample(RHO0, 200, seed=4)
    c = mh_sample(RHO0, 200, seed=5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_mh_uniform_target_accepts_everything_in_support():
    # flat target: every in-support proposal has ratio 1
    _, acc = mh_sample(lambda x: 1.0, 500, proposal_sigma=1e-3, burn_in=0, thin=1,
                       lo=0.0, hi=6.0, return_acceptance=True)
    assert acc == 1.0


def test_mh_callable_requires_bounds():
    with pytest.raises(ValueError):
        mh_sample(lambda x: 1.0, 10)
    with pytest.raises(ValueError):
        mh_sample(RHO0, 0)


def test_kde_mass():
    samples = mh_sample(RHOT, 1000, seed=1)
    grid = np.linspace(0, 6, 6001)
    assert abs(np.trapezoid(kde(samples, grid), grid) - 1.0) < 1e-3
    # the left endpoint sits on a wall; the reflected estimate keeps its mass on [0, 6]
    near_wall = mh_sample(RHO0, 1000, seed=1)
    assert abs(np.trapezoid(kde(near_wall, grid, bounds=(0.0, 6.0)), grid) - 1.0) < 1e-3


def test_kde_single_point_is_a_gaussian():
    grid = np.linspace(-3, 3, 7)
    assert np.allclose(kde([0.0], grid, bandwidth=1.0), stats.norm.pdf(grid))


def test_silverman_reference_value():
    x = np.random.default_rng(0).normal(size=4000)
    assert silverman_bandwidth(x) == pytest.approx(0.9 * 4000 ** -0.2, rel=0.05)


def test_distance_of_exact_quantiles_is_small():
    q = (np.arange(1000) + 0.5) / 1000
    d = distance(RHOT.ppf(q), RHOT)
    assert d["ks"] == pytest.approx(0.0005, abs=1e-9)
    assert d["wasserstein1"] < 1e-3


def test_distance_grid_path_matches_reference_density():
    grid = np.linspace(0, 6, 6001)
    d = distance(RHOT.pdf(grid), RHOT, grid=grid)
    assert d["wasserstein1"] < 1e-4 and d["ks"] < 1e-4
    # a density shifted by 0.5 is 0.5 away in W1
    shifted = TruncNormSpec(4.5, 0.1).pdf(grid)
    assert distance(shifted, RHOT, grid=grid)["wasserstein1"] == pytest.approx(0.5, abs=1e-3)


def test_distance_against_scipy():
    x = np.random.default_rng(3).uniform(4.7, 5.4, 300)
    ref = stats.kstest(x, RHOT.cdf).statistic
    assert distance(x, RHOT)["ks"] == pytest.approx(ref, abs=1e-12)


def test_csv_writers(tmp_path):
    write_density_csv(tmp_path / "d.csv", [0.0, 1.0], [0.5, 0.25], "hash=abc")
    write_samples_csv(tmp_path / "s.csv", [1.5, 2.5])
    assert (tmp_path / "d.csv").read_text().splitlines() == ["# hash=abc", "x,value", "0.0,0.5", "1.0,0.25"]
    assert (tmp_path / "s.csv").read_text().splitlines()[1:] == ["0,1.5", "1,2.5"]
