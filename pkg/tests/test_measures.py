"""Measure family: exact algebra, inversion, and sampler laws."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taeblp import measures as M

from conftest import assert_gof, rng_for


# independent truncated-sum oracle: plain loops, no shared code with the
# implementation under test
def oracle_moments(theta, beta, half=45):
    center = theta / beta
    zs = range(int(center) - half, int(center) + half + 1)
    w = [math.exp(theta * z - 0.5 * beta * z * z) for z in zs]
    Z = sum(w)
    mean = sum(z * wi for z, wi in zip(zs, w)) / Z
    var = sum((z - mean) ** 2 * wi for z, wi in zip(zs, w)) / Z
    return Z, mean, var


def test_rate_f_frozen_values(params1):
    assert M.rate_f(0, params1) == pytest.approx(0.6065306597126334, abs=1e-15)
    assert M.rate_f(1, params1) == pytest.approx(1.6487212707001282, abs=1e-14)
    assert M.rate_f(0, params1) * M.rate_f(1, params1) == pytest.approx(1.0, abs=1e-15)
    assert M.rate_f(-3, M.RateParams(0.5)) == pytest.approx(0.17377394345044514, abs=1e-15)


@given(z=st.integers(-50, 50), beta=st.sampled_from([0.25, 0.5, 1.0, 1.5]))
def test_rate_stationarity_identity(z, beta):
    p = M.RateParams(beta)
    assert abs(M.rate_f(z, p) * M.rate_f(1 - z, p) - 1.0) < 1e-12


def test_rate_f_overflow_guard(params1):
    with pytest.raises(ValueError):
        M.rate_f(81, params1)
    with pytest.raises(ValueError):
        M.rate_f(-45, M.RateParams(2.0))


def test_rate_params_validation():
    with pytest.raises(ValueError):
        M.RateParams(0.0)
    with pytest.raises(ValueError):
        M.RateParams(-1.0)


def test_marginal_against_oracle(params1):
    m = M.build_marginal(0.0, params1)
    Z, mean, var = oracle_moments(0.0, 1.0)
    assert math.exp(m.logZ) == pytest.approx(Z, rel=1e-13)
    assert m.rho == pytest.approx(mean, abs=1e-13)
    assert m.var_omega == pytest.approx(var, rel=1e-12)
    # frozen values from the oracle
    assert math.exp(m.logZ) == pytest.approx(2.5066282880429056, rel=1e-12)
    assert m.pmf_at(0) == pytest.approx(0.39894227826686174, rel=1e-12)
    assert abs(m.rho) < 1e-14

    m2 = M.build_marginal(0.7, M.RateParams(0.5))
    Z2, mean2, var2 = oracle_moments(0.7, 0.5)
    assert math.exp(m2.logZ) == pytest.approx(Z2, rel=1e-12)
    assert m2.rho == pytest.approx(mean2, rel=1e-11)
    assert m2.var_omega == pytest.approx(var2, rel=1e-11)


def test_marginal_mass_and_shift(params1):
    m0 = M.build_marginal(0.0, params1)
    assert m0.pmf.sum() == pytest.approx(1.0, abs=1e-12)
    m1 = M.build_marginal(1.0, params1)
    assert m1.rho == pytest.approx(1.0, abs=1e-12)
    assert m1.logZ - m0.logZ == pytest.approx(0.5, abs=1e-12)
    zs = np.arange(-30, 31)
    assert np.abs(m1.pmf_at(zs) - m0.pmf_at(zs - 1)).max() < 1e-10


def test_marginal_tail_tol_contract(params1):
    with pytest.raises(ValueError):
        M.build_marginal(0.0, params1, tail_tol=1e-3)


def test_theta_of_rho_integer_and_half(params1):
    assert M.theta_of_rho(0.0, params1) == pytest.approx(0.0, abs=1e-12)
    assert M.theta_of_rho(0.5, params1) == pytest.approx(0.5, abs=1e-11)
    for k in (-2, -1, 1, 3):
        assert M.theta_of_rho(float(k), params1) == pytest.approx(k * 1.0, abs=1e-10)
    p2 = M.RateParams(2.0)
    assert M.theta_of_rho(2.0, p2) == pytest.approx(4.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(rho=st.floats(-3.0, 3.0), beta=st.sampled_from([0.5, 1.0, 2.0]))
def test_theta_of_rho_roundtrip(rho, beta):
    p = M.RateParams(beta)
    theta = M.theta_of_rho(rho, p)
    back = M.build_marginal(theta, p).rho
    assert abs(back - rho) < 1e-8 * max(1.0, abs(rho))


def test_rho_strictly_increasing(params1):
    thetas = np.arange(-3.0, 3.01, 0.25)
    rhos = [M.build_marginal(t, params1).rho for t in thetas]
    assert all(b > a for a, b in zip(rhos, rhos[1:]))


def test_flux_and_speed(params1):
    H0, V0 = M.flux_and_speed(0.0, params1)
    assert H0 == pytest.approx(2.0, abs=1e-12)
    assert abs(V0) < 1e-12
    H1, V1 = M.flux_and_speed(1.0, params1)
    assert H1 == pytest.approx(math.e + math.exp(-1.0), abs=1e-11)
    # independent value: (e - 1/e) / oracle variance at theta = 1
    _, _, var1 = oracle_moments(1.0, 1.0)
    assert V1 == pytest.approx((math.e - math.exp(-1.0)) / var1, rel=1e-10)
    # convexity probe
    h = 0.25
    for rho in np.arange(-2.0, 2.01, 0.5):
        Hm, _ = M.flux_and_speed(rho - h, params1)
        Hc, _ = M.flux_and_speed(rho, params1)
        Hp, _ = M.flux_and_speed(rho + h, params1)
        assert Hm + Hp - 2 * Hc > 0


def test_rw_rates(params1):
    right, left = M.rw_rates(0.0, params1)
    assert right == pytest.approx(math.e - 1.0, abs=1e-12)
    assert left == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)
    # both rates positive with ratio exactly exp(2*theta + beta); the walk
    # drifts right only above density -1/2
    for rho in (-1.5, -0.3, 0.0, 0.8, 2.0):
        r, l = M.rw_rates(rho, params1)
        theta = M.theta_of_rho(rho, params1)
        assert r > 0 and l > 0
        assert r / l == pytest.approx(math.exp(2 * theta + 1.0), rel=1e-10)
        assert (r > l) == (rho > -0.5)


def test_size_biased_forms_and_mass(params1):
    for theta in (0.0, 0.7, -1.3):
        sb = M.size_biased(M.build_marginal(theta, params1))
        assert sb.forms_max_diff < 1e-10
        assert sb.pmf.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.all(sb.pmf >= 0)


def test_size_biased_ratio_bounded(params1):
    # mass(y) / mu(y) stays bounded over a wide range; frozen bound from a
    # tabulation at beta=1, theta=0 (max observed 1.968 at y = -1)
    m = M.build_marginal(0.0, params1)
    sb = M.size_biased(m)
    ys = np.arange(-30, 31)
    ratio = sb.pmf_at(ys) / np.maximum(m.pmf_at(ys), 1e-280)
    keep = m.pmf_at(ys) > 1e-250
    assert np.all(np.isfinite(ratio[keep]))
    assert ratio[keep].max() < 2.1


def test_mu_sampler_gof(params1):
    m = M.build_marginal(0.0, params1)
    rng = rng_for(1)
    draws = m.sample(rng, 1_000_000)
    assert abs(draws.mean()) < 3.5 * draws.std(ddof=1) / 1000.0
    assert_gof(draws, m.pmf_at)


def test_mu_hat_sampler_gof(params1):
    sb = M.size_biased(M.build_marginal(0.0, params1))
    rng = rng_for(2)
    draws = sb.sample(rng, 1_000_000)
    assert_gof(draws, sb.pmf_at)
    se = draws.std(ddof=1) / 1000.0
    assert abs(draws.mean() - sb.mean()) < 3.5 * se


def test_quantile_inverse_cdf(params1):
    m = M.build_marginal(0.3, params1)
    # quantile jumps exactly at the cdf levels
    for z in range(m.zmin + 1, m.zmin + len(m.pmf)):
        u = m.cdf[z - m.zmin - 1]
        assert m.quantile(u) == z or m.pmf[z - m.zmin] == 0.0


def test_ordered_pair_plain(params1):
    rng = rng_for(3)
    sampler = M.OrderedPairSampler(-0.5, 0.75, params1)
    lo, hi = sampler.sample(rng, 200_000)
    assert np.all(lo <= hi)
    # equal densities: identical coordinates
    same = M.OrderedPairSampler(0.3, 0.3, params1)
    a, b = same.sample(rng, 10_000)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        M.OrderedPairSampler(1.0, 0.0, params1)


def test_ordered_pair_strict(params1):
    rng = rng_for(4)
    sampler = M.OrderedPairSampler(-0.5, 0.5, params1, strict_at_origin=True)
    lo, hi = sampler.sample(rng, 1_000_000)
    assert np.all(lo < hi)


def test_ordered_pair_marginals(params1):
    rng = rng_for(5)
    lam, rho = -0.5, 0.75
    sampler = M.OrderedPairSampler(lam, rho, params1)
    lo, hi = sampler.sample(rng, 500_000)
    th_lo = M.theta_of_rho(lam, params1)
    th_hi = M.theta_of_rho(rho, params1)
    m_lo = M.build_marginal(th_lo, params1)
    m_hi = M.build_marginal(th_hi, params1)
    # per-bin agreement within 4 binomial stderr
    for m, x in ((m_lo, lo), (m_hi, hi)):
        ks = np.arange(x.min(), x.max() + 1)
        emp = np.array([(x == k).mean() for k in ks])
        pk = m.pmf_at(ks)
        se = np.sqrt(np.maximum(pk * (1 - pk), 1e-12) / len(x))
        assert np.all(np.abs(emp - pk) <= 4.0 * se + 1e-9)


def test_shock_pair_measure(params1):
    shock = M.ShockPairMeasure.build(0.0, params1)
    rng = rng_for(6)
    sites = np.arange(-15, 16)
    n = 200_000
    at0 = np.empty(n, dtype=np.int64)
    for i in range(2000):
        lo, hi = shock.sample_fields(sites, rng)
        d = hi - lo
        assert d.sum() == 1 and d[15] == 1  # exactly one defect, at the origin
        if i == 0:
            left_idx = sites < 0
            right_idx = sites > 0
            assert np.array_equal(lo[left_idx], hi[left_idx])
            assert np.array_equal(lo[right_idx], hi[right_idx])
    # law of the second coordinate at the origin is the dense marginal
    y0 = shock.right_marginal.sample(rng_for(7), n)
    z0 = y0 + 1
    dense = shock.left_marginal
    assert_gof(z0, dense.pmf_at)


def test_geometric_label_law():
    nu = M.GeometricLabelLaw(1.0)
    ms = np.arange(0, 80)
    assert nu.pmf(ms).sum() == pytest.approx(1.0, abs=1e-12)
    assert nu.pmf(-1) == 0.0
    assert nu.tail(0) == 1.0
    assert nu.tail(3) == pytest.approx(math.exp(-3.0), abs=1e-14)
    assert nu.pmf(2) == pytest.approx(math.exp(-2.0) * (1 - math.exp(-1.0)), abs=1e-14)
