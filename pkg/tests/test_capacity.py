import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from mimocr.capacity import (CapacityBoundInputs, allocated_power_density,
                             capacity_lower_bound, j1, j1_weights, j2)
from mimocr.specfn import log_gamma_upper


def inputs(**kw):
    base = dict(n=8, m_eff=3, mean_y=10.0, mean_z=1.0, p_p=10.0, n0=1.0, p_cap=50.0)
    base.update(kw)
    return CapacityBoundInputs(**base)


def j1_quadrature(inp):
    f = lambda w: math.log(w) * float(allocated_power_density(w, inp))
    scale = (inp.n - inp.m_eff + 1) / inp.rate
    parts = [integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=400)[0]
             for a, b in ((0, 1e-3 * scale), (1e-3 * scale, scale), (scale, np.inf))]
    return sum(parts)


def j1_monte_carlo(inp, n=4_000_000, seed=0):
    # draw y from its law conditioned on W > 0 by inverting the upper tail
    rng = np.random.default_rng(seed)
    law = stats.gamma(inp.n - inp.m_eff + 1, scale=inp.mean_y)
    t = inp.m_eff * inp.denom / inp.p_cap
    y = law.isf(rng.uniform(0, law.sf(t), n))
    w = inp.p_cap / inp.m_eff * y - inp.denom
    return np.log(w[w > 0]).mean()


@pytest.mark.parametrize("kw", [{}, dict(n=16, m_eff=1, mean_y=0.5), dict(n=64, m_eff=8, mean_y=0.1),
                                dict(n=4, m_eff=4, p_cap=3.0), dict(mean_y=0.05, p_cap=5.0)])
def test_j1_matches_quadrature_of_density(kw):
    inp = inputs(**kw)
    assert j1(inp) == pytest.approx(j1_quadrature(inp), rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("kw", [{}, dict(n=16, m_eff=2, mean_y=0.3), dict(mean_y=0.05, p_cap=5.0)])
def test_j1_matches_monte_carlo(kw):
    inp = inputs(**kw)
    assert j1(inp) == pytest.approx(j1_monte_carlo(inp), abs=0.01)


def test_j1_square_case_is_single_term():
    inp = inputs(n=5, m_eff=5)
    assert j1(inp) == pytest.approx(float(mpmath.digamma(1)) - math.log(inp.rate), rel=1e-13)


@given(n=st.integers(1, 400), m=st.integers(1, 40), ey=st.floats(1e-3, 1e3),
       p=st.floats(1e-2, 1e3))
@settings(max_examples=100, deadline=None)
def test_j1_weights_normalized_even_for_large_arrays(n, m, ey, p):
    inp = inputs(n=n + m - 1, m_eff=m, mean_y=ey, p_cap=p)
    w = j1_weights(inp)
    assert np.all(np.isfinite(w)) and np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("kw", [{}, dict(n=32, m_eff=2, mean_y=0.2), dict(n=4, m_eff=4)])
def test_density_integrates_to_one(kw):
    inp = inputs(**kw)
    scale = (inp.n - inp.m_eff + 1) / inp.rate
    total = sum(integrate.quad(lambda w: float(allocated_power_density(w, inp)), a, b,
                               epsabs=0, epsrel=1e-12, limit=400)[0]
                for a, b in ((0, scale), (scale, np.inf)))
    assert total == pytest.approx(1.0, abs=1e-8)


def test_j2_matches_monte_carlo():
    rng = np.random.default_rng(1)
    z = rng.exponential(1.0, 10_000_000)
    assert j2(inputs()) == pytest.approx(np.log(10.0 * z + 1.0).mean(), abs=0.005)


def test_j2_vanishing_interference_limit():
    assert j2(inputs(p_p=1e-9, n0=2.0)) == pytest.approx(math.log(2.0), abs=1e-8)


@given(a=st.floats(0.01, 100.0), b=st.floats(0.01, 100.0))
def test_j2_depends_only_on_product(a, b):
    assert j2(inputs(p_p=a, mean_z=b)) == pytest.approx(j2(inputs(p_p=b, mean_z=a)), rel=1e-13)


def test_j2_matches_mpmath_ei_form():
    inp = inputs(p_p=3.0, mean_z=0.7, n0=1.3)
    b = inp.n0 / (inp.p_p * inp.mean_z)
    ref = math.log(inp.n0) - float(mpmath.exp(b) * mpmath.ei(-b))
    assert j2(inp) == pytest.approx(ref, rel=1e-13)


@given(e1=st.floats(-2, 2), e2=st.floats(-2, 2))
@settings(max_examples=60)
def test_bound_nondecreasing_in_mean_gain(e1, e2):
    lo, hi = sorted((10 ** e1, 10 ** e2))
    assert capacity_lower_bound(inputs(mean_y=lo)) <= capacity_lower_bound(inputs(mean_y=hi)) + 1e-12


@given(e1=st.floats(-1, 3), e2=st.floats(-1, 3))
@settings(max_examples=60)
def test_bound_nondecreasing_in_power(e1, e2):
    lo, hi = sorted((10 ** e1, 10 ** e2))
    assert capacity_lower_bound(inputs(p_cap=lo)) <= capacity_lower_bound(inputs(p_cap=hi)) + 1e-12


def test_bound_vanishes_without_power():
    assert capacity_lower_bound(inputs(p_cap=1e-9)) < 1e-3


def test_inputs_validation():
    with pytest.raises(ValueError):
        inputs(m_eff=9)
    with pytest.raises(ValueError):
        inputs(p_cap=0.0)


@pytest.mark.parametrize("n,a", [(0, 0.3), (4, 2.0), (30, 55.0), (200, 3.0)])
def test_weight_normalizer_is_upper_incomplete_gamma(n, a):
    # sum_j a^j / j! = e^a Gamma(n+1, a) / n!
    j = np.arange(n + 1)
    log_sum = np.logaddexp.reduce(j * math.log(a) - np.array([math.lgamma(k + 1) for k in j]))
    assert log_sum == pytest.approx(a + log_gamma_upper(n + 1, a) - math.lgamma(n + 1), rel=1e-12)
