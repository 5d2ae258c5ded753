import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mimocr.alloc import SystemConfig, power_cap
from mimocr.channel import ChannelRealization, LinkStats, RicianLoopParams, draw_realization
from mimocr.harvest import (BELOW_SAT, SATURATED, HarvestConfig, HarvestInfeasibleError,
                            SlotRunner, active_antennas_massive, average_capacity_closed_form,
                            avg_capacity_massive, avg_capacity_massive_lb, cdf_harvested_power,
                            energy_books, gamma_sum_cdf, harvest_cap_below_sat,
                            harvest_cap_saturated, harvested_energy, harvested_power,
                            loop_power_mean, omega_sum, p_total_effective,
                            power_per_antenna_massive)
from mimocr.mcsim import SimScenario, ergodic_capacity_mc, harvest_mc

HC = HarvestConfig(eta=0.85, s_th=1e10, p_th=1.0, k_factor=10 ** 2.5, omega=10 ** -1.5)
CFG = SystemConfig(M=16, N=128)
STATS = LinkStats(mean_y=100.0, mean_x=1e3)


# -- harvested power and energy --------------------------------------------------

def test_no_idle_antennas_harvest_nothing():
    r = draw_realization(CFG, STATS, RicianLoopParams(), seed=0, m_active=CFG.M)
    assert harvested_power(r, np.ones(CFG.M), CFG) == 0.0


def test_noise_only_harvesting():
    r = draw_realization(CFG, STATS, RicianLoopParams(), seed=0, m_active=10)
    r = replace(r, q=np.zeros(CFG.M))
    assert harvested_power(r, np.zeros(10), CFG) == pytest.approx(6 * CFG.n0)


def test_harvested_power_matches_double_loop():
    r = draw_realization(CFG, STATS, RicianLoopParams(), seed=3, m_active=11)
    p = np.random.default_rng(1).uniform(0, 2, 11)
    expected = 0.0
    for l in range(CFG.M - 11):
        for i in range(11):
            expected += p[i] * r.loop_gains[l, i]
        expected += CFG.p_p * r.q[11 + l] + CFG.n0
    assert harvested_power(r, p, CFG) == pytest.approx(expected, rel=1e-13)


def test_harvested_power_dimension_mismatch():
    r = draw_realization(CFG, STATS, RicianLoopParams(), seed=3, m_active=11)
    with pytest.raises(ValueError):
        harvested_power(r, np.ones(10), CFG)


def test_harvested_energy_branches():
    hc = replace(HC, s_th=50.0, t_slot=2.0)
    assert harvested_energy(25.0, hc) == pytest.approx(0.85 * 2 * 25)
    assert harvested_energy(100.0, hc) == pytest.approx(0.85 * 2 * 50)
    assert abs(harvested_energy(50.0 - 1e-9, hc) - harvested_energy(50.0, hc)) < 1e-8


def test_energy_books():
    r = draw_realization(CFG, STATS, RicianLoopParams(), seed=5, m_active=12)
    p = np.full(12, 0.5)
    books = energy_books(r, p, CFG, replace(HC, t_slot=3.0))
    assert books.e_consumed == pytest.approx(3.0 * 6.0)
    assert books.e_harvested == pytest.approx(0.85 * 3.0 * min(books.p_h, HC.s_th))


def test_config_validation():
    with pytest.raises(ValueError):
        HarvestConfig(eta=1.2)
    with pytest.raises(ValueError):
        HarvestConfig(p_th=0.0)
    with pytest.raises(ValueError):
        HarvestConfig(omega=-1.0)


# -- power caps ------------------------------------------------------------------

def test_saturated_branch_clamped_by_budget():
    m = 12
    assert power_per_antenna_massive(CFG, STATS, HC, m, SATURATED) == pytest.approx(
        power_cap(CFG, STATS, m) / m)


def test_below_sat_vanishes_without_harvest_sources():
    hc = replace(HC, omega=1e-12)
    cfg = replace(CFG, n0=1e-12, p_max=1e9)
    stats = replace(STATS, mean_q=1e-12)
    assert power_per_antenna_massive(cfg, stats, hc, 12, BELOW_SAT) < 1e-9


def test_below_sat_infeasible_when_loop_dominates():
    # 64 idle x 64 active pairs at -15 dB harvest more than is consumed
    cfg = SystemConfig(M=128, N=256)
    with pytest.raises(HarvestInfeasibleError):
        power_per_antenna_massive(cfg, STATS, HC, 64, BELOW_SAT)


def test_unknown_branch():
    with pytest.raises(ValueError):
        power_per_antenna_massive(CFG, STATS, HC, 4, "sideways")


def test_omega_sum_per_pair_array():
    hc = replace(HC, omega=np.full((4, 12), 0.01))
    assert omega_sum(hc, 16, 12) == pytest.approx(omega_sum(replace(HC, omega=0.01), 16, 12))


def energy_contract_setup():
    cfg = SystemConfig(M=128, N=256, p_max=1e6)
    stats = LinkStats(mean_y=100.0, mean_x=1e3, mean_h=0.01, mean_q=1e-3)
    return cfg, stats, 100


def test_energy_contract_holds_with_equality_in_expectation():
    cfg, stats, m = energy_contract_setup()
    total = harvest_cap_below_sat(cfg, stats, HC, m)
    assert total < power_cap(cfg, stats, m)          # energy cap binds
    mean_p_h = loop_power_mean(cfg, HC, m, total) + (cfg.M - m) * (cfg.p_p * stats.mean_q + cfg.n0)
    assert HC.t_slot * total / (HC.eta * HC.t_slot * mean_p_h) == pytest.approx(HC.p_th, rel=1e-12)


def test_energy_contract_monte_carlo():
    cfg, stats, m = energy_contract_setup()
    p_each = power_per_antenna_massive(cfg, stats, HC, m, BELOW_SAT)
    e_h, _ = harvest_mc(SimScenario(cfg, stats, hc=HC, n_samples=1_000_000, seed=2),
                        m, np.full(m, p_each))
    ratio = HC.t_slot * p_each * m / e_h.mean
    assert ratio <= HC.p_th + 3 * ratio * e_h.std_err / e_h.mean + 1e-6


# -- massive-array antenna search ------------------------------------------------

def test_alg2_tiny_target_below_sat_keeps_one_idle_antenna():
    res = active_antennas_massive(replace(CFG, y_th=1e-12), STATS, HC)
    assert res.m_active == CFG.M - 1


def test_alg2_tiny_target_saturated_uses_all():
    res = active_antennas_massive(replace(CFG, y_th=1e-12), STATS, HC, prev_p_h=2 * HC.s_th)
    assert res.m_active == CFG.M and res.branch == SATURATED


def test_alg2_huge_target_selects_none():
    assert active_antennas_massive(replace(CFG, y_th=1e12), STATS, HC).m_active == 0


def test_alg2_skips_harvest_infeasible_candidates():
    cfg = SystemConfig(M=128, N=256)
    res = active_antennas_massive(cfg, STATS, HC)
    assert res.m_active > 0
    m_idle = cfg.M - res.m_active
    assert HC.eta * HC.p_th * m_idle * HC.omega < 1


def test_alg2_result_invariants():
    res = active_antennas_massive(CFG, STATS, HC)
    assert res.p_per_antenna * res.m_active <= min(res.cap_branch_low, res.cap_branch_sat) + 1e-9
    assert res.p_total_effective == res.cap_branch_low * res.cdf_at_sth + \
        res.cap_branch_sat * (1 - res.cdf_at_sth)
    need = res.m_active * CFG.y_th * CFG.interference_plus_noise(STATS) / (
        (CFG.N - res.m_active + 1) * STATS.mean_y)
    assert res.p_per_antenna * res.m_active >= need


def test_slot_runner_uses_previous_slot():
    runner = SlotRunner(CFG, STATS, HC)
    assert runner.plan().branch == BELOW_SAT
    runner.observe(2 * HC.s_th)
    assert runner.plan().branch == SATURATED
    runner.observe(0.5 * HC.s_th)
    assert runner.plan().branch == BELOW_SAT


# -- harvested power CDF ---------------------------------------------------------

def test_cdf_saturates_for_huge_threshold():
    assert cdf_harvested_power(CFG, STATS, HC, 12) == pytest.approx(1.0, abs=1e-12)


def test_cdf_zero_below_noise_floor():
    assert cdf_harvested_power(CFG, STATS, HC, 12, s_th=4 * CFG.n0) == 0.0
    assert cdf_harvested_power(CFG, STATS, HC, 12, s_th=4 * CFG.n0 + 1e-9) < 1e-12


def test_cdf_no_idle_antennas():
    assert cdf_harvested_power(CFG, STATS, HC, CFG.M) == 1.0


def test_cdf_monotone_and_bounded():
    grid = np.linspace(5.0, 120.0, 30)
    values = [cdf_harvested_power(CFG, STATS, HC, 12, s_th=s) for s in grid]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(b >= a - 1e-13 for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("m_idle", [2, 4, 8])
def test_cdf_matches_gamma_mixture_monte_carlo(m_idle):
    m = CFG.M - m_idle
    p1 = harvest_cap_below_sat(CFG, STATS, HC, m)
    loop_mean = loop_power_mean(CFG, HC, m, p1)
    rng = np.random.default_rng(m_idle)
    z1 = rng.gamma(HC.m_k, loop_mean / HC.m_k, 1_000_000)
    z2 = rng.gamma(m_idle, CFG.p_p * STATS.mean_q, 1_000_000)
    for frac in (0.6, 1.0, 1.4):
        s = frac * (loop_mean + m_idle * (CFG.p_p * STATS.mean_q + CFG.n0))
        emp = np.mean(z1 + z2 + m_idle * CFG.n0 < s)
        assert cdf_harvested_power(CFG, STATS, HC, m, s_th=s) == pytest.approx(emp, abs=0.003)


def test_gamma_sum_cdf_exponential_pair():
    # Exp(1) + Exp(2 scale): closed form 1 - 2 e^{-s/2} + e^{-s}
    s = 3.0
    assert gamma_sum_cdf(1.0, 1.0, 1.0, 2.0, s) == pytest.approx(
        1 - 2 * math.exp(-s / 2) + math.exp(-s), rel=1e-12)


# -- effective total power -------------------------------------------------------

def test_p_total_endpoints():
    m = 12
    p1 = harvest_cap_below_sat(CFG, STATS, HC, m)
    assert p_total_effective(CFG, STATS, HC, m) == pytest.approx(p1)          # F = 1
    low = replace(HC, s_th=3.0 * CFG.n0)
    p2 = harvest_cap_saturated(CFG, STATS, low, m)
    assert p_total_effective(CFG, STATS, low, m) == pytest.approx(p2)         # F = 0


def test_p_total_equal_caps():
    cfg = replace(CFG, p_max=1e-3)
    assert p_total_effective(cfg, STATS, replace(HC, s_th=40.0), 12) == pytest.approx(1e-3)


# -- average capacity --------------------------------------------------------------

def quad_capacity(a, p_p, mean_z, n0):
    f = lambda z: math.log2(1 + a / (p_p * z + n0)) * math.exp(-z / mean_z) / mean_z
    return integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=400)[0]


@given(a=st.floats(1e-3, 1e5), p_p=st.floats(1e-2, 1e3), mz=st.floats(1e-2, 10.0),
       n0=st.floats(0.05, 10.0))
@settings(max_examples=100, deadline=None)
def test_closed_form_capacity_matches_quadrature(a, p_p, mz, n0):
    ref = quad_capacity(a, p_p, mz, n0)
    assert average_capacity_closed_form(a, p_p, mz, n0) == pytest.approx(ref, rel=1e-6)
    assert math.log2(1 + a / (p_p * mz + n0)) <= average_capacity_closed_form(a, p_p, mz, n0) + 1e-12


def test_capacity_without_primary_interference():
    a = 37.0
    assert average_capacity_closed_form(a, 1e-9, 1.0, 1.0) == pytest.approx(math.log2(1 + a), rel=1e-8)


def test_massive_capacity_lb_below_closed_form():
    for m in (4, 8, 12, 15):
        assert avg_capacity_massive_lb(CFG, STATS, HC, m) <= avg_capacity_massive(CFG, STATS, HC, m)


def test_channel_hardening_approaches_closed_form():
    stats = LinkStats(mean_y=1.0, mean_x=1e3)
    gaps = []
    for n in (64, 128, 256):
        cfg = SystemConfig(M=16, N=n)
        scn = SimScenario(cfg, stats, hc=HC, n_samples=400_000, seed=n)
        plan = active_antennas_massive(cfg, stats, HC)
        mc = ergodic_capacity_mc(scn, "massive_alg2")
        closed = avg_capacity_massive(cfg, stats, HC, plan.m_active, plan.p_per_antenna * plan.m_active)
        gaps.append(abs(mc.mean - closed))
    assert gaps[0] > gaps[1] > gaps[2]


def test_harvest_mc_all_active():
    e_h, f = harvest_mc(SimScenario(CFG, STATS, hc=HC, n_samples=1000, seed=0), CFG.M, np.ones(CFG.M))
    assert e_h.mean == 0.0 and f.mean == 1.0


def test_harvest_mc_infinite_threshold():
    hc = replace(HC, s_th=1e300)
    _, f = harvest_mc(SimScenario(CFG, STATS, hc=hc, n_samples=10_000, seed=0), 12, np.ones(12))
    assert f.mean == 1.0
