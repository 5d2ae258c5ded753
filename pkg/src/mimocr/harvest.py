"""Energy-harvesting secondary transmitter in the massive-array regime.

Idle transmit antennas harvest from the primary transmitter, from the
active antennas through the near-field loop channel, and from their own
noise. The harvester is piece-wise linear with saturation level ``s_th``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alloc import InfeasiblePrimaryError, SystemConfig, power_cap
from .channel import ChannelRealization, LinkStats, nakagami_m_from_k
from .specfn import Phi2Args, exp_int_e1_scaled, log_humbert_phi2

BELOW_SAT = "below_sat"
SATURATED = "saturated"


class HarvestInfeasibleError(ValueError):
    """Loop-channel harvesting outweighs consumption; the energy cap is undefined."""


@dataclass(frozen=True)
class HarvestConfig:
    eta: float = 0.85
    s_th: float = 1e10
    p_th: float = 1.0
    k_factor: float = 10 ** 2.5
    omega: float | np.ndarray = 10 ** -1.5
    t_slot: float = 1.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0 < self.p_th <= 1:
            raise ValueError(f"p_th must lie in (0, 1], got {self.p_th}")
        if not (self.s_th > 0 and self.t_slot > 0):
            raise ValueError("s_th and t_slot must be positive")
        if self.k_factor < 0 or np.any(np.asarray(self.omega) <= 0):
            raise ValueError("need k_factor >= 0 and omega > 0")

    @property
    def m_k(self) -> float:
        return nakagami_m_from_k(self.k_factor)


@dataclass(frozen=True)
class HarvestResult:
    m_active: int
    p_per_antenna: float
    p_total_effective: float
    cap_branch_low: float
    cap_branch_sat: float
    cdf_at_sth: float
    branch: str = BELOW_SAT


@dataclass(frozen=True)
class EnergyBooks:
    e_consumed: float
    e_harvested: float
    p_h: float


def omega_sum(hc: HarvestConfig, M: int, m_active: int) -> float:
    """Total loop gain summed over all (idle, active) antenna pairs."""
    m_idle = M - m_active
    omega = np.asarray(hc.omega, dtype=float)
    if omega.ndim == 0:
        return float(omega) * m_idle * m_active
    return float(np.broadcast_to(omega, (m_idle, m_active)).sum())


# ---------------------------------------------------------------------------
# Harvested power / energy
# ---------------------------------------------------------------------------

def harvested_power(realization: ChannelRealization, p_star, cfg: SystemConfig) -> float:
    """Input power at the idle antennas' harvester for one realization."""
    p_star = np.asarray(p_star, dtype=float)
    m_active = p_star.size
    loop = realization.loop_gains
    if loop is None or loop.shape != (cfg.M - m_active, m_active):
        raise ValueError(
            f"loop gains shape {None if loop is None else loop.shape} does not match "
            f"{cfg.M - m_active} idle x {m_active} active antennas")
    m_idle = cfg.M - m_active
    return float(loop @ p_star @ np.ones(m_idle) if m_idle else 0.0) + (
        cfg.p_p * float(np.sum(realization.q[m_active:])) + m_idle * cfg.n0)


def harvested_energy(p_h, hc: HarvestConfig):
    """Piece-wise linear harvester: ``eta T min(P_H, S_th)``."""
    return hc.eta * hc.t_slot * np.minimum(p_h, hc.s_th)


def energy_books(realization: ChannelRealization, p_star, cfg: SystemConfig,
                 hc: HarvestConfig) -> EnergyBooks:
    p_h = harvested_power(realization, p_star, cfg)
    return EnergyBooks(e_consumed=hc.t_slot * float(np.sum(p_star)),
                       e_harvested=float(harvested_energy(p_h, hc)), p_h=p_h)


# ---------------------------------------------------------------------------
# Power caps and antenna selection
# ---------------------------------------------------------------------------

def harvest_cap_below_sat(cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig,
                          m_active: int) -> float:
    """Total power cap when the harvester operates in its linear region.

    Largest total power ``P`` (spread evenly over ``m_active`` antennas) with
    ``T P <= P_th * eta * T * E[P_H]``, clipped at the outage cap.
    """
    m_idle = cfg.M - m_active
    gain = hc.eta * hc.p_th
    denom = m_active - gain * omega_sum(hc, cfg.M, m_active)
    if denom <= 0:
        raise HarvestInfeasibleError(
            f"loop harvesting ({gain * omega_sum(hc, cfg.M, m_active):.4g}) exceeds "
            f"m_active={m_active}")
    energy_cap = gain * m_active * m_idle * (cfg.p_p * stats.mean_q + cfg.n0) / denom
    return min(power_cap(cfg, stats, m_active), energy_cap)


def harvest_cap_saturated(cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig,
                          m_active: int) -> float:
    """Total power cap when the harvester is saturated."""
    return min(power_cap(cfg, stats, m_active), hc.eta * hc.p_th * hc.s_th)


def power_per_antenna_massive(cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig,
                              m_active: int, branch: str = BELOW_SAT) -> float:
    """Asymptotic (channel-hardened) per-antenna power for a harvester branch."""
    if not 1 <= m_active <= cfg.M:
        raise ValueError(f"m_active must lie in [1, {cfg.M}], got {m_active}")
    if branch == BELOW_SAT:
        return harvest_cap_below_sat(cfg, stats, hc, m_active) / m_active
    if branch == SATURATED:
        return harvest_cap_saturated(cfg, stats, hc, m_active) / m_active
    raise ValueError(f"unknown branch {branch!r}")


def select_branch(hc: HarvestConfig, prev_p_h: float | None) -> str:
    """Branch for the next slot from the harvested power seen in the previous one."""
    if prev_p_h is not None and prev_p_h >= hc.s_th:
        return SATURATED
    return BELOW_SAT


def active_antennas_massive(cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig,
                            prev_p_h: float | None = None) -> HarvestResult:
    """Largest number of active antennas whose hardened SINR meets ``y_th``.

    Candidates run from ``M`` down to 1. A candidate whose energy cap is
    undefined (loop harvesting too strong) or whose primary constraint is
    infeasible is skipped.
    """
    branch = select_branch(hc, prev_p_h)
    denom = cfg.interference_plus_noise(stats)
    for m in range(cfg.M, 0, -1):
        try:
            p_each = power_per_antenna_massive(cfg, stats, hc, m, branch)
        except (HarvestInfeasibleError, InfeasiblePrimaryError):
            continue
        need = cfg.y_th * denom / ((cfg.N - m + 1) * stats.mean_y)
        if p_each >= need:
            return _harvest_result(cfg, stats, hc, m, p_each, branch)
    return HarvestResult(m_active=0, p_per_antenna=0.0, p_total_effective=0.0,
                         cap_branch_low=0.0, cap_branch_sat=0.0, cdf_at_sth=float("nan"),
                         branch=branch)


def _harvest_result(cfg, stats, hc, m, p_each, branch) -> HarvestResult:
    try:
        low = harvest_cap_below_sat(cfg, stats, hc, m)
    except HarvestInfeasibleError:
        low = float("nan")
    sat = harvest_cap_saturated(cfg, stats, hc, m)
    if math.isnan(low):
        cdf, total = float("nan"), float("nan")
    else:
        cdf = cdf_harvested_power(cfg, stats, hc, m)
        total = low * cdf + sat * (1.0 - cdf)
    return HarvestResult(m_active=m, p_per_antenna=p_each, p_total_effective=total,
                         cap_branch_low=low, cap_branch_sat=sat, cdf_at_sth=cdf,
                         branch=branch)


class SlotRunner:
    """Picks the harvester branch for slot T from the power harvested in slot T-1."""

    def __init__(self, cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig):
        self.cfg, self.stats, self.hc = cfg, stats, hc
        self.last_p_h: float | None = None

    def plan(self) -> HarvestResult:
        return active_antennas_massive(self.cfg, self.stats, self.hc, self.last_p_h)

    def observe(self, p_h: float) -> None:
        self.last_p_h = float(p_h)


# ---------------------------------------------------------------------------
# Harvested-power CDF and average capacity
# ---------------------------------------------------------------------------

def gamma_sum_cdf(shape1: float, scale1: float, shape2: float, scale2: float,
                  s: float) -> float:
    """CDF at ``s`` of the sum of independent Gamma variates.

    Uses ``F(s) = s^(b1+b2) / (t1^b1 t2^b2 Gamma(b1+b2+1))
    * Phi2(b1, b2; b1+b2+1; -s/t1, -s/t2)``.
    """
    if s <= 0:
        return 0.0
    a1, a2 = s / scale1, s / scale2
    c = shape1 + shape2 + 1.0
    log_phi = log_humbert_phi2(Phi2Args(shape1, shape2, c, -a1, -a2))
    log_f = shape1 * math.log(a1) + shape2 * math.log(a2) - math.lgamma(c) + log_phi
    return min(1.0, math.exp(log_f))


def loop_power_mean(cfg: SystemConfig, hc: HarvestConfig, m_active: int,
                    p_total: float) -> float:
    """Mean loop power reaching the idle antennas when ``p_total`` is split evenly."""
    return p_total / m_active * omega_sum(hc, cfg.M, m_active)


def cdf_harvested_power(cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig,
                        m_active: int, s_th: float | None = None) -> float:
    """``Pr[P_H < S_th]`` with the loop power modelled as Gamma(m_K).

    The loop contribution is Gamma with shape ``m_K`` and mean
    ``loop_power_mean``; the primary contribution is Erlang with
    ``M - m_active`` stages of mean ``p_p E[q]``.
    """
    s_th = hc.s_th if s_th is None else s_th
    m_idle = cfg.M - m_active
    if m_idle == 0:
        return 1.0   # nothing harvested: P_H = 0 < S_th surely
    s_tilde = s_th - m_idle * cfg.n0
    if s_tilde <= 0:
        return 0.0
    p1 = harvest_cap_below_sat(cfg, stats, hc, m_active)
    loop_mean = loop_power_mean(cfg, hc, m_active, p1)
    return gamma_sum_cdf(float(m_idle), cfg.p_p * stats.mean_q,
                         hc.m_k, loop_mean / hc.m_k, s_tilde)


def p_total_effective(cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig,
                      m_active: int) -> float:
    """Branch caps averaged over the probability of harvester saturation."""
    if m_active < 1:
        raise ValueError("m_active must be at least 1")
    low = harvest_cap_below_sat(cfg, stats, hc, m_active)
    sat = harvest_cap_saturated(cfg, stats, hc, m_active)
    if low == sat:
        return low      # both branches clamped: the saturation probability is irrelevant
    f = cdf_harvested_power(cfg, stats, hc, m_active)
    return low * f + sat * (1.0 - f)


def average_capacity_closed_form(signal: float, p_p: float, mean_z: float,
                                 n0: float) -> float:
    """``E[log2(1 + signal / (p_p z + N0))]`` for exponential ``z`` (mean ``mean_z``)."""
    b = p_p * mean_z
    correction = exp_int_e1_scaled(n0 / b) - exp_int_e1_scaled((signal + n0) / b)
    return math.log2(1.0 + signal / n0) - correction / math.log(2.0)


def stream_signal_power(cfg: SystemConfig, stats: LinkStats, m_active: int,
                        p_total: float) -> float:
    """Hardened received signal power of one stream, ``(p_total/M_A)(N-M_A+1)E[y]``."""
    return p_total / m_active * (cfg.N - m_active + 1) * stats.mean_y


def avg_capacity_massive(cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig,
                         m_active: int, p_total: float | None = None) -> float:
    """Average per-stream capacity (bits/s/Hz) in the channel-hardening regime."""
    if not 1 <= m_active <= cfg.N:
        raise ValueError(f"m_active must lie in [1, N], got {m_active}")
    if p_total is None:
        p_total = p_total_effective(cfg, stats, hc, m_active)
    signal = stream_signal_power(cfg, stats, m_active, p_total)
    return average_capacity_closed_form(signal, cfg.p_p, stats.mean_z, cfg.n0)


def avg_capacity_massive_lb(cfg: SystemConfig, stats: LinkStats, hc: HarvestConfig,
                            m_active: int, p_total: float | None = None) -> float:
    """Jensen lower bound: interference replaced by its mean."""
    if p_total is None:
        p_total = p_total_effective(cfg, stats, hc, m_active)
    signal = stream_signal_power(cfg, stats, m_active, p_total)
    return math.log2(1.0 + signal / cfg.interference_plus_noise(stats))
