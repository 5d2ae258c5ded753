"""Outage-constrained power cap, water-filling and effective antenna selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import LinkStats


class InfeasiblePrimaryError(ValueError):
    """Noise alone already violates the primary outage target."""


@dataclass(frozen=True)
class SystemConfig:
    """Scalar system parameters, all powers and thresholds linear.

    M, N : transmit / receive antennas of the secondary link (N >= M)
    L : number of primary receivers
    p_p : primary transmit power
    p_max : total secondary transmit budget
    n0 : noise variance
    gamma_th : primary SINR threshold
    y_th : secondary SINR threshold
    epsilon : admissible primary outage probability
    """

    M: int = 4
    N: int = 8
    L: int = 1
    p_p: float = 10.0
    p_max: float = 100.0
    n0: float = 1.0
    gamma_th: float = 1.0
    y_th: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if not (1 <= self.M <= self.N):
            raise ValueError(f"need 1 <= M <= N, got M={self.M}, N={self.N}")
        if self.L < 1:
            raise ValueError(f"need L >= 1, got {self.L}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        for name in ("p_p", "p_max", "n0", "gamma_th", "y_th"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")

    def interference_plus_noise(self, stats: LinkStats) -> float:
        """Statistical denominator ``p_p E[z] + N0`` of the secondary SINR."""
        return self.p_p * stats.mean_z + self.n0


@dataclass(frozen=True)
class AllocationResult:
    p_star: np.ndarray
    water_level: float
    m_eff: int
    p_cap: float
    feasible: bool
    active: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    # indices into the input gain vector, aligned with p_star


def outage_min_sinr(cfg: SystemConfig, stats: LinkStats, p_i: float, m_active: int) -> float:
    """Probability that the weakest primary receiver falls below ``gamma_th``.

    Every one of the ``m_active`` secondary antennas transmits ``p_i``; the
    ST-PR average gains are identical across primary users.
    """
    a = cfg.p_p * stats.mean_x
    base = a / (a + p_i * stats.mean_h * cfg.gamma_th)
    return -math.expm1(m_active * cfg.L * math.log(base) - cfg.L * cfg.n0 * cfg.gamma_th / a)


def per_antenna_power_limit(cfg: SystemConfig, stats: LinkStats, m_active: int) -> float:
    """Equal per-antenna power at which the primary outage equals ``epsilon``."""
    a = cfg.p_p * stats.mean_x
    log_ratio = math.log1p(-cfg.epsilon) / cfg.L + cfg.n0 * cfg.gamma_th / a
    bracket = math.expm1(-log_ratio / m_active)
    if bracket <= 0:
        raise InfeasiblePrimaryError(
            f"noise-only primary outage {-math.expm1(-cfg.L * cfg.n0 * cfg.gamma_th / a):.4g} "
            f"exceeds epsilon={cfg.epsilon}")
    return a / (stats.mean_h * cfg.gamma_th) * bracket


def power_cap(cfg: SystemConfig, stats: LinkStats, m_active: int) -> float:
    """Total secondary power admitted by the outage constraint, clipped at ``p_max``."""
    return min(cfg.p_max, m_active * per_antenna_power_limit(cfg, stats, m_active))


def waterfill(y, p_cap: float, denom: float) -> AllocationResult:
    """Maximize ``sum log2(1 + p_i y_i / denom)`` s.t. ``sum p_i = p_cap``, ``p_i >= 0``.

    Channels whose power would be negative are removed one at a time (weakest
    first) and the water level is recomputed on the rest.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0 or np.any(y <= 0):
        raise ValueError("y must be a non-empty vector of positive gains")
    floor = denom / y
    active = np.argsort(floor, kind="stable")
    while True:
        level = (p_cap + floor[active].sum()) / active.size
        if level > floor[active[-1]] or active.size == 1:
            break
        active = active[:-1]
    p = np.zeros_like(y)
    p[active] = level - floor[active]
    return AllocationResult(p_star=p, water_level=level, m_eff=y.size, p_cap=p_cap,
                            feasible=True, active=np.arange(y.size))


def sinr_check_lhs(ys: np.ndarray, p_cap: float, denom: float) -> np.ndarray:
    """Left-hand side of the per-antenna SINR check for the retained gains ``ys``."""
    return ys * (p_cap + np.sum(denom / ys)) / (ys.size * denom)


def effective_antennas(cfg: SystemConfig, stats: LinkStats, y) -> AllocationResult:
    """Shrink the active set until every retained stream meets ``y_th``.

    Starting from all ``len(y)`` antennas, the weakest antenna is dropped
    until the water-filling powers at the current cap satisfy the SINR
    target on every retained stream. Returns ``m_eff = 0`` when no subset
    works or the primary constraint admits no power at all.
    """
    y = np.asarray(y, dtype=float)
    denom = cfg.interference_plus_noise(stats)
    order = np.argsort(-y, kind="stable")
    for m in range(y.size, 0, -1):
        try:
            cap = power_cap(cfg, stats, m)
        except InfeasiblePrimaryError:
            break
        ys = y[order[:m]]
        if np.all(sinr_check_lhs(ys, cap, denom) >= cfg.y_th + 1.0):
            wf = waterfill(ys, cap, denom)
            return AllocationResult(p_star=wf.p_star, water_level=wf.water_level, m_eff=m,
                                    p_cap=cap, feasible=True, active=order[:m])
    return AllocationResult(p_star=np.zeros(0), water_level=0.0, m_eff=0, p_cap=0.0,
                            feasible=False)


def check_margin_trace(cfg: SystemConfig, stats: LinkStats, y) -> np.ndarray:
    """Check value at the weakest retained antenna for m = M, M-1, ..., 1.

    Entry ``k`` corresponds to ``m = M - k``; NaN where the primary
    constraint is infeasible.
    """
    y = np.sort(np.asarray(y, dtype=float))[::-1]
    denom = cfg.interference_plus_noise(stats)
    out = np.full(y.size, np.nan)
    for k, m in enumerate(range(y.size, 0, -1)):
        try:
            cap = power_cap(cfg, stats, m)
        except InfeasiblePrimaryError:
            continue
        out[k] = sinr_check_lhs(y[:m], cap, denom).min()
    return out


# ---------------------------------------------------------------------------
# Vectorized forms used by the Monte-Carlo engine
# ---------------------------------------------------------------------------

def waterfill_batch(y: np.ndarray, p_cap: float, denom: float) -> np.ndarray:
    """Row-wise water-filling for gains ``y`` of shape ``(B, K)``."""
    y = np.asarray(y, dtype=float)
    B, K = y.shape
    order = np.argsort(-y, axis=1, kind="stable")
    floor = denom / np.take_along_axis(y, order, axis=1)          # ascending
    csum = np.cumsum(floor, axis=1)
    k = np.arange(1, K + 1)
    level = (p_cap + csum) / k
    valid = level > floor
    valid[:, 0] = True
    n_act = K - np.argmax(valid[:, ::-1], axis=1)
    lam = level[np.arange(B), n_act - 1]
    p_sorted = np.where(k[None, :] <= n_act[:, None], lam[:, None] - floor, 0.0)
    p = np.empty_like(p_sorted)
    np.put_along_axis(p, order, p_sorted, axis=1)
    return p


def effective_antennas_batch(cfg: SystemConfig, stats: LinkStats, y: np.ndarray):
    """Vectorized antenna selection for gains ``y`` of shape ``(B, M)``.

    Returns ``(m_eff, order, p_sorted, caps)``: ``order`` sorts each row by
    decreasing gain, ``p_sorted[b, :m_eff[b]]`` are the powers of the
    retained antennas in that order, and ``caps[m]`` is the cap for ``m``
    active antennas (NaN when infeasible).
    """
    y = np.asarray(y, dtype=float)
    B, M = y.shape
    denom = cfg.interference_plus_noise(stats)
    order = np.argsort(-y, axis=1, kind="stable")
    ys = np.take_along_axis(y, order, axis=1)
    inv_cum = np.cumsum(denom / ys, axis=1)
    caps = np.full(M + 1, np.nan)
    m_eff = np.zeros(B, dtype=int)
    undecided = np.ones(B, dtype=bool)
    for m in range(M, 0, -1):
        try:
            caps[m] = power_cap(cfg, stats, m)
        except InfeasiblePrimaryError:
            break
        # the weakest retained antenna is the binding one
        lhs = ys[:, m - 1] * (caps[m] + inv_cum[:, m - 1]) / (m * denom)
        ok = undecided & (lhs >= cfg.y_th + 1.0)
        m_eff[ok] = m
        undecided &= ~ok
    p_sorted = np.zeros((B, M))
    for m in np.unique(m_eff[m_eff > 0]):
        rows = m_eff == m
        lam = (caps[m] + inv_cum[rows, m - 1]) / m
        p_sorted[rows, :m] = lam[:, None] - denom / ys[rows, :m]
    return m_eff, order, p_sorted, caps
