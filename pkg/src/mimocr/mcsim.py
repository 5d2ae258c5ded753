"""Monte-Carlo simulation of the underlay link: ZF detection, primary outage, harvesting.

Every estimator splits its draws into fixed-size chunks, seeds chunk ``k``
from ``SeedSequence(seed).spawn`` and merges chunk statistics in order, so
results depend only on ``(scenario, seed)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alloc import (InfeasiblePrimaryError, SystemConfig, effective_antennas_batch,
                    power_cap, waterfill_batch)
from .channel import LinkStats, RicianLoopParams, complex_gaussian, draw_loop_gains
from .harvest import HarvestConfig, active_antennas_massive

CHUNK = 8192
POLICIES = ("proposed_alg1", "conventional_full_M", "massive_alg2")


class RankDeficientError(np.linalg.LinAlgError):
    """The ZF channel matrix does not have full column rank."""


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_err: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")


@dataclass(frozen=True)
class SimScenario:
    cfg: SystemConfig
    stats: LinkStats = field(default_factory=LinkStats)
    hc: HarvestConfig | None = None
    loop: RicianLoopParams | None = None
    n_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.hc is not None and not isinstance(self.hc, HarvestConfig):
            raise TypeError(f"hc must be a HarvestConfig, got {type(self.hc).__name__}")

    def loop_params(self) -> RicianLoopParams:
        """Loop model for harvesting draws; coherent addition unless given explicitly."""
        if self.loop is not None:
            return self.loop
        if self.hc is None:
            raise ValueError("scenario has neither loop parameters nor a harvest config")
        return RicianLoopParams(self.hc.k_factor, self.hc.omega, coherent=True)


class _Moments:
    """Streaming count/mean/M2 with the pairwise (Chan) merge."""

    def __init__(self):
        self.n, self.mean, self.m2 = 0, 0.0, 0.0

    def add(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        n_b = values.size
        if n_b == 0:
            return
        mean_b = float(values.mean())
        m2_b = float(np.sum((values - mean_b) ** 2))
        n = self.n + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / n
        self.m2 += m2_b + delta * delta * self.n * n_b / n
        self.n = n

    def estimate(self, seed: int) -> McEstimate:
        var = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        return McEstimate(self.mean, float(np.sqrt(var / self.n)), self.n, seed)


def _chunks(n_samples: int, seed: int, chunk: int = CHUNK):
    n_chunks = -(-n_samples // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for k, child in enumerate(children):
        yield min(chunk, n_samples - k * chunk), np.random.default_rng(child)


# ---------------------------------------------------------------------------
# Zero-forcing detection
# ---------------------------------------------------------------------------

def zf_gains(H: np.ndarray, h_p: np.ndarray | None = None):
    """ZF effective gains and normalized interference gains.

    ``H`` has shape ``(..., N, K)`` and ``h_p`` shape ``(..., N)``. Returns
    ``y`` with ``y_k = 1 / [(H^H H)^-1]_kk`` and, when ``h_p`` is given,
    ``z`` with ``z_k = |u_k h_p|^2 / ||u_k||^2`` for the pseudo-inverse rows
    ``u_k``.
    """
    Hh = np.conj(np.swapaxes(H, -1, -2))
    gram_inv = np.linalg.inv(Hh @ H)
    diag = np.real(np.diagonal(gram_inv, axis1=-2, axis2=-1))
    y = 1.0 / diag
    if h_p is None:
        return y, None
    proj = gram_inv @ (Hh @ h_p[..., None])
    z = np.abs(proj[..., 0]) ** 2 / diag
    return y, z


def _zf_gains_qr(H: np.ndarray, h_p: np.ndarray):
    Q, R = np.linalg.qr(H)
    if np.min(np.abs(np.diag(R))) <= np.finfo(float).eps * np.abs(R).max() * max(H.shape):
        raise RankDeficientError("channel matrix is rank deficient")
    pinv = np.linalg.solve(R, np.conj(Q.T))
    row_norm2 = np.sum(np.abs(pinv) ** 2, axis=1)
    return 1.0 / row_norm2, np.abs(pinv @ h_p) ** 2 / row_norm2


def zf_stream_sinrs(realization, p_star, p_p: float, n0: float,
                    z_draw=None, active=None) -> np.ndarray:
    """Per-stream SINR after ZF detection of the active columns of ``H``.

    ``SINR_k = p_k y_k / (p_p z_k + N0)``. With ``z_draw`` the interference
    gain is replaced by the given value(s) instead of the realization's
    ``h_p`` projection.
    """
    p_star = np.asarray(p_star, dtype=float)
    H = realization.H if active is None else realization.H[:, np.asarray(active)]
    if H.shape[1] != p_star.size:
        raise ValueError(f"{p_star.size} powers for {H.shape[1]} streams")
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e14:
        raise RankDeficientError(f"channel matrix is rank deficient (cond={cond:.3g})")
    if cond > 1e8:
        y, z = _zf_gains_qr(H, realization.h_p)
    else:
        y, z = zf_gains(H, realization.h_p)
    if z_draw is not None:
        z = np.broadcast_to(np.asarray(z_draw, dtype=float), y.shape)
    return p_star * y / (p_p * z + n0)


# ---------------------------------------------------------------------------
# Primary outage
# ---------------------------------------------------------------------------

def primary_outage_mc(scn: SimScenario, p_star) -> McEstimate:
    """Fraction of draws where the weakest primary receiver has SINR <= gamma_th."""
    cfg, stats = scn.cfg, scn.stats
    p_star = np.asarray(p_star, dtype=float)
    acc = _Moments()
    for n, rng in _chunks(scn.n_samples, scn.seed, chunk=65536):
        x = rng.exponential(stats.mean_x, (n, cfg.L))
        h = rng.exponential(stats.mean_h, (n, p_star.size, cfg.L))
        interference = np.einsum("i,bil->bl", p_star, h) + cfg.n0
        with np.errstate(divide="ignore"):
            sinr = cfg.p_p * x / interference
        acc.add((sinr.min(axis=1) <= cfg.gamma_th).astype(float))
    return acc.estimate(scn.seed)


# ---------------------------------------------------------------------------
# Ergodic capacity
# ---------------------------------------------------------------------------

def _draw_channels(rng, cfg: SystemConfig, stats: LinkStats, n: int):
    H = complex_gaussian(rng, (n, cfg.N, cfg.M), stats.mean_y)
    h_p = complex_gaussian(rng, (n, cfg.N), stats.mean_z)
    return H, h_p


def _primary_feasible(cfg, stats) -> bool:
    # the noise-only outage does not depend on the number of antennas
    try:
        power_cap(cfg, stats, 1)
    except InfeasiblePrimaryError:
        return False
    return True


def _capacity_proposed(rng, cfg, stats, n):
    H, h_p = _draw_channels(rng, cfg, stats, n)
    y, _ = zf_gains(H)
    m_eff, order, p_sorted, _ = effective_antennas_batch(cfg, stats, y)
    out = np.zeros(n)
    for m in np.unique(m_eff[m_eff > 0]):
        rows = np.flatnonzero(m_eff == m)
        cols = order[rows, :m]
        H_sel = np.take_along_axis(H[rows], cols[:, None, :], axis=2)
        y_sel, z_sel = zf_gains(H_sel, h_p[rows])
        sinr = p_sorted[rows, :m] * y_sel / (cfg.p_p * z_sel + cfg.n0)
        out[rows] = np.log2(1.0 + sinr).mean(axis=1)
    return out


def _capacity_conventional(rng, cfg, stats, n):
    H, h_p = _draw_channels(rng, cfg, stats, n)
    try:
        cap = power_cap(cfg, stats, cfg.M)
    except InfeasiblePrimaryError:
        return np.zeros(n)
    y, z = zf_gains(H, h_p)
    p = waterfill_batch(y, cap, cfg.interference_plus_noise(stats))
    return np.log2(1.0 + p * y / (cfg.p_p * z + cfg.n0)).mean(axis=1)


def _capacity_massive(rng, cfg, stats, n, plan):
    # powers are deterministic, so one stream per draw with the exact
    # marginals (Gamma ZF gain, independent exponential interference) gives
    # the per-stream mean without forming N x M_A matrices
    if plan.m_active == 0:
        return np.zeros(n)
    y = rng.gamma(cfg.N - plan.m_active + 1, stats.mean_y, n)
    z = rng.exponential(stats.mean_z, n)
    return np.log2(1.0 + plan.p_per_antenna * y / (cfg.p_p * z + cfg.n0))


def ergodic_capacity_mc(scn: SimScenario, alloc_policy: str = "proposed_alg1") -> McEstimate:
    """Average per-stream capacity (bits/s/Hz) under an allocation policy.

    Draws where no antenna can be used count as zero capacity.
    """
    cfg, stats = scn.cfg, scn.stats
    if alloc_policy not in POLICIES:
        raise ValueError(f"unknown policy {alloc_policy!r}; choose from {POLICIES}")
    if alloc_policy != "massive_alg2" and not _primary_feasible(cfg, stats):
        return McEstimate(0.0, 0.0, scn.n_samples, scn.seed)
    plan = None
    if alloc_policy == "massive_alg2":
        if scn.hc is None:
            raise ValueError("massive_alg2 needs a harvest config")
        plan = active_antennas_massive(cfg, stats, scn.hc)
    chunk = max(64, min(CHUNK, (1 << 22) // (cfg.N * cfg.M)))
    acc = _Moments()
    for n, rng in _chunks(scn.n_samples, scn.seed, chunk):
        if alloc_policy == "proposed_alg1":
            acc.add(_capacity_proposed(rng, cfg, stats, n))
        elif alloc_policy == "conventional_full_M":
            acc.add(_capacity_conventional(rng, cfg, stats, n))
        else:
            acc.add(_capacity_massive(rng, cfg, stats, n, plan))
    return acc.estimate(scn.seed)


def lower_bound_average(scn: SimScenario, bound) -> tuple[McEstimate, McEstimate]:
    """Average over gain draws of ``bound(m_eff, p_cap)`` and of the greedy search's ``m_eff``.

    ``bound`` maps ``(m_eff, p_cap)`` to a value for ``m_eff >= 1``; draws
    with ``m_eff = 0`` contribute zero.
    """
    cfg, stats = scn.cfg, scn.stats
    if not _primary_feasible(cfg, stats):
        zero = McEstimate(0.0, 0.0, scn.n_samples, scn.seed)
        return zero, zero
    cache: dict[int, float] = {}
    acc_b, acc_m = _Moments(), _Moments()
    chunk = max(64, min(CHUNK, (1 << 22) // (cfg.N * cfg.M)))
    for n, rng in _chunks(scn.n_samples, scn.seed, chunk):
        H, _ = _draw_channels(rng, cfg, stats, n)
        y, _ = zf_gains(H)
        m_eff, _, _, caps = effective_antennas_batch(cfg, stats, y)
        vals = np.zeros(n)
        for m in np.unique(m_eff[m_eff > 0]):
            if m not in cache:
                cache[m] = bound(int(m), float(caps[m]))
            vals[m_eff == m] = cache[m]
        acc_b.add(vals)
        acc_m.add(m_eff.astype(float))
    return acc_b.estimate(scn.seed), acc_m.estimate(scn.seed)


# ---------------------------------------------------------------------------
# Harvesting
# ---------------------------------------------------------------------------

def harvest_mc(scn: SimScenario, m_active: int, p_star) -> tuple[McEstimate, McEstimate]:
    """Mean harvested energy per slot and ``Pr[P_H < S_th]``.

    Antennas ``0..m_active-1`` transmit with powers ``p_star``; the others
    harvest from the loop channel, the primary transmitter and noise.
    """
    cfg, hc = scn.cfg, scn.hc
    if hc is None:
        raise ValueError("harvest_mc needs a harvest config")
    p_star = np.asarray(p_star, dtype=float)
    if p_star.size != m_active or not 0 <= m_active <= cfg.M:
        raise ValueError(f"need {m_active} powers with 0 <= m_active <= {cfg.M}")
    loop = scn.loop_params()
    m_idle = cfg.M - m_active
    acc_e, acc_f = _Moments(), _Moments()
    for n, rng in _chunks(scn.n_samples, scn.seed, chunk=65536):
        if m_idle == 0:
            p_h = np.zeros(n)
        else:
            gains = draw_loop_gains(rng, loop, m_idle, m_active, batch=(n,))
            q = rng.exponential(scn.stats.mean_q, (n, m_idle))
            p_h = (np.einsum("bli,i->b", gains, p_star)
                   + cfg.p_p * q.sum(axis=1) + m_idle * cfg.n0)
        acc_e.add(hc.eta * hc.t_slot * np.minimum(p_h, hc.s_th))
        acc_f.add((p_h < hc.s_th).astype(float))
    return acc_e.estimate(scn.seed), acc_f.estimate(scn.seed)
