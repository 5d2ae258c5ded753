"""Random channel generation and distance-based average gains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PathLossLaw:
    d_ref: float = 100.0
    alpha: float = 4.0

    def __post_init__(self):
        if not (self.d_ref > 0 and self.alpha > 0):
            raise ValueError(f"invalid path-loss law: {self}")


@dataclass(frozen=True)
class LinkStats:
    """Average channel power gains of the five links.

    mean_y : ST -> SR
    mean_z : PT -> SR
    mean_x : PT -> PR
    mean_h : ST -> PR
    mean_q : PT -> ST
    """

    mean_y: float = 1.0
    mean_z: float = 1.0
    mean_x: float = 1.0
    mean_h: float = 1.0
    mean_q: float = 1.0

    def __post_init__(self):
        for name in ("mean_y", "mean_z", "mean_x", "mean_h", "mean_q"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")

    @classmethod
    def from_distances(cls, law: PathLossLaw = PathLossLaw(), **distances: float) -> "LinkStats":
        """Build from link distances in meters, e.g. ``from_distances(y=30.0, x=50.0)``.

        Links without a distance keep a unit gain.
        """
        gains = {f"mean_{k}": mean_gain_from_distance(d, law) for k, d in distances.items()}
        return cls(**gains)


@dataclass(frozen=True)
class RicianLoopParams:
    """Loop channel between co-located transmit antennas.

    ``omega`` is the mean power gain of each active/idle pair, a scalar or an
    ``(M_I, M_A)`` array. With ``coherent=True`` every pair of a realization
    shares one Rician fading coefficient, so the summed loop power is itself
    Rician with the same K factor (coherent signal addition).
    """

    k_factor: float = 10 ** 2.5
    omega: float | np.ndarray = 10 ** -1.5
    coherent: bool = False

    def __post_init__(self):
        if self.k_factor < 0:
            raise ValueError("k_factor must be non-negative")
        if np.any(np.asarray(self.omega) <= 0):
            raise ValueError("omega must be positive")

    @property
    def m_parameter(self) -> float:
        """Nakagami-m equivalent of the Rician K factor."""
        return nakagami_m_from_k(self.k_factor)


def nakagami_m_from_k(k_factor: float) -> float:
    return (k_factor + 1.0) ** 2 / (2.0 * k_factor + 1.0)


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray          # (N, M) complex, ST -> SR
    h_p: np.ndarray        # (N,) complex, PT -> SR
    x: np.ndarray          # (L,) PT -> PR_j power gains
    h: np.ndarray          # (M, L) ST_i -> PR_j power gains
    q: np.ndarray          # (M,) PT -> ST_l power gains
    loop_gains: np.ndarray | None = None
    # (M_I, M_A): antennas 0..M_A-1 transmit, M_A..M-1 are idle

    @property
    def m_active(self) -> int:
        if self.loop_gains is None:
            return self.H.shape[1]
        return self.loop_gains.shape[1]


def mean_gain_from_distance(d: float, law: PathLossLaw = PathLossLaw()) -> float:
    """Average power gain ``(d / d_ref) ** -alpha``."""
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d!r}")
    return (d / law.d_ref) ** (-law.alpha)


def complex_gaussian(rng: np.random.Generator, shape, variance) -> np.ndarray:
    """Circular CN(0, variance) samples; variance may broadcast against ``shape``."""
    scale = np.sqrt(np.asarray(variance) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def rician_power(rng: np.random.Generator, shape, k_factor: float, omega) -> np.ndarray:
    """Squared Rician envelope with mean ``omega`` and LOS-to-diffuse ratio ``k_factor``."""
    omega = np.asarray(omega, dtype=float)
    los = np.sqrt(k_factor * omega / (k_factor + 1.0))
    diffuse = complex_gaussian(rng, shape, omega / (k_factor + 1.0))
    return np.abs(los + diffuse) ** 2


def draw_loop_gains(rng: np.random.Generator, loop: RicianLoopParams,
                    m_idle: int, m_active: int, batch: tuple = ()) -> np.ndarray:
    """Loop power gains of shape ``batch + (m_idle, m_active)``."""
    shape = batch + (m_idle, m_active)
    omega = np.broadcast_to(np.asarray(loop.omega, dtype=float), (m_idle, m_active))
    if loop.coherent:
        common = rician_power(rng, batch + (1, 1), loop.k_factor, 1.0)
        return common * omega
    return rician_power(rng, shape, loop.k_factor, omega)


def draw_realization(cfg, stats: LinkStats, loop: RicianLoopParams | None = None,
                     seed: int | np.random.SeedSequence | None = None,
                     m_active: int | None = None) -> ChannelRealization:
    """Draw one set of channel gains for the configuration ``cfg``.

    Rayleigh links are circular complex Gaussian (H, h_p) or exponential
    power gains (x, h, q). Loop gains are drawn only when ``loop`` is given,
    for the first ``m_active`` antennas transmitting and the rest idle.
    """
    if cfg.N < cfg.M or cfg.L < 1 or cfg.M < 1:
        raise ValueError(f"invalid dimensions: M={cfg.M}, N={cfg.N}, L={cfg.L}")
    rng = np.random.default_rng(seed)
    M, N, L = cfg.M, cfg.N, cfg.L
    H = complex_gaussian(rng, (N, M), stats.mean_y)
    h_p = complex_gaussian(rng, (N,), stats.mean_z)
    x = rng.exponential(stats.mean_x, L)
    h = rng.exponential(stats.mean_h, (M, L))
    q = rng.exponential(stats.mean_q, M)
    m_a = M if m_active is None else int(m_active)
    if not 0 <= m_a <= M:
        raise ValueError(f"m_active must lie in [0, {M}], got {m_a}")
    if loop is not None and m_a < M:
        loop_gains = draw_loop_gains(rng, loop, M - m_a, m_a)
    else:
        loop_gains = np.zeros((M - m_a, m_a))
    return ChannelRealization(H=H, h_p=h_p, x=x, h=h, q=q, loop_gains=loop_gains)
