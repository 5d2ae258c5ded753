"""Closed-form lower bound on the per-stream ergodic capacity (finite arrays)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .specfn import digamma, exp_int_e1_scaled, log_gamma_upper


@dataclass(frozen=True)
class CapacityBoundInputs:
    n: int
    m_eff: int
    mean_y: float
    mean_z: float
    p_p: float
    n0: float
    p_cap: float

    def __post_init__(self):
        if not 1 <= self.m_eff <= self.n:
            raise ValueError(f"need 1 <= m_eff <= n, got m_eff={self.m_eff}, n={self.n}")
        for name in ("mean_y", "mean_z", "p_p", "n0", "p_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")

    @property
    def denom(self) -> float:
        return self.p_p * self.mean_z + self.n0

    @property
    def rate(self) -> float:
        """Inverse scale ``M* / (E[y] p_cap)`` of the allocated-power variable."""
        return self.m_eff / (self.mean_y * self.p_cap)

    @property
    def threshold(self) -> float:
        """``M* (p_p E[z] + N0) / (E[y] p_cap)``: where the allocated SNR turns positive."""
        return self.rate * self.denom


def j1_weights(inp: CapacityBoundInputs) -> np.ndarray:
    """Normalized weights of the ``psi(k+1)`` terms, k = 0..N-M*.

    They equal ``exp(-a) / Gamma(n+1, a) * C(n, k) k! a^(n-k)`` with
    ``n = N - M*``. For integer ``n``, ``Gamma(n+1, a) = n! e^-a sum_j a^j/j!``,
    so the weights are a softmax of ``(n-k) ln a - ln (n-k)!`` and sum to
    one exactly, with no overflow for large arrays.
    """
    n = inp.n - inp.m_eff
    j = np.arange(n, -1, -1)          # j = n - k
    log_w = j * math.log(inp.threshold) - gammaln(j + 1)
    return np.exp(log_w - logsumexp(log_w))


def j1(inp: CapacityBoundInputs) -> float:
    """Mean log of the positive part of the allocated received SNR numerator.

    This is ``E[ln W | W > 0]`` with ``W = (p_cap / M*) y - (p_p E[z] + N0)``
    and ``y`` Gamma distributed with shape ``N - M* + 1`` and scale ``E[y]``.
    """
    n = inp.n - inp.m_eff
    psi = np.array([digamma(k + 1.0) for k in range(n + 1)])
    return float(np.dot(j1_weights(inp), psi - math.log(inp.rate)))


def j2(inp: CapacityBoundInputs) -> float:
    """``E[ln(p_p z + N0)]`` for exponential ``z`` with mean ``E[z]``."""
    b = inp.n0 / (inp.p_p * inp.mean_z)
    # exp(b) Ei(-b) = -exp(b) E1(b)
    return math.log(inp.n0) + exp_int_e1_scaled(b)


def capacity_lower_bound(inp: CapacityBoundInputs) -> float:
    """``log2(1 + exp(J1 - J2))`` in bits/s/Hz."""
    return float(np.logaddexp(0.0, j1(inp) - j2(inp)) / math.log(2.0))


def allocated_power_density(w, inp: CapacityBoundInputs):
    """Density of ``W`` conditioned on ``W > 0`` (integrates to one on (0, inf))."""
    w = np.asarray(w, dtype=float)
    n = inp.n - inp.m_eff
    beta = inp.rate
    log_f = ((n + 1) * math.log(beta) + n * np.log(w + inp.denom) - beta * (w + inp.denom)
             - log_gamma_upper(n + 1, inp.threshold))
    return np.where(w > 0, np.exp(log_f), 0.0)
