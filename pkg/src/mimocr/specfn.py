"""Scalar special functions used by the closed-form expressions.

Everything here works in double precision and is pure. The Humbert
``Phi2`` series is evaluated in log space so that the harvested-power CDF
can be assembled without overflow even when its arguments are large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp

EULER_GAMMA = 0.57721566490153286061

_EPS = np.finfo(float).eps
_FPMIN = 1e-300
_MAX_ITER = 10_000


class NonConvergenceError(ArithmeticError):
    """A series or continued fraction did not reach its truncation bound."""


def _check_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


# ---------------------------------------------------------------------------
# Incomplete gamma
# ---------------------------------------------------------------------------

def _lower_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x), power series (x < a + 1)."""
    ap = a
    term = total = 1.0 / a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NonConvergenceError(f"incomplete gamma series: a={a}, x={x}")


def _log_upper_cf(a: float, x: float) -> float:
    """log Gamma(a, x) from the Legendre continued fraction (x >= a + 1)."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return -x + a * math.log(x) + math.log(h)
    raise NonConvergenceError(f"incomplete gamma continued fraction: a={a}, x={x}")


def log_gamma_upper(a: float, x: float) -> float:
    """Natural log of the upper incomplete gamma function Gamma(a, x)."""
    _check_positive("a", a)
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x!r}")
    if x == 0:
        return math.lgamma(a)
    if x < a + 1.0:
        return math.lgamma(a) + math.log1p(-_lower_series(a, x))
    return _log_upper_cf(a, x)


def gamma_upper(a: float, x: float) -> float:
    """Upper incomplete gamma ``Gamma(a, x) = int_x^inf t^(a-1) e^-t dt``.

    Uses the power series of the lower function below ``x = a + 1`` and a
    continued fraction above it.
    """
    return math.exp(log_gamma_upper(a, x))


# ---------------------------------------------------------------------------
# Digamma
# ---------------------------------------------------------------------------

# B_2k / (2k) for k = 1..7
_DIGAMMA_ASYM = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)


def digamma(x: float) -> float:
    """Digamma function psi(x) for x > 0."""
    _check_positive("x", x)
    shift = 0.0
    while x < 10.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    poly = 0.0
    for coef in reversed(_DIGAMMA_ASYM):
        poly = (poly + coef) * inv2
    return shift + math.log(x) - 0.5 / x - poly


# ---------------------------------------------------------------------------
# Exponential integrals
# ---------------------------------------------------------------------------

def _e1_series(x: float) -> float:
    total = 0.0
    term = 1.0
    for k in range(1, _MAX_ITER):
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < abs(total) * _EPS:
            break
    return -EULER_GAMMA - math.log(x) - total


def _e1_scaled_cf(x: float) -> float:
    """exp(x) * E1(x) via the modified Lentz continued fraction (x > 1)."""
    b = x + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NonConvergenceError(f"E1 continued fraction: x={x}")


def exp_int_e1(x: float) -> float:
    """First-order exponential integral E1(x) = int_x^inf e^-t / t dt, x > 0."""
    _check_positive("x", x)
    if x <= 1.0:
        return _e1_series(x)
    return _e1_scaled_cf(x) * math.exp(-x)


def exp_int_e1_scaled(x: float) -> float:
    """``exp(x) * E1(x)``, finite for arguments where E1 itself underflows."""
    _check_positive("x", x)
    if x <= 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_scaled_cf(x)


def exp_int_ei(x: float) -> float:
    """Exponential integral Ei(x) (principal value), x != 0."""
    if x == 0:
        raise ValueError("Ei has a logarithmic singularity at 0")
    if x < 0:
        return -exp_int_e1(-x)
    if x <= -math.log(_EPS):
        total = 0.0
        term = 1.0
        for k in range(1, _MAX_ITER):
            term *= x / k
            contrib = term / k
            total += contrib
            if contrib < total * _EPS:
                return EULER_GAMMA + math.log(x) + total
        raise NonConvergenceError(f"Ei series: x={x}")
    # asymptotic expansion, stopped at the smallest term
    total = 1.0
    term = 1.0
    for k in range(1, _MAX_ITER):
        prev = term
        term *= k / x
        if term < _EPS:
            break
        if term >= prev:
            total -= prev
            break
        total += term
    return math.exp(x) * total / x


# ---------------------------------------------------------------------------
# Modified Bessel I0
# ---------------------------------------------------------------------------

def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero, for x >= 0."""
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x!r}")
    if x <= 30.0:
        q = 0.25 * x * x
        term = total = 1.0
        k = 0
        while True:
            k += 1
            term *= q / (k * k)
            total += term
            if term < total * _EPS:
                return total
    # Hankel asymptotic expansion; terms shrink until k ~ 2x
    term = total = 1.0
    for k in range(1, _MAX_ITER):
        term *= (2 * k - 1) ** 2 / (8.0 * k * x)
        total += term
        if term < total * _EPS:
            break
    return math.exp(x) / math.sqrt(2.0 * math.pi * x) * total


# ---------------------------------------------------------------------------
# Humbert Phi2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Phi2Args:
    """Arguments of ``Phi2(b1, b2; c; x1, x2)``."""

    b1: float
    b2: float
    c: float
    x1: float
    x2: float

    def __post_init__(self):
        if not (self.b1 > 0 and self.b2 > 0):
            raise ValueError(f"upper parameters must be positive: {self}")
        if not self.c > 0:
            raise ValueError(f"lower parameter must be positive: {self}")


def _log_rising(b: float, n: np.ndarray) -> np.ndarray:
    return gammaln(b + n) - gammaln(b)


def _ratio_bound(b: float, arg: float, c: float, k: int) -> float:
    """Upper bound on consecutive-term ratios beyond index ``k`` along one axis."""
    growth = (b + k) / (k + 1.0) if b >= 1.0 else 1.0
    return arg * growth / (c + k)


def _log_positive_series(b1, b2, c, u, v, tol, max_terms, block=256):
    """log of sum_{m,n} (b1)_m (b2)_n / (c)_{m+n} u^m v^n / (m! n!) for u, v >= 0.

    Terms are all positive, so a truncation box with edge-based geometric
    tail bounds gives a rigorous relative error estimate.
    """
    def axis_len(b, arg):
        if arg == 0 or b == 0:
            return 1
        k = int(arg + 10.0 * math.sqrt(arg) + 20)
        while _ratio_bound(b, arg, c, k) >= 0.5:
            k *= 2
        return k

    n_m, n_n = axis_len(b1, u), axis_len(b2, v)
    while True:
        if max(n_m, n_n) > max_terms:
            raise NonConvergenceError(
                f"Phi2 series needs more than {max_terms} terms per axis "
                f"(u={u}, v={v})")
        m = np.arange(n_m, dtype=float)
        n = np.arange(n_n, dtype=float)
        log_a = _log_rising(b1, m) - gammaln(m + 1)
        if u > 0:
            log_a = log_a + m * math.log(u)
        log_b = _log_rising(b2, n) - gammaln(n + 1)
        if v > 0:
            log_b = log_b + n * math.log(v)
        # rows of the log-term grid, assembled in blocks to bound memory
        row_lse = np.empty(n_m)
        last_col = np.empty(n_m)
        for start in range(0, n_m, block):
            mm = m[start:start + block, None]
            grid = (log_a[start:start + block, None] + log_b[None, :]
                    - (gammaln(c + mm + n[None, :]) - gammaln(c)))
            row_lse[start:start + block] = logsumexp(grid, axis=1)
            last_col[start:start + block] = grid[:, -1]
        log_total = logsumexp(row_lse)

        r = _ratio_bound(b1, u, c, n_m - 1)
        s = _ratio_bound(b2, v, c, n_n - 1)
        if r < 1.0 and s < 1.0:
            gs = s / (1.0 - s)
            gr = r / (1.0 - r)
            col_tail = gs * math.exp(logsumexp(last_col) - log_total)
            row_tail = gr * math.exp(row_lse[-1] - log_total) * (
                1.0 + gs * math.exp(last_col[-1] - row_lse[-1]))
            if col_tail + row_tail <= tol:
                return log_total
        n_m = max(2, int(n_m * 1.5)) if u > 0 else n_m
        n_n = max(2, int(n_n * 1.5)) if v > 0 else n_n


def _log_lower_reg(a: float, x: float) -> float:
    """log P(a, x) for the regularized lower incomplete gamma."""
    if x < a + 1.0:
        # same series as _lower_series, prefactor kept in log space
        ap, term, total = a, 1.0 / a, 1.0 / a
        for _ in range(_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if term < total * _EPS:
                return math.log(total) - x + a * math.log(x) - math.lgamma(a)
        raise NonConvergenceError(f"incomplete gamma series: a={a}, x={x}")
    return math.log1p(-math.exp(_log_upper_cf(a, x) - math.lgamma(a)))


def _log_mixture_series(b1, c, rho, z, tol, max_len):
    """log of sum_n (b1)_n rho^n / n! * P(c - 1 + n, z), 0 <= rho <= 1.

    P(a, z) is evaluated once at the top index and filled in downward with
    ``P(a, z) = P(a + 1, z) + z^a e^-z / Gamma(a + 1)``, which only adds
    positive terms. Term ratios beyond index n are bounded by
    ``max(1, (b1+n)/(n+1)) * rho * min(1, z / (c+n))``.
    """
    log_rho = math.log(rho) if rho > 0 else -math.inf
    n_len = int(b1 * rho / max(1.0 - rho, 1e-300) + 20 * math.sqrt(b1 + 1) + 64)
    n_len = min(n_len, int(z + 20 * math.sqrt(z) + 64)) if rho >= 0.5 else n_len
    n_len = max(n_len, 2)
    while True:
        if n_len > max_len:
            raise NonConvergenceError(
                f"Phi2 mixture series needs more than {max_len} terms (rho={rho}, z={z})")
        n = np.arange(n_len, dtype=float)
        a = c - 1.0 + n
        log_inc = -z + a * math.log(z) - gammaln(a + 1.0)
        top = _log_lower_reg(a[-1], z)
        # reverse cumulative log-sum: log P(a_k) = logaddexp(top, inc_k..inc_{N-2})
        rev = np.concatenate(([top], log_inc[-2::-1]))
        log_p = np.logaddexp.accumulate(rev)[::-1]
        with np.errstate(invalid="ignore"):
            log_w = _log_rising(b1, n) - gammaln(n + 1.0) + np.where(n > 0, n * log_rho, 0.0)
        terms = log_w + log_p
        log_total = logsumexp(terms)
        k = n_len - 1
        r = max(1.0, (b1 + k) / (k + 1.0)) * rho * min(1.0, z / (c + k))
        if r < 1.0 and r / (1.0 - r) * math.exp(terms[-1] - log_total) <= tol:
            return log_total
        n_len *= 2


def _gamma_sum_tail_bound(b1, b2, a1, a2):
    """Chernoff bound on P[G1/a1 + G2/a2 > 1], G_i ~ Gamma(b_i, 1) independent."""
    if b1 / a1 + b2 / a2 >= 1.0:
        return 1.0

    def slope(t):
        return -1.0 + b1 / (a1 - t) + b2 / (a2 - t)

    hi = min(a1, a2)
    t = brentq(slope, 0.0, hi * (1 - 1e-15))
    log_bound = -t - b1 * math.log1p(-t / a1) - b2 * math.log1p(-t / a2)
    return math.exp(log_bound)


def log_humbert_phi2(args: Phi2Args, *, tol: float = 1e-12,
                     max_terms: int = 10_000,
                     asymptotic: bool = True) -> float:
    """Natural log of the Humbert confluent series ``Phi2(b1, b2; c; x1, x2)``.

    Parameters
    ----------
    args : Phi2Args
    tol : float
        Relative truncation tolerance. The returned value is within ``tol``
        (relative) of the exact series sum.
    max_terms : int
        Cap on the series length along each axis.
    asymptotic : bool
        Allow the large-argument closed form for the CDF call shape
        ``c = b1 + b2 + 1, x1, x2 < 0``. It is used only when a Chernoff
        bound certifies its relative error is below ``tol``.

    Raises
    ------
    NonConvergenceError
        If the truncation bound cannot be met within ``max_terms``.
    ValueError
        If the series sums to a non-positive value (log undefined).
    """
    b1, b2, c, x1, x2 = args.b1, args.b2, args.c, args.x1, args.x2

    if x1 >= 0 and x2 >= 0:
        return _log_positive_series(b1, b2, c, x1, x2, tol, max_terms)

    if x1 == 0 or x2 == 0:
        # only one variable left: Phi2 reduces to Kummer's 1F1
        b, x = (b2, x2) if x1 == 0 else (b1, x1)
        return _log_kummer_negative(b, c, x, tol, max_terms)

    if (asymptotic and x1 < 0 and x2 < 0
            and abs(c - (b1 + b2 + 1.0)) <= 1e-12 * c):
        a1, a2 = -x1, -x2
        if _gamma_sum_tail_bound(b1, b2, a1, a2) <= tol:
            return math.lgamma(c) - b1 * math.log(a1) - b2 * math.log(a2)

    beta = c - b1 - b2
    if x1 <= 0 and x2 <= 0 and abs(beta - 1.0) <= 1e-12 * c:
        # Gamma-mixture form: with z = -x2 the more negative argument,
        # Phi2 = Gamma(c) z^(1-c) sum_n (b1)_n/n! rho^n P(c-1+n, z), rho = 1 - x1/x2
        if x1 < x2:
            b1, b2, x1, x2 = b2, b1, x2, x1
        z = -x2
        rho = (x1 - x2) / z
        return (math.lgamma(c) + (1.0 - c) * math.log(z)
                + _log_mixture_series(b1, c, rho, z, tol, 100 * max_terms))

    if beta >= 0:
        # Phi2(b1, b2; c; x1, x2) = e^{x2} Phi2(b1, c-b1-b2; c; x1-x2, -x2),
        # with the more negative argument placed second so every term is >= 0
        if x1 < x2:
            b1, b2, x1, x2 = b2, b1, x2, x1
        if beta == 0:
            # (0)_n vanishes for n >= 1: only the one-variable Kummer part remains
            return x2 + _log_positive_series(b1, 1.0, c, x1 - x2, 0.0, tol, max_terms)
        return x2 + _log_positive_series(b1, beta, c, x1 - x2, -x2, tol, max_terms)

    value = _direct_series(b1, b2, c, x1, x2, tol, max_terms)
    if value <= 0:
        raise ValueError(f"Phi2 is non-positive for {args}; log undefined")
    return math.log(value)


def _kummer_negative_sum(b, c, x, tol, max_terms):
    """``1F1(c - b; c; -x)`` for x < 0, so that 1F1(b; c; x) = e^x times it.

    The transformed terms change sign at most ``ceil(b - c)`` times, so
    cancellation is confined to the leading terms and is checked.
    """
    a, u = c - b, -x
    if a == 0:
        return 1.0
    n_len = int(u + 10.0 * math.sqrt(u) + 40)
    while True:
        if n_len > max_terms:
            raise NonConvergenceError(f"1F1 series needs more than {max_terms} terms (x={x})")
        n = np.arange(n_len, dtype=float)
        # (a)_n / (c)_n u^n / n!, accumulated with signs through the ratios
        ratios = (a + n[:-1]) / (c + n[:-1]) * u / (n[1:])
        terms = np.concatenate(([1.0], np.cumprod(ratios)))
        total = float(np.sum(terms))
        abs_total = float(np.sum(np.abs(terms)))
        k = n_len - 1
        r = abs((a + k) / (c + k)) * u / (k + 1.0)
        if r < 0.5 and abs(terms[-1]) * r / (1.0 - r) <= tol * abs(total):
            break
        n_len *= 2
    if total == 0 or abs_total * 16 * _EPS > tol * abs(total):
        raise NonConvergenceError(f"1F1 series cancelled: b={b}, c={c}, x={x}")
    return total


def _log_kummer_negative(b, c, x, tol, max_terms):
    total = _kummer_negative_sum(b, c, x, tol, max_terms)
    if total < 0:
        raise ValueError(f"1F1({b}; {c}; {x}) is negative, log undefined")
    return x + math.log(total)


def _direct_series(b1, b2, c, x1, x2, tol, max_terms):
    """Plain double series with a cancellation check, for the remaining shapes."""
    n_max = min(max_terms, int(max(abs(x1), abs(x2)) * 4 + 60))
    m = np.arange(n_max, dtype=float)
    sign_a = np.where((x1 < 0) & (m % 2 == 1), -1.0, 1.0)
    sign_b = np.where((x2 < 0) & (m % 2 == 1), -1.0, 1.0)
    with np.errstate(divide="ignore"):
        log_a = _log_rising(b1, m) - gammaln(m + 1) + m * np.log(abs(x1))
        log_b = _log_rising(b2, m) - gammaln(m + 1) + m * np.log(abs(x2))
    log_a[0] = log_b[0] = 0.0
    grid = (log_a[:, None] + log_b[None, :]
            - (gammaln(c + m[:, None] + m[None, :]) - gammaln(c)))
    terms = sign_a[:, None] * sign_b[None, :] * np.exp(grid)
    total = terms.sum()
    abs_total = np.abs(terms).sum()
    edge = np.abs(terms[-1, :]).sum() + np.abs(terms[:, -1]).sum()
    if edge > tol * abs(total) or abs_total * 64 * _EPS > tol * abs(total):
        raise NonConvergenceError(
            f"Phi2 direct series did not converge or cancelled: b1={b1}, "
            f"b2={b2}, c={c}, x1={x1}, x2={x2}")
    return float(total)


def humbert_phi2(args: Phi2Args, **kwargs) -> float:
    """Humbert ``Phi2(b1, b2; c; x1, x2)``; see :func:`log_humbert_phi2`.

    With one zero argument and the other negative the value may be negative
    (``c < b``), which this returns with its sign.
    """
    x1, x2 = args.x1, args.x2
    if (x1 == 0.0) != (x2 == 0.0) and min(x1, x2) < 0:
        b, x = (args.b1, x1) if x2 == 0.0 else (args.b2, x2)
        total = _kummer_negative_sum(b, args.c, x, kwargs.get("tol", 1e-12),
                                     kwargs.get("max_terms", 10_000))
        return math.exp(x) * total
    return math.exp(log_humbert_phi2(args, **kwargs))
