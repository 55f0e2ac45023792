"""
Special functions and L-series at real arguments: the Legendre function of
the second kind Q_{s-1}, Dirichlet L(s, eps_D) and L'/L(1, eps_D),
zeta(s), zeta'/zeta(2) and Euler's constant.
"""
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special

from .quadfield import as_discriminant, character_table
from .utils import HEURISTIC, NumericalFailure, RealWithError

DEFAULT_TOL = 1e-10
HYPERGEOMETRIC_THRESHOLD = 2.0
SERIES_START_TERMS = 2 ** 14
SERIES_MAX_TERMS = 2 ** 23
EULER_MACLAURIN_TERMS = 1000
BRENT_MCMILLAN_N = 12


def _check_legendre_args(s, t):
    if not s > 0:
        raise ValueError("Q_(s-1)(t) needs s > 0, got s = {}".format(s))
    if not t > 1:
        raise ValueError("Q_(s-1)(t) needs t > 1, got t = {}".format(t))


def _heine_integrand(u, s, t, w):
    with np.errstate(over="ignore"):
        return float((t + w * np.cosh(u)) ** (-s))


def legendre_Q(s, t, tol=DEFAULT_TOL):
    """
    Q_{s-1}(t) = integral over u in [0, inf) of (t + sqrt(t^2 - 1) cosh u)^-s.

    The integrand is flat until w cosh u reaches t, then decays like e^(-su);
    the range is split at that point so both pieces are easy for QUADPACK.
    """
    s, t = float(s), float(t)
    _check_legendre_args(s, t)
    w = math.sqrt((t - 1.0) * (t + 1.0))
    knee = max(1.0, math.acosh(max(1.0, t / w)))
    head, head_error = integrate.quad(
        _heine_integrand, 0.0, knee, args=(s, t, w), epsabs=0.0, epsrel=tol, limit=200
    )
    tail, tail_error = integrate.quad(
        _heine_integrand, knee, np.inf, args=(s, t, w), epsabs=0.0, epsrel=tol, limit=200
    )
    value = head + tail
    error = head_error + tail_error
    if not math.isfinite(value) or error > 10 * tol * abs(value):
        raise NumericalFailure(
            "Quadrature for Q_{}({}) did not converge: {} +- {}".format(
                s - 1, t, value, error
            )
        )
    return RealWithError(value, error, HEURISTIC)


def _log_hypergeometric_prefactor(s):
    # log( sqrt(pi) Gamma(s) / (Gamma(s + 1/2) 2^s) )
    return (
        0.5 * math.log(math.pi)
        + special.gammaln(s)
        - special.gammaln(s + 0.5)
        - s * math.log(2.0)
    )


def legendre_Q_array(s, t, tol=DEFAULT_TOL):
    """
    Vectorised Q_{s-1}(t).

    s = 1 uses the closed form (1/2) log((t+1)/(t-1)); otherwise
    Q_{s-1}(t) = sqrt(pi) Gamma(s) / (Gamma(s+1/2) (2t)^s)
    * 2F1((s+1)/2, s/2; s+1/2; 1/t^2) for t >= 2 and quadrature below.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 1):
        raise ValueError("Q_(s-1)(t) needs t > 1")
    if s == 1:
        return 0.5 * np.log1p(2.0 / (t - 1.0))
    result = np.empty_like(t)
    large = t >= HYPERGEOMETRIC_THRESHOLD
    t_large = t[large]
    result[large] = (
        np.exp(_log_hypergeometric_prefactor(s) - s * np.log(t_large))
        * special.hyp2f1((s + 1) / 2, s / 2, s + 0.5, 1.0 / (t_large * t_large))
    )
    for index in np.nonzero(~large)[0]:
        result[index] = legendre_Q(s, float(t[index]), tol).value
    return result


def _hypergeometric_coefficients(s, t0, tol):
    "Terms a_k t0^(-2k) / (s + 2k - 1) for k >= 1 of the tail integral series"
    terms = []
    coefficient = 1.0
    a, b, c = (s + 1) / 2, s / 2, s + 0.5
    k = 0
    ratio = 1.0 / (t0 * t0)
    power = 1.0
    while True:
        coefficient *= (a + k) * (b + k) / ((c + k) * (k + 1))
        k += 1
        power *= ratio
        term = coefficient * power / (s + 2 * k - 1)
        terms.append(term)
        if abs(term) < tol * 1e-3 or k > 200:
            break
    return math.fsum(terms)


def legendre_Q_tail_integral(s, t0, regularized=False, tol=DEFAULT_TOL):
    """
    Integral of Q_{s-1}(t) over [t0, inf), by termwise integration of the
    hypergeometric series.

    With ``regularized=True`` the pole 1/(s-1) is subtracted, which makes
    s = 1 admissible: the leading term then tends to log 2 - 2 - log t0.
    """
    s, t0 = float(s), float(t0)
    if t0 < HYPERGEOMETRIC_THRESHOLD:
        raise ValueError("Tail integral needs t0 >= {}".format(HYPERGEOMETRIC_THRESHOLD))
    if not s >= 1 or (s == 1 and not regularized):
        raise ValueError("Tail integral diverges for s = {}".format(s))
    log_prefactor = _log_hypergeometric_prefactor(s)
    higher = math.exp(log_prefactor + (1 - s) * math.log(t0)) * _hypergeometric_coefficients(
        s, t0, tol
    )
    if s == 1:
        return math.log(2.0) - 2.0 - math.log(t0) + higher
    exponent = log_prefactor + (1 - s) * math.log(t0)
    if regularized:
        leading = math.expm1(exponent) / (s - 1)
    else:
        leading = math.exp(exponent) / (s - 1)
    return leading + higher


def _periodic_average_sum(table, weights, tol, order):
    """
    Sum of table[n % q] * weights(n) over n >= 1 for a table whose period sums
    to zero.

    Partial sums oscillate with period q around the limit; averaging them
    over one full period cancels the oscillation and leaves an error of order
    K^-order at cutoff K. The cutoff doubles, each pair of averages is
    Richardson-extrapolated, and the loop stops once two extrapolated values
    agree within ``tol``.
    """
    q = len(table)
    factor = 2.0 ** order
    periods = max(SERIES_START_TERMS, 4 * q) // q
    averages, extrapolated = [], []
    while periods * q <= SERIES_MAX_TERMS:
        cutoff = periods * q
        n = np.arange(1, cutoff + q, dtype=np.int64)
        values = table[n % q] * weights(n.astype(np.float64))
        base = np.sum(values[: cutoff - 1])
        window = base + np.concatenate(
            ([0.0], np.cumsum(values[cutoff - 1 : cutoff + q - 2]))
        )
        averages.append(float(np.mean(window)))
        if len(averages) >= 2:
            extrapolated.append((factor * averages[-1] - averages[-2]) / (factor - 1))
        if len(extrapolated) >= 2:
            change = abs(extrapolated[-1] - extrapolated[-2])
            if change <= tol:
                return RealWithError(extrapolated[-1], change, HEURISTIC)
        periods *= 2
    raise NumericalFailure(
        "Series did not reach tolerance {} within {} terms".format(tol, SERIES_MAX_TERMS)
    )


@lru_cache(maxsize=256)
def _dirichlet_L(D, s, tol):
    disc = as_discriminant(D)
    table = character_table(disc).astype(np.float64)
    return _periodic_average_sum(table, lambda n: n ** (-s), tol, order=s + 1)


def dirichlet_L(disc, s, tol=DEFAULT_TOL):
    "L(s, eps_D) = sum eps_D(n) n^-s for real s > 1/2, eps_D(n) = kronecker(D, n)"
    disc = as_discriminant(disc)
    if not s > 0.5:
        raise ValueError("dirichlet_L needs s > 1/2, got {}".format(s))
    return _dirichlet_L(disc.D, float(s), float(tol))


@lru_cache(maxsize=256)
def _dirichlet_L_derivative_at_1(D, tol):
    disc = as_discriminant(D)
    table = character_table(disc).astype(np.float64)
    return _periodic_average_sum(table, lambda n: -np.log(n) / n, tol, order=2)


def dirichlet_L_derivative_at_1(disc, tol=DEFAULT_TOL):
    "L'(1, eps_D) = -sum eps_D(n) log(n) / n"
    return _dirichlet_L_derivative_at_1(as_discriminant(disc).D, float(tol))


def L_log_deriv_at_1(disc, tol=DEFAULT_TOL):
    L = dirichlet_L(disc, 1.0, tol)
    derivative = dirichlet_L_derivative_at_1(disc, tol)
    value = derivative.value / L.value
    error = derivative.abs_error / abs(L.value) + abs(derivative.value) * L.abs_error / (
        L.value * L.value
    )
    return RealWithError(value, error, HEURISTIC)


def zeta(s, terms=100):
    "Riemann zeta at real s > 1 by Euler-Maclaurin summation"
    if not s > 1:
        raise ValueError("zeta needs s > 1, got {}".format(s))
    M = terms
    n = np.arange(1, M, dtype=np.float64)
    head = float(np.sum(n ** (-s)))
    correction = (
        M ** (1 - s) / (s - 1)
        + 0.5 * M ** (-s)
        + s * M ** (-s - 1) / 12
        - s * (s + 1) * (s + 2) * M ** (-s - 3) / 720
        + s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * M ** (-s - 5) / 30240
    )
    return head + correction


def _zeta_derivative_at_2(M):
    "zeta'(2) = -sum log(n)/n^2 with an Euler-Maclaurin tail from n = M"
    n = np.arange(2, M, dtype=np.float64)
    head = float(np.sum(np.log(n) / (n * n)))
    L = math.log(M)
    integral = (L + 1) / M
    f = L / M ** 2
    f1 = (1 - 2 * L) / M ** 3
    f3 = (26 - 24 * L) / M ** 5
    return -(head + integral + f / 2 - f1 / 12 + f3 / 720)


@lru_cache(maxsize=8)
def zeta_log_deriv_at_2(tol=DEFAULT_TOL):
    coarse = _zeta_derivative_at_2(EULER_MACLAURIN_TERMS)
    fine = _zeta_derivative_at_2(2 * EULER_MACLAURIN_TERMS)
    error = abs(fine - coarse)
    if error > tol:
        raise NumericalFailure("zeta'(2) unstable: {} vs {}".format(coarse, fine))
    zeta_2 = math.pi ** 2 / 6
    return RealWithError(fine / zeta_2, error / zeta_2 + 1e-15, HEURISTIC)


@lru_cache(maxsize=1)
def euler_gamma():
    """
    Euler's constant by the Brent-McMillan algorithm with parameter n = 12.

    The truncation error is below pi * exp(-4n).
    """
    n = BRENT_MCMILLAN_N
    n2 = n * n
    A = -math.log(n)
    B = 1.0
    U, V = [A], [B]
    k = 1
    while True:
        B = B * n2 / (k * k)
        A = (A * n2 / k + B) / k
        U.append(A)
        V.append(B)
        if B < 1e-30 and k > n:
            break
        k += 1
    value = math.fsum(U) / math.fsum(V)
    # the 1e-13 rounding allowance is an estimate, not a proven bound
    return RealWithError(value, math.pi * math.exp(-4 * n) + 1e-13, HEURISTIC)
