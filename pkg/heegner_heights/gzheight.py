"""
The Neron-Tate height of the Heegner divisor c_D on J_0(N), assembled from
the four terms of the Gross-Zagier decomposition at the principal class.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
import logging
import math
import time
import warnings

import numpy as np

from .arith import divisors, prime_factors, sigma1
from .heegner import HeegnerLevel, make_level
from .lfunc import (
    DEFAULT_TOL,
    L_log_deriv_at_1,
    euler_gamma,
    legendre_Q_array,
    legendre_Q_tail_integral,
    zeta_log_deriv_at_2,
)
from .quadfield import (
    as_discriminant,
    rep_count_principal,
    rep_counts_progression,
    sigma_prime_principal,
    sigma_principal_table,
)
from .utils import (
    HEURISTIC,
    RIGOROUS,
    HeightWarning,
    InvalidInput,
    NullCache,
    NumericalFailure,
    RealWithError,
    pairwise_sum,
    total,
)

logger = logging.getLogger(__name__)

DEFAULT_S_GRID = (1.5, 1.25, 1.125)
DEFAULT_TRUNCATION = 100_000
DEFAULT_EXTRAPOLATION_DEGREE = 2
MIN_TRUNCATION = 1000
TAIL_MODELS = ("residue", "empirical", "none")
METHODS = ("extrapolate", "direct")


@dataclass(frozen=True)
class SpectralEvalConfig:
    s_grid: tuple = DEFAULT_S_GRID
    truncation: int = DEFAULT_TRUNCATION
    extrapolation_degree: int = DEFAULT_EXTRAPOLATION_DEGREE
    tail_model: str = "residue"
    method: str = "extrapolate"
    quad_tol: float = DEFAULT_TOL
    tolerance: float = 1.0
    partitions: int = 8
    threads: int = None

    def __post_init__(self):
        grid = tuple(float(s) for s in self.s_grid)
        object.__setattr__(self, "s_grid", grid)
        if not grid:
            raise InvalidInput("s_grid must not be empty")
        if any(s <= 1 for s in grid):
            raise InvalidInput("s_grid values must be > 1, got {}".format(grid))
        if any(a <= b for a, b in zip(grid, grid[1:])):
            raise InvalidInput("s_grid must be strictly decreasing, got {}".format(grid))
        if self.truncation < MIN_TRUNCATION:
            raise InvalidInput(
                "truncation must be >= {}, got {}".format(MIN_TRUNCATION, self.truncation)
            )
        if not 0 <= self.extrapolation_degree < len(grid):
            raise InvalidInput(
                "extrapolation_degree {} needs at least {} grid points".format(
                    self.extrapolation_degree, self.extrapolation_degree + 1
                )
            )
        if self.tail_model not in TAIL_MODELS:
            raise InvalidInput(
                "tail_model must be one of {}, got {!r}".format(TAIL_MODELS, self.tail_model)
            )
        if self.method not in METHODS:
            raise InvalidInput(
                "method must be one of {}, got {!r}".format(METHODS, self.method)
            )
        if self.method == "direct" and self.tail_model != "residue":
            raise InvalidInput("method 'direct' needs tail_model 'residue'")
        if self.partitions < 1:
            raise InvalidInput("partitions must be >= 1")

    def fast(self):
        "Half the truncation, for smoke tests"
        return replace(self, truncation=max(MIN_TRUNCATION, self.truncation // 2))

    def to_dict(self):
        return {
            "s_grid": list(self.s_grid),
            "truncation": self.truncation,
            "extrapolation_degree": self.extrapolation_degree,
            "tail_model": self.tail_model,
            "method": self.method,
            "quad_tol": self.quad_tol,
            "tolerance": self.tolerance,
            "partitions": self.partitions,
        }


@dataclass(frozen=True)
class HeightBreakdown:
    disc: object
    level: HeegnerLevel
    term_i: RealWithError
    term_ii: RealWithError
    term_iii: RealWithError
    term_iv: RealWithError
    total: RealWithError
    m: int = 1
    config: SpectralEvalConfig = field(default=None, compare=False)

    def to_dict(self):
        return {
            "D": self.disc.D,
            "N": self.level.N,
            "m": self.m,
            "h": self.disc.h,
            "u": self.disc.u,
            "beta": self.level.beta,
            "genus": self.level.genus,
            "kappa": str(self.level.kappa),
            "term_i": self.term_i.to_dict(),
            "term_ii": self.term_ii.to_dict(),
            "term_iii": self.term_iii.to_dict(),
            "term_iv": self.term_iv.to_dict(),
            "total": self.total.to_dict(),
        }


def _as_level(disc, level):
    if isinstance(level, HeegnerLevel):
        if level.disc != disc:
            raise InvalidInput(
                "Level was built for D = {}, not D = {}".format(level.disc.D, disc.D)
            )
        return level
    return make_level(disc, level)


def _check_multiplier(level, m):
    if isinstance(m, bool) or not isinstance(m, int) or m < 1:
        raise InvalidInput("m = {!r} is not a positive integer".format(m))
    if math.gcd(m, level.N) != 1:
        raise InvalidInput("m = {} is not coprime to N = {}".format(m, level.N))


def pole_residue(disc, level, m=1):
    "h * kappa_N * sigma_1(m), the coefficient of 1/(s-1) in the spectral series"
    return float(disc.h * level.kappa * sigma1(m))


def hecke_log_term(m):
    "sum_{d | m} d log(m / d^2); zero at m = 1"
    return math.fsum(d * math.log(m / (d * d)) for d in divisors(m))


@lru_cache(maxsize=16)
def _coefficients(disc, N, m, M):
    "sigma(n) r(m|D| + nN) for n = 1..M"
    sigma = sigma_principal_table(disc, N, M)
    r = rep_counts_progression(disc, m * disc.abs_D, N, M)
    coefficients = (sigma[1:] * r[1:]).astype(np.float64)
    coefficients.setflags(write=False)
    return coefficients


def _tail_density(coefficients, cutoff, tail_model, pole, beta, u):
    if tail_model == "none":
        return 0.0
    if tail_model == "residue":
        return -pole * beta / (2 * u * u)
    return float(np.mean(coefficients[cutoff // 2 : cutoff]))


def _truncated_value(terms, coefficients, cutoff, s, beta, u, pole, config, regularized):
    head = pairwise_sum(terms[:cutoff], config.partitions)
    value = -2 * u * u * head
    density = _tail_density(coefficients, cutoff, config.tail_model, pole, beta, u)
    if density:
        t0 = 1.0 + beta * (cutoff + 0.5)
        if t0 < 2:
            raise NumericalFailure(
                "Truncation {} is too small for a tail correction (t0 = {})".format(
                    cutoff, t0
                )
            )
        rho = -2 * u * u * density / beta
        value += rho * legendre_Q_tail_integral(
            s, t0, regularized=regularized, tol=config.quad_tol
        )
        if regularized and s != 1:
            value += (rho - pole) / (s - 1)
    elif regularized:
        value -= pole / (s - 1)
    return value


def _tail_majorant(coefficients, cutoff, s, beta, u, config):
    """
    Bound on the dropped tail sum_{n > cutoff} when no tail model is used.

    The largest |coefficient| in (cutoff/2, cutoff] stands in for the
    envelope tau(n) r(m|D| + nN), so the bound is heuristic. Q_{s-1} is
    decreasing, so the sum of Q_{s-1}(1 + beta n) over n > cutoff is at most
    the integral of Q_{s-1} from 1 + beta cutoff, divided by beta.
    """
    envelope = float(np.max(np.abs(coefficients[cutoff // 2 : cutoff])))
    if not envelope:
        return 0.0
    t0 = 1.0 + beta * cutoff
    integral = legendre_Q_tail_integral(s, t0, tol=config.quad_tol)
    return 2 * u * u * envelope * integral / beta


def _evaluate_series(disc, level, m, s, M, config, regularized):
    started = time.perf_counter()
    coefficients = _coefficients(disc, level.N, m, M)
    beta = 2 * level.N / (m * disc.abs_D)
    pole = pole_residue(disc, level, m)
    terms = np.zeros(M, dtype=np.float64)
    nonzero = np.nonzero(coefficients)[0]
    t = 1.0 + beta * (nonzero + 1)
    terms[nonzero] = coefficients[nonzero] * legendre_Q_array(s, t, config.quad_tol)
    arguments = (terms, coefficients)
    rest = (s, beta, disc.u, pole, config, regularized)
    value = _truncated_value(*arguments, M, *rest)
    coarse = _truncated_value(*arguments, M // 2, *rest)
    error = abs(value - coarse)
    if config.tail_model == "none":
        error += _tail_majorant(coefficients, M, s, beta, disc.u, config)
    logger.debug(
        "series D=%s N=%s m=%s s=%s M=%s: %r +- %r (%.2fs)",
        disc.D,
        level.N,
        m,
        s,
        M,
        value,
        error,
        time.perf_counter() - started,
    )
    return RealWithError(value, error, HEURISTIC)


def _cached_series(disc, level, m, s, M, config, cache, regularized):
    cache = cache if cache is not None else NullCache()
    key = (
        disc.D,
        level.N,
        m,
        s,
        M,
        config.quad_tol,
        config.tail_model,
        config.partitions,
        "regularized" if regularized else "plain",
    )
    hit = cache.get(key)
    if hit is not None:
        result = RealWithError(**hit)
    else:
        result = _evaluate_series(disc, level, m, s, M, config, regularized)
    if result.abs_error > config.tolerance:
        raise NumericalFailure(
            "Truncation error {} exceeds tolerance {} at s = {}, M = {}".format(
                result.abs_error, config.tolerance, s, M
            )
        )
    if hit is None:
        cache.put(key, result.to_dict())
    return result


def spectral_series(disc, level, s, config=None, m=1, M=None, cache=None):
    """
    -2u^2 sum_{n >= 1} sigma(n) r(m|D| + nN) Q_{s-1}(1 + 2nN/(m|D|)) for s > 1.

    The sum is truncated at n = M (default ``config.truncation``) and completed
    by the tail model. The reported error is the change between cutoffs M/2
    and M, so it is heuristic.
    """
    disc = as_discriminant(disc)
    level = _as_level(disc, level)
    _check_multiplier(level, m)
    config = config or SpectralEvalConfig()
    if not s > 1:
        raise InvalidInput("spectral_series needs s > 1, got {}".format(s))
    M = int(M or config.truncation)
    if M < MIN_TRUNCATION:
        raise InvalidInput("M must be >= {}, got {}".format(MIN_TRUNCATION, M))
    return _cached_series(disc, level, m, float(s), M, config, cache, regularized=False)


def regularized_series(disc, level, s, config=None, m=1, M=None, cache=None):
    """
    spectral_series(s) - h kappa sigma_1(m) / (s - 1), admissible at s = 1
    when the residue tail model supplies the pole analytically.
    """
    disc = as_discriminant(disc)
    level = _as_level(disc, level)
    _check_multiplier(level, m)
    config = config or SpectralEvalConfig()
    s = float(s)
    if s < 1 or (s == 1 and config.tail_model != "residue"):
        raise InvalidInput(
            "regularized_series at s = {} needs s > 1 or the residue tail model".format(s)
        )
    M = int(M or config.truncation)
    return _cached_series(disc, level, m, s, M, config, cache, regularized=True)


def fit_pole(s_values, series_values):
    "Least-squares fit of c_{-1}/(s-1) + c_0; returns (c_{-1}, c_0)"
    s_values = np.asarray(s_values, dtype=np.float64)
    series_values = np.asarray(series_values, dtype=np.float64)
    if s_values.size < 2:
        raise InvalidInput("fit_pole needs at least two points")
    matrix = np.column_stack([1.0 / (s_values - 1.0), np.ones_like(s_values)])
    coefficients, *_ = np.linalg.lstsq(matrix, series_values, rcond=None)
    return float(coefficients[0]), float(coefficients[1])


def _extrapolate_to_zero(x, values, degree):
    "Value at x = 0 of the least-squares polynomial of ``degree``, and its weights"
    matrix = np.vander(x, degree + 1, increasing=True)
    inverse = np.linalg.pinv(matrix)
    weights = inverse[0]
    coefficients = inverse @ values
    residual = matrix @ coefficients - values
    return float(weights @ values), weights, residual


def _term_i_extrapolate(disc, level, m, config, cache):
    pole = pole_residue(disc, level, m)

    def point(s):
        return regularized_series(disc, level, s, config, m=m, cache=cache)

    with ThreadPoolExecutor(max_workers=config.threads) as executor:
        points = list(executor.map(point, config.s_grid))
    x = np.array(config.s_grid) - 1.0
    values = np.array([p.value for p in points])
    errors = np.array([p.abs_error for p in points])
    degree = config.extrapolation_degree
    value, weights, residual = _extrapolate_to_zero(x, values, degree)
    point_error = float(np.max(errors))
    largest_residual = float(np.max(np.abs(residual)))
    if largest_residual > 10 * point_error and largest_residual > 1e-12 * abs(pole):
        raise NumericalFailure(
            "Extrapolation residual {} exceeds 10x the per-point error {}; "
            "increase the truncation".format(largest_residual, point_error)
        )
    error = float(np.abs(weights) @ errors)
    if degree:
        lower, _, _ = _extrapolate_to_zero(x, values, degree - 1)
        error += abs(value - lower)
    return RealWithError(value, error, HEURISTIC)


def term_i(disc, level, m=1, config=None, cache=None):
    """
    lim_{s -> 1} [spectral_series(s) - h kappa sigma_1(m) / (s - 1)].

    ``extrapolate`` evaluates the regularised series on ``config.s_grid`` and
    extrapolates a polynomial in (s - 1) to zero; ``direct`` evaluates it at
    s = 1 itself, which the residue tail model allows.
    """
    disc = as_discriminant(disc)
    level = _as_level(disc, level)
    _check_multiplier(level, m)
    config = config or SpectralEvalConfig()
    if config.method == "direct":
        return regularized_series(disc, level, 1.0, config, m=m, cache=cache)
    return _term_i_extrapolate(disc, level, m, config, cache)


def term_ii(disc, level, m=1, include_hecke=True, tol=DEFAULT_TOL):
    """
    h kappa [sigma_1(m) (log(N/|D|) + 2 sum_{p | N} log p / (p^2 - 1) + 2
    + 2 zeta'/zeta(2) - 2 L'/L(1, eps)) + sum_{d | m} d log(m/d^2)].
    """
    disc = as_discriminant(disc)
    level = _as_level(disc, level)
    _check_multiplier(level, m)
    N = level.N
    zeta_part = zeta_log_deriv_at_2(tol)
    L_part = L_log_deriv_at_1(disc, tol)
    bracket = (
        math.log(N / disc.abs_D)
        + 2 * math.fsum(math.log(p) / (p * p - 1) for p in prime_factors(N))
        + 2
        + 2 * zeta_part.value
        - 2 * L_part.value
    )
    hk = float(disc.h * level.kappa)
    value = hk * sigma1(m) * bracket
    if include_hecke:
        value += hk * hecke_log_term(m)
    error = abs(hk) * sigma1(m) * 2 * (zeta_part.abs_error + L_part.abs_error)
    return RealWithError(value, error, HEURISTIC)


def term_iii_constant(disc, tol=DEFAULT_TOL):
    "h u (2 L'/L(1, eps) - 2 gamma - 2 log 2 pi + log |D|), the large-N excess"
    disc = as_discriminant(disc)
    L_part = L_log_deriv_at_1(disc, tol)
    gamma = euler_gamma()
    hu = disc.h * disc.u
    bracket = (
        2 * L_part.value
        - 2 * gamma.value
        - 2 * math.log(2 * math.pi)
        + math.log(disc.abs_D)
    )
    return RealWithError(
        hu * bracket, hu * 2 * (L_part.abs_error + gamma.abs_error), HEURISTIC
    )


def term_iii(disc, level, m=1, tol=DEFAULT_TOL):
    disc = as_discriminant(disc)
    level = _as_level(disc, level)
    _check_multiplier(level, m)
    r = rep_count_principal(disc, m)
    if r == 0:
        return RealWithError(0.0)
    return term_iii_constant(disc, tol).scale(r)


def term_iv(disc, level, m=1):
    """
    -u^2 sum_{1 <= n <= m|D|/N} sigma'(n) r(m|D| - nN) + h u r(m) log(N/m).

    The sum is empty once N > m|D|.
    """
    disc = as_discriminant(disc)
    level = _as_level(disc, level)
    _check_multiplier(level, m)
    N = level.N
    top = m * disc.abs_D
    finite = math.fsum(
        sigma_prime_principal(disc, N, n) * rep_count_principal(disc, top - n * N)
        for n in range(1, top // N + 1)
    )
    log_part = disc.h * disc.u * rep_count_principal(disc, m) * math.log(N / m)
    value = -disc.u * disc.u * finite + log_part
    return RealWithError(value, 4 * np.finfo(float).eps * (abs(finite) + abs(log_part)), RIGOROUS)


def height(disc, level, config=None, m=1, cache=None):
    "All four terms and their total; warns with HeightWarning when the total is not positive"
    disc = as_discriminant(disc)
    level = _as_level(disc, level)
    config = config or SpectralEvalConfig()
    terms = (
        term_i(disc, level, m, config, cache),
        term_ii(disc, level, m, tol=config.quad_tol),
        term_iii(disc, level, m, tol=config.quad_tol),
        term_iv(disc, level, m),
    )
    result = HeightBreakdown(
        disc,
        level,
        *terms,
        total=total(terms),
        m=m,
        config=config,
    )
    if result.total.value <= 0:
        warnings.warn(
            "Height for D = {}, N = {} is {}, expected > 0".format(
                disc.D, level.N, result.total.value
            ),
            HeightWarning,
        )
    logger.info(
        "height D=%s N=%s m=%s: %r +- %r",
        disc.D,
        level.N,
        m,
        result.total.value,
        result.total.abs_error,
    )
    return result
