"""
Admissible levels N for a discriminant D, the square roots beta of D modulo
4N, Heegner forms, the genus of X_0(N) and the constant kappa_N.
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

from .arith import is_squarefree, kronecker, prime_factors, tau
from .quadfield import (
    FundamentalDiscriminant,
    QuadraticForm,
    as_discriminant,
    reduce_form,
    reduced_forms,
)
from .utils import InexactDivision, InvalidInput, NumericalFailure

MIN_LEVEL = 5


@dataclass(frozen=True)
class HeegnerLevel:
    N: int
    disc: FundamentalDiscriminant
    beta: int
    genus: int
    kappa: Fraction

    @property
    def ideal_basis(self):
        "n = ZN + Z(beta + sqrt D)/2, as the pair (N, beta)"
        return (self.N, self.beta)


def level_violation(disc, N):
    "The first violated admissibility condition for N, or None"
    disc = as_discriminant(disc)
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
        return "N = {!r} is not a positive integer".format(N)
    if not is_squarefree(N):
        return "N = {} is not squarefree".format(N)
    if math.gcd(N, 6) != 1:
        return "N = {} is not coprime to 6".format(N)
    if math.gcd(N, disc.abs_D) != 1:
        return "N = {} is not coprime to D = {}".format(N, disc.D)
    return None


def _validate_level(disc, N):
    violation = level_violation(disc, N)
    if violation:
        raise InvalidInput(violation)


def solve_beta(disc, N):
    """
    Every beta in [0, 2N) with beta^2 = D (mod 4N).

    Raises InvalidInput when N breaks the squarefree / coprimality
    preconditions; an empty list means N is valid but outside N_k.
    """
    disc = as_discriminant(disc)
    _validate_level(disc, N)
    N = int(N)
    beta = np.arange(2 * N, dtype=np.int64)
    matches = beta[(beta * beta - disc.D) % (4 * N) == 0]
    return [int(b) for b in matches]


def is_heegner_level(disc, N):
    disc = as_discriminant(disc)
    if level_violation(disc, N):
        return False
    return bool(solve_beta(disc, N))


def enum_levels(disc, N_max, N_min=MIN_LEVEL):
    """
    Members of N_k in [N_min, N_max], ascending.

    N = 1 is never returned: J_0(1) is trivial.
    """
    disc = as_discriminant(disc)
    levels = []
    for N in range(max(N_min, MIN_LEVEL), int(N_max) + 1):
        if N % 2 == 0 or N % 3 == 0:
            continue
        if is_heegner_level(disc, N):
            levels.append(N)
    return levels


def mobius_product(N):
    "prod_{p | N} (1 + 1/p), exactly"
    result = Fraction(1)
    for p in prime_factors(N):
        result *= Fraction(p + 1, p)
    return result


def kappa(N):
    "kappa_N = -12 / (N prod_{p | N} (1 + 1/p))"
    if not is_squarefree(N):
        raise InvalidInput("N = {} is not squarefree".format(N))
    return Fraction(-12) / (N * mobius_product(N))


@lru_cache(maxsize=4096)
def genus_X0(N):
    """
    Genus of X_0(N) for squarefree N.

    1 + N/12 prod(1 + 1/p) - 1/4 prod(1 + (-4/p)) - 1/3 prod(1 + (-3/p))
    - tau(N)/2. The elliptic-point factor uses (-4/p), which is (-1/p) at odd
    p and 0 at p = 2.
    """
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidInput("N = {!r} is not a positive integer".format(N))
    if not is_squarefree(N):
        raise InvalidInput("N = {} is not squarefree".format(N))
    primes = prime_factors(N)
    nu2 = math.prod(1 + kronecker(-4, p) for p in primes)
    nu3 = math.prod(1 + kronecker(-3, p) for p in primes)
    genus = (
        1
        + Fraction(N, 12) * mobius_product(N)
        - Fraction(nu2, 4)
        - Fraction(nu3, 3)
        - Fraction(tau(N), 2)
    )
    if genus.denominator != 1 or genus < 0:
        raise InexactDivision("Genus formula gave {} for N = {}".format(genus, N))
    return int(genus)


def genus_one_levels(N_max):
    return [N for N in range(1, N_max + 1) if is_squarefree(N) and genus_X0(N) == 1]


def make_level(disc, N):
    "The HeegnerLevel for N in N_k; raises InvalidInput otherwise"
    disc = as_discriminant(disc)
    betas = solve_beta(disc, N)
    if not betas:
        raise InvalidInput(
            "N = {} is not in N_k: D = {} is not a square mod {}".format(
                N, disc.D, 4 * N
            )
        )
    N = int(N)
    return HeegnerLevel(
        N=N, disc=disc, beta=betas[0], genus=genus_X0(N), kappa=kappa(N)
    )


def heegner_ideal(level):
    return level.ideal_basis


def heegner_forms(level, max_multiplier=200):
    """
    For every reduced form of discriminant D, an equivalent form (A, B, C)
    with N | A and B = beta (mod 2N).

    Searches A = N a for a = 1, 2, ... and B on the progression beta + 2N k,
    reducing each candidate to find its class.
    """
    disc = level.disc
    N = level.N
    wanted = set(reduced_forms(disc).forms)
    found = {}
    for a in range(1, max_multiplier + 1):
        A = N * a
        for k in range(-a, a + 1):
            B = level.beta + 2 * N * k
            numerator = B * B - disc.D
            if numerator % (4 * A):
                continue
            C = numerator // (4 * A)
            form = QuadraticForm(A, B, C)
            if math.gcd(math.gcd(A, B), C) != 1:
                continue
            reduced = reduce_form(form)
            if reduced in wanted and reduced not in found:
                found[reduced] = form
        if len(found) == len(wanted):
            return found
    raise NumericalFailure(
        "Found Heegner forms for {} of {} classes of D = {} at level {}".format(
            len(found), len(wanted), disc.D, N
        )
    )
