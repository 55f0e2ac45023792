"""
Elementary multiplicative number theory: sieving, factorisation, divisor
functions, Kronecker symbols and square roots modulo N.
"""
from collections import namedtuple
from functools import lru_cache
import math
import threading

import numpy as np
from sympy import factorint

from .utils import InvalidInput

MAX_INPUT = 2 ** 63 - 1

Factorization = namedtuple("Factorization", ("n", "factors"))
SquareRootTable = namedtuple("SquareRootTable", ("modulus", "order", "starts", "counts"))

# Grown on demand, shared read-only between threads.
_sieve = {"limit": 1, "primes": np.zeros(0, dtype=np.int64)}
_sieve_lock = threading.Lock()


def primes_up_to(x):
    "All primes p <= x, ascending"
    x = int(x)
    if x < 2:
        return []
    return [int(p) for p in _primes_array(x)]


def _primes_array(x):
    if x > _sieve["limit"]:
        with _sieve_lock:
            if x > _sieve["limit"]:
                limit = max(x, 2 * _sieve["limit"])
                is_prime = np.ones(limit + 1, dtype=bool)
                is_prime[:2] = False
                for p in range(2, math.isqrt(limit) + 1):
                    if is_prime[p]:
                        is_prime[p * p :: p] = False
                _sieve["primes"] = np.nonzero(is_prime)[0].astype(np.int64)
                _sieve["limit"] = limit
    primes = _sieve["primes"]
    return primes[: np.searchsorted(primes, x, side="right")]


def _check_positive(n):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise InvalidInput("Expected a positive integer, got {!r}".format(n))
    n = int(n)
    if n < 1:
        raise InvalidInput("Expected a positive integer, got {}".format(n))
    if n > MAX_INPUT:
        raise InvalidInput("{} exceeds 2**63 - 1".format(n))
    return n


@lru_cache(maxsize=65536)
def factorize(n):
    "Factorise 1 <= n <= 2**63 - 1 into ascending (prime, exponent) pairs"
    n = _check_positive(n)
    factors = sorted((int(p), int(e)) for p, e in factorint(n).items())
    return Factorization(n=n, factors=tuple(factors))


def prime_factors(n):
    return [p for p, _ in factorize(n).factors]


def divisors(n):
    "All positive divisors of n, ascending"
    result = [1]
    for p, e in factorize(n).factors:
        result = [d * p ** k for d in result for k in range(e + 1)]
    return sorted(result)


def tau(n):
    return math.prod(e + 1 for _, e in factorize(n).factors)


def omega(n):
    return len(factorize(n).factors)


def sigma1(m):
    return math.prod(
        (p ** (e + 1) - 1) // (p - 1) for p, e in factorize(m).factors
    )


def is_squarefree(n):
    return all(e == 1 for _, e in factorize(n).factors)


def kronecker(a, b):
    """
    The Kronecker symbol (a/b), extended to b <= 0 and even b.

    (a/0) is 1 for a = +-1 and 0 otherwise; (a/-1) is -1 exactly when a < 0;
    (a/2) follows the period-8 rule.
    """
    a, b = int(a), int(b)
    if a == 0 and b == 0:
        raise InvalidInput("kronecker(0, 0) is undefined")
    if b == 0:
        return 1 if a in (1, -1) else 0
    if a % 2 == 0 and b % 2 == 0:
        return 0
    result = 1
    if b < 0:
        b = -b
        if a < 0:
            result = -result
    twos = 0
    while b % 2 == 0:
        b //= 2
        twos += 1
    if twos % 2 == 1 and a % 8 in (3, 5):
        result = -result
    # Jacobi symbol for odd positive b
    a %= b
    while a:
        while a % 2 == 0:
            a //= 2
            if b % 8 in (3, 5):
                result = -result
        a, b = b, a
        if a % 4 == 3 and b % 4 == 3:
            result = -result
        a %= b
    return result if b == 1 else 0


@lru_cache(maxsize=256)
def square_root_table(modulus):
    """
    Every residue's square roots modulo ``modulus``.

    ``order[starts[r]:starts[r] + counts[r]]`` are the x in [0, modulus) with
    x*x = r (mod modulus).
    """
    modulus = _check_positive(modulus)
    x = np.arange(modulus, dtype=np.int64)
    squares = (x * x) % modulus
    order = np.argsort(squares, kind="stable")
    counts = np.bincount(squares, minlength=modulus)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    return SquareRootTable(modulus, order, starts, counts)


def sqrt_mod(r, modulus):
    "All x in [0, modulus) with x*x = r (mod modulus), ascending"
    table = square_root_table(modulus)
    r %= modulus
    start = table.starts[r]
    return sorted(int(x) for x in table.order[start : start + table.counts[r]])
