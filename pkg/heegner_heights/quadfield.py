"""
Imaginary quadratic fields of fundamental discriminant D = 1 (mod 4):
reduced forms, class number, unit count, ideal-norm counts and the
genus-character divisor sums at the principal class.
"""
from collections import namedtuple
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .arith import divisors, is_squarefree, kronecker, square_root_table
from .utils import InexactDivision, InvalidInput


class QuadraticForm(namedtuple("QuadraticForm", ("a", "b", "c"))):
    "The positive definite form a*x^2 + b*x*y + c*y^2"

    __slots__ = ()

    @property
    def discriminant(self):
        return self.b * self.b - 4 * self.a * self.c

    def __call__(self, x, y):
        return self.a * x * x + self.b * x * y + self.c * y * y

    def is_reduced(self):
        a, b, c = self
        if not (abs(b) <= a <= c):
            return False
        if (abs(b) == a or a == c) and b < 0:
            return False
        return True


@dataclass(frozen=True)
class FundamentalDiscriminant:
    D: int
    h: int
    u: int

    @property
    def abs_D(self):
        return -self.D


@dataclass(frozen=True)
class ClassGroupData:
    disc: FundamentalDiscriminant
    forms: tuple
    principal_index: int

    @property
    def principal(self):
        return self.forms[self.principal_index]


def _validate_discriminant(D):
    if isinstance(D, bool) or not isinstance(D, (int, np.integer)):
        raise InvalidInput("D must be an integer, got {!r}".format(D))
    D = int(D)
    if D >= 0:
        raise InvalidInput("D = {} violates D < 0".format(D))
    if D % 4 != 1:
        raise InvalidInput("D = {} violates D ≡ 1 (mod 4)".format(D))
    if not is_squarefree(-D):
        raise InvalidInput("D = {} violates D squarefree".format(D))
    return D


def _enumerate_reduced_forms(D):
    forms = []
    a_max = math.isqrt(-D // 3)
    for a in range(1, a_max + 1):
        # b has the parity of D, which is odd
        for b in range(-a + 1, a + 1):
            if (b - D) % 2:
                continue
            numerator = b * b - D
            if numerator % (4 * a):
                continue
            c = numerator // (4 * a)
            form = QuadraticForm(a, b, c)
            if form.is_reduced() and math.gcd(math.gcd(a, b), c) == 1:
                forms.append(form)
    return tuple(forms)


@lru_cache(maxsize=1024)
def make_discriminant(D):
    "Validate D and attach h_k (reduced form count) and u_k"
    D = _validate_discriminant(D)
    return FundamentalDiscriminant(
        D=D, h=len(_enumerate_reduced_forms(D)), u=3 if D == -3 else 1
    )


def as_discriminant(disc):
    if isinstance(disc, FundamentalDiscriminant):
        return disc
    return make_discriminant(disc)


@lru_cache(maxsize=1024)
def reduced_forms(disc):
    disc = as_discriminant(disc)
    forms = _enumerate_reduced_forms(disc.D)
    principal = QuadraticForm(1, 1, (1 - disc.D) // 4)
    return ClassGroupData(disc=disc, forms=forms, principal_index=forms.index(principal))


def reduce_form(form):
    "The reduced form SL2(Z)-equivalent to a positive definite form"
    a, b, c = form
    if a <= 0 or b * b - 4 * a * c >= 0:
        raise InvalidInput("{} is not positive definite".format(tuple(form)))
    while True:
        if b > a or b <= -a:
            # translate b into (-a, a]
            k = (a - b) // (2 * a)
            c = a * k * k + b * k + c
            b = b + 2 * a * k
        if a > c:
            a, b, c = c, -b, a
            continue
        if a == c and b < 0:
            b = -b
        return QuadraticForm(a, b, c)


def rep_count_form(form, n):
    "Number of (x, y) in Z^2 with form(x, y) = n"
    a, b, c = form
    D = b * b - 4 * a * c
    if n < 0:
        return 0
    if n == 0:
        return 1
    # 4a*f(x, y) = (2ax + by)^2 + |D| y^2
    y_max = math.isqrt(4 * a * n // -D)
    count = 0
    for y in range(-y_max, y_max + 1):
        delta = 4 * a * n + D * y * y
        if delta < 0:
            continue
        root = math.isqrt(delta)
        if root * root != delta:
            continue
        for z in {root, -root}:
            if (z - b * y) % (2 * a) == 0:
                count += 1
    return count


def _units(disc):
    return 2 * disc.u


def rep_count_principal(disc, n):
    "r_{O_k}(n): ideals of norm n in the principal class"
    disc = as_discriminant(disc)
    solutions = rep_count_form(reduced_forms(disc).principal, n)
    count, remainder = divmod(solutions, _units(disc))
    if remainder:
        raise InexactDivision(
            "{} representations of {} by the principal form of D = {} "
            "are not divisible by {}".format(solutions, n, disc.D, _units(disc))
        )
    return count


def ideal_count_by_class(disc, n):
    "Map each reduced form to the number of ideals of norm n in its class"
    disc = as_discriminant(disc)
    counts = {}
    for form in reduced_forms(disc).forms:
        solutions = rep_count_form(form, n)
        count, remainder = divmod(solutions, _units(disc))
        if remainder:
            raise InexactDivision(
                "{} representations of {} by {} are not divisible by {}".format(
                    solutions, n, tuple(form), _units(disc)
                )
            )
        counts[form] = count
    return counts


def ideal_count_total(disc, n):
    return sum(ideal_count_by_class(disc, n).values())


@lru_cache(maxsize=256)
def character_table(disc):
    """
    eps_D(r) = kronecker(D, r) for r in [0, |D|).

    For fundamental D = 1 (mod 4) this is a primitive character modulo |D|,
    so eps_D(n) = table[n % |D|] for every n >= 0.
    """
    disc = as_discriminant(disc)
    table = np.array([kronecker(disc.D, r) for r in range(disc.abs_D)], dtype=np.int64)
    table.setflags(write=False)
    return table


def _signed_divisor(disc, d):
    "The divisor D2 of D with |D2| = gcd(d, D) and D2 = 1 (mod 4)"
    g = math.gcd(d, disc.abs_D)
    return g if g % 4 == 1 else -g


def eps_genus(disc, N, n, d):
    """
    The genus character eps_{O_k}(n, d).

    Zero when gcd(d, n/d, D) > 1, otherwise eps_{D1}(d) * eps_{D2}(N n / d)
    with D = D1 * D2 and D2 as in ``_signed_divisor``; the class character is
    trivial on the principal class.
    """
    disc = as_discriminant(disc)
    if d < 1 or n % d:
        raise InvalidInput("d = {} does not divide n = {}".format(d, n))
    cofactor = n // d
    if math.gcd(math.gcd(d, cofactor), disc.abs_D) > 1:
        return 0
    D2 = _signed_divisor(disc, d)
    D1 = disc.D // D2
    return kronecker(D1, d) * kronecker(D2, N * cofactor)


def _check_level_coprime(disc, N):
    if math.gcd(N, disc.abs_D) != 1:
        raise InvalidInput("N = {} is not coprime to D = {}".format(N, disc.D))


def sigma_principal(disc, N, n):
    disc = as_discriminant(disc)
    _check_level_coprime(disc, N)
    return sum(eps_genus(disc, N, n, d) for d in divisors(n))


def sigma_prime_principal(disc, N, n):
    disc = as_discriminant(disc)
    _check_level_coprime(disc, N)
    return math.fsum(
        eps_genus(disc, N, n, d) * math.log(n / (d * d)) for d in divisors(n)
    )


def chi_divisor_sums(disc, M):
    "sum_{d | n} eps_D(d) for n = 0..M (index 0 is left at 0)"
    disc = as_discriminant(disc)
    table = character_table(disc)
    q = disc.abs_D
    sums = np.zeros(M + 1, dtype=np.int64)
    for d in range(1, M + 1):
        value = table[d % q]
        if value:
            sums[d::d] += value
    return sums


@lru_cache(maxsize=32)
def sigma_principal_table(disc, N, M):
    """
    sigma_{O_k}(n) for n = 0..M as a read-only integer array.

    For n prime to D every divisor has D2 = 1 and sigma is the plain divisor
    sum of eps_D; the remaining n are evaluated term by term.
    """
    disc = as_discriminant(disc)
    _check_level_coprime(disc, N)
    table = chi_divisor_sums(disc, M)
    n = np.arange(M + 1, dtype=np.int64)
    shared = np.nonzero(np.gcd(n, disc.abs_D) > 1)[0]
    for value in shared:
        value = int(value)
        if value:
            table[value] = sigma_principal(disc, N, value)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=32)
def rep_counts_progression(disc, start, step, count):
    """
    r_{O_k}(start + n * step) for n = 0..count (index 0 is left at 0).

    Lattice points of x^2 + xy + c y^2 are enumerated row by row in y; with
    z = 2x + y, 4 f(x, y) = z^2 + |D| y^2 and the congruence f = start
    (mod step) pins z to the square roots of 4 start + D y^2 modulo step, so
    only points on the progression are visited.
    """
    disc = as_discriminant(disc)
    if step < 1 or step % 2 == 0:
        raise InvalidInput("step must be odd and positive, got {}".format(step))
    if start < 0:
        raise InvalidInput("start must be >= 0, got {}".format(start))
    q = disc.abs_D
    top = start + count * step
    roots = square_root_table(step)
    buckets_single, buckets_double = [], []
    y_max = math.isqrt(4 * top // q)
    for y in range(0, y_max + 1):
        remaining = 4 * top - q * y * y
        if remaining < 0:
            break
        z_max = math.isqrt(remaining)
        residue = (4 * start - q * y * y) % step
        first = roots.starts[residue]
        for z0 in roots.order[first : first + roots.counts[residue]]:
            # z = z0 (mod step) and z = y (mod 2), i.e. z = zc (mod 2 step)
            zc = (int(z0) + step * ((y - int(z0)) % 2)) % (2 * step)
            lowest = -((z_max + zc) // (2 * step))
            highest = (z_max - zc) // (2 * step)
            if highest < lowest:
                continue
            z = zc + 2 * step * np.arange(lowest, highest + 1, dtype=np.int64)
            values = (z * z + q * y * y) // 4
            index = (values - start) // step
            index = index[(values > start) & (index <= count)]
            (buckets_double if y else buckets_single).append(index)
    solutions = np.zeros(count + 1, dtype=np.int64)
    if buckets_single:
        solutions += np.bincount(np.concatenate(buckets_single), minlength=count + 1)
    if buckets_double:
        solutions += 2 * np.bincount(
            np.concatenate(buckets_double), minlength=count + 1
        )
    units = _units(disc)
    if np.any(solutions % units):
        raise InexactDivision(
            "Representation counts on {} + n*{} are not divisible by {}".format(
                start, step, units
            )
        )
    result = solutions // units
    result.setflags(write=False)
    return result


def class_number_formula_check(disc, L_value):
    "round(u sqrt|D| L(1, eps_D) / pi), to compare against h"
    disc = as_discriminant(disc)
    return round(disc.u * math.sqrt(disc.abs_D) * L_value / math.pi)
