"""
Scans of the Heegner height over levels N, the Lang-Silverman comparison
against the Jorgenson-Kramer surrogate for the stable Faltings height, and the
height scaling facts for division points and Weil restriction.
"""
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
import logging
import math

import numpy as np
from scipy import stats

from .arith import is_squarefree
from .gzheight import SpectralEvalConfig, height, term_iii_constant
from .heegner import MIN_LEVEL, enum_levels, genus_X0, make_level, mobius_product
from .quadfield import as_discriminant
from .utils import HeegnerError, InvalidInput

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 3
SURROGATE_NOTE = (
    "hst_surrogate is the leading term g(N) log(N) / 3 of the stable Faltings "
    "height; the o(g log N) remainder is not modelled"
)

LangSilvermanBound = namedtuple("LangSilvermanBound", ("bound", "comparison"))
Encadrement = namedtuple(
    "Encadrement", ("N_max", "alpha", "worst_N", "worst_ratio", "holds")
)
ScanSummary = namedtuple(
    "ScanSummary",
    ("rows", "slope", "intercept", "tail_excess", "excess_constant", "spearman"),
)


@dataclass(frozen=True)
class ScanRow:
    D: int
    N: int
    h_hat: float = None
    h_hat_error: float = None
    hu_log_N: float = None
    ratio: float = None
    excess: float = None
    genus: int = None
    hst_surrogate: float = None
    ls_ratio: float = None
    ls_bound: float = None
    flag: str = None
    error: str = None

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ScalingRow:
    step: int
    point_height: Fraction
    degree: int
    dim: int
    hst: Fraction
    zariski_closure_dim: int

    def to_dict(self):
        return {
            "step": self.step,
            "point_height": float(self.point_height),
            "point_height_exact": str(self.point_height),
            "degree": self.degree,
            "dim": self.dim,
            "hst": float(self.hst),
            "hst_exact": str(self.hst),
            "zariski_closure_dim": self.zariski_closure_dim,
        }


def hst_surrogate(N):
    "g(N) log(N) / 3"
    return genus_X0(N) * math.log(N) / 3


def lang_silverman_bound(disc, level):
    """
    c(H, g) <= 3 h / g, with the unit-weighted 3 h u / g that multiplies the
    surrogate Faltings height back to h u log N.
    """
    disc = as_discriminant(disc)
    N = level.N if hasattr(level, "N") else level
    genus = genus_X0(N)
    if genus == 0:
        raise InvalidInput("X_0({}) has genus 0".format(N))
    return LangSilvermanBound(3 * disc.h / genus, 3 * disc.h * disc.u / genus)


def _row(disc, N, config, cache):
    try:
        level = make_level(disc, N)
        breakdown = height(disc, level, config, cache=cache)
    except HeegnerError as e:
        logger.warning("scan D=%s N=%s failed: %s", disc.D, N, e)
        return ScanRow(D=disc.D, N=N, error=str(e))
    h_hat = breakdown.total.value
    hu_log_N = disc.h * disc.u * math.log(N)
    genus = level.genus
    surrogate = hst_surrogate(N) if genus else None
    row = ScanRow(
        D=disc.D,
        N=N,
        h_hat=h_hat,
        h_hat_error=breakdown.total.abs_error,
        hu_log_N=hu_log_N,
        ratio=h_hat / hu_log_N,
        excess=h_hat - hu_log_N,
        genus=genus,
        hst_surrogate=surrogate,
        ls_ratio=h_hat / surrogate if genus else None,
        ls_bound=lang_silverman_bound(disc, level).comparison if genus else None,
        flag=breakdown.total.flag,
    )
    logger.info("scan D=%s N=%s ratio=%.6f", disc.D, N, row.ratio)
    return row


def sample_levels(levels, max_rows):
    "At most ``max_rows`` levels spread evenly over ``levels``, ends included"
    if max_rows is None or len(levels) <= max_rows:
        return list(levels)
    if max_rows < 2:
        return list(levels[-max_rows:])
    picks = np.unique(np.linspace(0, len(levels) - 1, max_rows).round().astype(int))
    return [levels[i] for i in picks]


def iter_scan(disc, N_min, N_max, config=None, cache=None, threads=None, max_rows=None):
    """
    Yield a ScanRow per level of N_k in [N_min, N_max], in N order.

    Rows are computed in parallel, one level per worker; each level runs its
    s-grid serially so the scan never holds more than ``threads`` threads. A
    failing level yields a row carrying the error message instead of stopping
    the scan.
    """
    disc = as_discriminant(disc)
    if N_min < MIN_LEVEL:
        raise InvalidInput("N_min must be >= {}, got {}".format(MIN_LEVEL, N_min))
    config = config or SpectralEvalConfig()
    levels = sample_levels(enum_levels(disc, N_max, N_min), max_rows)
    row_config = replace(config, threads=1)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        yield from executor.map(lambda N: _row(disc, N, row_config, cache), levels)


def scan(disc, N_min, N_max, config=None, cache=None, threads=None, max_rows=None):
    return list(iter_scan(disc, N_min, N_max, config, cache, threads, max_rows))


def summarize(rows, disc=None):
    """
    Least-squares fit of h_hat against log N (the slope estimates h u), the
    mean excess over the five largest levels, and the Spearman correlation of
    |excess - C_D| with 1/N when ``disc`` supplies C_D.
    """
    good = [row for row in rows if row.error is None]
    if len(good) < 2:
        raise InvalidInput("Need at least two successful rows to summarize")
    N = np.array([row.N for row in good], dtype=np.float64)
    h_hat = np.array([row.h_hat for row in good])
    excess = np.array([row.excess for row in good])
    slope, intercept = np.polyfit(np.log(N), h_hat, 1)
    constant = spearman = None
    if disc is not None:
        constant = term_iii_constant(disc).value
        deviation = np.abs(excess - constant)
        spearman = float(stats.spearmanr(deviation, 1.0 / N).correlation)
    return ScanSummary(
        rows=len(good),
        slope=float(slope),
        intercept=float(intercept),
        tail_excess=float(np.mean(excess[-5:])),
        excess_constant=constant,
        spearman=spearman,
    )


def division_heights(base_height, steps):
    "h(P_N) = h(P) / N^2 for a point P_N with N P_N = P"
    base = Fraction(base_height)
    return [(N, base / (N * N)) for N in steps]


def weil_scaling(base_height, g_base, hst_base, degrees):
    """
    Rows for the sequence of Weil restrictions A_N of A_1 along fields of
    degree m_N: the point height drops as 1/N^2 while dimension and stable
    height grow by m_N and the Zariski closure keeps dimension g_base.
    """
    base = Fraction(base_height)
    if base <= 0:
        raise InvalidInput("base_height must be > 0")
    if isinstance(g_base, bool) or not isinstance(g_base, int) or g_base < 1:
        raise InvalidInput("g_base must be a positive integer")
    degrees = [int(m) for m in degrees]
    if not degrees or degrees[0] != 1:
        raise InvalidInput("degrees must start with m_1 = 1")
    if any(a > b for a, b in zip(degrees, degrees[1:])):
        raise InvalidInput("degrees must be nondecreasing")
    hst = Fraction(hst_base)
    return [
        ScalingRow(
            step=N,
            point_height=point_height,
            degree=m,
            dim=m * g_base,
            hst=m * hst,
            zariski_closure_dim=g_base,
        )
        for (N, point_height), m in zip(
            division_heights(base, range(1, len(degrees) + 1)), degrees
        )
    ]


def watkins_degree_bound(N, eps=0.0):
    "deg(phi) >= N^(7/6 - eps) for a modular parametrisation of conductor N"
    return N ** (7 / 6 - eps)


def hindry_silverman_bound(degree, szpiro_ratio):
    "(20 sigma)^(-8d) 10^(-4 sigma) / 12"
    return (20 * szpiro_ratio) ** (-8 * degree) * 10 ** (-4 * szpiro_ratio) / 12


def field_dependence_exponent(field_degree, g):
    "[k:Q]^(-1/g)"
    return field_degree ** (-1 / g)


def encadrement(N_max, alpha=DEFAULT_ALPHA):
    """
    The largest prod_{p | N}(1 + 1/p) / log log N over squarefree N coprime
    to 6 with 5 <= N <= N_max, and whether it stays below ``alpha``.
    """
    worst_N, worst_ratio = None, 0.0
    for N in range(MIN_LEVEL, int(N_max) + 1):
        if math.gcd(N, 6) != 1 or not is_squarefree(N):
            continue
        ratio = float(mobius_product(N)) / math.log(math.log(N))
        if ratio > worst_ratio:
            worst_N, worst_ratio = N, ratio
    return Encadrement(N_max, alpha, worst_N, worst_ratio, worst_ratio <= alpha)
