from dataclasses import replace
import math

import numpy as np
import pytest

from heegner_heights import gzheight, lfunc
from heegner_heights.gzheight import HeightBreakdown, SpectralEvalConfig
from heegner_heights.heegner import enum_levels, make_level
from heegner_heights.quadfield import (
    make_discriminant,
    rep_count_principal,
    sigma_prime_principal,
    sigma_principal,
)
from heegner_heights.utils import (
    HEURISTIC,
    RIGOROUS,
    HeightWarning,
    InvalidInput,
    NumericalFailure,
    RealWithError,
    ResultCache,
)
from .fixtures import cache, cache_path, disc3, fast_config, level7  # noqa: F401


@pytest.mark.parametrize(
    "kwargs,message",
    [
        ({"s_grid": (1.25, 1.5)}, "strictly decreasing"),
        ({"s_grid": (1.5, 1.0)}, "must be > 1"),
        ({"s_grid": ()}, "must not be empty"),
        ({"truncation": 999}, "truncation must be >= 1000"),
        ({"extrapolation_degree": 3}, "needs at least 4 grid points"),
        ({"tail_model": "guess"}, "tail_model must be one of"),
        ({"method": "magic"}, "method must be one of"),
        ({"method": "direct", "tail_model": "empirical"}, "needs tail_model 'residue'"),
        ({"partitions": 0}, "partitions must be >= 1"),
    ],
)
def test_config_rejects(kwargs, message):
    with pytest.raises(InvalidInput) as excinfo:
        SpectralEvalConfig(**kwargs)
    assert message in str(excinfo.value)


def test_config_fast_and_to_dict():
    config = SpectralEvalConfig(s_grid=[2, 1.5], extrapolation_degree=1)
    assert config.s_grid == (2.0, 1.5)
    assert config.fast().truncation == 50_000
    assert SpectralEvalConfig(truncation=1500).fast().truncation == 1000
    assert config.to_dict()["s_grid"] == [2.0, 1.5]
    assert "threads" not in config.to_dict()


def _q1(t):
    return t / 2 * math.log((t + 1) / (t - 1)) - 1


def test_spectral_series_matches_brute_force(disc3, level7):
    config = SpectralEvalConfig(truncation=1000, tail_model="none")
    result = gzheight.spectral_series(disc3, level7, 2.0, config)
    terms = [
        sigma_principal(disc3, 7, n)
        * rep_count_principal(disc3, 3 + 7 * n)
        * _q1(1 + 14 * n / 3)
        for n in range(1, 1001)
    ]
    expected = -2 * 9 * math.fsum(terms)
    assert result.value == pytest.approx(expected, abs=1e-9)
    assert result.flag == HEURISTIC


def test_spectral_series_stable_in_truncation(disc3, level7):
    config = SpectralEvalConfig(truncation=1000)
    coarse = gzheight.spectral_series(disc3, level7, 2.0, config)
    fine = gzheight.spectral_series(disc3, level7, 2.0, config, M=4000)
    assert fine.value == pytest.approx(coarse.value, abs=2e-3)


def test_regularized_series_subtracts_pole(disc3, level7):
    config = SpectralEvalConfig(truncation=2000)
    plain = gzheight.spectral_series(disc3, level7, 1.5, config)
    regularized = gzheight.regularized_series(disc3, level7, 1.5, config)
    pole = gzheight.pole_residue(disc3, level7)
    assert pole == -1.5
    assert regularized.value == pytest.approx(plain.value - pole / 0.5, abs=1e-9)
    at_one = gzheight.regularized_series(disc3, level7, 1.0, config)
    assert math.isfinite(at_one.value)


@pytest.mark.parametrize("D,N", [(-3, 7), (-7, 11)])
def test_coefficient_density_matches_pole(D, N):
    disc = make_discriminant(D)
    level = make_level(disc, N)
    M = 400_000
    coefficients = gzheight._coefficients(disc, N, 1, M)
    beta = 2 * N / disc.abs_D
    density = -gzheight.pole_residue(disc, level) * beta / (2 * disc.u ** 2)
    assert float(np.mean(coefficients[M // 2 :])) == pytest.approx(density, rel=0.02)


def test_dropped_tail_is_bounded(disc3, level7):
    config = SpectralEvalConfig(truncation=1000, tail_model="none")
    short = gzheight.spectral_series(disc3, level7, 2.0, config)
    longer = gzheight.spectral_series(disc3, level7, 2.0, config, M=16_000)
    assert abs(longer.value - short.value) <= short.abs_error
    coefficients = gzheight._coefficients(disc3, 7, 1, 1000)
    majorant = gzheight._tail_majorant(coefficients, 1000, 2.0, 14 / 3, 3, config)
    assert 0 < majorant <= short.abs_error


def test_dropped_tail_near_pole_fails_tolerance(disc3, level7):
    config = SpectralEvalConfig(truncation=1000, tail_model="none")
    with pytest.raises(NumericalFailure) as excinfo:
        gzheight.spectral_series(disc3, level7, 1.05, config)
    assert "exceeds tolerance" in str(excinfo.value)


def test_series_rejects(disc3, level7):
    config = SpectralEvalConfig(truncation=1000, tail_model="empirical")
    with pytest.raises(InvalidInput):
        gzheight.spectral_series(disc3, level7, 1.0, config)
    with pytest.raises(InvalidInput):
        gzheight.regularized_series(disc3, level7, 1.0, config)
    with pytest.raises(InvalidInput):
        gzheight.spectral_series(disc3, level7, 2.0, config, M=500)
    with pytest.raises(InvalidInput) as excinfo:
        gzheight.spectral_series(disc3, level7, 2.0, config, m=7)
    assert "not coprime to N" in str(excinfo.value)
    with pytest.raises(InvalidInput) as excinfo:
        gzheight.spectral_series(-23, level7, 2.0, config)
    assert "Level was built for D = -3" in str(excinfo.value)


def test_spectral_series_accepts_integer_level(disc3, level7):
    config = SpectralEvalConfig(truncation=1000, tail_model="none")
    assert (
        gzheight.spectral_series(-3, 7, 2.0, config).value
        == gzheight.spectral_series(disc3, level7, 2.0, config).value
    )


def test_term_i_is_finite(disc3, level7, fast_config):
    result = gzheight.term_i(disc3, level7, config=fast_config)
    assert math.isfinite(result.value)
    assert 0 < result.abs_error < math.inf
    assert result.flag == HEURISTIC


def test_cache_replays_bit_identical(disc3, level7, cache, cache_path):
    config = SpectralEvalConfig(truncation=2000, threads=1)
    first = gzheight.regularized_series(disc3, level7, 1.25, config, cache=cache)
    assert len(cache) == 1
    reloaded = ResultCache(cache_path)
    second = gzheight.regularized_series(disc3, level7, 1.25, config, cache=reloaded)
    assert second == first
    assert reloaded.stats()["hits"] == 1
    assert reloaded.stats()["misses"] == 0


def test_cache_hit_is_checked_against_tolerance(disc3, level7, tmp_path):
    cache = ResultCache(str(tmp_path / "heights.jsonl"))
    config = SpectralEvalConfig(truncation=2000, threads=1)
    first = gzheight.regularized_series(disc3, level7, 1.25, config, cache=cache)
    assert first.abs_error > 0
    strict = replace(config, tolerance=first.abs_error / 2)
    with pytest.raises(NumericalFailure):
        gzheight.regularized_series(disc3, level7, 1.25, strict, cache=cache)
    assert cache.stats()["hits"] == 1
    assert len(cache) == 1


def test_cache_key_includes_partitions(disc3, level7, tmp_path):
    cache = ResultCache(str(tmp_path / "heights.jsonl"))
    config = SpectralEvalConfig(truncation=2000, threads=1)
    gzheight.regularized_series(disc3, level7, 1.25, config, cache=cache)
    gzheight.regularized_series(disc3, level7, 1.25, replace(config, partitions=3), cache=cache)
    assert len(cache) == 2
    assert cache.stats()["hits"] == 0


def test_regularized_series_cancels_pole(disc3, level7):
    config = SpectralEvalConfig(truncation=20_000, tolerance=10.0, threads=1)
    grid = (1.5, 1.25, 1.125, 1.0625)
    plain = [gzheight.spectral_series(disc3, level7, s, config).value for s in grid]
    regularized = [gzheight.regularized_series(disc3, level7, s, config).value for s in grid]
    plain_steps = np.abs(np.diff(plain))
    regularized_steps = np.abs(np.diff(regularized))
    # plain grows like -1.5 / (s - 1): steps of 3, 6 and 12
    assert plain_steps == pytest.approx([3, 6, 12], rel=0.5)
    assert regularized_steps.max() < plain_steps.max() / 2


def test_fit_pole_recovers_synthetic_pole():
    s = np.array([1.5, 1.25, 1.125, 1.0625])
    c_minus_1, c_0 = gzheight.fit_pole(s, 3 / (s - 1) + 2)
    assert c_minus_1 == pytest.approx(3)
    assert c_0 == pytest.approx(2)
    with pytest.raises(InvalidInput):
        gzheight.fit_pole([1.5], [1.0])


def test_hecke_log_term():
    assert gzheight.hecke_log_term(1) == 0
    for p in (2, 5, 11):
        assert gzheight.hecke_log_term(p) == pytest.approx((1 - p) * math.log(p))


def test_term_ii_assembly(disc3, level7):
    result = gzheight.term_ii(disc3, level7)
    bracket = (
        math.log(7 / 3)
        + 2 * math.log(7) / 48
        + 2
        + 2 * lfunc.zeta_log_deriv_at_2().value
        - 2 * lfunc.L_log_deriv_at_1(disc3).value
    )
    assert result.value == pytest.approx(-1.5 * bracket, rel=1e-12)
    assert result.abs_error < 1e-8


def test_term_ii_scales_with_sigma_1(disc3, level7):
    one = gzheight.term_ii(disc3, level7, include_hecke=False)
    six = gzheight.term_ii(disc3, level7, m=6, include_hecke=False)
    assert six.value / one.value == pytest.approx(12)
    with_hecke = gzheight.term_ii(disc3, level7, m=6)
    assert with_hecke.value - six.value == pytest.approx(
        -1.5 * gzheight.hecke_log_term(6)
    )


def test_term_iii_independent_of_N(disc3):
    seven = gzheight.term_iii(disc3, 7)
    thirteen = gzheight.term_iii(disc3, 13)
    assert seven == thirteen
    constant = gzheight.term_iii_constant(disc3)
    expected = 3 * (
        2 * lfunc.L_log_deriv_at_1(disc3).value
        - 2 * lfunc.euler_gamma().value
        - 2 * math.log(2 * math.pi)
        + math.log(3)
    )
    assert constant.value == pytest.approx(expected, rel=1e-12)
    assert seven.value == constant.value


def test_term_iii_vanishes_when_m_is_not_a_norm(disc3):
    # 2 is inert in Q(sqrt -3)
    assert gzheight.term_iii(disc3, 7, m=2).value == 0.0


def test_term_iv_empty_sum(disc3, level7):
    result = gzheight.term_iv(disc3, level7)
    assert result.value == pytest.approx(3 * math.log(7), rel=1e-15)
    assert result.flag == RIGOROUS
    # 13 <= 23 < 26: a single term, and sigma'(1) = 0
    assert gzheight.term_iv(-23, 13).value == pytest.approx(3 * math.log(13))


def test_term_iv_finite_sum():
    disc = make_discriminant(-47)
    finite = math.fsum(
        sigma_prime_principal(disc, 7, n) * rep_count_principal(disc, 47 - 7 * n)
        for n in range(1, 7)
    )
    expected = -finite + 5 * math.log(7)
    assert gzheight.term_iv(disc, 7).value == pytest.approx(expected, rel=1e-12)


@pytest.mark.filterwarnings("ignore::heegner_heights.utils.HeightWarning")
def test_height_assembles_terms(disc3, level7, fast_config):
    result = gzheight.height(disc3, level7, fast_config)
    assert isinstance(result, HeightBreakdown)
    parts = [result.term_i, result.term_ii, result.term_iii, result.term_iv]
    assert result.total.value == pytest.approx(sum(p.value for p in parts), rel=1e-12)
    assert result.total.abs_error == pytest.approx(sum(p.abs_error for p in parts))
    assert result.total.flag == HEURISTIC
    record = result.to_dict()
    assert (record["D"], record["N"], record["h"], record["u"]) == (-3, 7, 1, 3)
    assert record["kappa"] == "-3/2"
    assert set(record["total"]) == {"value", "abs_error", "flag"}


def test_height_warns_when_not_positive(monkeypatch, disc3, level7, fast_config):
    monkeypatch.setattr(
        gzheight, "term_iv", lambda disc, level, m=1: RealWithError(-1e6)
    )
    with pytest.warns(HeightWarning):
        gzheight.height(disc3, level7, fast_config)


@pytest.mark.slow
@pytest.mark.parametrize("D,N_min", [(-3, 90), (-7, 100), (-11, 150), (-23, 120), (-47, 200)])
def test_pole_residue_recovery(D, N_min):
    disc = make_discriminant(D)
    level = make_level(disc, enum_levels(disc, 2 * N_min, N_min)[0])
    config = SpectralEvalConfig(
        s_grid=(1.2, 1.1, 1.05, 1.025),
        truncation=400_000,
        tail_model="empirical",
        tolerance=10.0,
    )
    values = [
        gzheight.spectral_series(disc, level, s, config).value for s in config.s_grid
    ]
    c_minus_1, _ = gzheight.fit_pole(config.s_grid, values)
    expected = gzheight.pole_residue(disc, level)
    assert c_minus_1 == pytest.approx(expected, rel=0.1)


@pytest.mark.slow
def test_term_i_decays_with_N(disc3):
    levels = [min(enum_levels(disc3, 2 * N, N)) for N in (7, 97, 499, 997, 4999)]
    values = [gzheight.term_i(disc3, N) for N in levels]
    for smaller, larger in zip(values, values[1:]):
        assert abs(larger.value) <= abs(smaller.value) + smaller.abs_error + larger.abs_error
    # about 0.6 at N = 97 and 0.09 at N = 997
    for N, value in zip(levels, values):
        if N >= 997:
            assert abs(value.value) <= 20 * N ** -0.75 + value.abs_error
        if N >= 4999:
            assert abs(value.value) <= 0.05 + value.abs_error


@pytest.mark.slow
@pytest.mark.parametrize("D", [-3, -7])
def test_term_i_bounded_beyond_100(D):
    disc = make_discriminant(D)
    for N in (100, 300, 1000):
        level = min(enum_levels(disc, 2 * N, N))
        assert abs(gzheight.term_i(disc, level).value) <= 1.0


@pytest.mark.slow
def test_direct_agrees_with_extrapolation(disc3):
    level = make_level(disc3, 97)
    extrapolated = gzheight.term_i(disc3, level)
    direct = gzheight.term_i(disc3, level, config=SpectralEvalConfig(method="direct"))
    assert direct.value == pytest.approx(
        extrapolated.value, abs=extrapolated.abs_error + direct.abs_error + 1e-3
    )


def _honesty_cases():
    for D in (-3, -7, -11, -19, -23):
        disc = make_discriminant(D)
        yield from ((D, N) for N in enum_levels(disc, 400, 50)[:2])


@pytest.mark.slow
@pytest.mark.parametrize("D,N", list(_honesty_cases()))
def test_term_i_error_covers_refinement(D, N):
    config = SpectralEvalConfig()
    base = gzheight.term_i(D, N, config=config)
    doubled = gzheight.term_i(D, N, config=replace(config, truncation=2 * config.truncation))
    refined = gzheight.term_i(
        D, N, config=replace(config, s_grid=config.s_grid + (1.0625,))
    )
    for other in (doubled, refined):
        assert abs(other.value - base.value) <= base.abs_error + other.abs_error


@pytest.mark.slow
@pytest.mark.parametrize("D", [-3, -7, -23])
def test_alternative_grid_agrees(D):
    disc = make_discriminant(D)
    level = min(enum_levels(disc, 200, 100))
    default = gzheight.term_i(disc, level)
    alternative = gzheight.term_i(
        disc, level, config=SpectralEvalConfig(s_grid=(1.4, 1.2, 1.1))
    )
    assert alternative.value == pytest.approx(
        default.value, abs=default.abs_error + alternative.abs_error
    )
