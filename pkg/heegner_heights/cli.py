"""
heegner-heights command line interface.

    heegner-heights levels -D -3 --max 50
    heegner-heights height -D -3 -N 7
    heegner-heights scan -D -3 --min 500 --max 5000 --max-rows 25 --format csv
"""
import contextlib
import csv
import io
from fractions import Fraction
import json
import logging
import os
import time

import click
import sqlite_utils

from .asymptotics import (
    SURROGATE_NOTE,
    field_dependence_exponent,
    iter_scan,
    lang_silverman_bound,
    summarize,
    watkins_degree_bound,
    weil_scaling,
)
from .gzheight import (
    DEFAULT_S_GRID,
    DEFAULT_TRUNCATION,
    SpectralEvalConfig,
    height,
    term_iii_constant,
)
from .heegner import enum_levels, genus_X0, kappa, make_level, solve_beta
from .lfunc import L_log_deriv_at_1, dirichlet_L, euler_gamma, zeta_log_deriv_at_2
from .quadfield import as_discriminant, reduced_forms
from . import __version__
from .utils import (
    InvalidInput,
    NullCache,
    NumericalFailure,
    ResultCache,
    cache_path_from_env,
)

SCHEMA_VERSION = "1"
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL_FAILURE = 3


class CliError(click.ClickException):
    def __init__(self, message, exit_code=1):
        super().__init__(message)
        self.exit_code = exit_code


@contextlib.contextmanager
def handle_errors():
    try:
        yield
    except InvalidInput as e:
        raise CliError(str(e), EXIT_INVALID_INPUT)
    except NumericalFailure as e:
        raise CliError(str(e), EXIT_NUMERICAL_FAILURE)


def _parse_s_grid(ctx, param, value):
    if value is None:
        return None
    try:
        return tuple(float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected comma-separated reals, e.g. 1.5,1.25,1.125")


def _parse_int_list(ctx, param, value):
    try:
        return [int(v) for v in value.split(",")]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers, e.g. 1,2,6,24")


def _apply(fn, options):
    for option in reversed(options):
        fn = option(fn)
    return fn


def output_options(fn):
    return _apply(
        fn,
        [
            click.option(
                "--format",
                "fmt",
                type=click.Choice(["json", "csv"]),
                default="json",
                show_default=True,
                help="Output format",
            ),
            click.option(
                "--no-meta", is_flag=True, help="Omit timings and cache statistics"
            ),
        ],
    )


def spectral_options(fn):
    return _apply(
        fn,
        [
            click.option(
                "--s-grid",
                callback=_parse_s_grid,
                help="Comma-separated s values above 1, decreasing [default: {}]".format(
                    ",".join(str(s) for s in DEFAULT_S_GRID)
                ),
            ),
            click.option(
                "--truncation",
                type=int,
                default=DEFAULT_TRUNCATION,
                show_default=True,
                help="Number of terms M of the spectral series",
            ),
            click.option("--extrap-degree", type=int, default=2, show_default=True),
            click.option(
                "--tail-model",
                type=click.Choice(["residue", "empirical", "none"]),
                default="residue",
                show_default=True,
            ),
            click.option(
                "--method",
                type=click.Choice(["extrapolate", "direct"]),
                default="extrapolate",
                show_default=True,
            ),
            click.option("--fast", is_flag=True, help="Halve the truncation"),
            click.option(
                "--threads", type=int, help="Worker threads [default: all cores]"
            ),
            click.option(
                "--cache",
                "cache_path",
                type=click.Path(dir_okay=False),
                help="JSON lines result cache, defaults to $HEEGNER_HEIGHTS_CACHE",
            ),
            click.option(
                "--no-cache", is_flag=True, help="Neither read nor write the cache"
            ),
        ],
    )


def _open_cache(cache_path, no_cache):
    if no_cache:
        return NullCache()
    return ResultCache(cache_path or cache_path_from_env())


def _spectral_config(s_grid, truncation, extrap_degree, tail_model, method, fast, threads):
    config = SpectralEvalConfig(
        s_grid=s_grid or DEFAULT_S_GRID,
        truncation=truncation,
        extrapolation_degree=extrap_degree,
        tail_model=tail_model,
        method=method,
        threads=threads or os.cpu_count(),
    )
    return config.fast() if fast else config


def _flatten(row, prefix=""):
    flat = {}
    for key, value in row.items():
        if isinstance(value, dict):
            flat.update(_flatten(value, "{}{}_".format(prefix, key)))
        elif isinstance(value, (list, tuple)):
            flat[prefix + key] = " ".join(str(item) for item in value)
        else:
            flat[prefix + key] = value
    return flat


class Emitter:
    "Writes one OutputRecord: JSON at the end, or CSV row by row"

    def __init__(self, command, params, fmt, no_meta):
        self.command = command
        self.params = params
        self.fmt = fmt
        self.no_meta = no_meta
        self.rows = []
        self.metadata = {}
        self.started = time.perf_counter()
        self._header_written = False

    def row(self, row):
        self.rows.append(row)
        if self.fmt == "csv":
            flat = _flatten(row)
            buffer = io.StringIO()
            writer = csv.DictWriter(buffer, fieldnames=list(flat), lineterminator="\n")
            if not self._header_written:
                writer.writeheader()
                self._header_written = True
            writer.writerow(flat)
            click.echo(buffer.getvalue(), nl=False)

    def finish(self, cache=None, **metadata):
        if self.fmt == "csv":
            return
        self.metadata.update(metadata)
        if not self.no_meta:
            self.metadata["elapsed_seconds"] = time.perf_counter() - self.started
            if cache is not None:
                self.metadata["cache"] = cache.stats()
        record = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "params": self.params,
            "rows": self.rows,
            "metadata": self.metadata,
        }
        click.echo(json.dumps(record, indent=2))


@click.group()
@click.version_option(version=__version__)
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug")
def cli(verbose):
    "Heights of Heegner points on J_0(N) from the Gross-Zagier decomposition"
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("-D", "--discriminant", type=int, required=True)
@click.option("--min", "N_min", type=int, default=5, show_default=True)
@click.option("--max", "N_max", type=int, required=True)
@output_options
def levels(discriminant, N_min, N_max, fmt, no_meta):
    "Levels N in N_k with their square roots beta of D mod 4N"
    emitter = Emitter("levels", {"D": discriminant, "min": N_min, "max": N_max}, fmt, no_meta)
    with handle_errors():
        disc = as_discriminant(discriminant)
        for N in enum_levels(disc, N_max, N_min):
            emitter.row({"N": N, "betas": solve_beta(disc, N), "genus": genus_X0(N)})
    emitter.finish()


@cli.command()
@click.option("-D", "--discriminant", type=int, required=True)
@output_options
def classgroup(discriminant, fmt, no_meta):
    "Reduced forms of discriminant D"
    emitter = Emitter("classgroup", {"D": discriminant}, fmt, no_meta)
    with handle_errors():
        data = reduced_forms(discriminant)
        for index, form in enumerate(data.forms):
            emitter.row(
                {
                    "a": form.a,
                    "b": form.b,
                    "c": form.c,
                    "principal": index == data.principal_index,
                    "h": data.disc.h,
                    "u": data.disc.u,
                }
            )
    emitter.finish()


@cli.command(name="height")
@click.option("-D", "--discriminant", type=int, required=True)
@click.option("-N", "--level", "N", type=int, required=True)
@click.option("-m", "--multiplier", "m", type=int, default=1, show_default=True)
@spectral_options
@output_options
def height_command(discriminant, N, m, fmt, no_meta, cache_path, no_cache, **spectral):
    "The four-term breakdown of the height of c_D on J_0(N)"
    with handle_errors():
        config = _spectral_config(**spectral)
        cache = _open_cache(cache_path, no_cache)
        emitter = Emitter(
            "height", {"D": discriminant, "N": N, "m": m, **config.to_dict()}, fmt, no_meta
        )
        breakdown = height(discriminant, N, config, m=m, cache=cache)
        emitter.row(breakdown.to_dict())
    emitter.finish(cache=cache)


@cli.command(name="scan")
@click.option("-D", "--discriminant", type=int, required=True)
@click.option("--min", "N_min", type=int, default=5, show_default=True)
@click.option("--max", "N_max", type=int, required=True)
@click.option("--max-rows", type=int, help="Sample at most this many levels evenly")
@click.option(
    "--db",
    type=click.Path(dir_okay=False),
    help="Also upsert rows into the 'scan' table of this SQLite database",
)
@spectral_options
@output_options
def scan_command(
    discriminant, N_min, N_max, max_rows, db, fmt, no_meta, cache_path, no_cache, **spectral
):
    """
    Heights over every level of N_k in a range, with Lang-Silverman columns.

    With --format csv each row is printed as soon as its level finishes; JSON
    is a single document printed once the scan and its summary are done.
    """
    with handle_errors():
        config = _spectral_config(**spectral)
        cache = _open_cache(cache_path, no_cache)
        params = {"D": discriminant, "min": N_min, "max": N_max, "max_rows": max_rows}
        emitter = Emitter("scan", {**params, **config.to_dict()}, fmt, no_meta)
        disc = as_discriminant(discriminant)
        rows = []
        for row in iter_scan(
            disc, N_min, N_max, config, cache, threads=config.threads, max_rows=max_rows
        ):
            rows.append(row)
            emitter.row(row.to_dict())
        if db:
            sqlite_utils.Database(db)["scan"].upsert_all(
                [row.to_dict() for row in rows], pk=("D", "N"), alter=True
            )
        metadata = {"note": SURROGATE_NOTE}
        if sum(row.error is None for row in rows) >= 2:
            metadata["summary"] = summarize(rows, disc)._asdict()
    emitter.finish(cache=cache, **metadata)


@cli.command()
@click.option("-N", "--level", "N", type=int, required=True)
@output_options
def genus(N, fmt, no_meta):
    "Genus of X_0(N) and kappa_N for squarefree N"
    emitter = Emitter("genus", {"N": N}, fmt, no_meta)
    with handle_errors():
        emitter.row({"N": N, "genus": genus_X0(N), "kappa": str(kappa(N))})
    emitter.finish()


@cli.command()
@click.option("-D", "--discriminant", type=int, required=True)
@click.option("-N", "--level", "N", type=int, required=True)
@click.option("--eps", type=float, default=0.0, show_default=True)
@output_options
def bound(discriminant, N, eps, fmt, no_meta):
    "Lang-Silverman constant bound 3h/g and related formulas"
    emitter = Emitter("bound", {"D": discriminant, "N": N, "eps": eps}, fmt, no_meta)
    with handle_errors():
        level = make_level(discriminant, N)
        result = lang_silverman_bound(level.disc, level)
        emitter.row(
            {
                "D": level.disc.D,
                "N": N,
                "genus": level.genus,
                "bound": result.bound,
                "comparison": result.comparison,
                "watkins_degree_bound": watkins_degree_bound(N, eps),
                "field_dependence": field_dependence_exponent(2 * level.disc.h, level.genus),
            }
        )
    emitter.finish()


@cli.command()
@click.option("--base-height", type=str, required=True, help="e.g. 1 or 3/2")
@click.option("--g", "g_base", type=int, required=True)
@click.option("--hst", type=str, required=True)
@click.option("--degrees", callback=_parse_int_list, required=True, help="e.g. 1,2,6,24")
@output_options
def scaling(base_height, g_base, hst, degrees, fmt, no_meta):
    "Height, dimension and stable height along a Weil restriction sequence"
    params = {"base_height": base_height, "g": g_base, "hst": hst, "degrees": degrees}
    emitter = Emitter("scaling", params, fmt, no_meta)
    with handle_errors():
        try:
            base, hst_base = Fraction(base_height), Fraction(hst)
        except (ValueError, ZeroDivisionError) as e:
            raise InvalidInput(str(e))
        for row in weil_scaling(base, g_base, hst_base, degrees):
            emitter.row(row.to_dict())
    emitter.finish()


@cli.command()
@click.option("-D", "--discriminant", type=int, required=True)
@output_options
def constants(discriminant, fmt, no_meta):
    "Analytic constants entering the height formula"
    emitter = Emitter("constants", {"D": discriminant}, fmt, no_meta)
    with handle_errors():
        disc = as_discriminant(discriminant)
        values = [
            ("L(1)", dirichlet_L(disc, 1.0)),
            ("L'/L(1)", L_log_deriv_at_1(disc)),
            ("zeta'/zeta(2)", zeta_log_deriv_at_2()),
            ("gamma", euler_gamma()),
            ("C_D", term_iii_constant(disc)),
        ]
        for name, value in values:
            emitter.row({"name": name, **value.to_dict()})
    emitter.finish()


@cli.group(name="cache")
def cache_group():
    "Inspect or clear the spectral series result cache"


@cache_group.command(name="info")
@click.option("--cache", "cache_path", type=click.Path(dir_okay=False))
def cache_info(cache_path):
    path = cache_path or cache_path_from_env()
    if path is None:
        raise CliError("No cache path: pass --cache or set $HEEGNER_HEIGHTS_CACHE", 2)
    stats = ResultCache(path).stats()
    click.echo(json.dumps({"path": stats["path"], "entries": stats["entries"]}, indent=2))


@cache_group.command(name="clear")
@click.option("--cache", "cache_path", type=click.Path(dir_okay=False))
def cache_clear(cache_path):
    path = cache_path or cache_path_from_env()
    if path is None:
        raise CliError("No cache path: pass --cache or set $HEEGNER_HEIGHTS_CACHE", 2)
    store = ResultCache(path)
    entries = len(store)
    store.clear()
    click.echo("Removed {} entries from {}".format(entries, path), err=True)
