from dataclasses import dataclass
import json
import logging
import os
import pathlib
import threading

import numpy as np

logger = logging.getLogger(__name__)

CACHE_ENV_VAR = "HEEGNER_HEIGHTS_CACHE"
RIGOROUS = "rigorous"
HEURISTIC = "heuristic"


class HeegnerError(Exception):
    pass


class InvalidInput(HeegnerError, ValueError):
    "A precondition on the arithmetic input was violated"


class NumericalFailure(HeegnerError, ArithmeticError):
    "A tolerance, quadrature or extrapolation target was not reached"


class InexactDivision(NumericalFailure):
    pass


class HeightWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RealWithError:
    value: float
    abs_error: float = 0.0
    flag: str = RIGOROUS

    def __post_init__(self):
        if not self.abs_error >= 0:
            raise ValueError("abs_error must be >= 0, got {}".format(self.abs_error))
        if self.flag not in (RIGOROUS, HEURISTIC):
            raise ValueError("Unknown error flag {!r}".format(self.flag))

    def __add__(self, other):
        if not isinstance(other, RealWithError):
            other = RealWithError(float(other))
        return RealWithError(
            self.value + other.value,
            self.abs_error + other.abs_error,
            combine_flags(self.flag, other.flag),
        )

    __radd__ = __add__

    def __neg__(self):
        return RealWithError(-self.value, self.abs_error, self.flag)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor):
        return RealWithError(
            factor * self.value, abs(factor) * self.abs_error, self.flag
        )

    @property
    def rigorous(self):
        return self.flag == RIGOROUS

    def to_dict(self):
        return {"value": self.value, "abs_error": self.abs_error, "flag": self.flag}


def combine_flags(*flags):
    return HEURISTIC if HEURISTIC in flags else RIGOROUS


def total(values):
    result = RealWithError(0.0)
    for value in values:
        result = result + value
    return result


def pairwise_sum(values, partitions=8):
    """Sum with a fixed reduction tree.

    The array is cut into ``partitions`` contiguous blocks, each summed with
    numpy's pairwise summation, and the block totals are reduced the same way.
    The result depends on ``partitions`` but never on how many threads ran.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    partitions = max(1, min(int(partitions), values.size))
    blocks = np.array_split(values, partitions)
    return float(np.sum(np.array([np.sum(block) for block in blocks])))


def cache_path_from_env():
    path = os.environ.get(CACHE_ENV_VAR)
    return pathlib.Path(path) if path else None


def _key_string(key):
    return json.dumps(list(key), separators=(",", ":"))


class ResultCache:
    """Spectral series results, one JSON object per line.

    Keys are tuples of JSON-serialisable scalars. Floats are written with
    ``repr`` precision so a replayed hit is bit-identical to the original.
    """

    def __init__(self, path=None):
        self.path = pathlib.Path(path) if path is not None else None
        self.hits = 0
        self.misses = 0
        self._entries = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        with self.path.open(encoding="utf8") as fp:
            for line_number, line in enumerate(fp, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    self._entries[_key_string(record["key"])] = record["value"]
                except (ValueError, KeyError):
                    logger.warning(
                        "Skipping unreadable cache line %s of %s", line_number, self.path
                    )

    def get(self, key):
        with self._lock:
            value = self._entries.get(_key_string(key))
            if value is None:
                self.misses += 1
                logger.debug("cache miss %s", key)
            else:
                self.hits += 1
                logger.debug("cache hit %s", key)
            return value

    def put(self, key, value):
        key_string = _key_string(key)
        with self._lock:
            if key_string in self._entries:
                return
            self._entries[key_string] = value
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf8") as fp:
                    fp.write(json.dumps({"key": list(key), "value": value}) + "\n")

    def clear(self):
        with self._lock:
            self._entries.clear()
            if self.path is not None and self.path.exists():
                self.path.unlink()

    def __len__(self):
        return len(self._entries)

    def stats(self):
        return {
            "path": str(self.path) if self.path is not None else None,
            "entries": len(self._entries),
            "hits": self.hits,
            "misses": self.misses,
        }


class NullCache(ResultCache):
    "Stands in when caching is disabled: never stores, never hits"

    def __init__(self):
        super().__init__(None)

    def get(self, key):
        self.misses += 1
        return None

    def put(self, key, value):
        pass
