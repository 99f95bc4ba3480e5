import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar, Union

import numpy as np

from .errors import ParameterDomainError

SOFTWARE_VERSION = "0.3.0"

T = TypeVar("T")
R = TypeVar("R")

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    """
    Return a PCG64 generator for `seed`.

    Generators pass through untouched so callers can thread one stream through
    several draws; integers and SeedSequences build a fresh stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed: Union[int, np.random.SeedSequence, None], n: int) -> List[np.random.SeedSequence]:
    """Split `seed` into `n` independent child seed sequences."""
    if isinstance(seed, np.random.SeedSequence):
        return seed.spawn(n)
    return np.random.SeedSequence(seed).spawn(n)


def spawn_rngs(seed: Union[int, np.random.SeedSequence, None], n: int) -> List[np.random.Generator]:
    return [make_rng(s) for s in spawn_seeds(seed, n)]


def resolve_threads(threads: Optional[int] = None) -> int:
    """
    Thread count from the argument, else SSRT_THREADS, else 1.
    """
    if threads is None:
        env_value = os.getenv("SSRT_THREADS")
        if env_value is None or env_value.strip() == "":
            return 1
        try:
            threads = int(env_value)
        except ValueError:
            raise ParameterDomainError(f"SSRT_THREADS must be an integer, got {env_value!r}")
    if threads < 1:
        raise ParameterDomainError(f"threads must be >= 1, got {threads}")
    return threads


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Apply `fn` to every item, preserving order; sequential when threads == 1."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def check_probability(p: float, name: str = "p", open_interval: bool = True) -> float:
    if not np.isfinite(p):
        raise ParameterDomainError(f"{name} must be finite, got {p}")
    if open_interval and not 0.0 < p < 1.0:
        raise ParameterDomainError(f"{name} must lie in (0, 1), got {p}")
    if not open_interval and not 0.0 <= p <= 1.0:
        raise ParameterDomainError(f"{name} must lie in [0, 1], got {p}")
    return float(p)


def as_sample(values: Sequence[float], name: str = "sample") -> np.ndarray:
    """Validate a non-empty, finite 1-d sample and return it as a float array."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ParameterDomainError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ParameterDomainError(f"{name} must contain only finite values")
    return arr
