"""Expected Improvement and next-point proposal over discrete spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterable, Mapping

import numpy as np
from scipy.special import ndtr

from . import search_space as ss
from .gp import GPModel, Posterior, posterior_many

DEFAULT_POOL_SIZE = 2048
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# scores this close to the best are ties: equal EI can differ in the last bits
TIE_RTOL = 1e-12


class SpaceExhausted(RuntimeError):
    """Every configuration of the space has already been evaluated."""

    def __init__(self, msg: str = "search space exhausted"):
        super().__init__(msg)


@dataclass(frozen=True)
class Incumbent:
    config: dict
    value: float


def expected_improvement(p: Posterior, f_plus: float) -> float:
    """E[(F - f_plus)^+] for F ~ N(mean, variance), maximization form."""
    if p.variance < 0:
        raise ValueError("negative variance")
    sigma = math.sqrt(p.variance)
    delta = p.mean - f_plus
    if sigma == 0.0:
        return max(delta, 0.0)
    z = delta / sigma
    ei = delta * float(ndtr(z)) + sigma * _INV_SQRT_2PI * math.exp(-0.5 * z * z)
    return max(ei, 0.0)


def expected_improvement_many(mean, variance, f_plus: float) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    delta = mean - f_plus
    ei = np.maximum(delta, 0.0)
    pos = sigma > 0
    z = delta[pos] / sigma[pos]
    ei[pos] = delta[pos] * ndtr(z) + sigma[pos] * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return np.maximum(ei, 0.0)


def ei_monte_carlo(p: Posterior, f_plus: float, n_samples: int,
                   rng: np.random.Generator) -> tuple[float, float]:
    """Sample-mean estimate of EI and its standard error."""
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    sigma = math.sqrt(max(p.variance, 0.0))
    if sigma == 0.0:
        return max(p.mean - f_plus, 0.0), 0.0
    draws = p.mean + sigma * rng.standard_normal(n_samples)
    gains = np.maximum(draws - f_plus, 0.0)
    return float(gains.mean()), float(gains.std(ddof=1) / math.sqrt(n_samples))


@lru_cache(maxsize=16)
def _enumerated(space: ss.SearchSpace) -> tuple[list[dict], list[tuple], np.ndarray]:
    configs = list(ss.iter_configurations(space))
    keys = [ss.config_key(space, c) for c in configs]
    return configs, keys, ss.encode_many(space, configs)


def _pool(space: ss.SearchSpace, rng: np.random.Generator, pool_size: int,
          evaluated: set) -> list[dict]:
    seen = set(evaluated)
    pool = []
    for _ in range(pool_size):
        c = ss.sample_uniform(space, rng)
        key = ss.config_key(space, c)
        if key not in seen:
            seen.add(key)
            pool.append(c)
    return pool


def _fallback_sample(space: ss.SearchSpace, rng: np.random.Generator, evaluated: set,
                     attempts: int = 100) -> dict:
    for _ in range(attempts):
        c = ss.sample_uniform(space, rng)
        if ss.config_key(space, c) not in evaluated:
            return c
    raise SpaceExhausted()


def _as_keys(space: ss.SearchSpace, evaluated: Iterable[Any]) -> set:
    keys = set()
    for e in evaluated:
        keys.add(ss.config_key(space, e) if isinstance(e, Mapping) else tuple(e))
    return keys


def first_argmax(scores: np.ndarray) -> int:
    """Earliest index whose score is within ``TIE_RTOL`` of the maximum."""
    best = float(np.max(scores))
    return int(np.flatnonzero(scores >= best - TIE_RTOL * abs(best))[0])


def propose_next(model: GPModel, space: ss.SearchSpace, incumbent: Incumbent,
                 evaluated: Iterable[Any], rng: np.random.Generator,
                 pool_size: int = DEFAULT_POOL_SIZE) -> dict:
    """Return the unevaluated configuration with the highest EI.

    Spaces no larger than ``pool_size`` are scored exhaustively; otherwise
    ``pool_size`` uniform candidates are drawn. Ties go to the earliest
    candidate. ``evaluated`` holds configs or :func:`config_key` tuples.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    done = _as_keys(space, evaluated)
    card = ss.cardinality(space)
    if card != "unbounded" and card <= pool_size:
        configs, keys, enc = _enumerated(space)
        mask = np.array([k not in done for k in keys], dtype=bool)
        if not mask.any():
            raise SpaceExhausted()
        idx = np.flatnonzero(mask)
        mean, var = posterior_many(model, enc[idx])
        ei = expected_improvement_many(mean, var, incumbent.value)
        return dict(configs[idx[first_argmax(ei)]])

    if card != "unbounded" and len(done) >= card:
        raise SpaceExhausted()
    pool = _pool(space, rng, pool_size, done)
    if not pool:
        return _fallback_sample(space, rng, done)
    mean, var = posterior_many(model, ss.encode_many(space, pool))
    ei = expected_improvement_many(mean, var, incumbent.value)
    return pool[first_argmax(ei)]
