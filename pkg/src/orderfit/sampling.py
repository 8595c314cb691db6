"""Seedable inverse-CDF samplers for the log-logistic, Weibull and logistic laws.

All randomness flows from :func:`make_rng`, which builds a PCG64 generator
from a ``SeedSequence``.  Extra integer keys select independent substreams,
so a replication can be regenerated from ``(seed, *key)`` alone regardless
of the order in which replications are evaluated.
"""
from __future__ import annotations

import numpy as np

from .params import DistributionKind, DistributionParams, LocScaleParams

_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for substream ``key`` of the 64-bit ``seed``."""
    seed = int(seed)
    if seed < 0 or seed > _SEED_MASK:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on the open interval (0, 1).

    ``Generator.random`` samples [0, 1); exact zeros are redrawn so that the
    logit and log-log transforms stay finite.
    """
    u = rng.random(size)
    bad = u == 0.0
    while bad.any():
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    return u


def _count(n):
    n = int(n)
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    return n


# Quantile functions. Kept public so the transforms can be checked directly.

def loglogistic_quantile(u, params: DistributionParams):
    u = np.asarray(u, dtype=float)
    return params.alpha * (u / (1.0 - u)) ** (1.0 / params.beta)


def weibull_quantile(u, params: DistributionParams):
    u = np.asarray(u, dtype=float)
    return params.alpha * (-np.log1p(-u)) ** (1.0 / params.beta)


def logistic_quantile(u, params: LocScaleParams):
    u = np.asarray(u, dtype=float)
    return params.mu + params.sigma * np.log(u / (1.0 - u))


def sample_loglogistic(params: DistributionParams, n: int, seed: int, *key: int) -> np.ndarray:
    return loglogistic_quantile(open_uniform(make_rng(seed, *key), _count(n)), params)


def sample_weibull(params: DistributionParams, n: int, seed: int, *key: int) -> np.ndarray:
    return weibull_quantile(open_uniform(make_rng(seed, *key), _count(n)), params)


def sample_logistic(params: LocScaleParams, n: int, seed: int, *key: int) -> np.ndarray:
    return logistic_quantile(open_uniform(make_rng(seed, *key), _count(n)), params)


def quantile(kind, u, params):
    """Dispatch to the quantile function of ``kind``."""
    kind = DistributionKind.parse(kind)
    if kind is DistributionKind.LOGLOGISTIC:
        return loglogistic_quantile(u, params)
    if kind is DistributionKind.WEIBULL:
        return weibull_quantile(u, params)
    return logistic_quantile(u, params)


def sample(kind, params, n: int, seed: int, *key: int) -> np.ndarray:
    return quantile(kind, open_uniform(make_rng(seed, *key), _count(n)), params)
