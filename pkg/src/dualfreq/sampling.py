"""Seeded randomness: stream derivation, source-biased time draws, chunk noise.

Every stochastic stage of the pipeline owns a Generator derived from
(root seed, stream key...) so reruns with the same config are bit-identical.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, UnsupportedParameterError


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def spawn_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for (seed, keys); pure function of its arguments."""
    entropy = [int(seed)] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def beta_time_from_uniform(u, alpha: float):
    """Map uniform draws to flow times t = 1 - s with s ~ Beta(alpha, 1).

    Inverse CDF: s = u**(1/alpha). u = 1 maps to t = 0 (the noise end).
    """
    if alpha <= 0.0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    s = np.asarray(u, dtype=np.float64) ** (1.0 / alpha)
    return 1.0 - s


def sample_beta_time(rng: np.random.Generator, alpha: float, beta: float = 1.0, size=None):
    """Draw flow times biased toward the source (t near 0 for large alpha)."""
    if alpha <= 0.0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    if beta != 1.0:
        raise UnsupportedParameterError(
            f"only beta = 1 has a closed-form inverse CDF here, got beta = {beta}")
    u = rng.random(size)
    t = beta_time_from_uniform(u, alpha)
    return float(t) if size is None else t


def sample_gaussian_chunk(rng: np.random.Generator, horizon: int, action_dim: int) -> np.ndarray:
    """Standard normal source noise for one action chunk, shape (horizon, action_dim)."""
    if horizon <= 0 or action_dim <= 0:
        raise ConfigurationError(
            f"horizon and action_dim must be positive, got {horizon}, {action_dim}")
    return rng.standard_normal((int(horizon), int(action_dim)))
