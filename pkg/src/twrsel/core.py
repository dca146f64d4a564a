"""Shared numerics: Gaussian tail, Euler gamma, complex Gaussian sampling and
the random-stream contract used by every Monte-Carlo routine."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "TwrError",
    "ConfigurationError",
    "DomainError",
    "DegenerateChannelError",
    "NumericalError",
    "InsufficientStatisticsError",
    "RngStream",
    "as_generator",
    "q_function",
    "q_function_craig",
    "gamma_fn",
    "sample_cn",
    "inner",
]


class TwrError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(TwrError, ValueError):
    pass


class DomainError(TwrError, ValueError):
    pass


class DegenerateChannelError(TwrError, ArithmeticError):
    pass


class NumericalError(TwrError, ArithmeticError):
    pass


class InsufficientStatisticsError(TwrError, ValueError):
    pass


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Each call to :meth:`generator` returns a fresh Philox generator positioned
    at the start of the stream, so the same value always reproduces the same
    draws.  Distinct stream ids map to distinct ``SeedSequence`` spawn keys,
    which gives statistically independent, non-overlapping streams.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ConfigurationError("seed and stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, index: int) -> "RngStream":
        # 32 bits per level is plenty for (grid point, chunk) addressing
        return RngStream(self.seed, (self.stream_id << 32) | int(index))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x).

    Evaluated through ``erfc`` so the result keeps full relative accuracy far
    into the tail.  Accepts scalars or arrays.
    """
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def q_function_craig(x: float, nodes: int = 64) -> float:
    """Q(x) for x >= 0 from Craig's finite-range integral (reference route).

    The integrand rises from 0 to exp(-x^2/2) around theta ~ x, so the range
    is cut into panels of doubling width starting at x/8 and each panel gets
    its own Gauss-Legendre rule.
    """
    if x < 0:
        return 1.0 - q_function_craig(-x, nodes)
    top = 0.5 * math.pi
    edges = [0.0]
    e = min(x, top) / 8.0
    while 0.0 < e < top:
        edges.append(e)
        e *= 2.0
    edges.append(top)
    t, w = np.polynomial.legendre.leggauss(nodes)
    a = np.asarray(edges[:-1])[:, None]
    half = 0.5 * (np.asarray(edges[1:])[:, None] - a)
    theta = half * (t + 1.0) + a
    r = x / (math.sqrt(2.0) * np.sin(theta))   # ratio first: x*x may underflow
    return float(np.sum(half * w * np.exp(-r * r)) / math.pi)


def gamma_fn(t: float) -> float:
    """Euler integral of the second kind, defined here for t > 0 only."""
    if not t > 0:
        raise DomainError(f"gamma_fn requires t > 0, got {t!r}")
    return math.gamma(t)


def sample_cn(rng, n: int, variance: float = 1.0) -> np.ndarray:
    """Draw ``n`` i.i.d. circularly symmetric CN(0, variance) samples."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if not variance > 0:
        raise ConfigurationError("variance must be > 0")
    gen = as_generator(rng)
    z = gen.standard_normal((n, 2))
    return math.sqrt(variance / 2.0) * (z[:, 0] + 1j * z[:, 1])


def inner(a, b):
    """Inner product a^H b along the last axis."""
    return np.sum(np.conj(a) * b, axis=-1)
