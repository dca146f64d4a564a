"""Rayleigh block-fading channels, effective angle / MaxMin gain metrics and
the additive CSI-error model.

A :class:`ChannelSet` stores every relay's vectors zero-padded to the largest
antenna count, with optional leading batch axes: ``h.shape == (..., K, Lmax)``.
Padded entries are exactly zero, so norms and inner products are unaffected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigurationError, as_generator, inner

__all__ = [
    "ChannelSet",
    "RelayMetrics",
    "validate_layout",
    "layout_mask",
    "sample_channels",
    "corrupt_csi",
    "effective_angle",
    "relay_metrics",
]

TWO_PI = 2.0 * math.pi
DEGENERATE_EA_TOL = 1e-12


def validate_layout(layout) -> tuple[int, ...]:
    try:
        lay = tuple(int(x) for x in layout)
    except TypeError:
        raise ConfigurationError(f"layout must be a sequence of antenna counts, got {layout!r}") from None
    if not lay:
        raise ConfigurationError("layout must list at least one relay")
    if any(x < 1 for x in lay):
        raise ConfigurationError(f"every relay needs at least one antenna: {lay}")
    return lay


def layout_mask(layout) -> np.ndarray:
    lay = validate_layout(layout)
    return np.arange(max(lay))[None, :] < np.array(lay)[:, None]


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Source-to-relay channels for one or many trials.

    ``h_est``/``g_est`` hold the corrupted copies when CSI error is applied;
    :attr:`view` returns whichever pair the selection side should consume.
    """

    layout: tuple[int, ...]
    h: np.ndarray
    g: np.ndarray
    h_est: np.ndarray | None = None
    g_est: np.ndarray | None = None

    @property
    def K(self) -> int:
        return len(self.layout)

    @property
    def mask(self) -> np.ndarray:
        return layout_mask(self.layout)

    @property
    def corrupted(self) -> bool:
        return self.h_est is not None

    @property
    def view(self) -> tuple[np.ndarray, np.ndarray]:
        if self.corrupted:
            return self.h_est, self.g_est
        return self.h, self.g

    def relay(self, k: int, estimated: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Unpadded (h_k, g_k) of relay ``k`` (0-based)."""
        h, g = self.view if estimated else (self.h, self.g)
        n = self.layout[k]
        return h[..., k, :n], g[..., k, :n]

    def __getitem__(self, idx) -> "ChannelSet":
        """Index the leading batch axes."""
        pick = lambda a: None if a is None else a[idx]
        return ChannelSet(self.layout, self.h[idx], self.g[idx], pick(self.h_est), pick(self.g_est))


def _masked_cn(gen: np.random.Generator, shape, mask: np.ndarray, variance: float = 1.0) -> np.ndarray:
    z = gen.standard_normal(tuple(shape) + (2,))
    out = z.view(np.complex128)[..., 0]
    out *= math.sqrt(variance / 2.0)
    if not mask.all():
        out *= mask
    return out


def sample_channels(layout, rng, n: int | None = None) -> ChannelSet:
    """Fresh i.i.d. CN(0,1) channels; ``n`` adds a leading trial axis.

    Draw order is h then g, each as one (.., K, Lmax) block; padded entries
    consume draws too so the stream layout depends only on (K, Lmax, n).
    """
    lay = validate_layout(layout)
    gen = as_generator(rng)
    mask = layout_mask(lay)
    shape = mask.shape if n is None else (n,) + mask.shape
    h = _masked_cn(gen, shape, mask)
    g = _masked_cn(gen, shape, mask)
    return ChannelSet(lay, h, g)


def corrupt_csi(ch: ChannelSet, delta2: float, rng) -> ChannelSet:
    """Add CN(0, delta2) estimation error to every coefficient.

    ``delta2 == 0`` returns the channel set unchanged (no estimate copies),
    so callers see exactly the true CSI.
    """
    if delta2 < 0:
        raise ConfigurationError(f"delta2 must be >= 0, got {delta2}")
    if delta2 == 0:
        return replace(ch, h_est=None, g_est=None)
    gen = as_generator(rng)
    mask = ch.mask
    eh = _masked_cn(gen, ch.h.shape, mask, delta2)
    eg = _masked_cn(gen, ch.g.shape, mask, delta2)
    return replace(ch, h_est=ch.h + eh, g_est=ch.g + eg)


def effective_angle(h, g):
    """Angle of h^H g in [0, 2pi); 0 when the inner product is numerically zero."""
    h = np.asarray(h)
    g = np.asarray(g)
    if h.shape[-1] != g.shape[-1]:
        raise ConfigurationError("h and g must have equal length")
    ip = inner(h, g)
    scale = np.linalg.norm(h, axis=-1) * np.linalg.norm(g, axis=-1)
    ang = np.mod(np.angle(ip), TWO_PI)
    ang = np.where(np.abs(ip) < DEGENERATE_EA_TOL * scale, 0.0, ang)
    # mod can return exactly 2pi for tiny negative angles
    ang = np.where(ang >= TWO_PI, 0.0, ang)
    return float(ang) if np.ndim(ang) == 0 else ang


@dataclass(frozen=True, eq=False)
class RelayMetrics:
    """Per-relay selection metrics, shaped like the channel set minus the antenna axis.

    ``antenna_min`` keeps the antenna axis and holds ``-1`` on padded slots so
    it can never win an argmax.
    """

    phi: np.ndarray
    gamma: np.ndarray
    norm_h2: np.ndarray
    norm_g2: np.ndarray
    antenna_min: np.ndarray

    @property
    def gamma_tilde(self) -> np.ndarray:
        """Sum over antennas of min(|h_kl|^2, |g_kl|^2)."""
        return np.sum(np.maximum(self.antenna_min, 0.0), axis=-1)


def relay_metrics(ch: ChannelSet, use_estimates: bool = True, angles: bool = True) -> RelayMetrics:
    """Effective angle, Gamma_k = min(||h_k||^2, ||g_k||^2) and per-antenna minima.

    Uses the corrupted copies when present unless ``use_estimates`` is False.
    ``angles=False`` skips the effective angles (left as NaN).
    """
    h, g = ch.view if use_estimates else (ch.h, ch.g)
    ah = np.abs(h) ** 2
    ag = np.abs(g) ** 2
    nh = ah.sum(axis=-1)
    ng = ag.sum(axis=-1)
    amin = np.where(ch.mask, np.minimum(ah, ag), -1.0)
    return RelayMetrics(
        phi=effective_angle(h, g) if angles else np.full(nh.shape, np.nan),
        gamma=np.minimum(nh, ng),
        norm_h2=nh,
        norm_g2=ng,
        antenna_min=amin,
    )
