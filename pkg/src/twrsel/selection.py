"""Relay and antenna selection rules.

Indices are 0-based.  All rules accept batched metrics (leading trial axes)
and break ties toward the lowest index, which is what ``np.argmax`` does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError
from .phy import ChannelSet, RelayMetrics, relay_metrics

__all__ = ["SCHEMES", "SelectionDecision", "maxmin_rs", "maxmin_as", "select"]

SCHEMES = ("pr-maxmin-rs", "maxmin-rs-noPR", "maxmin-as")


@dataclass(frozen=True, eq=False)
class SelectionDecision:
    scheme: str
    relay: np.ndarray | int
    metric: np.ndarray | float
    antenna: np.ndarray | int | None = None
    csi_view: str = "true"


def _scalarise(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def maxmin_rs(metrics: RelayMetrics, scheme: str = "pr-maxmin-rs") -> SelectionDecision:
    """k_hat = argmax_k Gamma_k."""
    gamma = np.asarray(metrics.gamma)
    if gamma.shape[-1] < 1:
        raise ConfigurationError("no relays to select from")
    k = np.argmax(gamma, axis=-1)
    val = np.take_along_axis(gamma, k[..., None], axis=-1)[..., 0]
    return SelectionDecision(scheme, _scalarise(k), _scalarise(val))


def maxmin_as(ch: ChannelSet | RelayMetrics, scheme: str = "maxmin-as") -> SelectionDecision:
    """Single antenna maximising min(|h_kl|^2, |g_kl|^2) over every relay antenna."""
    metrics = ch if isinstance(ch, RelayMetrics) else relay_metrics(ch)
    amin = np.asarray(metrics.antenna_min)
    K, Lmax = amin.shape[-2:]
    flat = amin.reshape(amin.shape[:-2] + (K * Lmax,))
    j = np.argmax(flat, axis=-1)
    val = np.take_along_axis(flat, j[..., None], axis=-1)[..., 0]
    k, l = np.divmod(j, Lmax)
    return SelectionDecision(scheme, _scalarise(k), _scalarise(val), antenna=_scalarise(l))


def select(cfg, ch: ChannelSet) -> SelectionDecision:
    """Apply ``cfg.scheme`` to the selection-side CSI view of ``ch``.

    ``cfg`` only needs a ``scheme`` attribute.
    """
    scheme = getattr(cfg, "scheme", cfg)
    view = "estimated" if ch.corrupted else "true"
    metrics = relay_metrics(ch, use_estimates=True, angles=False)
    if scheme in ("pr-maxmin-rs", "maxmin-rs-noPR"):
        dec = maxmin_rs(metrics, scheme)
    elif scheme == "maxmin-as":
        dec = maxmin_as(metrics, scheme)
    else:
        raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return SelectionDecision(dec.scheme, dec.relay, dec.metric, dec.antenna, view)
