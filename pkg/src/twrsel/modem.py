"""Constellations, symbol-level XOR network coding and the transition
difference set that drives both relay detection and the SER analysis.

Symbols are addressed by their *label*: the integer whose binary expansion is
the bit vector carried by the symbol.  ``Constellation.points[label]`` is the
complex point, so XOR network coding is plain integer XOR on labels.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import ConfigurationError, DomainError

__all__ = [
    "Constellation",
    "DifferenceSet",
    "make_constellation",
    "parse_modulation",
    "xor_combine",
    "difference_set",
    "rho_min",
    "optimize_upsilon",
]

TWO_PI = 2.0 * math.pi
_NONZERO_TOL = 1e-12


def _gray(i):
    return i ^ (i >> 1)


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-average-energy alphabet indexed by bit label."""

    kind: str
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        M = pts.size
        if M < 2 or M & (M - 1):
            raise ConfigurationError(f"constellation size must be a power of two >= 2, got {M}")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > 1e-12:
            raise ConfigurationError("constellation is not normalised to unit average energy")
        if np.unique(np.round(pts, 12)).size != M:
            raise ConfigurationError("constellation points are not distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def M(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return self.M.bit_length() - 1

    @property
    def family(self) -> str:
        """'BPSK', 'PSK' or 'PAM'."""
        head = self.kind.split("(")[0]
        return {"BPSK": "BPSK", "QPSK": "PSK", "MPSK": "PSK", "MPAM": "PAM"}[head]

    def bits(self, label: int) -> tuple[int, ...]:
        m = self.bits_per_symbol
        return tuple((label >> (m - 1 - b)) & 1 for b in range(m))

    def label_of(self, symbol: complex) -> int:
        d = np.abs(self.points - complex(symbol))
        k = int(np.argmin(d))
        if d[k] > 1e-9:
            raise DomainError(f"{symbol!r} is not a point of {self.kind}")
        return k

    @cached_property
    def difference_set(self) -> "DifferenceSet":
        return difference_set(self)

    def __repr__(self):
        return f"Constellation({self.kind})"


def make_constellation(kind: str, M: int | None = None) -> Constellation:
    """Build a Gray-labelled constellation.

    ``kind`` is one of ``BPSK``, ``QPSK``, ``MPSK`` or ``MPAM``; the last two
    need ``M`` (either passed separately or written as ``MPAM(4)``).
    BPSK maps label 0 to +1 so that XOR with label 0 is the identity on the
    symbol sign.
    """
    kind, M = parse_modulation(kind, M)
    if kind == "BPSK":
        pts = np.array([1.0, -1.0], dtype=complex)
        return Constellation("BPSK", pts)
    if kind == "QPSK":
        idx = np.arange(4)
        pts = np.empty(4, dtype=complex)
        pts[_gray(idx)] = np.exp(1j * (math.pi / 4 + idx * math.pi / 2))
        return Constellation("QPSK", pts)
    if kind == "MPSK":
        idx = np.arange(M)
        pts = np.empty(M, dtype=complex)
        pts[_gray(idx)] = np.exp(1j * TWO_PI * idx / M)
        return Constellation(f"MPSK({M})", pts)
    # MPAM: amplitude levels -(M-1), ..., M-1 in increasing order
    idx = np.arange(M)
    levels = (2 * idx - (M - 1)) * math.sqrt(3.0 / (M * M - 1))
    pts = np.empty(M, dtype=complex)
    pts[_gray(idx)] = levels
    return Constellation(f"MPAM({M})", pts)


_MOD_RE = re.compile(r"^\s*(?:(\d+)\s*-?\s*)?(BPSK|QPSK|MPSK|MPAM|PSK|PAM)\s*(?:\(\s*(\d+)\s*\)|(\d+))?\s*$", re.I)


def parse_modulation(kind: str, M: int | None = None) -> tuple[str, int]:
    """Normalise spellings such as ``4PAM``, ``MPAM(4)``, ``pam4`` or ``8psk``."""
    m = _MOD_RE.match(str(kind))
    if not m:
        raise ConfigurationError(f"unsupported modulation {kind!r}")
    prefix, name, paren, suffix = m.groups()
    name = name.upper()
    given = [int(v) for v in (prefix, paren, suffix, M) if v is not None]
    if len(set(given)) > 1:
        raise ConfigurationError(f"conflicting constellation sizes in {kind!r} / M={M}")
    size = given[0] if given else None
    if name == "BPSK":
        if size not in (None, 2):
            raise ConfigurationError("BPSK has M = 2")
        return "BPSK", 2
    if name == "QPSK":
        if size not in (None, 4):
            raise ConfigurationError("QPSK has M = 4")
        return "QPSK", 4
    name = "MPSK" if name in ("PSK", "MPSK") else "MPAM"
    if size is None:
        raise ConfigurationError(f"{name} needs a constellation size M")
    if size < 2 or size & (size - 1):
        raise ConfigurationError(f"M must be a power of two >= 2, got {size}")
    return name, size


def xor_combine(s1: complex, s2: complex, c: Constellation) -> complex:
    """Network-coded symbol: the point whose label is label(s1) XOR label(s2)."""
    return complex(c.points[c.label_of(s1) ^ c.label_of(s2)])


@dataclass(frozen=True, eq=False)
class DifferenceSet:
    """Multiset of MA-stage transitions (d1, d2) that change the NCS.

    One entry per ordered quadruple (a1, a2, b1, b2) of labels with
    ``a1 ^ a2 != b1 ^ b2``; ``d_i = points[a_i] - points[b_i]``.
    """

    d1: np.ndarray = field(repr=False)
    d2: np.ndarray = field(repr=False)
    quads: np.ndarray = field(repr=False)
    d_min: float

    def __len__(self):
        return self.d1.size

    @cached_property
    def both_nonzero(self) -> np.ndarray:
        return (np.abs(self.d1) > _NONZERO_TOL) & (np.abs(self.d2) > _NONZERO_TOL)

    @cached_property
    def angle_gaps(self) -> np.ndarray:
        """Distinct values of angle(d1) - angle(d2) mod pi over both-nonzero entries."""
        m = self.both_nonzero
        gap = np.mod(np.angle(self.d1[m]) - np.angle(self.d2[m]), math.pi)
        gap = np.where(math.pi - gap < 1e-12, 0.0, gap)
        _, first = np.unique(np.round(gap, 10), return_index=True)
        return np.sort(gap[first])

    def grouped_energies(self):
        """Unique (|d1|^2, |d2|^2) pairs with their multiplicities."""
        e = np.round(np.stack([np.abs(self.d1) ** 2, np.abs(self.d2) ** 2], axis=1), 12)
        pairs, counts = np.unique(e, axis=0, return_counts=True)
        return pairs[:, 0], pairs[:, 1], counts


def difference_set(c: Constellation) -> DifferenceSet:
    M = c.M
    a1, a2, b1, b2 = (g.ravel() for g in np.meshgrid(*(np.arange(M),) * 4, indexing="ij"))
    keep = (a1 ^ a2) != (b1 ^ b2)
    a1, a2, b1, b2 = a1[keep], a2[keep], b1[keep], b2[keep]
    pts = c.points
    d1 = pts[a1] - pts[b1]
    d2 = pts[a2] - pts[b2]
    mags = np.concatenate([np.abs(d1), np.abs(d2)])
    d_min = float(np.min(mags[mags > _NONZERO_TOL]))
    quads = np.stack([a1, a2, b1, b2], axis=1)
    for arr in (d1, d2, quads):
        arr.setflags(write=False)
    return DifferenceSet(d1=d1, d2=d2, quads=quads, d_min=d_min)


def rho_min(upsilon, d: DifferenceSet):
    """min over both-nonzero transitions of 2(1 - |cos(angle d1 - angle d2 + upsilon)|).

    Returns ``inf`` when no transition has both differences nonzero (BPSK);
    callers clip with ``min(1, .)``.  Vectorised over ``upsilon``.
    """
    gaps = d.angle_gaps
    ups = np.asarray(upsilon, dtype=float)
    if gaps.size == 0:
        out = np.full(ups.shape, np.inf)
    else:
        c = np.abs(np.cos(gaps[:, None] + ups.ravel()[None, :]))
        out = (2.0 * (1.0 - c.max(axis=0))).reshape(ups.shape)
    return float(out) if out.ndim == 0 else out


def optimize_upsilon(c: Constellation, grid: int = 4096) -> float:
    """Rotation angle in [0, 2pi) maximising ``rho_min``.

    A uniform grid locates the best region; the exact maximiser is then taken
    from the finite candidate set where rho_min can peak (crossings of two
    |cos| branches and the zeros of each branch).  Lowest angle wins ties.
    """
    d = c.difference_set
    gaps = d.angle_gaps
    if gaps.size == 0:
        return 0.0
    ups = np.arange(grid) * (TWO_PI / grid)
    half_pi = 0.5 * math.pi
    cand = [half_pi - gaps]
    cand += [-(gi + gaps) / 2.0 for gi in gaps]
    base = np.concatenate(cand)
    shifts = np.arange(-4, 5) * half_pi
    cand = np.mod((base[:, None] + shifts[None, :]).ravel(), TWO_PI)
    allv = np.concatenate([ups, cand])
    vals = rho_min(allv, d)
    best = vals.max()
    winners = allv[vals >= best - 1e-13]
    return float(np.min(winners))
