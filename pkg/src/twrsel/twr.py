"""One two-way decode-and-forward round through the selected relay.

Two code paths share the same random draws:

* the per-operation functions (``ml_mud``, ``pr_beamform``, ``bc_round``,
  ``run_trial``) process a single trial and read like the signal model;
* :func:`simulate_draws` pushes a whole batch of trials through the same
  chain with array arithmetic and is what the sweep engine uses.

``tests/test_twr.py`` checks that both give identical decisions on shared
draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SchemeConfig
from .core import DegenerateChannelError, as_generator, inner
from .modem import Constellation
from .phy import ChannelSet, corrupt_csi, effective_angle, layout_mask, sample_channels
from .selection import select

__all__ = [
    "MaResult",
    "BcResult",
    "Beamformer",
    "TrialOutcome",
    "TrialDraws",
    "BatchCounts",
    "pr_preprocess",
    "ma_receive",
    "ml_mud",
    "dd_ma",
    "gram_schmidt",
    "pr_beamform",
    "bc_round",
    "draw_trials",
    "trial_from_draws",
    "run_trial",
    "simulate_draws",
    "run_batch",
]

GS_DEGENERATE_TOL = 1e-12
SQRT_HALF = math.sqrt(0.5)


def _db2lin(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


# ---------------------------------------------------------------------------
# MA stage
# ---------------------------------------------------------------------------

def pr_preprocess(phi: float, upsilon: float, enabled: bool = True) -> tuple[complex, complex]:
    """Source rotations (u1, u2) = (exp(j(upsilon + phi)), 1); (1, 1) when disabled."""
    if not enabled:
        return 1.0 + 0j, 1.0 + 0j
    return complex(np.exp(1j * (upsilon + phi))), 1.0 + 0j


def ma_receive(h, g, x1, x2, sigma2: float, rng=None, noise=None) -> np.ndarray:
    """Relay observation y = h x1 + g x2 + n with n ~ CN(0, sigma2 I).

    Pass ``noise`` (already scaled) to replay a stored draw instead of
    sampling from ``rng``.
    """
    h = np.asarray(h, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if h.shape != g.shape:
        raise ValueError("h and g must have the same shape")
    y = h * x1 + g * x2
    if noise is not None:
        return y + noise
    if sigma2 > 0:
        z = as_generator(rng).standard_normal(h.shape + (2,))
        y = y + math.sqrt(sigma2 / 2.0) * (z[..., 0] + 1j * z[..., 1])
    return y


@dataclass(frozen=True)
class MaResult:
    """Joint ML decision at the relay, as bit labels."""

    label1: int
    label2: int
    metric: float
    relay_error: bool | None = None

    @property
    def nc(self) -> int:
        return self.label1 ^ self.label2

    def symbols(self, c: Constellation) -> tuple[complex, complex, complex]:
        p = c.points
        return complex(p[self.label1]), complex(p[self.label2]), complex(p[self.nc])


def ml_mud(y, h, g, u1, u2, Ps: float, c: Constellation) -> MaResult:
    """Exhaustive joint ML detection of (s1, s2) over S x S.

    Candidates are scanned with label1 major and label2 minor; the first
    minimum wins.
    """
    y = np.asarray(y, dtype=complex)
    a = math.sqrt(Ps) * np.asarray(h) * u1
    b = math.sqrt(Ps) * np.asarray(g) * u2
    pts = c.points
    cand = y[None, None, :] - a[None, None, :] * pts[:, None, None] - b[None, None, :] * pts[None, :, None]
    metric = np.sum(np.abs(cand) ** 2, axis=-1)
    idx = int(np.argmin(metric))
    i1, i2 = divmod(idx, c.M)
    return MaResult(i1, i2, float(metric.flat[idx]))


def dd_ma(h, g, u1, u2, d1, d2) -> float:
    """Decision distance ||g u2 d1 + h u1 d2|| (pairing as printed for lambda)."""
    v = np.asarray(g) * (u2 * d1) + np.asarray(h) * (u1 * d2)
    return float(np.linalg.norm(v))


# ---------------------------------------------------------------------------
# BC stage
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Beamformer:
    """Relay transmit weights and the Gram-Schmidt factors they come from."""

    w: np.ndarray | None
    q1: np.ndarray | None = None
    q2: np.ndarray | None = None
    r11: float = float("nan")
    r12: complex = complex("nan")
    r22: float = float("nan")
    degenerate: bool = False


def gram_schmidt(h, g) -> Beamformer:
    """q1 = h / r11, q2 = (g - r12 q1) / r22 with r12 = h^H g / ||h||.

    Raises :class:`DegenerateChannelError` when g is (numerically) parallel
    to h, i.e. r22 < 1e-12 ||g||.
    """
    h = np.asarray(h, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if h.size < 2:
        raise ValueError("Gram-Schmidt needs at least two antennas")
    r11 = float(np.linalg.norm(h))
    if r11 == 0.0:
        raise DegenerateChannelError("h is the zero vector")
    q1 = h / r11
    r12 = complex(inner(h, g) / r11)
    resid = g - r12 * q1
    r22 = float(np.linalg.norm(resid))
    if r22 < GS_DEGENERATE_TOL * np.linalg.norm(g):
        raise DegenerateChannelError("g is parallel to h")
    return Beamformer(w=None, q1=q1, q2=resid / r22, r11=r11, r12=r12, r22=r22)


def pr_beamform(h, g, phi: float) -> Beamformer:
    """Phase-rotated bidirectional beamformer.

    w = sqrt(1/2) (exp(-j phi) conj(q1) + j conj(q2)), which gives
    |h^T w|^2 = ||h||^2 / 2 and |g^T w|^2 = ||g||^2 / 2.  A single antenna
    uses w = 1.  If g is parallel to h the relay beams along conj(q1) alone.
    """
    h = np.asarray(h, dtype=complex)
    if h.size == 1:
        return Beamformer(w=np.ones(1, dtype=complex))
    try:
        bf = gram_schmidt(h, g)
    except DegenerateChannelError:
        q1 = h / np.linalg.norm(h)
        w = np.exp(-1j * phi) * np.conj(q1)
        return Beamformer(w=w, q1=q1, r11=float(np.linalg.norm(h)), degenerate=True)
    w = SQRT_HALF * (np.exp(-1j * phi) * np.conj(bf.q1) + 1j * np.conj(bf.q2))
    return Beamformer(w=w, q1=bf.q1, q2=bf.q2, r11=bf.r11, r12=bf.r12, r22=bf.r22)


@dataclass(frozen=True)
class BcResult:
    """Source-side detections of the NCS and, when the sources' own labels
    are known, the recovered partner symbols and per-direction error flags.

    ``recovered[0]`` is S1's estimate of s2, ``recovered[1]`` is S2's estimate of s1.
    """

    nc1: int
    nc2: int
    recovered: tuple[int, int] | None = None
    errors: tuple[bool, bool] | None = None


def _scalar_ml(y: complex, gain: complex, pts: np.ndarray) -> int:
    return int(np.argmin(np.abs(y - gain * pts) ** 2))


def bc_round(bf: Beamformer, h, g, s_nc_hat: int, Pr: float, sigma2: float, c: Constellation,
             rng=None, noise=None, sources=None, h_det=None, g_det=None) -> BcResult:
    """Broadcast the relay's NCS label and detect it at both sources.

    ``noise`` replays stored (already scaled) noises (n1, n2).  ``sources``
    = (label1, label2) enables recovery and error flags.  ``h_det``/``g_det``
    override the channel the sources assume (CSI-error studies).
    """
    w = bf.w
    a1 = complex(np.dot(np.asarray(h), w))
    a2 = complex(np.dot(np.asarray(g), w))
    s = c.points[s_nc_hat]
    amp = math.sqrt(Pr)
    if noise is None:
        z = as_generator(rng).standard_normal(4)
        noise = math.sqrt(sigma2 / 2.0) * (z[[0, 2]] + 1j * z[[1, 3]])
    y1 = amp * a1 * s + noise[0]
    y2 = amp * a2 * s + noise[1]
    d1 = a1 if h_det is None else complex(np.dot(np.asarray(h_det), w))
    d2 = a2 if g_det is None else complex(np.dot(np.asarray(g_det), w))
    nc1 = _scalar_ml(y1, amp * d1, c.points)
    nc2 = _scalar_ml(y2, amp * d2, c.points)
    if sources is None:
        return BcResult(nc1, nc2)
    l1, l2 = sources
    rec = (nc1 ^ l1, nc2 ^ l2)
    return BcResult(nc1, nc2, rec, (rec[0] != l2, rec[1] != l1))


# ---------------------------------------------------------------------------
# Full trials
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrialDraws:
    """All randomness of ``n`` trials, drawn in a fixed order.

    Noises are unit-variance; they are scaled by sqrt(sigma2) at use.
    """

    channels: ChannelSet
    labels: np.ndarray      # (n, 2)
    noise_ma: np.ndarray    # (n, Lmax)
    noise_bc: np.ndarray    # (n, 2)

    @property
    def n(self) -> int:
        return self.labels.shape[0]


def _cn(gen, shape):
    z = gen.standard_normal(shape + (2,))
    out = z.view(np.complex128)[..., 0]
    out *= SQRT_HALF
    return out


def draw_trials(cfg: SchemeConfig, rng, n: int) -> TrialDraws:
    gen = as_generator(rng)
    ch = sample_channels(cfg.layout, gen, n)
    ch = corrupt_csi(ch, cfg.delta2, gen)
    labels = gen.integers(0, cfg.constellation.M, size=(n, 2))
    Lmax = max(cfg.layout)
    return TrialDraws(ch, labels, _cn(gen, (n, Lmax)), _cn(gen, (n, 2)))


@dataclass(frozen=True)
class TrialOutcome:
    relay_error: bool
    bc_errors: tuple[bool, bool]
    e2e_errors: tuple[bool, bool]
    relay: int
    antenna: int | None = None


def _selected_vectors(cfg, ch: ChannelSet, dec):
    """True and selection-side (h, g) for the chosen relay or antenna."""
    k = int(dec.relay)
    if dec.antenna is not None:
        l = int(dec.antenna)
        sl = slice(l, l + 1)
        he, ge = ch.view
        return ch.h[k, sl], ch.g[k, sl], he[k, sl], ge[k, sl]
    h, g = ch.relay(k)
    he, ge = ch.relay(k, estimated=True)
    return h, g, he, ge


def trial_from_draws(cfg: SchemeConfig, snr_db: float, draws: TrialDraws, i: int) -> TrialOutcome:
    """Run trial ``i`` of ``draws`` through the per-operation chain."""
    c = cfg.constellation
    Ps = _db2lin(snr_db) * cfg.sigma2
    Pr = cfg.p * Ps
    sd = math.sqrt(cfg.sigma2)
    ch = draws.channels[i]
    dec = select(cfg, ch)
    h, g, he, ge = _selected_vectors(cfg, ch, dec)
    if cfg.csi_error_scope == "relay":
        he, ge = h, g
    phi = effective_angle(he, ge)
    u1, u2 = pr_preprocess(phi, cfg.upsilon_value, enabled=cfg.uses_rotation)
    l1, l2 = (int(x) for x in draws.labels[i])
    x1 = math.sqrt(Ps) * u1 * c.points[l1]
    x2 = math.sqrt(Ps) * u2 * c.points[l2]
    y = ma_receive(h, g, x1, x2, cfg.sigma2, noise=sd * draws.noise_ma[i, : h.size])
    detect_est = cfg.csi_error_scope == "all" and ch.corrupted
    hd, gd = (he, ge) if detect_est else (h, g)
    ma = ml_mud(y, hd, gd, u1, u2, Ps, c)
    nc_true = l1 ^ l2
    bf = pr_beamform(he, ge, phi)
    bc = bc_round(bf, h, g, ma.nc, Pr, cfg.sigma2, c, noise=sd * draws.noise_bc[i], sources=(l1, l2),
                  h_det=he if detect_est else None, g_det=ge if detect_est else None)
    return TrialOutcome(
        relay_error=ma.nc != nc_true,
        bc_errors=(bc.nc1 != ma.nc, bc.nc2 != ma.nc),
        e2e_errors=bc.errors,
        relay=int(dec.relay),
        antenna=None if dec.antenna is None else int(dec.antenna),
    )


def run_trial(cfg: SchemeConfig, snr_db: float, rng) -> TrialOutcome:
    """Sample one block-fading realisation and one symbol pair, then run the round."""
    return trial_from_draws(cfg, snr_db, draw_trials(cfg, rng, 1), 0)


# ---------------------------------------------------------------------------
# Vectorised batch engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BatchCounts:
    trials: int = 0
    errors_e2e: int = 0
    errors_ma: int = 0
    errors_bc: int = 0

    def __add__(self, other: "BatchCounts") -> "BatchCounts":
        return BatchCounts(
            self.trials + other.trials,
            self.errors_e2e + other.errors_e2e,
            self.errors_ma + other.errors_ma,
            self.errors_bc + other.errors_bc,
        )


@dataclass(frozen=True, eq=False)
class BatchOutcome:
    relay: np.ndarray
    relay_error: np.ndarray   # (n,)
    bc_errors: np.ndarray     # (n, 2)
    e2e_errors: np.ndarray    # (n, 2)

    def counts(self) -> BatchCounts:
        return BatchCounts(
            int(self.relay_error.size),
            int(self.e2e_errors.sum()),
            int(self.relay_error.sum()),
            int(self.bc_errors.sum()),
        )


def _take(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    """a[i, k[i], :] for a of shape (n, K, L)."""
    return a[np.arange(a.shape[0]), k]


def _joint_ml(y, a, b, pts):
    """Vectorised joint ML over S x S; a, b already include sqrt(Ps) and rotations."""
    Yh = np.sum(np.conj(a) * y, axis=-1)
    Yg = np.sum(np.conj(b) * y, axis=-1)
    Hh = np.sum(np.abs(a) ** 2, axis=-1)
    Gg = np.sum(np.abs(b) ** 2, axis=-1)
    Hg = np.sum(np.conj(a) * b, axis=-1)
    e = np.abs(pts) ** 2
    cp = np.conj(pts)
    # metric(i1, i2) up to the common ||y||^2 term
    t1 = e[None, :] * Hh[:, None] - 2.0 * np.real(cp[None, :] * Yh[:, None])
    t2 = e[None, :] * Gg[:, None] - 2.0 * np.real(cp[None, :] * Yg[:, None])
    cross = 2.0 * np.real(Hg[:, None, None] * (cp[:, None] * pts[None, :])[None, :, :])
    metric = t1[:, :, None] + t2[:, None, :] + cross
    idx = np.argmin(metric.reshape(len(y), -1), axis=1)
    return np.divmod(idx, pts.size)


def _scalar_ml_batch(y, gain, pts):
    return np.argmin(np.abs(y[:, None] - gain[:, None] * pts[None, :]) ** 2, axis=1)


def _beamformers(h, g, phi, single):
    """Batched PR beamformer over padded (n, Lmax) vectors.

    ``single`` marks trials whose selected relay has one antenna (w = e_0).
    """
    n, Lmax = h.shape
    w = np.zeros((n, Lmax), dtype=complex)
    w[:, 0] = 1.0
    if Lmax == 1:
        return w
    multi = ~single
    if not multi.any():
        return w
    every = bool(multi.all())
    hm, gm, ph = (h, g, phi) if every else (h[multi], g[multi], phi[multi])
    r11 = np.linalg.norm(hm, axis=1)
    q1 = hm / r11[:, None]
    r12 = np.sum(np.conj(hm) * gm, axis=1) / r11
    resid = gm - r12[:, None] * q1
    r22 = np.linalg.norm(resid, axis=1)
    degen = r22 < GS_DEGENERATE_TOL * np.linalg.norm(gm, axis=1)
    safe = np.where(degen, 1.0, r22)
    q2 = resid / safe[:, None]
    rot = np.exp(-1j * ph)[:, None]
    wm = SQRT_HALF * (rot * np.conj(q1) + 1j * np.conj(q2))
    if degen.any():
        wm[degen] = rot[degen] * np.conj(q1[degen])
    if every:
        return wm
    w[multi] = wm
    return w


def simulate_draws(cfg: SchemeConfig, snr_db: float, draws: TrialDraws) -> BatchOutcome:
    """Vectorised counterpart of :func:`trial_from_draws` over every trial in ``draws``."""
    c = cfg.constellation
    pts = c.points
    Ps = _db2lin(snr_db) * cfg.sigma2
    Pr = cfg.p * Ps
    sd = math.sqrt(cfg.sigma2)
    ch = draws.channels
    n = draws.n
    rows = np.arange(n)
    dec = select(cfg, ch)
    k = np.atleast_1d(dec.relay)
    H, G = ch.h, ch.g
    He, Ge = ch.view
    if dec.antenna is not None:
        l = np.atleast_1d(dec.antenna)
        h = H[rows, k, l][:, None]
        g = G[rows, k, l][:, None]
        he = He[rows, k, l][:, None]
        ge = Ge[rows, k, l][:, None]
        single = np.ones(n, dtype=bool)
    else:
        h, g, he, ge = _take(H, k), _take(G, k), _take(He, k), _take(Ge, k)
        single = np.asarray(cfg.layout)[k] == 1
    if cfg.csi_error_scope == "relay":
        he, ge = h, g
    phi = effective_angle(he, ge)
    phi = np.atleast_1d(phi)
    if cfg.uses_rotation:
        u1 = np.exp(1j * (cfg.upsilon_value + phi))
    else:
        u1 = np.ones(n, dtype=complex)
    l1, l2 = draws.labels[:, 0], draws.labels[:, 1]
    rootPs = math.sqrt(Ps)
    Lsel = h.shape[1]
    y = rootPs * (h * (u1 * pts[l1])[:, None] + g * pts[l2][:, None]) + sd * draws.noise_ma[:, :Lsel]
    detect_est = cfg.csi_error_scope == "all" and ch.corrupted
    hd, gd = (he, ge) if detect_est else (h, g)
    i1, i2 = _joint_ml(y, rootPs * hd * u1[:, None], rootPs * gd, pts)
    nc_hat = i1 ^ i2
    nc_true = l1 ^ l2

    w = _beamformers(he, ge, phi, single)
    a1 = np.sum(h * w, axis=1)
    a2 = np.sum(g * w, axis=1)
    rootPr = math.sqrt(Pr)
    s = pts[nc_hat]
    y1 = rootPr * a1 * s + sd * draws.noise_bc[:, 0]
    y2 = rootPr * a2 * s + sd * draws.noise_bc[:, 1]
    if detect_est:
        a1 = np.sum(he * w, axis=1)
        a2 = np.sum(ge * w, axis=1)
    nc1 = _scalar_ml_batch(y1, rootPr * a1, pts)
    nc2 = _scalar_ml_batch(y2, rootPr * a2, pts)
    e2e = np.stack([(nc1 ^ l1) != l2, (nc2 ^ l2) != l1], axis=1)
    bc = np.stack([nc1 != nc_hat, nc2 != nc_hat], axis=1)
    return BatchOutcome(k, nc_hat != nc_true, bc, e2e)


def run_batch(cfg: SchemeConfig, snr_db: float, rng, n: int) -> BatchCounts:
    """Draw and simulate ``n`` independent trials; returns error counts."""
    return simulate_draws(cfg, snr_db, draw_trials(cfg, rng, n)).counts()
