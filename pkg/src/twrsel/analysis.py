"""SER bounds for the selected relay, the distribution of its channel gain
(CDFs and MGF) and the high-SNR diversity / array-gain expressions.

Conventions
-----------
* ``psi(t) = E[exp(-t * mu * ||h_khat||^2)]`` for ``t >= 0``; every SER
  integral feeds it nonnegative arguments.
* ``MgfSpec`` assumes every relay has the same antenna count ``L``.
* theta-integrals use a fixed Gauss-Legendre rule on (0, pi/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy import integrate, special

from .core import ConfigurationError, DomainError, InsufficientStatisticsError, NumericalError, gamma_fn, q_function
from .modem import Constellation, rho_min

__all__ = [
    "BoundConstants",
    "MgfSpec",
    "bc_constants",
    "bound_constants",
    "e2e_instant_bound",
    "cdf_min",
    "cdf_max",
    "cdf_selected",
    "mgf_selected",
    "mgf_selected_quad",
    "theta_integral",
    "ser_ma_avg",
    "ser_bc_avg",
    "ser_e2e_bound",
    "array_gain",
    "asymptotic_ser",
    "diversity_slope",
]

GL_NODES = 256


@dataclass(frozen=True)
class MgfSpec:
    """K relays with L antennas each, operating at linear SNR ``mu``."""

    K: int
    L: int
    mu: float = 1.0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ConfigurationError(f"K must be a positive integer, got {self.K}")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigurationError(f"L must be a positive integer, got {self.L}")
        if not self.mu >= 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def from_snr_db(cls, K: int, L: int, snr_db: float) -> "MgfSpec":
        return cls(K, L, 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class BoundConstants:
    """Modulation constants of the per-relay end-to-end bound.

    ``beta = min(C3 d_min^2 / 2, C2 p s)`` where ``s`` is 1 for a single
    relay antenna and 1/2 otherwise.
    """

    C1: float
    C2: float
    C3: float
    C4: float
    alpha: float
    beta: float
    d_min: float

    def __post_init__(self):
        if not 0.0 <= self.C3 <= 1.0:
            raise DomainError(f"C3 must lie in [0, 1], got {self.C3}")
        for name in ("C1", "C2", "C4", "alpha", "beta", "d_min"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")


def bc_constants(c: Constellation) -> tuple[float, float]:
    """(C1, C2) with the single-link SER bounded by C1 Q(sqrt(C2 * snr))."""
    M = c.M
    if c.family == "BPSK":
        return 1.0, 2.0
    if c.family == "PAM":
        return 2.0 * (M - 1) / M, 6.0 / (M * M - 1)
    if c.family == "PSK":
        return 2.0, 2.0 * math.sin(math.pi / M) ** 2
    raise ConfigurationError(f"no BC constants for {c.kind}")


def _antenna_factor(Lk: int) -> float:
    return 1.0 if Lk == 1 else 0.5


def bound_constants(c: Constellation, upsilon: float | None, p: float, Lk: int = 1) -> BoundConstants:
    """Assemble alpha and beta for a constellation, rotation angle and power ratio.

    ``upsilon=None`` means no source rotation, in which case the worst-case
    effective angle is assumed and C3 collapses to 0 unless no transition
    moves both symbols (BPSK).
    """
    d = c.difference_set
    C1, C2 = bc_constants(c)
    if upsilon is None:
        C3 = 1.0 if d.angle_gaps.size == 0 else 0.0
    else:
        C3 = min(1.0, rho_min(float(upsilon), d))
    C4 = len(d) / c.M ** 2
    beta = min(C3 * d.d_min ** 2 / 2.0, C2 * p * _antenna_factor(Lk))
    return BoundConstants(C1=C1, C2=C2, C3=C3, C4=C4, alpha=C4 + C1, beta=beta, d_min=d.d_min)


def e2e_instant_bound(gamma, consts: BoundConstants, mu: float, p: float, Lk: int):
    """alpha Q(sqrt(mu min(C3 d_min^2 gamma / 2, C2 p gamma s))) at fixed channels."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise DomainError("gamma must be >= 0")
    ma = consts.C3 * consts.d_min ** 2 * gamma / 2.0
    bc = consts.C2 * p * gamma * _antenna_factor(Lk)
    out = consts.alpha * np.asarray(q_function(np.sqrt(mu * np.minimum(ma, bc))))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# distribution of ||h_khat||^2
# ---------------------------------------------------------------------------

def _tail(L: int, z):
    """P(Gamma(L, 1) > z) = exp(-z) sum_{l<L} z^l / l!."""
    return special.gammaincc(L, z)


def _check_z(z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise DomainError("z must be >= 0")
    return z


def cdf_min(z, spec: MgfSpec):
    """F_min(z) = (1 - S(z)^2)^K, the CDF of max_k min(||h_k||^2, ||g_k||^2)."""
    z = _check_z(z)
    out = (1.0 - _tail(spec.L, z) ** 2) ** spec.K
    return float(out) if out.ndim == 0 else out


def _cdf_max_scalar(z: float, K: int, L: int) -> float:
    Sz = float(_tail(L, z))
    if K == 1:
        # the competing maximum is over no relays: u = 0
        return (1.0 - Sz) ** 2
    if z == 0.0:
        return 0.0

    inv_gl = 1.0 / math.gamma(L)

    def integrand(u):
        Su = float(_tail(L, u))
        pdf = u ** (L - 1) * math.exp(-u) * inv_gl
        fU = (K - 1) * (1.0 - Su * Su) ** (K - 2) * 2.0 * Su * pdf
        return (Su - Sz) ** 2 * fU

    out = integrate.quad(integrand, 0.0, z, epsabs=1e-13, epsrel=1e-10, limit=200, full_output=True)
    val, err = out[0], out[1]
    if len(out) > 3 or err > 1e-8:
        raise NumericalError(f"F_max quadrature did not converge at z={z}, K={K}, L={L}: value {val}, error estimate {err}")
    return min(1.0, max(0.0, K * val))


def _cdf_max_exact(z: np.ndarray, K: int, L: int) -> np.ndarray:
    P = special.gammainc(L, z)
    if K == 1:
        return P * P
    # v = S(u), w = 1 - v turns the integral into
    # int_0^P (P - w)^2 (K - 1) (w (2 - w))^(K - 2) 2 (1 - w) dw,
    # a degree 2K - 1 polynomial that K + 1 Gauss-Legendre nodes integrate exactly
    x, wt = np.polynomial.legendre.leggauss(K + 1)
    Pc = P[..., None]
    w = 0.5 * Pc * (x + 1.0)
    f = (Pc - w) ** 2 * (K - 1) * (w * (2.0 - w)) ** (K - 2) * 2.0 * (1.0 - w)
    return np.clip(K * 0.5 * P * (f @ wt), 0.0, 1.0)


def cdf_max(z, spec: MgfSpec, method: str = "exact"):
    """CDF of ||h_khat||^2 on the event ||h_khat||^2 > ||g_khat||^2 (times 2).

    ``method="adaptive"`` integrates over the competing maximum u directly
    with adaptive quadrature (slow; a cross-check for the default).
    """
    z = _check_z(z)
    if method == "exact":
        out = _cdf_max_exact(z, spec.K, spec.L)
    elif method == "adaptive":
        out = np.vectorize(lambda x: _cdf_max_scalar(float(x), spec.K, spec.L), otypes=[float])(z)
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    return float(out) if out.ndim == 0 else out


def cdf_selected(z, spec: MgfSpec):
    """F(z) = (F_min(z) + F_max(z)) / 2, the CDF of ||h_khat||^2 under MaxMin-RS."""
    out = 0.5 * np.asarray(cdf_min(z, spec)) + 0.5 * np.asarray(cdf_max(z, spec))
    return float(out) if out.ndim == 0 else out


def _compositions(n: int, parts: int):
    if parts == 1:
        yield (n,)
        return
    for i in range(n + 1):
        for rest in _compositions(n - i, parts - 1):
            yield (i,) + rest


def _multinomial_terms(n: int, L: int):
    """(c_j, m_j) over j_0 + ... + j_{L-1} = n, c_j = n! prod (1/l!)^{j_l} / prod j_l!."""
    out = []
    for j in _compositions(n, L):
        m = sum(l * jl for l, jl in enumerate(j))
        c = factorial(n)
        den = 1
        for l, jl in enumerate(j):
            den *= factorial(l) ** jl * factorial(jl)
        out.append((c / den, m))
    return out


@lru_cache(maxsize=None)
def _mgf_terms(K: int, L: int):
    """psi(s) = sum coef / ((1 + s)^a (b + s)^e), returned as four arrays."""
    coef, a, b, e = [], [], [], []

    def add(cf, pa, ob, pe):
        coef.append(cf)
        a.append(pa)
        b.append(ob)
        e.append(pe)

    # P(h_khat = max_k min) branch and the first half of the other branch
    for k in range(K):
        w = K * comb(K - 1, k) * (-1) ** k
        for c, m in _multinomial_terms(2 * k, L):
            add(w * c * factorial(L - 1 + m) / factorial(L - 1), 0, 2 * k + 1, L + m)

    # correction for relays where ||g|| is the smaller norm
    for k in range(K - 1):
        w = 2 * K * (K - 1) * comb(K - 2, k) * (-1) ** k
        for n, sign in ((2 * k + 1, -1.0), (2 * k + 2, 1.0)):
            for c, m in _multinomial_terms(n, L):
                for i in range(L):
                    cf = c / factorial(L - 1) * factorial(L - 1 + m + i) / factorial(i)
                    add(sign * w * cf, L - i, n + 2, L + m + i)
    return tuple(np.asarray(x, dtype=float) for x in (coef, a, b, e))


# closed-form terms alternate in sign; past this ratio of sum |term| to
# |sum| the float result has lost more than ~6 digits
_CANCEL_LIMIT = 1e6
_LAGUERRE_NODES = 200


@lru_cache(maxsize=None)
def _laguerre_rule(L: int):
    return special.roots_genlaguerre(_LAGUERRE_NODES, L - 1)


def _psi_integral(s, K: int, L: int):
    """Cancellation-free route: psi(s) = K int exp(-s x) g_L(x) B(x) dx.

    B(x) = P(relay with ||h||^2 = x wins) integrated over ||g||^2, which is
    H(x) + S(x) F_U(x) with H(x) = int_0^x g_L(y) F_U(y) dy.  Substituting
    v = P(y) turns H into a regularised incomplete beta function.  The outer
    integral uses generalised Gauss-Laguerre nodes after y = (1 + s) x.
    """
    y, w = _laguerre_rule(L)
    s = np.asarray(s, dtype=float).reshape(-1, 1)
    x = y[None, :] / (1.0 + s)
    P = special.gammainc(L, x)
    S = special.gammaincc(L, x)
    FU = (P * (2.0 - P)) ** (K - 1)
    H = 2.0 ** (2 * K - 1) * special.beta(K, K) * special.betainc(K, K, P / 2.0)
    vals = (H + S * FU) @ w
    return (K / (math.gamma(L) * (1.0 + s[:, 0]) ** L)) * vals


def _psi_s(s, K: int, L: int):
    s = np.asarray(s, dtype=float)
    coef, a, b, e = _mgf_terms(K, L)
    sv = s.reshape(-1, 1)
    terms = coef * np.exp(-a * np.log1p(sv) - e * np.log(b + sv))
    total = terms.sum(axis=1)
    bad = np.abs(terms).sum(axis=1) > _CANCEL_LIMIT * np.abs(total)
    if bad.any():
        total[bad] = _psi_integral(sv[bad, 0], K, L)
    return total.reshape(s.shape)


def mgf_selected(t, spec: MgfSpec):
    """Closed-form ``E[exp(-t mu ||h_khat||^2)]`` under MaxMin-RS selection.

    Vectorised over ``t``.  Where the alternating term sum cancels badly
    (large ``t mu`` with several relays and antennas) the value is taken from
    an equivalent single integral instead.  Negative ``t`` is outside the
    region where the series converges and raises :class:`DomainError`.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("mgf_selected needs t >= 0")
    out = _psi_s(t * spec.mu, spec.K, spec.L)
    return float(out) if out.ndim == 0 else out


def mgf_selected_quad(t: float, spec: MgfSpec) -> float:
    """Same quantity by quadrature of the CDF: int_0^inf s exp(-s z) F(z) dz."""
    if t < 0:
        raise DomainError("mgf_selected_quad needs t >= 0")
    s = t * spec.mu
    if s == 0:
        return 1.0
    # substitute z = x / s so the exponential decays on a unit scale
    f = lambda x: math.exp(-x) * cdf_selected(x / s, spec)
    val, err = integrate.quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-10, limit=400)
    if err > 1e-7 * max(val, 1e-300) and err > 1e-14:
        raise NumericalError(f"MGF quadrature did not converge: {val} +- {err}")
    return val


# ---------------------------------------------------------------------------
# averaged SER bounds
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _gl_rule(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    half = math.pi / 4.0
    return half * (x + 1.0), half * w


def theta_integral(f, nodes: int = GL_NODES) -> float:
    """Gauss-Legendre approximation of int_0^{pi/2} f(theta) d theta; ``f`` is vectorised."""
    th, w = _gl_rule(nodes)
    return float(np.dot(w, f(th)))


def _require_pam(c: Constellation):
    if c.family not in ("PAM", "BPSK"):
        raise ConfigurationError(f"averaged SER bounds cover PAM/BPSK only, not {c.kind}")


def ser_ma_avg(c: Constellation, spec: MgfSpec, nodes: int = GL_NODES) -> float:
    """Union bound on the relay's NCS error probability with a rotation of pi/2.

    sum_D 1/(M^2 pi) int psi(|d1|^2 / 4 sin^2) psi(|d2|^2 / 4 sin^2) d theta,
    summed over the distinct (|d1|^2, |d2|^2) pairs with their multiplicity.
    """
    _require_pam(c)
    e1, e2, counts = c.difference_set.grouped_energies()

    def f(th):
        inv = 1.0 / (4.0 * np.sin(th) ** 2)
        p1 = mgf_selected(e1[:, None] * inv[None, :], spec)
        p2 = mgf_selected(e2[:, None] * inv[None, :], spec)
        return np.dot(counts, p1 * p2)

    return theta_integral(f, nodes) / (c.M ** 2 * math.pi)


def ser_bc_avg(spec: MgfSpec, p: float, M: int, nodes: int = GL_NODES) -> float:
    """Average MPAM SER of one broadcast link from the selected relay.

    The beamformer halves the link gain when the relay has more than one
    antenna, which halves the argument of psi.
    """
    if M < 2:
        raise ConfigurationError("M must be >= 2")
    k = 1.0 if spec.L == 1 else 2.0
    scale = 3.0 * p / (k * (M * M - 1))
    f = lambda th: mgf_selected(scale / np.sin(th) ** 2, spec)
    return 2.0 * (M - 1) / (M * math.pi) * theta_integral(f, nodes)


def ser_e2e_bound(c: Constellation, spec: MgfSpec, p: float, nodes: int = GL_NODES) -> float:
    """Per-direction end-to-end SER bound: relay error plus broadcast error."""
    return ser_ma_avg(c, spec, nodes) + ser_bc_avg(spec, p, c.M, nodes)


# ---------------------------------------------------------------------------
# high-SNR behaviour
# ---------------------------------------------------------------------------

def array_gain(spec: MgfSpec | None, beta: float, layout=None) -> tuple[int, float]:
    """Diversity order Gd = sum L_k and array gain Gc of alpha (Gc mu)^(-Gd).

    ``layout`` defaults to ``spec.K`` relays of ``spec.L`` antennas.
    """
    if layout is None:
        if spec is None:
            raise ConfigurationError("need a layout or an MgfSpec")
        layout = (spec.L,) * spec.K
    lay = [int(x) for x in layout]
    if not lay or any(x < 1 for x in lay):
        raise ConfigurationError(f"invalid layout {layout!r}")
    if not beta > 0:
        raise DomainError("beta must be > 0")
    K = len(lay)
    L = sum(lay)
    logs = []  # log of G_{c,k}^{L_k} Z(L_k + 1/2)
    for Lk in lay:
        base = (
            2.0 ** (Lk - 1) * math.pi ** ((Lk - 1) / 2.0) * gamma_fn(Lk + 0.5)
            / (gamma_fn(Lk + 1) * (math.sqrt(math.pi) * beta / 2.0) ** Lk)
        )
        gck = base ** (-1.0 / Lk)
        logs.append(Lk * math.log(gck) + math.log(gamma_fn(Lk + 0.5)))
    log_inner = (K - 1) * math.log(2.0) + 0.5 * (K - 1) * math.log(math.pi) + math.log(gamma_fn(L + 0.5)) - sum(logs)
    return L, math.exp(-log_inner / L)


def asymptotic_ser(alpha: float, Gc: float, Gd: int, mu):
    mu = np.asarray(mu, dtype=float)
    out = alpha * (Gc * mu) ** (-float(Gd))
    return float(out) if out.ndim == 0 else out


def diversity_slope(points) -> float:
    """Least-squares slope of -log10(ser) against snr_db / 10."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise InsufficientStatisticsError("need at least two (snr_db, ser) points")
    snr = np.array([x for x, _ in pts])
    ser = np.array([y for _, y in pts])
    if np.any(ser <= 0) or np.any(~np.isfinite(ser)):
        raise InsufficientStatisticsError("every point in the window needs a positive SER")
    if np.ptp(snr) == 0:
        raise InsufficientStatisticsError("SNR points must differ")
    slope = np.polyfit(snr / 10.0, -np.log10(ser), 1)[0]
    return float(slope)
