"""Fast invariant suite behind ``twrsel selfcheck``.

Each check draws a few hundred channels and verifies an identity or
inequality the simulator and the analysis rely on.  The full-size versions
live in the test suite.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis import MgfSpec, bound_constants, cdf_selected, mgf_selected, mgf_selected_quad
from .config import SchemeConfig, SweepSpec
from .core import RngStream
from .harness import run_point
from .modem import make_constellation, optimize_upsilon, rho_min
from .phy import relay_metrics, sample_channels
from .twr import draw_trials, pr_beamform, simulate_draws, trial_from_draws

__all__ = ["CheckResult", "CHECKS", "run_all", "min_dd_sq"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def min_dd_sq(h, g, u1, d1, d2):
    """||g d1 + h u1 d2||^2 for every (trial, transition); u2 = 1.

    ``h``, ``g`` are (n, L); ``u1`` is (n,); ``d1``, ``d2`` are (m,).
    Returns an (n, m) array.
    """
    nh = np.sum(np.abs(h) ** 2, axis=-1)[:, None]
    ng = np.sum(np.abs(g) ** 2, axis=-1)[:, None]
    cross = np.sum(np.conj(g) * h, axis=-1) * u1          # g^H h u1
    mix = np.conj(d1)[None, :] * d2[None, :] * cross[:, None]
    return np.abs(d1[None, :]) ** 2 * ng + np.abs(d2[None, :]) ** 2 * nh + 2.0 * mix.real


def check_beamformer(n: int = 300, seed: int = 1) -> CheckResult:
    worst = 0.0
    for L in (2, 4, 8):
        ch = sample_channels((L,), RngStream(seed, L), n)
        m = relay_metrics(ch)
        for i in range(n):
            h, g = ch.h[i, 0], ch.g[i, 0]
            w = pr_beamform(h, g, m.phi[i, 0]).w
            got = min(abs(h @ w) ** 2, abs(g @ w) ** 2)
            worst = max(worst, abs(got / (0.5 * m.gamma[i, 0]) - 1.0))
    return CheckResult("beamformer min gain = Gamma/2", worst < 1e-9, f"max rel err {worst:.2e}")


def check_dd_bound(n: int = 500, seed: int = 2) -> CheckResult:
    viol = 0
    for kind, ups in (("MPAM(4)", math.pi / 2), ("QPSK", None)):
        c = make_constellation(kind)
        ups = optimize_upsilon(c) if ups is None else ups
        bc = bound_constants(c, ups, 1.0)
        d = c.difference_set
        for L in (1, 2, 4):
            ch = sample_channels((L,), RngStream(seed, L), n)
            m = relay_metrics(ch)
            u1 = np.exp(1j * (ups + m.phi[:, 0]))
            lam2 = min_dd_sq(ch.h[:, 0], ch.g[:, 0], u1, d.d1, d.d2)
            rhs = bc.C3 * m.gamma[:, 0:1] * d.d_min ** 2
            viol += int(np.sum(lam2 < rhs - 1e-12))
    return CheckResult("decision distance >= C3 Gamma d_min^2", viol == 0, f"{viol} violations")


def check_sandwich(n: int = 2000, seed: int = 3) -> CheckResult:
    viol = 0
    for lay in ((1, 1, 1, 1), (2, 2), (4, 4)):
        m = relay_metrics(sample_channels(lay, RngStream(seed, len(lay)), n))
        top = m.gamma.max(axis=-1)
        gt = m.gamma_tilde.max(axis=-1)
        xi = m.antenna_min.reshape(n, -1).max(axis=-1)
        viol += int(np.sum(top < gt - 1e-12) + np.sum(gt < xi - 1e-12))
    return CheckResult("Gamma_khat >= Gamma~ >= xi", viol == 0, f"{viol} violations")


def check_mgf() -> CheckResult:
    worst0 = max(abs(mgf_selected(0.0, MgfSpec(K, L)) - 1.0) for K in (1, 2, 3) for L in (1, 2, 3))
    spec = MgfSpec(2, 2, 1.0)
    rel = max(abs(mgf_selected(t, spec) / mgf_selected_quad(t, spec) - 1.0) for t in (0.1, 1.0, 10.0))
    ok = worst0 < 1e-8 and rel < 1e-3
    return CheckResult("MGF normalisation and quadrature agreement", ok, f"|psi(0)-1| {worst0:.1e}, rel {rel:.1e}")


def check_cdf() -> CheckResult:
    z = np.linspace(0.0, 12.0, 25)
    ok = True
    for K, L in ((1, 1), (2, 1), (2, 2), (3, 1)):
        F = cdf_selected(z, MgfSpec(K, L))
        ok &= bool(F[0] == 0.0 and np.all(np.diff(F) >= -1e-12) and F[-1] > 0.999)
    return CheckResult("selected-gain CDF is a CDF", ok, "K, L in small set")


def check_upsilon() -> CheckResult:
    c = make_constellation("MPAM", 4)
    u = optimize_upsilon(c)
    r = rho_min(u, c.difference_set)
    ok = abs(r - 2.0) < 1e-6 and abs(math.remainder(u - math.pi / 2, math.pi)) < 1e-9
    return CheckResult("optimal rotation for 4-PAM", ok, f"upsilon {u:.6f}, rho {r:.6f}")


def check_paths(n: int = 60, seed: int = 4) -> CheckResult:
    bad = 0
    for scheme, lay, mod in (("pr-maxmin-rs", (2, 1), "QPSK"), ("maxmin-as", (2, 2), "MPAM(4)")):
        cfg = SchemeConfig(scheme, lay, mod, p=2.0, delta2=0.05)
        draws = draw_trials(cfg, RngStream(seed), n)
        batch = simulate_draws(cfg, 5.0, draws)
        for i in range(n):
            t = trial_from_draws(cfg, 5.0, draws, i)
            bad += int(tuple(t.e2e_errors) != tuple(batch.e2e_errors[i]))
    return CheckResult("scalar and batched trial paths agree", bad == 0, f"{bad} mismatches")


def check_determinism(seed: int = 5) -> CheckResult:
    cfg = SchemeConfig("pr-maxmin-rs", (1, 1), "BPSK")
    sweep = SweepSpec(snr_grid=(5.0,), min_errors=50, max_trials=20000, seed=seed, chunk_trials=2000)
    a = run_point(cfg, 5.0, sweep)
    with ThreadPoolExecutor(3) as ex:
        b = run_point(cfg, 5.0, replace(sweep, workers=3), executor=ex)
    return CheckResult("counts independent of worker count", a == b, f"{a} vs {b}")


CHECKS = (
    check_beamformer,
    check_dd_bound,
    check_sandwich,
    check_mgf,
    check_cdf,
    check_upsilon,
    check_paths,
    check_determinism,
)


def run_all() -> list[CheckResult]:
    out = []
    for fn in CHECKS:
        try:
            out.append(fn())
        except Exception as exc:  # report, do not abort the suite
            out.append(CheckResult(fn.__name__, False, f"{type(exc).__name__}: {exc}"))
    return out
