"""Monte-Carlo SER sweeps, scheme comparison and result files.

Each SNR point is simulated in fixed-size chunks.  Chunk ``j`` of grid point
``i`` always draws from ``RngStream(seed).substream(i).substream(j)``, and
chunks are reduced in index order up to the first one at which the
cumulative end-to-end error count reaches ``min_errors``.  Workers only
change how many chunks are in flight, never which chunks are counted, so
the output is identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats

from . import __version__
from .analysis import MgfSpec, diversity_slope, ser_e2e_bound
from .config import SchemeConfig, SweepSpec, dump_config_text
from .core import ConfigurationError, InsufficientStatisticsError, RngStream
from .twr import BatchCounts, run_batch

__all__ = [
    "SerRecord",
    "CompareReport",
    "CSV_COLUMNS",
    "wilson_interval",
    "analytic_bound",
    "run_point",
    "run_sweep",
    "compare_schemes",
    "records_to_csv",
    "write_results",
]

CSV_COLUMNS = (
    "snr_db",
    "scheme",
    "errors_e2e",
    "errors_ma",
    "errors_bc",
    "trials",
    "ser",
    "ci95_low",
    "ci95_high",
    "analytic_bound",
)

Z95 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class SerRecord:
    """One SNR point.  ``ser`` counts both directions: errors_e2e / (2 trials)."""

    snr_db: float
    scheme: str
    errors_e2e: int
    errors_ma: int
    errors_bc: int
    trials: int
    ser: float
    ci95_low: float
    ci95_high: float
    analytic_bound: float | None = None

    @classmethod
    def from_counts(cls, snr_db: float, scheme: str, counts: BatchCounts, bound: float | None = None) -> "SerRecord":
        n = 2 * counts.trials
        lo, hi = wilson_interval(counts.errors_e2e, n)
        return cls(
            snr_db=float(snr_db),
            scheme=scheme,
            errors_e2e=counts.errors_e2e,
            errors_ma=counts.errors_ma,
            errors_bc=counts.errors_bc,
            trials=counts.trials,
            ser=counts.errors_e2e / n,
            ci95_low=lo,
            ci95_high=hi,
            analytic_bound=bound,
        )

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``ser``."""
        n = 2 * self.trials
        return math.sqrt(self.ser * (1.0 - self.ser) / n)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for k successes out of n."""
    if n <= 0:
        raise InsufficientStatisticsError("no trials")
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    ph = k / n
    z2 = z * z
    den = 1.0 + z2 / n
    centre = (ph + z2 / (2 * n)) / den
    half = z * math.sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / den
    # clip rounding so the point estimate always lies inside
    return max(0.0, min(ph, centre - half)), min(1.0, max(ph, centre + half))


def _bound_supported(cfg: SchemeConfig) -> bool:
    lay = cfg.layout
    if len(set(lay)) != 1 or cfg.delta2 != 0:
        return False
    fam = cfg.constellation.family
    if fam == "BPSK":
        # no transition moves both symbols, so the rotation never matters
        return cfg.scheme in ("pr-maxmin-rs", "maxmin-rs-noPR")
    if fam == "PAM" and cfg.scheme == "pr-maxmin-rs":
        r = math.remainder(cfg.upsilon_value - math.pi / 2, math.pi)
        return abs(r) < 1e-9
    return False


def analytic_bound(cfg: SchemeConfig, snr_db: float) -> float | None:
    """Per-direction E2E SER bound when the closed form covers ``cfg``, else None."""
    if not _bound_supported(cfg):
        return None
    spec = MgfSpec.from_snr_db(len(cfg.layout), cfg.layout[0], snr_db)
    return ser_e2e_bound(cfg.constellation, spec, cfg.p)


def _chunk_sizes(sweep: SweepSpec):
    full, rest = divmod(sweep.max_trials, sweep.chunk_trials)
    return [sweep.chunk_trials] * full + ([rest] if rest else [])


def _run_chunk(args) -> BatchCounts:
    cfg, snr_db, stream, n = args
    return run_batch(cfg, snr_db, stream, n)


def run_point(cfg: SchemeConfig, snr_db: float, sweep: SweepSpec, point: int = 0,
              executor: Executor | None = None) -> BatchCounts:
    """Simulate one SNR point under the chunked stopping rule."""
    base = RngStream(sweep.seed).substream(point)
    sizes = _chunk_sizes(sweep)
    wave = sweep.workers if executor is not None else 1
    total = BatchCounts()
    j = 0
    while j < len(sizes):
        jobs = [(cfg, snr_db, base.substream(i), sizes[i]) for i in range(j, min(j + wave, len(sizes)))]
        results = executor.map(_run_chunk, jobs) if executor is not None else map(_run_chunk, jobs)
        for res in results:
            total = total + res
            j += 1
            if total.errors_e2e >= sweep.min_errors:
                return total
    return total


class _Pool:
    """Process pool for ``workers > 1``; a no-op context otherwise."""

    def __init__(self, workers: int, executor: Executor | None = None):
        self.own = executor is None and workers > 1
        self.executor = ProcessPoolExecutor(max_workers=workers) if self.own else executor

    def __enter__(self):
        return self.executor

    def __exit__(self, *exc):
        if self.own:
            self.executor.shutdown()


def run_sweep(cfg: SchemeConfig, sweep: SweepSpec, executor: Executor | None = None,
              progress=None, with_bound: bool = True) -> list[SerRecord]:
    """SER at every grid point.  ``progress(record)`` is called after each point."""
    cfg = cfg.resolved()
    out = []
    with _Pool(sweep.workers, executor) as ex:
        for i, snr in enumerate(sweep.snr_grid):
            counts = run_point(cfg, snr, sweep, i, ex)
            bound = analytic_bound(cfg, snr) if with_bound else None
            rec = SerRecord.from_counts(snr, cfg.scheme, counts, bound)
            out.append(rec)
            if progress is not None:
                progress(rec)
    return out


@dataclass
class CompareReport:
    """Records per scheme label and the slope fitted over ``window``."""

    window: tuple[float, float]
    records: dict[str, list[SerRecord]] = field(default_factory=dict)
    slopes: dict[str, float] = field(default_factory=dict)

    def table(self) -> str:
        labels = list(self.records)
        grid = [r.snr_db for r in self.records[labels[0]]]
        head = ["snr_db"] + labels
        rows = [head]
        for i, snr in enumerate(grid):
            rows.append([f"{snr:g}"] + [f"{self.records[k][i].ser:.3e}" for k in labels])
        rows.append(["slope"] + [f"{self.slopes[k]:.2f}" if math.isfinite(self.slopes[k]) else "n/a" for k in labels])
        widths = [max(len(r[c]) for r in rows) for c in range(len(head))]
        return "\n".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows)


def _labels(cfgs) -> list[str]:
    names = [c.scheme for c in cfgs]
    if len(set(names)) == len(names):
        return names
    out = []
    for c in cfgs:
        diff = [f"{k}={v}" for k, v in c.to_dict().items()
                if k != "scheme" and any(getattr(o, k) != getattr(c, k) for o in cfgs)]
        out.append(c.scheme + ("[" + ",".join(diff) + "]" if diff else ""))
    if len(set(out)) != len(out):
        raise ConfigurationError("compared configurations must differ")
    return out


def compare_schemes(cfgs, sweep: SweepSpec, window: tuple[float, float] | None = None,
                    executor: Executor | None = None, progress=None) -> CompareReport:
    """Run every configuration on the same sweep and fit high-SNR slopes.

    The default window is the top three grid points.  A slope is NaN when
    the window holds a zero-error point.
    """
    cfgs = list(cfgs)
    if not cfgs:
        raise ConfigurationError("nothing to compare")
    ref = cfgs[0]
    for c in cfgs[1:]:
        if c.modulation != ref.modulation or c.layout != ref.layout:
            raise ConfigurationError("compared schemes must share modulation and layout")
    if window is None:
        top = sorted(sweep.snr_grid)[-3:]
        window = (top[0], top[-1])
    report = CompareReport(window=(float(window[0]), float(window[1])))
    with _Pool(sweep.workers, executor) as ex:
        for label, cfg in zip(_labels(cfgs), cfgs):
            recs = run_sweep(cfg, sweep, executor=ex, progress=progress)
            report.records[label] = recs
            pts = [(r.snr_db, r.ser) for r in recs if window[0] <= r.snr_db <= window[1]]
            try:
                report.slopes[label] = diversity_slope(pts)
            except InsufficientStatisticsError:
                report.slopes[label] = float("nan")
    return report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_results(records, cfg: SchemeConfig, sweep: SweepSpec, out_dir, stem: str = "ser") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and the ``<stem>.json`` sidecar with the resolved config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    csv_path.write_text(records_to_csv(records), encoding="utf-8")
    resolved = cfg.resolved()
    side = {
        "package_version": __version__,
        "scheme_config": resolved.to_dict(),
        "sweep": sweep.to_dict(),
        "seed": sweep.seed,
        "config_text": dump_config_text(resolved, sweep),
        "columns": list(CSV_COLUMNS),
    }
    json_path.write_text(json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path
