"""Scoring of tracker outputs against simulator truth.

RMSE per parameter, cross-correlation tracking delay, SNR of a record,
and the per-sample arithmetic audit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .baselines import DtftAnfTracker, HilbertTracker
from .estimates import EstimateSeries
from .ops import OpCounters
from .simulation import MrwmParams, SensorRecord, TruthSeries, mrwm_generate, synthesize
from .tracking import METHODS as COMPLEX_METHODS
from .tracking import ComplexTracker, TrackerConfig

__all__ = [
    "ALL_METHODS",
    "NoValidSamplesError",
    "AmbiguousPeakError",
    "make_tracker",
    "run_tracker",
    "rmse",
    "parameter_delays",
    "tracking_delay",
    "measure_snr",
    "steady_state_mean",
    "audit_complexity",
    "EvaluationReport",
    "evaluate",
    "format_table",
    "DEFAULT_SKIP_S",
]

ALL_METHODS = ("cbf", "cnf", "cbf-cnf", "hilbert", "anf-dtft")
DEFAULT_SKIP_S = 0.2

_PARAMS = (
    ("amplitude", "amplitude_v", "amplitude_v"),
    ("frequency", "frequency_hz", "frequency_hz"),
    ("phase", "phase_diff_deg", "phase_diff_deg"),
)


class NoValidSamplesError(ValueError):
    pass


class AmbiguousPeakError(ValueError):
    pass


# ----------------------------------------------------------------------------
# trackers by name

def make_tracker(method, sample_rate_hz=2000.0, counters: Optional[OpCounters] = None,
                 **overrides):
    """Construct a tracker by method name (see ``ALL_METHODS``).

    ``overrides`` go to :class:`TrackerConfig` for the complex methods and to
    the constructor for the baselines.
    """
    method = method.lower()
    if method in COMPLEX_METHODS:
        cfg = TrackerConfig(method=method, sample_rate_hz=sample_rate_hz, **overrides)
        return ComplexTracker(cfg, counters=counters)
    if method == "hilbert":
        return HilbertTracker(sample_rate_hz=sample_rate_hz, counters=counters, **overrides)
    if method in ("anf-dtft", "dtft-anf", "dtft"):
        return DtftAnfTracker(sample_rate_hz=sample_rate_hz, counters=counters, **overrides)
    raise ValueError(f"unknown method {method!r}; expected one of {ALL_METHODS}")


def run_tracker(method, record: SensorRecord, **overrides) -> EstimateSeries:
    tr = make_tracker(method, record.sample_rate_hz, **overrides)
    s = tr.process(record.x1, record.x2)
    s.method = method
    return s


# ----------------------------------------------------------------------------
# error metrics

def _scored(estimates, truth, skip):
    n = len(truth)
    if len(estimates) != n:
        raise ValueError(f"estimate length {len(estimates)} != truth length {n}")
    if not 0 <= skip < n:
        raise ValueError("skip must lie in [0, length)")
    mask = np.asarray(estimates.valid, dtype=bool).copy()
    mask[:skip] = False
    if not mask.any():
        raise NoValidSamplesError("no valid estimates after the transient skip")
    return mask


def rmse(estimates: EstimateSeries, truth: TruthSeries, skip=0):
    """Root-mean-square error per parameter over valid samples from ``skip`` on.

    Returns ``{"amplitude_v", "frequency_hz", "phase_deg", "samples"}``; the
    amplitude estimate is the mean of the two sensor amplitudes.
    """
    mask = _scored(estimates, truth, skip)
    out = {}
    for key, est_attr, truth_attr in _PARAMS:
        e = np.asarray(getattr(estimates, est_attr))[mask]
        t = np.asarray(getattr(truth, truth_attr))[mask]
        out[key] = float(np.sqrt(np.mean((e - t) ** 2)))
    return {"amplitude_v": out["amplitude"], "frequency_hz": out["frequency"],
            "phase_deg": out["phase"], "samples": int(mask.sum())}


def _xcorr_lag(t, e, max_lag):
    """Lag (samples, estimate behind truth positive) of the peak of the
    normalized cross-correlation, refined by a parabola through the peak.

    Each lag correlates the fixed central part of ``t`` with the matching
    shifted part of ``e``, both mean-removed over that overlap.
    """
    n = len(t)
    tc = t[max_lag:n - max_lag]
    tc = tc - tc.mean()
    tn = float(np.dot(tc, tc))
    lags = np.arange(-max_lag, max_lag + 1)
    r = np.empty(len(lags))
    for i, L in enumerate(lags):
        ec = e[max_lag + L:n - max_lag + L]
        ec = ec - ec.mean()
        den = math.sqrt(tn * float(np.dot(ec, ec)))
        r[i] = np.dot(tc, ec) / den if den > 0 else 0.0
    k = int(np.argmax(r))
    if k == 0 or k == len(r) - 1:
        raise AmbiguousPeakError("correlation peak at the edge of the search window")
    y0, y1, y2 = r[k - 1], r[k], r[k + 1]
    curv = y0 - 2 * y1 + y2
    if not curv < -1e-15 * abs(y1):
        raise AmbiguousPeakError("flat correlation peak")
    return float(lags[k] + 0.5 * (y0 - y2) / curv)


def parameter_delays(estimates, truth, max_lag_ms=50.0, skip=0):
    """Per-parameter tracking delay in ms (parameters with a flat truth are skipped)."""
    fs = truth.sample_rate_hz
    max_lag = int(math.ceil(max_lag_ms * fs / 1000.0))
    valid = np.asarray(estimates.valid, dtype=bool).copy()
    valid[:skip] = False
    bad = np.flatnonzero(~valid)
    start = int(bad[-1]) + 1 if len(bad) else 0
    if len(valid) - start < 10 * max_lag:
        raise ValueError("scored overlap must be at least ten times max_lag")
    out = {}
    for key, est_attr, truth_attr in _PARAMS:
        t = np.asarray(getattr(truth, truth_attr), dtype=float)[start:]
        e = np.asarray(getattr(estimates, est_attr), dtype=float)[start:]
        if np.ptp(t) == 0:
            continue
        out[key] = _xcorr_lag(t - t.mean(), e - e.mean(), max_lag) * 1000.0 / fs
    if not out:
        raise AmbiguousPeakError("truth is constant in every parameter")
    return out


def tracking_delay(estimates, truth, max_lag_ms=50.0, skip=0):
    """Mean over parameters of the cross-correlation delay, in ms."""
    return float(np.mean(list(parameter_delays(estimates, truth, max_lag_ms, skip).values())))


def measure_snr(record: SensorRecord):
    """Signal-to-noise power ratio in dB, both channels pooled.

    The noise is the record minus a noise-free resynthesis from its truth;
    a record without noise returns ``inf``.
    """
    c1, c2 = synthesize(record.truth, record.phase_mode)
    sig = float(np.sum(c1 ** 2) + np.sum(c2 ** 2))
    noise = float(np.sum((record.x1 - c1) ** 2) + np.sum((record.x2 - c2) ** 2))
    if noise <= 1e-30 * max(sig, 1e-300):
        return math.inf
    return 10.0 * math.log10(sig / noise)


def steady_state_mean(values, window="blackman"):
    """Window-weighted mean of a steady-state segment.

    A smooth taper suppresses the bias of a plain mean over a segment that
    does not contain whole periods of a residual ripple.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0 or np.any(~np.isfinite(v)):
        raise ValueError("steady-state segment must be nonempty and finite")
    w = np.blackman(v.size + 2)[1:-1] if window == "blackman" else np.ones(v.size)
    return float(np.dot(w, v) / np.sum(w))


# ----------------------------------------------------------------------------
# complexity

def audit_complexity(method, record: Optional[SensorRecord] = None, n_samples=4000, **overrides):
    """Instrumented run; returns the :class:`OpCounters` of the tracker.

    The default input is a 5 mV-noise MRWM record (seed 0).
    """
    if n_samples < 1000:
        raise ValueError("audit needs at least 1000 samples")
    if record is None:
        record = mrwm_generate(MrwmParams(duration_samples=n_samples, noise_sigma1=0.005,
                                          noise_sigma2=0.005, rng_seed=0))
    c = OpCounters()
    tr = make_tracker(method, record.sample_rate_hz, counters=c, **overrides)
    x1 = record.x1[:n_samples].tolist()
    x2 = record.x2[:n_samples].tolist()
    for a, b in zip(x1, x2):
        tr.step(a, b)
    return c


# ----------------------------------------------------------------------------
# reports

@dataclass
class EvaluationReport:
    method: str
    rmse_amplitude_v: float
    rmse_frequency_hz: float
    rmse_phase_deg: float
    tracking_delay_ms: Optional[float]
    samples_scored: int
    transient_skipped: int
    ops: dict = field(default_factory=dict)

    def as_row(self):
        row = asdict(self)
        ops = row.pop("ops")
        row.update(ops)
        return row


def evaluate(estimates: EstimateSeries, truth: TruthSeries, method=None, skip=None,
             delay=False, max_lag_ms=50.0, counters: Optional[OpCounters] = None):
    fs = truth.sample_rate_hz
    skip = int(round(DEFAULT_SKIP_S * fs)) if skip is None else int(skip)
    r = rmse(estimates, truth, skip)
    d = None
    if delay:
        try:
            d = tracking_delay(estimates, truth, max_lag_ms, skip)
        except ValueError:
            # flat truth, edge peak, or record too short for the lag window
            d = None
    ops = {}
    if counters is not None:
        ps = counters.per_sample()
        ops = {
            "additions_per_sample": ps["additions_per_sample"],
            "multiplications_per_sample": ps["multiplications_per_sample"],
            "unit_additions_per_sample": ps["unit_additions_per_sample"],
            "unit_multiplications_per_sample": ps["unit_multiplications_per_sample"],
            "static_storage_bytes": ps["static_storage_bytes"],
        }
    return EvaluationReport(method or estimates.method, r["amplitude_v"], r["frequency_hz"],
                            r["phase_deg"], d, r["samples"], skip, ops)


_ROWS = (
    ("Amplitude RMSE (V)", "rmse_amplitude_v"),
    ("Frequency RMSE (Hz)", "rmse_frequency_hz"),
    ("Phase diff RMSE (deg)", "rmse_phase_deg"),
    ("Tracking delay (ms)", "tracking_delay_ms"),
    ("Samples scored", "samples_scored"),
    ("Additions", "unit_additions_per_sample"),
    ("Multiplications", "unit_multiplications_per_sample"),
    ("Static storage (bytes)", "static_storage_bytes"),
)


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.3e}"


def format_table(reports):
    """Aligned plain-text table, one column per method, one row per metric."""
    reports = list(reports)
    rows = [["Method"] + [r.method for r in reports]]
    for label, key in _ROWS:
        vals = [r.as_row().get(key) for r in reports]
        if all(v is None or (isinstance(v, float) and math.isnan(v)) for v in vals):
            continue
        rows.append([label] + [_fmt(v) for v in vals])
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for j, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"
