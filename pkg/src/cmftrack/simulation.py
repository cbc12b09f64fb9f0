"""Ground-truthed two-sensor test signals.

* :func:`mrwm_generate` - modified random walk: uniform noise, low-pass
  shaped, min-max normalized over the whole realization onto the parameter
  ranges.
* :func:`rwm_generate` - unshaped reflecting random walk (qualitative
  comparison only).
* :func:`batch_generate` - hold / linear ramp / hold of all three parameters.
* :func:`tone_generate` - stationary tone.
* :func:`add_noise` - independent white Gaussian noise per channel.

Sensor synthesis: ``x1 = A sin(Phi + phi/2)``, ``x2 = A sin(Phi - phi/2)``
with ``Phi`` the accumulated instantaneous phase, so sensor 1 leads by
``phi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import butter, lfilter

__all__ = [
    "MrwmParams",
    "TruthSeries",
    "SensorRecord",
    "synthesize",
    "minmax_normalize",
    "mrwm_generate",
    "rwm_generate",
    "batch_generate",
    "tone_generate",
    "add_noise",
]

PHASE_MODES = ("accumulated", "literal")


@dataclass(frozen=True)
class MrwmParams:
    sample_rate_hz: float = 2000.0
    shaping_cutoff_hz: float = 6.0
    amp_range: tuple = (0.05, 0.3)
    freq_range: tuple = (85.0, 100.0)
    phase_range: tuple = (0.0, 4.0)
    noise_sigma1: float = 0.0
    noise_sigma2: float = 0.0
    duration_samples: int = 120_000
    rng_seed: int = 0
    shaping_order: int = 2
    burn_in_s: float = 1.0
    param_noise_scale: float = 1.0
    phase_mode: str = "accumulated"

    def __post_init__(self):
        fs = self.sample_rate_hz
        if not fs > 0:
            raise ValueError("sample rate must be positive")
        for name in ("amp_range", "freq_range", "phase_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: min must not exceed max")
        if not fs > 2 * self.freq_range[1]:
            raise ValueError("sample rate must exceed twice the maximum frequency")
        if not 0 < self.shaping_cutoff_hz < fs / 2:
            raise ValueError("shaping cutoff must lie in (0, fs/2)")
        if self.noise_sigma1 < 0 or self.noise_sigma2 < 0:
            raise ValueError("noise sigma must be >= 0")
        if int(self.duration_samples) != self.duration_samples or self.duration_samples < 1:
            raise ValueError("duration_samples must be a positive integer")
        if self.phase_mode not in PHASE_MODES:
            raise ValueError(f"phase_mode must be one of {PHASE_MODES}")


@dataclass(frozen=True)
class TruthSeries:
    amplitude_v: np.ndarray
    frequency_hz: np.ndarray
    phase_diff_deg: np.ndarray
    sample_rate_hz: float = 2000.0

    def __post_init__(self):
        n = len(self.amplitude_v)
        if len(self.frequency_hz) != n or len(self.phase_diff_deg) != n:
            raise ValueError("truth series lengths differ")

    def __len__(self):
        return len(self.amplitude_v)

    @property
    def time_s(self):
        return np.arange(len(self)) / self.sample_rate_hz

    def slice(self, start, stop=None):
        s = slice(start, stop)
        return TruthSeries(self.amplitude_v[s], self.frequency_hz[s], self.phase_diff_deg[s],
                           self.sample_rate_hz)


@dataclass(frozen=True)
class SensorRecord:
    x1: np.ndarray
    x2: np.ndarray
    truth: TruthSeries
    seeds: dict = field(default_factory=dict)
    noise_sigma: tuple = (0.0, 0.0)
    phase_mode: str = "accumulated"

    def __post_init__(self):
        if len(self.x1) != len(self.x2) or len(self.x1) != len(self.truth):
            raise ValueError("record lengths differ")

    def __len__(self):
        return len(self.x1)

    @property
    def sample_rate_hz(self):
        return self.truth.sample_rate_hz


def synthesize(truth: TruthSeries, phase_mode="accumulated"):
    """Noise-free sensor pair for a truth series."""
    fs = truth.sample_rate_hz
    f = np.asarray(truth.frequency_hz, dtype=float)
    if phase_mode == "accumulated":
        Phi = np.cumsum(2 * np.pi * f / fs)
    elif phase_mode == "literal":
        # omega(n) * n as written; jumps when f varies
        Phi = 2 * np.pi * f * np.arange(len(f)) / fs
    else:
        raise ValueError(f"phase_mode must be one of {PHASE_MODES}")
    half = np.deg2rad(np.asarray(truth.phase_diff_deg, dtype=float)) / 2
    A = np.asarray(truth.amplitude_v, dtype=float)
    return A * np.sin(Phi + half), A * np.sin(Phi - half)


def minmax_normalize(u, lo, hi):
    """Affine map of ``u`` onto ``[lo, hi]`` attaining both bounds exactly.

    A constant ``u`` (or ``lo == hi``) maps to the midpoint.
    """
    u = np.asarray(u, dtype=float)
    umin, umax = u.min(), u.max()
    if umax == umin or lo == hi:
        return np.full(u.shape, 0.5 * (lo + hi))
    t = (u - umin) / (umax - umin)
    out = np.clip(lo + t * (hi - lo), lo, hi)
    out[t == 1.0] = hi
    out[t == 0.0] = lo
    return out


def _streams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _make_record(truth, sigma1, sigma2, rng1, rng2, seeds, phase_mode):
    x1, x2 = synthesize(truth, phase_mode)
    if sigma1 > 0:
        x1 = x1 + rng1.normal(0.0, sigma1, len(x1))
    if sigma2 > 0:
        x2 = x2 + rng2.normal(0.0, sigma2, len(x2))
    return SensorRecord(x1, x2, truth, seeds, (float(sigma1), float(sigma2)), phase_mode)


def mrwm_generate(params: MrwmParams = MrwmParams()) -> SensorRecord:
    """Modified random walk record (deterministic in ``params.rng_seed``)."""
    p = params
    n = int(p.duration_samples)
    fs = p.sample_rate_hz
    burn = int(round(p.burn_in_s * fs))
    b, a = butter(p.shaping_order, p.shaping_cutoff_hz, fs=fs)
    rA, rF, rP, r1, r2 = _streams(p.rng_seed, 5)
    traces = []
    for rng, (lo, hi) in ((rA, p.amp_range), (rF, p.freq_range), (rP, p.phase_range)):
        u = p.param_noise_scale * rng.uniform(-1.0, 1.0, n + burn)
        h = lfilter(b, a, u)[burn:]
        traces.append(minmax_normalize(h, lo, hi))
    truth = TruthSeries(traces[0], traces[1], traces[2], fs)
    seeds = {"rng_seed": int(p.rng_seed), "generator": "mrwm"}
    return _make_record(truth, p.noise_sigma1, p.noise_sigma2, r1, r2, seeds, p.phase_mode)


def _reflect(v, lo, hi):
    if hi == lo:
        return lo
    span = hi - lo
    r = np.mod(v - lo, 2 * span)
    return lo + np.where(r > span, 2 * span - r, r)


def rwm_generate(params: MrwmParams = MrwmParams(), step_fraction=0.01) -> SensorRecord:
    """Reflecting random walk with uniform increments (no shaping filter).

    Each parameter starts at its range midpoint and moves by
    ``step_fraction * (max - min) * U(-1, 1)`` per sample; excursions beyond
    the range are folded back inside.
    """
    p = params
    n = int(p.duration_samples)
    rA, rF, rP, r1, r2 = _streams(p.rng_seed, 5)
    traces = []
    for rng, (lo, hi) in ((rA, p.amp_range), (rF, p.freq_range), (rP, p.phase_range)):
        inc = step_fraction * p.param_noise_scale * (hi - lo) * rng.uniform(-1.0, 1.0, n)
        v = np.empty(n)
        cur = 0.5 * (lo + hi)
        for i in range(n):
            cur = float(_reflect(cur + inc[i], lo, hi))
            v[i] = cur
        traces.append(v)
    truth = TruthSeries(traces[0], traces[1], traces[2], p.sample_rate_hz)
    seeds = {"rng_seed": int(p.rng_seed), "generator": "rwm"}
    return _make_record(truth, p.noise_sigma1, p.noise_sigma2, r1, r2, seeds, p.phase_mode)


def batch_generate(sample_rate_hz=2000.0, ramp_seconds=0.5, pre_seconds=0.5, post_seconds=0.5,
                   start=(0.3, 100.0, 0.0), end=(0.05, 85.0, 4.0)) -> SensorRecord:
    """Hold ``start``, ramp linearly to ``end`` over ``ramp_seconds``, hold ``end``.

    ``start``/``end`` are ``(amplitude_v, frequency_hz, phase_diff_deg)``.
    Noise-free; use :func:`add_noise` for noisy variants.
    """
    if not ramp_seconds > 0:
        raise ValueError("ramp_seconds must be positive")
    fs = float(sample_rate_hz)
    n_pre = int(round(pre_seconds * fs))
    n_ramp = int(round(ramp_seconds * fs))
    n_post = int(round(post_seconds * fs))
    t = np.concatenate([np.zeros(n_pre), np.arange(n_ramp + 1) / n_ramp, np.ones(n_post)])
    cols = [s + (e - s) * t for s, e in zip(start, end)]
    for c, e in zip(cols, end):
        c[t == 1.0] = e
    truth = TruthSeries(cols[0], cols[1], cols[2], fs)
    return _make_record(truth, 0.0, 0.0, None, None, {"generator": "batch"}, "accumulated")


def tone_generate(freq_hz=92.5, amp_v=0.1, phase_diff_deg=2.0, duration_s=2.0,
                  sample_rate_hz=2000.0) -> SensorRecord:
    n = int(round(duration_s * sample_rate_hz))
    truth = TruthSeries(np.full(n, float(amp_v)), np.full(n, float(freq_hz)),
                        np.full(n, float(phase_diff_deg)), float(sample_rate_hz))
    return _make_record(truth, 0.0, 0.0, None, None, {"generator": "tone"}, "accumulated")


def add_noise(record: SensorRecord, sigma_v, seed=0) -> SensorRecord:
    """Add independent N(0, sigma_v^2) noise to each channel; truth unchanged."""
    if sigma_v < 0:
        raise ValueError("sigma_v must be >= 0")
    if sigma_v == 0:
        return replace(record)
    r1, r2 = _streams(seed, 2)
    n = len(record)
    seeds = dict(record.seeds, noise_seed=int(seed))
    s0 = record.noise_sigma
    return replace(record,
                   x1=record.x1 + r1.normal(0.0, sigma_v, n),
                   x2=record.x2 + r2.normal(0.0, sigma_v, n),
                   seeds=seeds,
                   noise_sigma=(float(np.hypot(s0[0], sigma_v)), float(np.hypot(s0[1], sigma_v))))
