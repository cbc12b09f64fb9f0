"""Complex-filter tracking of two Coriolis sensor signals.

Each sensor stream is passed through an identical complex filter chain
(CBF, CNF, or CBF followed by CNF) to obtain its analytic form. From the
two analytic samples the tracker extracts

* the phase difference ``arg(z1 * conj(z2))`` (sensor 1 leading is positive),
* the frequency from the phase advance of sensor 1 over ``K`` samples,
* each amplitude as ``|z| / gain``, where ``gain`` is the chain's magnitude
  response at the current frequency estimate.

Filters are direct-form II transposed with complex coefficients on a real
input stream. :meth:`ComplexTracker.step` is the per-sample path (optionally
instrumented with :class:`~cmftrack.ops.OpCounters`);
:meth:`ComplexTracker.process` runs a whole block through the same
recursion with ``scipy.signal.lfilter`` and carries the state forward.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .estimates import EstimateSeries, NonFiniteInputError, TrackerEstimate
from .filters import (
    DesignError,
    PrototypeFilter,
    complex_shift,
    design_butterworth,
    frequency_response,
    group_delay,
    hz_to_rad,
)
from .ops import COMPLEX_BYTES, REAL_BYTES, OpCounters

__all__ = [
    "METHODS",
    "ZeroMagnitudeError",
    "NotchInBandError",
    "AnalyticPair",
    "FilterState",
    "FilterChain",
    "filter_step",
    "phase_difference",
    "amplitude",
    "frequency_from_span",
    "wrap_angle",
    "build_comb_cnf",
    "default_prototypes",
    "TrackerConfig",
    "ComplexTracker",
    "tracker_step",
]

METHODS = ("cbf", "cnf", "cbf-cnf")

# below this analytic magnitude an estimate is flagged invalid
MIN_MAGNITUDE = 1e-12
# frequency from z1 + z2 (swap-symmetric) or from channel 1 alone
FREQ_SOURCES = ("sum", "x1")


class ZeroMagnitudeError(ValueError):
    pass


class NotchInBandError(DesignError):
    pass


def wrap_angle(x):
    """Wrap radians to (-pi, pi]."""
    y = np.angle(np.exp(1j * np.asarray(x, dtype=float)))
    y = np.where(y <= -np.pi, y + 2 * np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def _arg(z):
    # angle in (-pi, pi]
    a = np.angle(z)
    if np.ndim(a) == 0:
        return math.pi if a <= -math.pi else float(a)
    return np.where(a <= -np.pi, np.pi, a)


@dataclass(frozen=True)
class AnalyticPair:
    z1: complex
    z2: complex


# ----------------------------------------------------------------------------
# filtering

class FilterState:
    """One complex IIR section with its running delay line.

    ``gain`` scales the numerator; the tracker uses 2 on the first section
    so that a real sinusoid of amplitude A yields an analytic sample of
    magnitude A (a real tone splits its power between +f and -f).
    """

    def __init__(self, coefficients, gain=1.0):
        self.coefficients = coefficients
        b = np.asarray(coefficients.numerator, dtype=complex) * gain
        a = np.asarray(coefficients.denominator, dtype=complex)
        if a[0] != 1:
            b, a = b / a[0], a / a[0]
        self._b = b
        self._a = a
        self._bl = [complex(v) for v in b]
        self._al = [complex(v) for v in a]
        self._nstate = max(len(b), len(a)) - 1
        self.delay_line = np.zeros(self._nstate, dtype=complex)
        self._s = [0j] * self._nstate
        self.samples_processed = 0

    @property
    def numerator(self):
        return self._b

    @property
    def denominator(self):
        return self._a

    def reset(self):
        self._s = [0j] * self._nstate
        self.delay_line = np.zeros(self._nstate, dtype=complex)
        self.samples_processed = 0

    def _sync_from_list(self):
        self.delay_line = np.array(self._s, dtype=complex)

    def step(self, x, counters: Optional[OpCounters] = None):
        b, a, s = self._bl, self._al, self._s
        nb, na, ns = len(b), len(a), self._nstate
        y = b[0] * x + (s[0] if ns else 0j)
        for i in range(1, ns + 1):
            acc = s[i] if i < ns else 0j
            if i < nb:
                acc += b[i] * x
            if i < na:
                acc -= a[i] * y
            s[i - 1] = acc
        self.samples_processed += 1
        if counters is not None:
            real_in = isinstance(x, (float, int)) or np.isrealobj(x)
            if real_in:
                counters.rcmul(nb, tag="filter")
            else:
                counters.cmul(nb, tag="filter")
            counters.cmul(na - 1, tag="filter")
            # y = b0 x + s0, then each state update adds its terms
            adds = 1 if ns else 0
            for i in range(1, ns + 1):
                terms = (i < ns) + (i < nb) + (i < na)
                adds += max(terms - 1, 0)
            counters.cadd(adds, tag="filter")
        self.delay_line = np.array(s, dtype=complex)
        return y

    def process(self, x):
        x = np.asarray(x)
        if self._nstate == 0:
            y = self._b[0] * x.astype(complex)
        else:
            y, zf = lfilter(self._b, self._a, x, zi=np.array(self._s, dtype=complex))
            self._s = [complex(v) for v in zf]
        self.samples_processed += len(x)
        self._sync_from_list()
        return y

    def storage_bytes(self):
        coeff = (len(self._b) + len(self._a) - 1) * COMPLEX_BYTES
        return coeff, self._nstate * COMPLEX_BYTES

    def response(self, omega):
        return frequency_response(self, omega)


def filter_step(state, x, counters=None):
    """Advance ``state`` by one real sample and return the complex output."""
    if not math.isfinite(x):
        raise NonFiniteInputError(f"non-finite input sample {x!r}")
    return state.step(float(x), counters)


class FilterChain:
    """Series cascade of :class:`FilterState` sections (empty = identity)."""

    def __init__(self, sections: Sequence[FilterState] = ()):
        self.sections = list(sections)

    def __len__(self):
        return len(self.sections)

    def step(self, x, counters=None):
        y = x
        for sec in self.sections:
            y = sec.step(y, counters)
        return complex(y)

    def process(self, x):
        y = np.asarray(x, dtype=float)
        for sec in self.sections:
            y = sec.process(y)
        return np.asarray(y, dtype=complex)

    def response(self, omega):
        h = np.ones(np.shape(omega), dtype=complex)
        for sec in self.sections:
            h = h * frequency_response(sec, omega)
        return h

    def group_delay(self, omega):
        return sum(group_delay(sec, omega) for sec in self.sections) if self.sections else 0.0

    def reset(self):
        for sec in self.sections:
            sec.reset()

    def storage_bytes(self):
        coeff = state = 0
        for sec in self.sections:
            c, s = sec.storage_bytes()
            coeff += c
            state += s
        return coeff, state

    def copy_fresh(self):
        """Same coefficients, zeroed state."""
        return FilterChain(
            [FilterState(sec.coefficients, gain=1.0)._with_raw(sec) for sec in self.sections]
        )


def _with_raw(self, other):
    # copy the (possibly gain-scaled) realized coefficients of another section
    self._b = other._b.copy()
    self._a = other._a.copy()
    self._bl = list(other._bl)
    self._al = list(other._al)
    return self


FilterState._with_raw = _with_raw


# ----------------------------------------------------------------------------
# parameter extraction

def phase_difference(pair_or_z1, z2=None):
    """Phase lead of sensor 1 over sensor 2, radians in (-pi, pi]."""
    if isinstance(pair_or_z1, AnalyticPair):
        z1, z2 = pair_or_z1.z1, pair_or_z1.z2
    else:
        z1 = pair_or_z1
    if abs(z1) == 0 or abs(z2) == 0:
        raise ZeroMagnitudeError("phase difference of a zero-magnitude sample")
    return _arg(z1 * np.conj(z2))


def amplitude(z, gain=1.0):
    """``|z| / gain``."""
    if not gain > 0:
        raise ValueError("gain must be positive")
    return abs(z) / gain


def frequency_from_span(z_now, z_past, span, sample_rate_hz):
    """Frequency in Hz from the phase advance over ``span`` samples."""
    if abs(z_now) == 0 or abs(z_past) == 0:
        raise ZeroMagnitudeError("frequency from a zero-magnitude sample")
    return _arg(z_now * np.conj(z_past)) * sample_rate_hz / (2 * math.pi * span)


# ----------------------------------------------------------------------------
# filter construction

def default_prototypes(method, sample_rate_hz=2000.0):
    """Default prototypes: ``(cbf_prototype, cnf_prototype)``, either may be None.

    * CBF: 5th-order Butterworth low-pass, 60 Hz cutoff.
    * CNF: 4th-order Butterworth high-pass, 40 Hz cutoff (>= 48 dB rejection
      within 10 Hz of the notch).
    * CBF-CNF: 3rd-order 60 Hz low-pass followed by the CNF above.
    """
    if method == "cbf":
        return design_butterworth(5, 60.0, "low-pass", sample_rate_hz), None
    if method == "cnf":
        return None, design_butterworth(4, 40.0, "high-pass", sample_rate_hz)
    if method == "cbf-cnf":
        return (design_butterworth(3, 60.0, "low-pass", sample_rate_hz),
                design_butterworth(4, 40.0, "high-pass", sample_rate_hz))
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def build_comb_cnf(notches_hz, prototype, sample_rate_hz=None, band_hz=(85.0, 100.0),
                   guard_hz=5.0):
    """Cascade of complex notch sections, one per signed notch frequency.

    Each section is ``prototype`` (a high-pass) rotated so that its DC
    stopband lands on the notch. Notches must stay ``guard_hz`` away from
    the positive tracking band.
    """
    fs = sample_rate_hz or prototype.sample_rate_hz
    lo, hi = band_hz
    sections = []
    for f in notches_hz:
        if not abs(f) < fs / 2:
            raise DesignError(f"notch {f} Hz beyond Nyquist")
        if lo - guard_hz <= f <= hi + guard_hz:
            raise NotchInBandError(
                f"notch {f} Hz within {guard_hz} Hz of the tracking band {band_hz}"
            )
        sections.append(FilterState(complex_shift(prototype, float(hz_to_rad(f, fs)))))
    return FilterChain(sections)


@dataclass(frozen=True)
class TrackerConfig:
    """Configuration of a complex-filter tracker.

    ``freq_span_samples`` is the span K of the phase-advance frequency
    estimate; it must satisfy ``K * f / fs < 1/2`` over the band. Frequency
    estimates are limited to ``[0, fs / (2 K))``, the unambiguous range.
    ``freq_source="sum"`` takes the phase advance of ``z1 + z2`` (the analytic
    signal of ``x1 + x2``), which is symmetric in the two channels; ``"x1"``
    uses channel 1 alone.
    """

    method: str = "cbf"
    sample_rate_hz: float = 2000.0
    center_freq_hz: float = 92.5
    freq_span_samples: int = 8
    warmup_samples: Optional[int] = None
    gain_compensation: bool = True
    band_hz: tuple = (85.0, 100.0)
    comb_notches_hz: tuple = ()
    cbf_prototype: Optional[PrototypeFilter] = field(default=None, compare=False)
    cnf_prototype: Optional[PrototypeFilter] = field(default=None, compare=False)
    gain_table_points: int = 256
    freq_source: str = "sum"

    def __post_init__(self):
        if self.freq_source not in FREQ_SOURCES:
            raise ValueError(f"freq_source must be one of {FREQ_SOURCES}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        k = self.freq_span_samples
        if isinstance(k, bool) or int(k) != k or k < 1:
            raise ValueError("freq_span_samples must be an integer >= 1")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample rate must be positive")
        f_max = max(self.band_hz)
        if not k * 2 * math.pi * f_max / self.sample_rate_hz < math.pi:
            raise ValueError(
                f"span K={k} makes the phase step ambiguous at {f_max} Hz "
                f"(need K < {self.sample_rate_hz / (2 * f_max):g})"
            )
        if self.warmup_samples is not None and self.warmup_samples < 0:
            raise ValueError("warmup_samples must be >= 0")

    @property
    def freq_limits_hz(self):
        return (0.0, self.sample_rate_hz / (2 * self.freq_span_samples))


class ComplexTracker:
    """Streaming amplitude/frequency/phase-difference tracker (CBF, CNF, CBF-CNF)."""

    def __init__(self, config: TrackerConfig = TrackerConfig(), counters=None):
        self.config = config
        self.counters = counters
        fs = config.sample_rate_hz
        theta = float(hz_to_rad(config.center_freq_hz, fs))
        cbf_proto, cnf_proto = default_prototypes(config.method, fs)
        if config.cbf_prototype is not None:
            cbf_proto = config.cbf_prototype
        if config.cnf_prototype is not None:
            cnf_proto = config.cnf_prototype

        def make_chain():
            sections = []
            if config.method in ("cbf", "cbf-cnf"):
                sections.append(FilterState(complex_shift(cbf_proto, theta)))
            if config.method in ("cnf", "cbf-cnf"):
                if config.comb_notches_hz:
                    sections += build_comb_cnf(config.comb_notches_hz, cnf_proto, fs,
                                               config.band_hz).sections
                else:
                    sections.append(FilterState(complex_shift(cnf_proto, -theta)))
            # analytic scaling folded into the first numerator
            first = sections[0]
            sections[0] = FilterState(first.coefficients, gain=2.0)
            return FilterChain(sections)

        self.chain1 = make_chain()
        self.chain2 = make_chain()
        self.span = int(config.freq_span_samples)
        self._sum = config.freq_source == "sum"
        self._lo, self._hi = config.freq_limits_hz

        w_center = float(hz_to_rad(config.center_freq_hz, fs))
        if config.warmup_samples is None:
            gd = self.chain1.group_delay(w_center)
            self.warmup_samples = int(math.ceil(5 * max(gd, 0.0))) + self.span
        else:
            self.warmup_samples = int(config.warmup_samples)

        # |H| of the chain (with analytic scaling removed) on a uniform grid
        n = max(int(config.gain_table_points), 2)
        self._gain_f0 = self._lo
        self._gain_df = (self._hi - self._lo) / (n - 1)
        grid = self._lo + self._gain_df * np.arange(n)
        self._gain_table = np.maximum(
            np.abs(self.chain1.response(hz_to_rad(grid, fs))) / 2.0, 1e-12
        )
        self._gain_list = [float(g) for g in self._gain_table]
        self._center_gain = self.gain_at(config.center_freq_hz)

        self._ring = deque(maxlen=self.span)
        self.samples_processed = 0
        self._rad_to_deg = 180.0 / math.pi
        self._freq_scale = fs / (2 * math.pi * self.span)

        if counters is not None:
            counters.static_storage_bytes = self.storage_bytes()

    # -- helpers -------------------------------------------------------------
    def gain_at(self, freq_hz):
        """Interpolated analytic gain of the chain at ``freq_hz`` (scalar or array)."""
        pos = (np.asarray(freq_hz, dtype=float) - self._gain_f0) / self._gain_df
        pos = np.clip(pos, 0, len(self._gain_table) - 1)
        g = np.interp(pos, np.arange(len(self._gain_table)), self._gain_table)
        return float(g) if np.ndim(g) == 0 else g

    def _gain_scalar(self, freq_hz):
        pos = (freq_hz - self._gain_f0) / self._gain_df
        n = len(self._gain_list)
        if pos <= 0:
            return self._gain_list[0]
        if pos >= n - 1:
            return self._gain_list[-1]
        i = int(pos)
        frac = pos - i
        g0 = self._gain_list[i]
        return g0 + frac * (self._gain_list[i + 1] - g0)

    def storage_bytes(self):
        """Static storage: coefficients once, delay lines and span ring per channel,
        gain table and scalar constants."""
        coeff, state = self.chain1.storage_bytes()
        ring = self.span * COMPLEX_BYTES
        table = len(self._gain_table) * REAL_BYTES if self.config.gain_compensation else 0
        scalars = 4 * REAL_BYTES
        return coeff + 2 * state + ring + table + scalars

    def reset(self):
        self.chain1.reset()
        self.chain2.reset()
        self._ring.clear()
        self.samples_processed = 0

    # -- streaming -----------------------------------------------------------
    def step(self, x1, x2):
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise NonFiniteInputError(f"non-finite input ({x1!r}, {x2!r})")
        c = self.counters
        z1 = self.chain1.step(float(x1), c)
        z2 = self.chain2.step(float(x2), c)
        n = self.samples_processed
        self.samples_processed += 1

        m1, m2 = abs(z1), abs(z2)
        ok = m1 >= MIN_MAGNITUDE and m2 >= MIN_MAGNITUDE

        phase = _arg(z1 * z2.conjugate()) * self._rad_to_deg if ok else math.nan

        zf = z1 + z2 if self._sum else z1
        freq = math.nan
        if len(self._ring) == self.span:
            past = self._ring[0]
            if ok and abs(zf) >= MIN_MAGNITUDE and abs(past) >= MIN_MAGNITUDE:
                freq = _arg(zf * past.conjugate()) * self._freq_scale
                freq = min(max(freq, self._lo), self._hi)
            else:
                ok = False
        else:
            ok = False
        self._ring.append(zf)

        if self.config.gain_compensation:
            gain = self._gain_scalar(freq if freq == freq else self.config.center_freq_hz)
        else:
            gain = 1.0
        a1 = m1 / gain
        a2 = m2 / gain

        if c is not None:
            c.tick()
            c.cmul(1, tag="phase")        # z1 * conj(z2)
            c.arctan(1)
            c.mul(1, tag="phase")         # to degrees
            if self._sum:
                c.cadd(1, tag="frequency")  # z1 + z2
            c.cmul(1, tag="frequency")    # z * conj(z[n-K])
            c.arctan(1)
            c.mul(1, tag="frequency")     # to Hz
            c.mul(4, tag="amplitude")     # |z|^2 for both channels
            c.add(2, tag="amplitude")
            c.func(2, tag="amplitude")    # square roots
            if self.config.gain_compensation:
                c.mul(2, tag="gain")      # table position and interpolation
                c.add(3, tag="gain")
                c.mul(2, tag="amplitude")  # divide by gain

        return TrackerEstimate(a1, a2, freq, phase, n, bool(ok and n >= self.warmup_samples))

    # -- block ---------------------------------------------------------------
    def process(self, x1, x2):
        """Track whole arrays; equivalent to calling :meth:`step` per sample."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if x1.shape != x2.shape or x1.ndim != 1:
            raise ValueError("x1 and x2 must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
            raise NonFiniteInputError("non-finite input in block")
        n = len(x1)
        start = self.samples_processed
        z1 = self.chain1.process(x1)
        z2 = self.chain2.process(x2)

        m1, m2 = np.abs(z1), np.abs(z2)
        ok = (m1 >= MIN_MAGNITUDE) & (m2 >= MIN_MAGNITUDE)
        with np.errstate(invalid="ignore"):
            phase = np.where(ok, _arg(z1 * np.conj(z2)) * self._rad_to_deg, np.nan)

        zf = z1 + z2 if self._sum else z1
        hist = np.concatenate([np.array(self._ring, dtype=complex), zf])
        nhist = len(self._ring)
        K = self.span
        freq = np.full(n, np.nan)
        have = np.arange(n) + nhist >= K
        idx = np.flatnonzero(have)
        past = hist[idx + nhist - K]
        good = ok[idx] & (np.abs(zf[idx]) >= MIN_MAGNITUDE) & (np.abs(past) >= MIN_MAGNITUDE)
        f = _arg(zf[idx] * np.conj(past)) * self._freq_scale
        f = np.clip(f, self._lo, self._hi)
        freq[idx[good]] = f[good]
        ok = ok & have
        ok[idx[~good]] = False
        for z in hist[-K:]:
            self._ring.append(complex(z))
        self.samples_processed += n

        if self.config.gain_compensation:
            gain = self.gain_at(np.where(np.isnan(freq), self.config.center_freq_hz, freq))
        else:
            gain = np.ones(n)
        index = start + np.arange(n)
        valid = ok & (index >= self.warmup_samples)
        return EstimateSeries(m1 / gain, m2 / gain, freq, phase, index, valid,
                              self.config.method)


def tracker_step(tracker, x1, x2):
    """Push one sample pair through ``tracker`` and return its estimate."""
    return tracker.step(x1, x2)
