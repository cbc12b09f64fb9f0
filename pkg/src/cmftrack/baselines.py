"""Reference trackers: Hilbert-FIR analytic signal, and an adaptive notch
filter (ANF) for frequency with a sliding DTFT for amplitude and phase.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .estimates import EstimateSeries, NonFiniteInputError, TrackerEstimate
from .filters import DesignError, parse_coefficients
from .ops import COMPLEX_BYTES, REAL_BYTES, OpCounters
from .tracking import FREQ_SOURCES, MIN_MAGNITUDE, _arg

__all__ = [
    "design_hilbert_fir",
    "load_hilbert_taps",
    "HilbertTracker",
    "hilbert_step",
    "AnfState",
    "anf_step",
    "anf_bandwidth",
    "anf_response",
    "UnprimedBufferError",
    "DtftState",
    "dtft_step",
    "dtft_direct",
    "DtftAnfTracker",
    "dtft_anf_step",
]


# ----------------------------------------------------------------------------
# Hilbert transformer

def design_hilbert_fir(length=49):
    """Hamming-windowed ideal Hilbert transformer (odd length, antisymmetric).

    Taps are ``2 / (pi k)`` for odd offsets ``k`` from the centre and zero for
    even offsets, tapered by a Hamming window.
    """
    if isinstance(length, bool) or int(length) != length or length < 7 or length % 2 == 0:
        raise DesignError(f"Hilbert FIR length must be an odd integer >= 7, got {length!r}")
    length = int(length)
    c = length // 2
    k = np.arange(length) - c
    h = np.zeros(length)
    odd = k % 2 != 0
    h[odd] = 2.0 / (np.pi * k[odd])
    h *= np.hamming(length)
    # enforce exact antisymmetry
    h = 0.5 * (h - h[::-1])
    return h


def load_hilbert_taps(source):
    """Read Hilbert taps from coefficient-file text or a path (``b:`` line, ``a: 1``)."""
    if isinstance(source, Path) or ("\n" not in str(source) and ":" not in str(source)):
        text = Path(source).read_text()
    else:
        text = str(source)
    fields = parse_coefficients(text)
    a = fields["a"]
    if len(a) != 1 or a[0] != 1:
        raise DesignError("Hilbert taps must be FIR (a: 1)")
    taps = np.asarray(fields["b"], dtype=float)
    if len(taps) % 2 == 0:
        raise DesignError("Hilbert taps must have odd length")
    return taps


class HilbertTracker:
    """Analytic signal from a Hilbert FIR plus the mid-tap delayed input.

    Extraction uses the same phase-difference and frequency-from-span
    formulas as the complex-filter tracker. ``span`` defaults to 1
    (adjacent-sample phase difference).
    """

    method = "hilbert"

    def __init__(self, taps=None, span=1, sample_rate_hz=2000.0, warmup_samples=None,
                 freq_source="sum", counters: Optional[OpCounters] = None):
        if freq_source not in FREQ_SOURCES:
            raise ValueError(f"freq_source must be one of {FREQ_SOURCES}")
        self.freq_source = freq_source
        self.taps = design_hilbert_fir(49) if taps is None else np.asarray(taps, dtype=float)
        if len(self.taps) % 2 == 0:
            raise DesignError("Hilbert taps must have odd length")
        if int(span) != span or span < 1:
            raise ValueError("span must be an integer >= 1")
        self.span = int(span)
        self.sample_rate_hz = float(sample_rate_hz)
        self.delay = (len(self.taps) - 1) // 2
        L = len(self.taps)
        self.warmup_samples = (L - 1 + self.span) if warmup_samples is None else int(warmup_samples)
        self._taps = [float(t) for t in self.taps]
        self._buf1 = deque([0.0] * L, maxlen=L)
        self._buf2 = deque([0.0] * L, maxlen=L)
        self._ring = deque(maxlen=self.span)
        self._freq_scale = self.sample_rate_hz / (2 * math.pi * self.span)
        self.samples_processed = 0
        self.counters = counters
        if counters is not None:
            counters.static_storage_bytes = self.storage_bytes()

    def storage_bytes(self):
        L = len(self.taps)
        return L * REAL_BYTES + 2 * L * REAL_BYTES + self.span * COMPLEX_BYTES + 2 * REAL_BYTES

    def reset(self):
        L = len(self.taps)
        self._buf1 = deque([0.0] * L, maxlen=L)
        self._buf2 = deque([0.0] * L, maxlen=L)
        self._ring.clear()
        self.samples_processed = 0

    def _fir(self, buf):
        # buf[-1] is the newest sample
        acc = 0.0
        for t, v in zip(self._taps, reversed(buf)):
            acc += t * v
        return acc

    def step(self, x1, x2):
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise NonFiniteInputError(f"non-finite input ({x1!r}, {x2!r})")
        self._buf1.append(float(x1))
        self._buf2.append(float(x2))
        L = len(self._taps)
        d = self.delay
        z1 = complex(self._buf1[L - 1 - d], self._fir(self._buf1))
        z2 = complex(self._buf2[L - 1 - d], self._fir(self._buf2))
        n = self.samples_processed
        self.samples_processed += 1
        est = _extract(self, z1, z2, n)
        c = self.counters
        if c is not None:
            c.tick()
            c.mul(2 * L, tag="filter")
            c.add(2 * (L - 1), tag="filter")
            _count_extraction(c, gain=False, freq_sum=self.freq_source == "sum")
        return est

    def process(self, x1, x2):
        x1, x2 = _check_block(x1, x2)
        n = len(x1)
        L = len(self.taps)
        d = self.delay
        h1 = np.concatenate([np.array(self._buf1), x1])
        h2 = np.concatenate([np.array(self._buf2), x2])
        q1 = lfilter(self.taps, [1.0], h1)[L:]
        q2 = lfilter(self.taps, [1.0], h2)[L:]
        z1 = h1[L - d:L - d + n] + 1j * q1
        z2 = h2[L - d:L - d + n] + 1j * q2
        self._buf1.extend(x1[-L:].tolist())
        self._buf2.extend(x2[-L:].tolist())
        return _extract_block(self, z1, z2, gain=None)


def hilbert_step(tracker, x1, x2):
    return tracker.step(x1, x2)


def _check_block(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValueError("x1 and x2 must be 1-D arrays of equal length")
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
        raise NonFiniteInputError("non-finite input in block")
    return x1, x2


def _count_extraction(c, gain, freq_sum=True):
    if freq_sum:
        c.cadd(1, tag="frequency")
    c.cmul(1, tag="phase")
    c.arctan(1)
    c.mul(1, tag="phase")
    c.cmul(1, tag="frequency")
    c.arctan(1)
    c.mul(1, tag="frequency")
    c.mul(4, tag="amplitude")
    c.add(2, tag="amplitude")
    c.func(2, tag="amplitude")


def _extract(tr, z1, z2, n):
    m1, m2 = abs(z1), abs(z2)
    ok = m1 >= MIN_MAGNITUDE and m2 >= MIN_MAGNITUDE
    phase = _arg(z1 * z2.conjugate()) * (180.0 / math.pi) if ok else math.nan
    zf = z1 + z2 if tr.freq_source == "sum" else z1
    freq = math.nan
    if len(tr._ring) == tr.span:
        past = tr._ring[0]
        if ok and abs(zf) >= MIN_MAGNITUDE and abs(past) >= MIN_MAGNITUDE:
            freq = _arg(zf * past.conjugate()) * tr._freq_scale
            freq = min(max(freq, 0.0), tr.sample_rate_hz / (2 * tr.span))
        else:
            ok = False
    else:
        ok = False
    tr._ring.append(zf)
    return TrackerEstimate(m1, m2, freq, phase, n, bool(ok and n >= tr.warmup_samples))


def _extract_block(tr, z1, z2, gain=None):
    n = len(z1)
    start = tr.samples_processed
    m1, m2 = np.abs(z1), np.abs(z2)
    ok = (m1 >= MIN_MAGNITUDE) & (m2 >= MIN_MAGNITUDE)
    phase = np.where(ok, _arg(z1 * np.conj(z2)) * (180.0 / np.pi), np.nan)
    K = tr.span
    nhist = len(tr._ring)
    zf = z1 + z2 if tr.freq_source == "sum" else z1
    hist = np.concatenate([np.array(tr._ring, dtype=complex), zf])
    freq = np.full(n, np.nan)
    idx = np.flatnonzero(np.arange(n) + nhist >= K)
    past = hist[idx + nhist - K]
    good = ok[idx] & (np.abs(zf[idx]) >= MIN_MAGNITUDE) & (np.abs(past) >= MIN_MAGNITUDE)
    f = np.clip(_arg(zf[idx] * np.conj(past)) * tr._freq_scale, 0.0,
                tr.sample_rate_hz / (2 * K))
    freq[idx[good]] = f[good]
    have = np.zeros(n, bool)
    have[idx[good]] = True
    ok = ok & have
    for z in hist[-K:]:
        tr._ring.append(complex(z))
    tr.samples_processed += n
    index = start + np.arange(n)
    return EstimateSeries(m1, m2, freq, phase, index, ok & (index >= tr.warmup_samples),
                          tr.method)


# ----------------------------------------------------------------------------
# adaptive notch filter

def anf_bandwidth(rho):
    """-3 dB notch width (rad/sample) of the second-order notch with pole radius rho."""
    return 2.0 * math.acos(2.0 * rho / (1.0 + rho * rho))


def anf_response(alpha, rho, omega):
    """Frequency response of ``(1 + a z^-1 + z^-2) / (1 + rho a z^-1 + rho^2 z^-2)``."""
    zi = np.exp(-1j * np.asarray(omega, dtype=float))
    return (1 + alpha * zi + zi ** 2) / (1 + rho * alpha * zi + rho ** 2 * zi ** 2)


@dataclass
class AnfState:
    """Single-notch Steiglitz-McBride adaptive notch filter.

    The forgetting factor starts at ``lam`` and relaxes geometrically
    (rate ``lam_rate``) towards ``lam_final``; set ``lam_rate=0`` for a
    constant factor.
    """

    alpha_hat: float = -2.0 * math.cos(2 * math.pi * 92.5 / 2000.0)
    rho: float = 0.9
    lam: float = 0.9
    p_cov: float = 100.0
    lam_final: float = 0.98
    lam_rate: float = 0.99
    psi: float = 0.0
    psi1: float = 0.0
    e1: float = 0.0
    e2: float = 0.0
    y1: float = 0.0
    y2: float = 0.0
    diverged: bool = False

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must be in (0, 1)")
        if not 0 < self.lam < 1 or not 0 < self.lam_final < 1:
            raise ValueError("forgetting factors must be in (0, 1)")
        if not self.p_cov > 0:
            raise ValueError("p_cov must be positive")
        self.alpha_hat = min(max(self.alpha_hat, -2.0), 2.0)

    @classmethod
    def at_frequency(cls, freq_hz, sample_rate_hz=2000.0, **kw):
        return cls(alpha_hat=-2.0 * math.cos(2 * math.pi * freq_hz / sample_rate_hz), **kw)

    @property
    def omega_hat(self):
        return math.acos(-self.alpha_hat / 2.0)

    @property
    def bandwidth(self):
        return anf_bandwidth(self.rho)


def anf_step(state: AnfState, x, counters: Optional[OpCounters] = None):
    """Advance the notch filter one sample; returns ``(e_s, omega_hat)``."""
    if not math.isfinite(x):
        raise NonFiniteInputError(f"non-finite input sample {x!r}")
    s = state
    rho = s.rho
    ra = rho * s.alpha_hat
    r2 = rho * rho
    e = x + s.alpha_hat * s.y1 + s.y2 - ra * s.e1 - r2 * s.e2
    # gradient of e w.r.t. alpha, filtered by the notch denominator
    psi = (s.y1 - rho * s.e1) - ra * s.psi - r2 * s.psi1
    p = s.p_cov / (s.lam + psi * psi * s.p_cov)
    alpha = s.alpha_hat - p * psi * e
    s.alpha_hat = min(max(alpha, -2.0), 2.0)
    s.p_cov = p
    if not (p < 1e12 and math.isfinite(p) and math.isfinite(s.alpha_hat)):
        s.diverged = True
    s.psi1, s.psi = s.psi, psi
    s.e2, s.e1 = s.e1, e
    s.y2, s.y1 = s.y1, x
    s.lam = s.lam_rate * s.lam + (1.0 - s.lam_rate) * s.lam_final
    if counters is not None:
        counters.mul(4, tag="anf")     # rho*alpha, alpha*y1, ra*e1, r2*e2
        counters.add(4, tag="anf")
        counters.mul(3, tag="anf")     # rho*e1, ra*psi, r2*psi1
        counters.add(3, tag="anf")
        counters.mul(3, tag="anf")     # psi^2, *P, division
        counters.add(1, tag="anf")
        counters.mul(2, tag="anf")     # P*psi*e
        counters.add(1, tag="anf")
        counters.mul(2, tag="anf")     # forgetting-factor update
        counters.add(1, tag="anf")
        counters.func(1, tag="anf")    # arccos
        counters.mul(1, tag="anf")     # -alpha/2
    return e, s.omega_hat


# ----------------------------------------------------------------------------
# sliding DTFT

class UnprimedBufferError(RuntimeError):
    pass


def dtft_direct(samples, omega, end_index):
    """``sum x(m) exp(-j omega m)`` over the given window ending at ``end_index``."""
    x = np.asarray(samples, dtype=float)
    m = end_index - len(x) + 1 + np.arange(len(x))
    return complex(np.sum(x * np.exp(-1j * omega * m)))


class DtftState:
    """Sliding-window DTFT of the last ``window_length`` samples at one frequency.

    ``value`` is ``sum_{m=n-N+1}^{n} x(m) exp(-j w m)`` with absolute sample
    index ``m``, so two channels updated in lockstep share a phase reference.
    The recursion is exact at fixed ``w``; when the requested frequency moves
    by more than ``2 pi / (10 N)`` from the one in use the sum is rebuilt.
    """

    REFRESH = 1024  # exact phasor refresh period (rounding control)

    def __init__(self, window_length=128, omega=0.0, rebase_threshold=None):
        N = int(window_length)
        if N < 2 or N % 2:
            raise ValueError("window_length must be an even integer >= 2")
        self.window_length = N
        self.omega = float(omega)
        self.rebase_threshold = (2 * math.pi / (10 * N)) if rebase_threshold is None \
            else float(rebase_threshold)
        self.buffer = deque([0.0] * (N + 1), maxlen=N + 1)
        self.value = 0j
        self.n = -1          # index of the newest sample
        self.filled = 0
        self.rebases = 0
        self._set_phasors()

    def _set_phasors(self):
        w = self.omega
        self._c = complex(math.cos(w * self.n), -math.sin(w * self.n))
        self._step = complex(math.cos(w), -math.sin(w))
        self._back = complex(math.cos(w * self.window_length), math.sin(w * self.window_length))
        self._since_refresh = 0

    @property
    def primed(self):
        return self.filled >= self.window_length + 1

    def rebuild(self, omega, counters=None):
        self.omega = float(omega)
        self._set_phasors()
        N = self.window_length
        xs = list(self.buffer)[1:]
        self.value = dtft_direct(xs, self.omega, self.n)
        self.rebases += 1
        if counters is not None:
            counters.rcmul(N, tag="dtft-rebase")
            counters.cmul(N, tag="dtft-rebase")
            counters.cadd(N - 1, tag="dtft-rebase")

    def push(self, x, counters=None, share_phasor=False):
        """Add one sample at the current frequency; returns the new value."""
        self.buffer.append(float(x))
        self.n += 1
        self.filled += 1
        self._c *= self._step
        self._since_refresh += 1
        if self._since_refresh >= self.REFRESH:
            self._set_phasors()
        c_old = self._c * self._back
        x_old = self.buffer[0]
        self.value += x * self._c - x_old * c_old
        if counters is not None:
            counters.rcmul(2, tag="dtft")
            counters.cadd(2, tag="dtft")
            if not share_phasor:
                counters.cmul(2, tag="dtft")
        return self.value


def dtft_step(state: DtftState, x_new, omega_k, counters=None):
    """Push ``x_new`` and return the sliding DTFT at ``omega_k``."""
    if not math.isfinite(x_new):
        raise NonFiniteInputError(f"non-finite input sample {x_new!r}")
    state.push(x_new, counters)
    if not state.primed:
        raise UnprimedBufferError(
            f"DTFT buffer holds {state.filled} of {state.window_length + 1} samples"
        )
    if abs(omega_k - state.omega) > state.rebase_threshold:
        state.rebuild(omega_k, counters)
    return state.value


class DtftAnfTracker:
    """Frequency from the ANF; amplitude and phase difference from a sliding DTFT
    of both channels at the ANF frequency.

    ``anf_input`` selects channel 1 (``"x1"``) or the channel mean (``"mean"``).
    The DTFT is rebuilt at the current ANF frequency once its buffer fills.
    """

    method = "anf-dtft"

    def __init__(self, sample_rate_hz=2000.0, window_length=128, initial_freq_hz=92.5,
                 rho=0.9, lam=0.9, p_cov=100.0, lam_final=0.98, lam_rate=0.99,
                 anf_input="x1", warmup_samples=None, counters: Optional[OpCounters] = None):
        if anf_input not in ("x1", "mean"):
            raise ValueError("anf_input must be 'x1' or 'mean'")
        self.sample_rate_hz = float(sample_rate_hz)
        self.anf = AnfState.at_frequency(initial_freq_hz, sample_rate_hz, rho=rho, lam=lam,
                                         p_cov=p_cov, lam_final=lam_final, lam_rate=lam_rate)
        w0 = self.anf.omega_hat
        self.dtft1 = DtftState(window_length, w0)
        self.dtft2 = DtftState(window_length, w0)
        self.anf_input = anf_input
        self.window_length = int(window_length)
        self.warmup_samples = (self.window_length + 1) if warmup_samples is None \
            else int(warmup_samples)
        self.samples_processed = 0
        self.counters = counters
        if counters is not None:
            counters.static_storage_bytes = self.storage_bytes()

    def storage_bytes(self):
        N = self.window_length
        anf = 12 * REAL_BYTES
        dtft = 2 * ((N + 1) * REAL_BYTES + COMPLEX_BYTES) + 3 * COMPLEX_BYTES
        return anf + dtft + 2 * REAL_BYTES

    def step(self, x1, x2):
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise NonFiniteInputError(f"non-finite input ({x1!r}, {x2!r})")
        c = self.counters
        u = x1 if self.anf_input == "x1" else 0.5 * (x1 + x2)
        _, w = anf_step(self.anf, float(u), c)
        d1, d2 = self.dtft1, self.dtft2
        d1.push(x1, c)
        d2.push(x2, c, share_phasor=True)
        n = self.samples_processed
        self.samples_processed += 1
        freq = w * self.sample_rate_hz / (2 * math.pi)
        ok = d1.primed and not self.anf.diverged
        if d1.primed and abs(w - d1.omega) > d1.rebase_threshold:
            d1.rebuild(w, c)
            d2.rebuild(w, c)
        N = self.window_length
        s1, s2 = d1.value, d2.value
        a1 = 2.0 * abs(s1) / N
        a2 = 2.0 * abs(s2) / N
        if a1 < MIN_MAGNITUDE or a2 < MIN_MAGNITUDE:
            ok = False
            phase = math.nan
        else:
            phase = _arg(s1 * s2.conjugate()) * (180.0 / math.pi)
        if c is not None:
            c.tick()
            c.mul(1, tag="frequency")
            c.mul(4, tag="amplitude")
            c.add(2, tag="amplitude")
            c.func(2, tag="amplitude")
            c.mul(2, tag="amplitude")
            c.cmul(1, tag="phase")
            c.arctan(1)
            c.mul(1, tag="phase")
        if self.anf.diverged:
            freq = math.nan
        return TrackerEstimate(a1, a2, freq, phase, n,
                               bool(ok and n >= self.warmup_samples))

    def process(self, x1, x2):
        """Run :meth:`step` over arrays (the ANF is inherently sequential)."""
        x1, x2 = _check_block(x1, x2)
        return EstimateSeries.from_estimates(
            [self.step(a, b) for a, b in zip(x1.tolist(), x2.tolist())], self.method
        )


def dtft_anf_step(tracker, x1, x2):
    return tracker.step(x1, x2)
