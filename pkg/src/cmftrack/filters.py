"""Real IIR prototypes and their complex-rotated counterparts.

A complex bandpass filter (CBF) is a real low-pass prototype whose
coefficients are multiplied by ``exp(1j * shift * k)``; this rotates every
pole and zero by ``shift`` radians and moves the passband from DC to
``+shift`` rad/sample. Rotating a high-pass prototype by a negative shift
gives a complex notch filter (CNF) whose stopband sits on the negative
frequency image of the tracked sinusoid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .roots import find_roots

__all__ = [
    "DesignError",
    "UnstableFilterError",
    "CoefficientParseError",
    "NearNotchWarning",
    "PrototypeFilter",
    "ComplexCoefficients",
    "design_butterworth",
    "load_prototype",
    "parse_coefficients",
    "format_coefficients",
    "bundled_prototype",
    "complex_shift",
    "frequency_response",
    "magnitude_db",
    "group_delay",
    "filter_roots",
    "hz_to_rad",
]


class DesignError(ValueError):
    """Invalid filter design request."""


class UnstableFilterError(DesignError):
    """A denominator root lies on or outside the unit circle."""


class CoefficientParseError(DesignError):
    """A coefficient file could not be parsed."""


class NearNotchWarning(RuntimeWarning):
    """Group delay requested where the magnitude response nearly vanishes."""


def hz_to_rad(freq_hz, sample_rate_hz):
    """Convert Hz to rad/sample."""
    return 2.0 * np.pi * np.asarray(freq_hz, dtype=float) / sample_rate_hz


def _readonly(arr):
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


def _check_stable(denominator, what="prototype"):
    if len(denominator) < 2:
        return np.zeros(0, dtype=complex)
    poles = find_roots(denominator)
    radius = np.abs(poles)
    if np.any(radius >= 1.0):
        raise UnstableFilterError(
            f"unstable {what}: max pole radius {radius.max():.6g} >= 1"
        )
    return poles


@dataclass(frozen=True)
class PrototypeFilter:
    """Real coefficient set ``b[0..P]``, ``a[0..Q]`` normalized to ``a[0] = 1``."""

    numerator: np.ndarray
    denominator: np.ndarray
    kind: str = "low-pass"
    sample_rate_hz: float = 2000.0
    design_label: str = ""

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.numerator, dtype=float))
        a = np.atleast_1d(np.asarray(self.denominator, dtype=float))
        if b.size == 0 or a.size == 0:
            raise DesignError("coefficient sequences must be nonempty")
        if a[0] == 0:
            raise DesignError("leading denominator coefficient a0 must be nonzero")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
            raise DesignError("coefficients must be finite")
        if self.kind not in ("low-pass", "high-pass"):
            raise DesignError(f"unknown prototype kind {self.kind!r}")
        if not self.sample_rate_hz > 0:
            raise DesignError("sample rate must be positive")
        b, a = b / a[0], a / a[0]
        _check_stable(a)
        object.__setattr__(self, "numerator", _readonly(b))
        object.__setattr__(self, "denominator", _readonly(a))

    @property
    def order(self):
        return max(len(self.numerator), len(self.denominator)) - 1

    def poles(self):
        return filter_roots(self.denominator)

    def zeros(self):
        return filter_roots(self.numerator)


@dataclass(frozen=True)
class ComplexCoefficients:
    """Rotated coefficients ``b[m] e^{j shift m}``, ``a[n] e^{j shift n}``.

    ``shift_rad_per_sample`` is the total rotation relative to the real
    prototype at the root of ``source``.
    """

    numerator: np.ndarray
    denominator: np.ndarray
    shift_rad_per_sample: float
    source: Union[PrototypeFilter, "ComplexCoefficients", None] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        object.__setattr__(
            self, "numerator", _readonly(np.asarray(self.numerator, dtype=complex))
        )
        object.__setattr__(
            self, "denominator", _readonly(np.asarray(self.denominator, dtype=complex))
        )

    @property
    def prototype(self):
        src = self.source
        while isinstance(src, ComplexCoefficients):
            src = src.source
        return src

    @property
    def sample_rate_hz(self):
        proto = self.prototype
        return proto.sample_rate_hz if proto is not None else None

    @property
    def order(self):
        return max(len(self.numerator), len(self.denominator)) - 1

    def poles(self):
        return filter_roots(self.denominator)

    def zeros(self):
        return filter_roots(self.numerator)


def filter_roots(coeffs):
    """Roots in z of ``sum c[k] z^{-k}`` (empty for a constant)."""
    c = np.atleast_1d(np.asarray(coeffs))
    # z^{-k} polynomial times z^K has the same coefficients, highest power first;
    # trailing zeros are roots at the origin, leading zeros are pure delay
    nz = np.flatnonzero(c != 0)
    if nz.size == 0:
        raise DesignError("all-zero coefficient sequence")
    c = c[nz[0]:]
    if len(c) < 2:
        return np.zeros(0, dtype=complex)
    return find_roots(c)


# ----------------------------------------------------------------------------
# design

def design_butterworth(order, cutoff_hz, kind="low-pass", sample_rate_hz=2000.0):
    """Digital Butterworth prototype via the prewarped bilinear transform.

    The magnitude response is exactly ``1/sqrt(2)`` at ``cutoff_hz``; low-pass
    designs have unit gain at DC, high-pass designs unit gain at Nyquist.
    """
    if isinstance(order, bool) or int(order) != order or not 1 <= order <= 8:
        raise DesignError(f"invalid order {order!r}: must be an integer in 1..8")
    order = int(order)
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise DesignError(
            f"cutoff {cutoff_hz} Hz out of range (0, {sample_rate_hz / 2}) Hz"
        )
    if kind not in ("low-pass", "high-pass"):
        raise DesignError(f"unknown kind {kind!r}")

    fs2 = 2.0 * sample_rate_hz
    warped = fs2 * math.tan(math.pi * cutoff_hz / sample_rate_hz)
    k = np.arange(1, order + 1)
    unit_poles = np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    if kind == "low-pass":
        s_poles = warped * unit_poles
        z_zeros = -np.ones(order)
    else:
        s_poles = warped / unit_poles
        z_zeros = np.ones(order)
    z_poles = (1 + s_poles / fs2) / (1 - s_poles / fs2)

    b = np.real(np.poly(z_zeros))
    a = np.real(np.poly(z_poles))
    ref = 1.0 if kind == "low-pass" else -1.0  # z at DC / Nyquist
    gain = np.polyval(a, ref) / np.polyval(b, ref)
    b = b * np.real(gain)
    label = f"butterworth-{kind}-N{order}-fc{cutoff_hz:g}Hz"
    return PrototypeFilter(b, a, kind, float(sample_rate_hz), label)


# ----------------------------------------------------------------------------
# coefficient files

def parse_coefficients(text):
    """Parse the ``b: ...`` / ``a: ...`` text format into two float arrays.

    Optional ``kind:`` and ``fs:`` lines are returned as well. ``#`` starts a
    comment.
    """
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise CoefficientParseError(f"line {lineno}: expected 'key: values'")
        key, _, rest = line.partition(":")
        key = key.strip().lower()
        if key in fields:
            raise CoefficientParseError(f"line {lineno}: duplicate key {key!r}")
        if key in ("b", "a"):
            try:
                fields[key] = np.array([float(tok) for tok in rest.split()])
            except ValueError as exc:
                raise CoefficientParseError(f"line {lineno}: {exc}") from None
            if fields[key].size == 0:
                raise CoefficientParseError(f"line {lineno}: no coefficients")
        elif key == "kind":
            fields[key] = rest.strip()
        elif key == "fs":
            try:
                fields[key] = float(rest)
            except ValueError as exc:
                raise CoefficientParseError(f"line {lineno}: {exc}") from None
        else:
            raise CoefficientParseError(f"line {lineno}: unknown key {key!r}")
    if "b" not in fields or "a" not in fields:
        raise CoefficientParseError("both 'b:' and 'a:' lines are required")
    return fields


def format_coefficients(proto, comment=None):
    """Serialize a prototype to the coefficient text format (lossless)."""
    lines = []
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    lines.append(f"kind: {proto.kind}")
    lines.append(f"fs: {proto.sample_rate_hz!r}")
    lines.append("b: " + " ".join(repr(float(v)) for v in proto.numerator))
    lines.append("a: " + " ".join(repr(float(v)) for v in proto.denominator))
    return "\n".join(lines) + "\n"


def load_prototype(source, kind=None, sample_rate_hz=None):
    """Load a prototype from a coefficient file path or text.

    Coefficients are normalized to ``a0 = 1`` and stability is checked by
    root finding; an unstable set raises :class:`UnstableFilterError`.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and ":" not in source):
        path = Path(source)
        text = path.read_text()
        label = path.name
    else:
        text = str(source)
        label = "inline"
    fields = parse_coefficients(text)
    if fields["a"][0] == 0:
        raise CoefficientParseError("a0 must be nonzero")
    kind = kind or fields.get("kind", "low-pass")
    fs = sample_rate_hz or fields.get("fs", 2000.0)
    return PrototypeFilter(fields["b"], fields["a"], kind, fs, label)


def bundled_prototype(name="elliptic5_lowpass"):
    """Return one of the coefficient sets shipped with the package.

    Available: ``elliptic5_lowpass``, ``elliptic5_highpass``.
    """
    ref = resources.files("cmftrack") / "data" / f"{name}.txt"
    if not ref.is_file():
        raise DesignError(f"no bundled prototype named {name!r}")
    proto = load_prototype(ref.read_text())
    return PrototypeFilter(proto.numerator, proto.denominator, proto.kind,
                           proto.sample_rate_hz, name)


# ----------------------------------------------------------------------------
# rotation and analysis

def complex_shift(proto, shift_rad):
    """Rotate all poles and zeros of ``proto`` by ``shift_rad``.

    Accepts a :class:`PrototypeFilter` or an already rotated
    :class:`ComplexCoefficients`; in the latter case the rotations add.
    """
    if not -np.pi < shift_rad <= np.pi:
        raise DesignError(f"shift {shift_rad} outside (-pi, pi]")
    if isinstance(proto, ComplexCoefficients):
        total = proto.shift_rad_per_sample + shift_rad
    else:
        total = float(shift_rad)
    b = np.asarray(proto.numerator)
    a = np.asarray(proto.denominator)
    rb = np.exp(1j * shift_rad * np.arange(len(b)))
    ra = np.exp(1j * shift_rad * np.arange(len(a)))
    return ComplexCoefficients(b * rb, a * ra, total, proto)


def frequency_response(coeffs, omega_rad):
    """``H(e^{jw}) = sum b_m e^{-jwm} / sum a_n e^{-jwn}`` at ``omega_rad``.

    ``omega_rad`` may be a scalar or an array.
    """
    b = np.asarray(coeffs.numerator)
    a = np.asarray(coeffs.denominator)
    w = np.asarray(omega_rad, dtype=float)
    zinv = np.exp(-1j * w)
    # Horner in z^{-1}
    num = np.polyval(b[::-1], zinv)
    den = np.polyval(a[::-1], zinv)
    if np.any(np.abs(den) < 1e-300):
        raise DesignError("degenerate response: denominator vanishes")
    h = num / den
    return complex(h) if h.ndim == 0 else h


def magnitude_db(coeffs, omega_rad):
    h = np.abs(frequency_response(coeffs, omega_rad))
    with np.errstate(divide="ignore"):
        return 20 * np.log10(h)


def group_delay(coeffs, omega_rad, step=1e-5):
    """Group delay in samples by central difference of the phase response.

    Points where ``|H| < 1e-6`` are returned as NaN with a
    :class:`NearNotchWarning`.
    """
    w = np.asarray(omega_rad, dtype=float)
    hp = frequency_response(coeffs, w + step)
    hm = frequency_response(coeffs, w - step)
    dphi = np.angle(np.asarray(hp) * np.conj(hm))  # wrapped phase increment
    tau = -dphi / (2 * step)
    mag = np.abs(frequency_response(coeffs, w))
    notch = mag < 1e-6
    if np.any(notch):
        warnings.warn("group delay evaluated near a notch", NearNotchWarning,
                      stacklevel=2)
        tau = np.where(notch, np.nan, tau)
    return float(tau) if np.ndim(tau) == 0 else tau
