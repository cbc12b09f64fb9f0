"""
Turning a low-pass prototype into a complex bandpass filter
===========================================================

A real low-pass filter is rotated around the unit circle so that its
passband sits on +92.5 Hz only. A high-pass prototype rotated the other way
puts its stopband on -92.5 Hz instead: a complex notch.
"""

import numpy as np
from scipy.signal import lfilter

from cmftrack.filters import (complex_shift, design_butterworth, frequency_response,
                              group_delay, hz_to_rad)

fs = 2000.0
theta = hz_to_rad(92.5, fs)

lp = design_butterworth(5, 60.0, "low-pass", fs)
cbf = complex_shift(lp, theta)

# the rotation moves every pole and zero by theta, radius untouched
for p0, p1 in zip(sorted(lp.poles(), key=np.angle), sorted(cbf.poles(), key=np.angle)):
    print(f"pole |{abs(p0):.4f}| at {np.degrees(np.angle(p0)):7.2f} deg"
          f" -> |{abs(p1):.4f}| at {np.degrees(np.angle(p1)):7.2f} deg")

# gain on either side of the spectrum
for f in (92.5, -92.5, 0.0):
    g = abs(frequency_response(cbf, hz_to_rad(f, fs)))
    print(f"CBF |H| at {f:+6.1f} Hz: {20 * np.log10(g):8.2f} dB")

hp = design_butterworth(4, 40.0, "high-pass", fs)
cnf = complex_shift(hp, -theta)
for f in (92.5, -92.5):
    g = abs(frequency_response(cnf, hz_to_rad(f, fs)))
    print(f"CNF |H| at {f:+6.1f} Hz: {20 * np.log10(max(g, 1e-300)):8.2f} dB")

# the notch keeps almost everything, so it barely delays the tracked tone
print(f"group delay at +92.5 Hz: CBF {group_delay(cbf, theta):.2f} samples,"
      f" CNF {group_delay(cnf, theta):.2f} samples")

# a real tone through the CBF leaves (mostly) a single rotating phasor
n = np.arange(4000)
x = np.cos(2 * np.pi * 92.5 * n / fs)
z = lfilter(cbf.numerator, cbf.denominator, x)[2000:]
print("analytic magnitude spread:", np.ptp(np.abs(z)) / np.mean(np.abs(z)))
