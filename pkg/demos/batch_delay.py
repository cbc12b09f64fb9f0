"""
Tracking delay on a linear ramp
===============================

All three parameters ramp linearly (100 -> 85 Hz, 0.3 -> 0.05 V, 0 -> 4 deg)
over half a second. Each method's lag behind the truth is read off the
peak of the cross-correlation.
"""

import numpy as np

from cmftrack.evaluation import ALL_METHODS, parameter_delays, run_tracker
from cmftrack.simulation import batch_generate

rec = batch_generate()
print(f"{len(rec)} samples at {rec.sample_rate_hz:g} Hz")

rows = []
for m in ALL_METHODS:
    est = run_tracker(m, rec)
    d = parameter_delays(est, rec.truth)
    rows.append((m, d, np.mean(list(d.values()))))

print(f"{'method':10s} {'amp':>7s} {'freq':>7s} {'phase':>7s} {'mean':>7s}  (ms)")
for m, d, mean in sorted(rows, key=lambda r: r[2]):
    print(f"{m:10s} {d['amplitude']:7.2f} {d['frequency']:7.2f} {d['phase']:7.2f} {mean:7.2f}")

# the notch-only filter is nearly transparent at the tracked frequency,
# which is why it leads; the sliding DTFT averages a 64 ms window
