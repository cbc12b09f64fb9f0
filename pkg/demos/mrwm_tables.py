"""
Random-walk test signals: accuracy and cost
===========================================

Sixty seconds of modified-random-walk parameters, tracked with every
method, first noise-free and then with 5 mV of white noise per sensor.
Ends with the per-sample arithmetic audit.
"""

from cmftrack.evaluation import (ALL_METHODS, EvaluationReport, audit_complexity, evaluate,
                                 format_table, measure_snr, run_tracker)
from cmftrack.simulation import MrwmParams, mrwm_generate

for sigma in (0.0, 0.005):
    rec = mrwm_generate(MrwmParams(duration_samples=120_000, noise_sigma1=sigma,
                                   noise_sigma2=sigma, rng_seed=0))
    print(f"\nnoise sigma {sigma * 1000:g} mV, SNR {measure_snr(rec):.1f} dB")
    reports = [evaluate(run_tracker(m, rec), rec.truth, m) for m in ALL_METHODS]
    print(format_table(reports))

# cost per sample, complex operations counted once
reports = []
for m in ALL_METHODS:
    c = audit_complexity(m)
    reports.append(EvaluationReport(m, float("nan"), float("nan"), float("nan"), None,
                                    c.samples, 0, c.per_sample()))
print(format_table(reports))
