"""Amplitude, frequency and phase-difference tracking of two Coriolis
flowmeter sensor signals with complex bandpass and notch filters."""

__version__ = "0.1.0"

from .estimates import EstimateSeries, NonFiniteInputError, TrackerEstimate
from .filters import (
    ComplexCoefficients,
    DesignError,
    PrototypeFilter,
    UnstableFilterError,
    bundled_prototype,
    complex_shift,
    design_butterworth,
    frequency_response,
    group_delay,
    load_prototype,
)
from .roots import RootFindingError, find_roots
from .tracking import ComplexTracker, TrackerConfig, build_comb_cnf
from .baselines import DtftAnfTracker, HilbertTracker
from .simulation import (
    MrwmParams,
    SensorRecord,
    TruthSeries,
    add_noise,
    batch_generate,
    mrwm_generate,
    rwm_generate,
    tone_generate,
)
from .evaluation import (
    EvaluationReport,
    audit_complexity,
    evaluate,
    make_tracker,
    measure_snr,
    rmse,
    run_tracker,
    tracking_delay,
)

__all__ = [
    "__version__",
    "EstimateSeries", "NonFiniteInputError", "TrackerEstimate",
    "ComplexCoefficients", "DesignError", "PrototypeFilter", "UnstableFilterError",
    "bundled_prototype", "complex_shift", "design_butterworth", "frequency_response",
    "group_delay", "load_prototype",
    "RootFindingError", "find_roots",
    "ComplexTracker", "TrackerConfig", "build_comb_cnf",
    "DtftAnfTracker", "HilbertTracker",
    "MrwmParams", "SensorRecord", "TruthSeries", "add_noise", "batch_generate",
    "mrwm_generate", "rwm_generate", "tone_generate",
    "EvaluationReport", "audit_complexity", "evaluate", "make_tracker", "measure_snr",
    "rmse", "run_tracker", "tracking_delay",
]
