"""Per-sample tracker outputs shared by all tracking methods."""

from dataclasses import dataclass

import numpy as np

__all__ = ["TrackerEstimate", "EstimateSeries", "NonFiniteInputError"]


class NonFiniteInputError(ValueError):
    """A NaN or infinite sample was pushed into a tracker."""


@dataclass(frozen=True)
class TrackerEstimate:
    amplitude1_v: float
    amplitude2_v: float
    frequency_hz: float
    phase_diff_deg: float
    sample_index: int
    valid: bool


@dataclass
class EstimateSeries:
    """Column-oriented block of estimates (one entry per input sample)."""

    amplitude1_v: np.ndarray
    amplitude2_v: np.ndarray
    frequency_hz: np.ndarray
    phase_diff_deg: np.ndarray
    sample_index: np.ndarray
    valid: np.ndarray
    method: str = ""

    def __len__(self):
        return len(self.sample_index)

    def __getitem__(self, i):
        return TrackerEstimate(
            float(self.amplitude1_v[i]),
            float(self.amplitude2_v[i]),
            float(self.frequency_hz[i]),
            float(self.phase_diff_deg[i]),
            int(self.sample_index[i]),
            bool(self.valid[i]),
        )

    @classmethod
    def from_estimates(cls, estimates, method=""):
        est = list(estimates)
        return cls(
            np.array([e.amplitude1_v for e in est], dtype=float),
            np.array([e.amplitude2_v for e in est], dtype=float),
            np.array([e.frequency_hz for e in est], dtype=float),
            np.array([e.phase_diff_deg for e in est], dtype=float),
            np.array([e.sample_index for e in est], dtype=int),
            np.array([e.valid for e in est], dtype=bool),
            method,
        )

    @property
    def amplitude_v(self):
        """Mean of the two sensor amplitudes."""
        return 0.5 * (self.amplitude1_v + self.amplitude2_v)
