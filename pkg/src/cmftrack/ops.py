"""Arithmetic-operation counters for the per-sample complexity audit.

Two conventions are tallied side by side:

``multiplications`` / ``additions``
    real arithmetic: a complex multiply is 4 multiplications and
    2 additions, a real-by-complex multiply is 2 multiplications, a complex
    add is 2 additions.
``unit_multiplications`` / ``unit_additions``
    every scalar operation counts once whether its operands are real or
    complex (a complex multiply-accumulate is one multiplication and one
    addition). This is the convention under which a 49-tap FIR on two
    channels costs 98 multiplications.

Divisions count as multiplications; a square root or an inverse cosine is
charged as one multiplication. Arctangent evaluations are counted
separately in ``atan`` and excluded from both totals.
"""

from dataclasses import dataclass, field

__all__ = ["OpCounters", "REAL_BYTES", "COMPLEX_BYTES"]

REAL_BYTES = 8
COMPLEX_BYTES = 16


@dataclass
class OpCounters:
    additions: int = 0
    multiplications: int = 0
    unit_additions: int = 0
    unit_multiplications: int = 0
    atan: int = 0
    samples: int = 0
    static_storage_bytes: int = 0
    breakdown: dict = field(default_factory=dict, repr=False)

    def _tally(self, tag, mul, add, umul, uadd):
        self.multiplications += mul
        self.additions += add
        self.unit_multiplications += umul
        self.unit_additions += uadd
        if tag is not None:
            row = self.breakdown.setdefault(tag, [0, 0, 0, 0])
            row[0] += mul
            row[1] += add
            row[2] += umul
            row[3] += uadd

    def mul(self, n=1, tag=None):
        """Real multiplications or divisions."""
        self._tally(tag, n, 0, n, 0)

    def add(self, n=1, tag=None):
        """Real additions or subtractions."""
        self._tally(tag, 0, n, 0, n)

    def cmul(self, n=1, tag=None):
        """Complex-by-complex multiplications."""
        self._tally(tag, 4 * n, 2 * n, n, 0)

    def rcmul(self, n=1, tag=None):
        """Real-by-complex multiplications."""
        self._tally(tag, 2 * n, 0, n, 0)

    def cadd(self, n=1, tag=None):
        """Complex additions or subtractions."""
        self._tally(tag, 0, 2 * n, 0, n)

    def func(self, n=1, tag=None):
        """Square root or inverse cosine."""
        self._tally(tag, n, 0, n, 0)

    def arctan(self, n=1):
        self.atan += n

    def tick(self):
        self.samples += 1

    def per_sample(self):
        """Average counts per processed sample (plus storage, unchanged)."""
        n = max(self.samples, 1)
        return {
            "additions_per_sample": self.additions / n,
            "multiplications_per_sample": self.multiplications / n,
            "unit_additions_per_sample": self.unit_additions / n,
            "unit_multiplications_per_sample": self.unit_multiplications / n,
            "atan_per_sample": self.atan / n,
            "static_storage_bytes": self.static_storage_bytes,
        }
