"""CSV serialization of records, estimates and reports.

Every file starts with ``#`` comment lines (tool version, resolved config,
seed), then a header row. Floats are written with 17 significant digits so
a round trip is lossless.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .estimates import EstimateSeries
from .simulation import SensorRecord, TruthSeries

__all__ = [
    "ESTIMATE_COLUMNS",
    "RECORD_COLUMNS",
    "header_lines",
    "atomic_write",
    "write_estimates_csv",
    "read_estimates_csv",
    "write_record_csv",
    "read_record_csv",
    "write_rows_csv",
    "read_comments",
]

ESTIMATE_COLUMNS = ("sample", "time_s", "truth_amp_v", "truth_freq_hz", "truth_phase_deg",
                    "est_amp_v", "est_freq_hz", "est_phase_deg", "valid")
RECORD_COLUMNS = ("sample", "time_s", "x1_v", "x2_v", "truth_amp_v", "truth_freq_hz",
                  "truth_phase_deg")


def _g(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def header_lines(version, config=None, seed=None, extra=None):
    lines = [f"# cmftrack {version}"]
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True, default=str))
    if seed is not None:
        lines.append(f"# seed: {seed}")
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    return lines


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table(comments, columns, rows):
    buf = io.StringIO()
    for c in comments:
        buf.write(c + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def write_estimates_csv(path, estimates: EstimateSeries, truth: TruthSeries, comments=()):
    fs = truth.sample_rate_hz
    idx = np.asarray(estimates.sample_index)
    rows = []
    for i in range(len(estimates)):
        n = int(idx[i])
        rows.append((n, _g(n / fs), _g(truth.amplitude_v[i]), _g(truth.frequency_hz[i]),
                     _g(truth.phase_diff_deg[i]), _g(estimates.amplitude_v[i]),
                     _g(estimates.frequency_hz[i]), _g(estimates.phase_diff_deg[i]),
                     int(bool(estimates.valid[i]))))
    atomic_write(path, _table(comments, ESTIMATE_COLUMNS, rows))


def _split(text):
    comments, body = [], []
    for line in text.splitlines():
        (comments if line.startswith("#") else body).append(line)
    return comments, list(csv.reader(body))


def read_comments(path):
    """``{key: value}`` from ``# key: value`` header lines."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.startswith("#"):
            break
        key, sep, val = line[1:].strip().partition(":")
        if sep:
            out[key.strip()] = val.strip()
    return out


def _columns(rows, expected, path):
    if not rows or tuple(rows[0]) != tuple(expected):
        raise ValueError(f"{path}: expected columns {','.join(expected)}")
    data = rows[1:]
    return {name: [r[i] for r in data] for i, name in enumerate(expected)}


def read_estimates_csv(path, sample_rate_hz=None, method=""):
    comments, rows = _split(Path(path).read_text())
    cols = _columns(rows, ESTIMATE_COLUMNS, path)
    idx = np.array([int(v) for v in cols["sample"]], dtype=int)
    f = lambda k: np.array([float(v) for v in cols[k]])
    t = f("time_s")
    if sample_rate_hz is None:
        sample_rate_hz = (idx[1] - idx[0]) / (t[1] - t[0]) if len(idx) > 1 else 2000.0
        sample_rate_hz = float(round(sample_rate_hz, 6))
    amp = f("est_amp_v")
    est = EstimateSeries(amp, amp.copy(), f("est_freq_hz"), f("est_phase_deg"), idx,
                         np.array([v == "1" for v in cols["valid"]]), method)
    truth = TruthSeries(f("truth_amp_v"), f("truth_freq_hz"), f("truth_phase_deg"),
                        sample_rate_hz)
    return est, truth


def write_record_csv(path, record: SensorRecord, comments=()):
    tr = record.truth
    fs = tr.sample_rate_hz
    extra = [f"# sample_rate_hz: {_g(fs)}", f"# phase_mode: {record.phase_mode}",
             f"# noise_sigma_v: {_g(record.noise_sigma[0])} {_g(record.noise_sigma[1])}"]
    rows = [(n, _g(n / fs), _g(record.x1[n]), _g(record.x2[n]), _g(tr.amplitude_v[n]),
             _g(tr.frequency_hz[n]), _g(tr.phase_diff_deg[n])) for n in range(len(record))]
    atomic_write(path, _table(list(comments) + extra, RECORD_COLUMNS, rows))


def read_record_csv(path):
    """Load a record written by :func:`write_record_csv` (bit-exact)."""
    meta = read_comments(path)
    _, rows = _split(Path(path).read_text())
    cols = _columns(rows, RECORD_COLUMNS, path)
    f = lambda k: np.array([float(v) for v in cols[k]])
    fs = float(meta.get("sample_rate_hz", 2000.0))
    sig = tuple(float(v) for v in meta.get("noise_sigma_v", "0 0").split())
    truth = TruthSeries(f("truth_amp_v"), f("truth_freq_hz"), f("truth_phase_deg"), fs)
    seeds = {"source": str(path)}
    if "seed" in meta:
        seeds["seed"] = meta["seed"]
    return SensorRecord(f("x1_v"), f("x2_v"), truth, seeds, sig,
                        meta.get("phase_mode", "accumulated"))


def write_rows_csv(path, columns, rows, comments=()):
    """Generic table; float cells get 17 significant digits."""
    out = [[_g(v) if isinstance(v, (float, np.floating)) else ("" if v is None else v)
            for v in r] for r in rows]
    atomic_write(path, _table(comments, columns, out))
