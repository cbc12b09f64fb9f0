"""Command-line front end.

Subcommands: ``design``, ``simulate``, ``track``, ``evaluate``, ``audit``.
Exit status 0 on success, 1 on usage errors, 2 on runtime failures.

Settings resolve as built-in default < ``--config`` file < command-line
flag. The config file is flat ``key = value`` text with ``#`` comments; keys
are the long flag names (``noise-sigma`` or ``noise_sigma``). The default
output directory comes from ``$CMFTRACK_OUT`` when set.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .csvio import (
    atomic_write,
    header_lines,
    read_comments,
    read_estimates_csv,
    read_record_csv,
    write_estimates_csv,
    write_record_csv,
    write_rows_csv,
)
from .evaluation import (
    ALL_METHODS,
    DEFAULT_SKIP_S,
    EvaluationReport,
    audit_complexity,
    evaluate,
    format_table,
    run_tracker,
)
from .filters import (
    PrototypeFilter,
    complex_shift,
    frequency_response,
    group_delay,
    hz_to_rad,
    load_prototype,
)
from .simulation import (
    MrwmParams,
    add_noise,
    batch_generate,
    mrwm_generate,
    rwm_generate,
    tone_generate,
)
from .svgplot import line_panels_svg
from .tracking import METHODS as COMPLEX_METHODS
from .tracking import default_prototypes

__all__ = ["main", "ExperimentConfig", "run_experiment", "load_config_file", "UsageError"]

ENV_OUT = "CMFTRACK_OUT"
SCENARIOS = ("mrwm", "rwm", "batch", "tone", "replay")


class UsageError(Exception):
    pass


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def _methods(v):
    if isinstance(v, (list, tuple)):
        items = list(v)
    else:
        items = [m.strip() for m in str(v).split(",") if m.strip()]
    items = [m.lower() for m in items]
    for m in items:
        if m not in ALL_METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(ALL_METHODS)}")
    if not items:
        raise UsageError("at least one method is required")
    return items


def _floats(v):
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).replace(",", " ").split())


# key -> (type, default)
KEYS = {
    "seed": (int, 0),
    "method": (_methods, ["cbf"]),
    "scenario": (str, "mrwm"),
    "noise_sigma": (float, 0.0),
    "out": (str, None),
    "plot": (_bool, False),
    "input": (str, None),
    "duration": (float, None),
    "freq": (float, 92.5),
    "amp": (float, 0.1),
    "phasediff": (float, 2.0),
    "sample_rate": (float, 2000.0),
    "center_freq": (float, 92.5),
    "span": (int, 8),
    "gain_compensation": (_bool, True),
    "comb_notches": (_floats, ()),
    "hilbert_span": (int, 1),
    "freq_source": (str, "sum"),
    "window_length": (int, 128),
    "skip": (float, DEFAULT_SKIP_S),
    "max_lag_ms": (float, 50.0),
    "ramp_seconds": (float, 0.5),
    "hold_seconds": (float, 0.5),
    "shaping_cutoff": (float, 6.0),
    "phase_mode": (str, "accumulated"),
    "filter": (str, "cbf"),
    "coeffs": (str, None),
    "shift_hz": (float, None),
    "points": (int, 4096),
    "samples": (int, 4000),
}


def load_config_file(path):
    """Parse a flat ``key = value`` file into a dict of raw strings."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition(sep)
        key = key.strip().lower().replace("-", "_")
        if key not in KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = val.strip()
    return out


def resolve(args):
    """Merge defaults, config file and flags into typed settings."""
    raw = {}
    if getattr(args, "config", None):
        raw.update(load_config_file(args.config))
    for key in KEYS:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    out = {}
    for key, (typ, default) in KEYS.items():
        if key in raw:
            try:
                out[key] = typ(raw[key])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            out[key] = default
    if out["out"] is None:
        out["out"] = os.environ.get(ENV_OUT) or "cmftrack_out"
    return out


# ----------------------------------------------------------------------------
# experiments

@dataclass
class ExperimentConfig:
    scenario: str = "mrwm"
    methods: list = field(default_factory=lambda: ["cbf"])
    seed: int = 0
    noise_sigma: float = 0.0
    out: str = "cmftrack_out"
    plot: bool = False
    input: str = None
    duration: float = None
    freq: float = 92.5
    amp: float = 0.1
    phasediff: float = 2.0
    sample_rate: float = 2000.0
    center_freq: float = 92.5
    span: int = 8
    gain_compensation: bool = True
    comb_notches: tuple = ()
    hilbert_span: int = 1
    freq_source: str = "sum"
    window_length: int = 128
    skip: float = DEFAULT_SKIP_S
    max_lag_ms: float = 50.0
    ramp_seconds: float = 0.5
    hold_seconds: float = 0.5
    shaping_cutoff: float = 6.0
    phase_mode: str = "accumulated"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UsageError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.scenario == "replay" and not self.input:
            raise UsageError("replay scenario needs --input RECORD.csv")
        if not self.methods:
            raise UsageError("at least one method is required")
        if self.noise_sigma < 0:
            raise UsageError("noise sigma must be >= 0")

    @classmethod
    def from_settings(cls, s):
        names = set(cls.__dataclass_fields__)
        kw = {k: v for k, v in s.items() if k in names}
        kw["methods"] = s["method"]
        return cls(**kw)

    def to_dict(self):
        """Resolved settings for file headers (the output location is not part
        of an experiment's identity, so identical runs give identical bytes)."""
        d = asdict(self)
        d.pop("out")
        d["comb_notches"] = list(self.comb_notches)
        return d


def build_record(cfg: ExperimentConfig):
    fs = cfg.sample_rate
    if cfg.scenario == "mrwm":
        dur = 10.0 if cfg.duration is None else cfg.duration
        p = MrwmParams(sample_rate_hz=fs, shaping_cutoff_hz=cfg.shaping_cutoff,
                       noise_sigma1=cfg.noise_sigma, noise_sigma2=cfg.noise_sigma,
                       duration_samples=int(round(dur * fs)), rng_seed=cfg.seed,
                       phase_mode=cfg.phase_mode)
        return mrwm_generate(p)
    if cfg.scenario == "rwm":
        dur = 10.0 if cfg.duration is None else cfg.duration
        p = MrwmParams(sample_rate_hz=fs, noise_sigma1=cfg.noise_sigma,
                       noise_sigma2=cfg.noise_sigma, duration_samples=int(round(dur * fs)),
                       rng_seed=cfg.seed, phase_mode=cfg.phase_mode)
        return rwm_generate(p)
    if cfg.scenario == "batch":
        rec = batch_generate(fs, cfg.ramp_seconds, cfg.hold_seconds, cfg.hold_seconds)
    elif cfg.scenario == "tone":
        dur = 2.0 if cfg.duration is None else cfg.duration
        rec = tone_generate(cfg.freq, cfg.amp, cfg.phasediff, dur, fs)
    else:
        return read_record_csv(cfg.input)
    return add_noise(rec, cfg.noise_sigma, cfg.seed)


def tracker_overrides(method, cfg: ExperimentConfig):
    if method in COMPLEX_METHODS:
        return {"center_freq_hz": cfg.center_freq, "freq_span_samples": cfg.span,
                "gain_compensation": cfg.gain_compensation,
                "comb_notches_hz": tuple(cfg.comb_notches), "freq_source": cfg.freq_source}
    if method == "hilbert":
        return {"span": cfg.hilbert_span, "freq_source": cfg.freq_source}
    return {"window_length": cfg.window_length, "initial_freq_hz": cfg.center_freq}


_PANELS = (("amplitude (V)", "amplitude_v", "amplitude_v"),
           ("frequency (Hz)", "frequency_hz", "frequency_hz"),
           ("phase difference (deg)", "phase_diff_deg", "phase_diff_deg"))


def _plot_estimates(path, method, series, truth):
    t = truth.time_s
    panels = []
    for label, ea, ta in _PANELS:
        est = np.where(series.valid, getattr(series, ea), np.nan)
        panels.append((label, t, [("truth", getattr(truth, ta)), (method, est)]))
    atomic_write(path, line_panels_svg(panels, title=f"{method} vs truth"))


def run_experiment(cfg: ExperimentConfig):
    """Simulate (or replay), track with every method, score, write files.

    Returns ``(paths, reports)``.
    """
    out = Path(cfg.out)
    comments = header_lines(__version__, cfg.to_dict(), cfg.seed)
    record = build_record(cfg)
    paths = []
    p = out / "record.csv"
    write_record_csv(p, record, comments)
    paths.append(p)
    fs = record.sample_rate_hz
    skip = int(round(cfg.skip * fs))
    reports = []
    for method in cfg.methods:
        series = run_tracker(method, record, **tracker_overrides(method, cfg))
        p = out / f"estimates_{method}.csv"
        write_estimates_csv(p, series, record.truth, comments + [f"# method: {method}"])
        paths.append(p)
        reports.append(evaluate(series, record.truth, method, skip=min(skip, len(record) - 1),
                                delay=True, max_lag_ms=cfg.max_lag_ms))
        if cfg.plot:
            p = out / f"plot_{method}.svg"
            _plot_estimates(p, method, series, record.truth)
            paths.append(p)
    paths += _write_reports(out, reports, comments)
    return paths, reports


def _write_reports(out, reports, comments):
    rows = [r.as_row() for r in reports]
    cols = ["method", "rmse_amplitude_v", "rmse_frequency_hz", "rmse_phase_deg",
            "tracking_delay_ms", "samples_scored", "transient_skipped"]
    extra = sorted({k for r in rows for k in r} - set(cols))
    cols += extra
    p1 = out / "report.csv"
    write_rows_csv(p1, cols, [[r.get(c) for c in cols] for r in rows], comments)
    p2 = out / "report.txt"
    atomic_write(p2, "\n".join(comments) + "\n" + format_table(reports))
    return [p1, p2]


# ----------------------------------------------------------------------------
# subcommands

def cmd_track(s):
    cfg = ExperimentConfig.from_settings(s)
    paths, reports = run_experiment(cfg)
    sys.stdout.write(format_table(reports))
    for p in paths:
        print(p)
    return 0


def cmd_simulate(s):
    cfg = ExperimentConfig.from_settings(s)
    record = build_record(cfg)
    out = Path(cfg.out)
    comments = header_lines(__version__, cfg.to_dict(), cfg.seed)
    p = out / "record.csv"
    write_record_csv(p, record, comments)
    print(p)
    if cfg.plot:
        tr = record.truth
        panels = [("sensor (V)", tr.time_s, [("x1", record.x1), ("x2", record.x2)])]
        panels += [(label, tr.time_s, [("truth", getattr(tr, ta))]) for label, _, ta in _PANELS]
        q = out / "record.svg"
        atomic_write(q, line_panels_svg(panels, title=f"{cfg.scenario} record"))
        print(q)
    return 0


def _design_sections(s):
    """Filter sections and a label for the design subcommand."""
    fs = s["sample_rate"]
    theta = float(hz_to_rad(s["center_freq"], fs))
    name = s["filter"].lower()
    if s["coeffs"]:
        proto = load_prototype(s["coeffs"], sample_rate_hz=None)
        if s["shift_hz"] is not None:
            shift = float(hz_to_rad(s["shift_hz"], proto.sample_rate_hz))
        else:
            shift = theta if proto.kind == "low-pass" else -theta
        return [(proto, complex_shift(proto, shift))], proto.sample_rate_hz
    if name == "identity":
        proto = PrototypeFilter([1.0], [1.0], "low-pass", fs, "identity")
        return [(proto, complex_shift(proto, 0.0))], fs
    if name not in COMPLEX_METHODS:
        raise UsageError(f"unknown filter {name!r}; choose cbf, cnf, cbf-cnf or identity")
    cbf, cnf = default_prototypes(name, fs)
    sections = []
    if cbf is not None:
        sections.append((cbf, complex_shift(cbf, theta)))
    if cnf is not None:
        sections.append((cnf, complex_shift(cnf, -theta)))
    return sections, fs


def cmd_design(s):
    sections, fs = _design_sections(s)
    out = Path(s["out"])
    comments = header_lines(__version__, {k: s[k] for k in (
        "filter", "coeffs", "center_freq", "shift_hz", "sample_rate", "points")})
    n = s["points"]
    if n < 2:
        raise UsageError("points must be >= 2")
    w = -np.pi + 2 * np.pi * np.arange(n) / n
    h = np.ones(n, dtype=complex)
    gd = np.zeros(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _, cc in sections:
            h = h * frequency_response(cc, w)
            gd = gd + group_delay(cc, w)
    mag = np.abs(h)
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(mag)
    rows = [[float(w[i] * fs / (2 * np.pi)), float(w[i]), float(db[i]), float(gd[i])]
            for i in range(n)]
    p1 = out / "response.csv"
    write_rows_csv(p1, ["freq_hz", "omega_rad", "magnitude_db", "group_delay_samples"], rows,
                   comments)
    root_rows = []
    for k, (proto, cc) in enumerate(sections):
        for stage, obj in (("prototype", proto), ("rotated", cc)):
            for kind, roots in zip(("zero", "pole"), (obj.zeros(), obj.poles())):
                for r in roots:
                    root_rows.append([k, stage, kind, float(r.real), float(r.imag),
                                      float(abs(r)), float(np.angle(r))])
    p2 = out / "roots.csv"
    write_rows_csv(p2, ["section", "stage", "type", "real", "imag", "radius", "angle_rad"],
                   root_rows, comments)
    print(p1)
    print(p2)
    if s["plot"]:
        f = w * fs / (2 * np.pi)
        panels = [("magnitude (dB)", f, [("|H|", np.maximum(db, -150))]),
                  ("group delay (samples)", f, [("delay", gd)])]
        p3 = out / "response.svg"
        atomic_write(p3, line_panels_svg(panels, title="complex filter response")
                     .replace(">time (s)<", ">frequency (Hz)<"))
        print(p3)
    return 0


def cmd_evaluate(s, inputs):
    if not inputs:
        raise UsageError("evaluate needs one or more estimate CSV files (--input)")
    reports = []
    for path in inputs:
        meta = read_comments(path)
        method = meta.get("method", Path(path).stem)
        est, truth = read_estimates_csv(path, method=method)
        skip = int(round(s["skip"] * truth.sample_rate_hz))
        reports.append(evaluate(est, truth, method, skip=min(skip, len(truth) - 1), delay=True,
                                max_lag_ms=s["max_lag_ms"]))
    out = Path(s["out"])
    comments = header_lines(__version__, {"inputs": [str(p) for p in inputs], "skip": s["skip"],
                                          "max_lag_ms": s["max_lag_ms"]})
    paths = _write_reports(out, reports, comments)
    sys.stdout.write(format_table(reports))
    for p in paths:
        print(p)
    return 0


def cmd_audit(s):
    methods = s["method"]
    rows = []
    reports = []
    cfg = ExperimentConfig.from_settings(dict(s, scenario="mrwm", noise_sigma=s["noise_sigma"]))
    for m in methods:
        c = audit_complexity(m, n_samples=s["samples"], **tracker_overrides(m, cfg))
        ps = c.per_sample()
        rows.append([m, ps["unit_additions_per_sample"], ps["unit_multiplications_per_sample"],
                     ps["additions_per_sample"], ps["multiplications_per_sample"],
                     ps["atan_per_sample"], ps["static_storage_bytes"]])
        reports.append(EvaluationReport(m, math.nan, math.nan, math.nan, None, c.samples, 0,
                                        ps))
    out = Path(s["out"])
    comments = header_lines(__version__, {"methods": methods, "samples": s["samples"]},
                            seed=0)
    p = out / "audit.csv"
    write_rows_csv(p, ["method", "additions", "multiplications", "real_additions",
                       "real_multiplications", "arctan", "static_storage_bytes"], rows, comments)
    note = ["# complex operation counted once; real-arithmetic counts in audit.csv"]
    sys.stdout.write(format_table(reports))
    atomic_write(out / "audit.txt", "\n".join(comments + note) + "\n" + format_table(reports))
    print(p)
    return 0


# ----------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./cmftrack_out)")
    p.add_argument("--plot", action="store_const", const=True, help="also write SVG plots")
    p.add_argument("--sample-rate", dest="sample_rate", type=float, help="Hz (default 2000)")


def _scenario(p):
    p.add_argument("--scenario", help="mrwm | rwm | batch | tone | replay")
    p.add_argument("--input", help="record CSV for --scenario replay")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, help="volts")
    p.add_argument("--duration", type=float, help="seconds (mrwm/rwm/tone)")
    p.add_argument("--freq", type=float, help="tone frequency, Hz")
    p.add_argument("--amp", type=float, help="tone amplitude, V")
    p.add_argument("--phasediff", type=float, help="tone phase difference, degrees")
    p.add_argument("--ramp-seconds", dest="ramp_seconds", type=float)
    p.add_argument("--hold-seconds", dest="hold_seconds", type=float)
    p.add_argument("--phase-mode", dest="phase_mode", help="accumulated | literal")


def _tracking(p):
    p.add_argument("--method", help=f"comma list of {', '.join(ALL_METHODS)}")
    p.add_argument("--center-freq", dest="center_freq", type=float, help="Hz (default 92.5)")
    p.add_argument("--span", type=int, help="frequency span K, samples (default 8)")
    p.add_argument("--no-gain-compensation", dest="gain_compensation", action="store_const",
                   const=False)
    p.add_argument("--comb-notches", dest="comb_notches", help="signed notch list, Hz")
    p.add_argument("--hilbert-span", dest="hilbert_span", type=int)
    p.add_argument("--freq-source", dest="freq_source", choices=("sum", "x1"),
                   help="frequency from z1+z2 (default) or channel 1 only")
    p.add_argument("--window-length", dest="window_length", type=int, help="DTFT window")
    p.add_argument("--skip", type=float, help="transient skip, seconds (default 0.2)")
    p.add_argument("--max-lag-ms", dest="max_lag_ms", type=float)


def build_parser():
    ap = _Parser(prog="cmftrack", description="Complex-filter tracking of Coriolis sensor signals")
    ap.add_argument("--version", action="version", version=f"cmftrack {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("design", help="filter response, group delay and roots")
    _common(p)
    p.add_argument("--filter", help="cbf | cnf | cbf-cnf | identity (default cbf)")
    p.add_argument("--coeffs", help="prototype coefficient file")
    p.add_argument("--center-freq", dest="center_freq", type=float)
    p.add_argument("--shift-hz", dest="shift_hz", type=float,
                   help="rotation for --coeffs (default +center for low-pass, -center for high-pass)")
    p.add_argument("--points", type=int, help="grid size (default 4096)")

    p = sub.add_parser("simulate", help="write a simulated sensor record")
    _common(p)
    _scenario(p)

    p = sub.add_parser("track", help="simulate or replay, track, score")
    _common(p)
    _scenario(p)
    _tracking(p)

    p = sub.add_parser("evaluate", help="score estimate CSVs")
    _common(p)
    p.add_argument("--input", dest="inputs", nargs="+", help="estimate CSV files")
    p.add_argument("--skip", type=float)
    p.add_argument("--max-lag-ms", dest="max_lag_ms", type=float)

    p = sub.add_parser("audit", help="per-sample operation counts")
    _common(p)
    _tracking(p)
    p.add_argument("--samples", type=int, help="instrumented samples (default 4000)")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        ap.print_help(sys.stderr)
        return 1
    try:
        s = resolve(args)
        if args.command == "audit" and args.method is None and "method" not in (
                load_config_file(args.config) if args.config else {}):
            s["method"] = list(ALL_METHODS)
        if args.command == "track":
            return cmd_track(s)
        if args.command == "simulate":
            return cmd_simulate(s)
        if args.command == "design":
            return cmd_design(s)
        if args.command == "evaluate":
            return cmd_evaluate(s, args.inputs)
        return cmd_audit(s)
    except UsageError as exc:
        print(f"cmftrack: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"cmftrack: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
