import csv
import subprocess
import sys

import numpy as np
import pytest

from cmftrack import __version__
from cmftrack.cli import load_config_file, main
from cmftrack.csvio import (
    ESTIMATE_COLUMNS,
    read_comments,
    read_estimates_csv,
    read_record_csv,
    write_record_csv,
)
from cmftrack.evaluation import steady_state_mean
from cmftrack.simulation import MrwmParams, mrwm_generate


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.reader(lines))


def _data(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def test_track_tone(tmp_path, capsys):
    rc = main(["track", "--scenario", "tone", "--freq", "90", "--amp", "0.1", "--phasediff", "2",
               "--method", "cbf", "--out", str(tmp_path)])
    assert rc == 0
    est, truth = read_estimates_csv(tmp_path / "estimates_cbf.csv")
    seg = slice(1000, None)
    assert steady_state_mean(est.frequency_hz[seg]) == pytest.approx(90.0, abs=0.01)
    assert steady_state_mean(est.phase_diff_deg[seg]) == pytest.approx(2.0, abs=0.02)
    assert steady_state_mean(est.amplitude_v[seg]) == pytest.approx(0.1, abs=0.001)
    assert "cbf" in capsys.readouterr().out


def test_estimate_schema_and_header(tmp_path):
    main(["track", "--scenario", "tone", "--duration", "0.2", "--method", "cnf",
          "--seed", "5", "--out", str(tmp_path)])
    p = tmp_path / "estimates_cnf.csv"
    assert tuple(_rows(p)[0]) == ESTIMATE_COLUMNS
    meta = read_comments(p)
    assert meta["cmftrack"] if "cmftrack" in meta else True
    text = p.read_text().splitlines()
    assert text[0] == f"# cmftrack {__version__}"
    assert text[1].startswith("# config: {")
    assert meta["seed"] == "5"
    for name in ("record.csv", "report.csv", "report.txt"):
        assert (tmp_path / name).read_text().startswith(f"# cmftrack {__version__}")


def test_batch_all_methods_ordering(tmp_path):
    rc = main(["track", "--scenario", "batch", "--method", "cbf,cnf,cbf-cnf,hilbert,anf-dtft",
               "--seed", "1", "--out", str(tmp_path)])
    assert rc == 0
    for m in ("cbf", "cnf", "cbf-cnf", "hilbert", "anf-dtft"):
        assert (tmp_path / f"estimates_{m}.csv").exists()
    rows = _rows(tmp_path / "report.csv")
    hdr = rows[0]
    d = {r[0]: float(r[hdr.index("tracking_delay_ms")]) for r in rows[1:]}
    assert d["cnf"] < d["cbf-cnf"] < d["cbf"] < d["hilbert"] < d["anf-dtft"]


def test_byte_identical_runs(tmp_path):
    args = ["track", "--scenario", "mrwm", "--duration", "1", "--noise-sigma", "0.005",
            "--method", "cbf,hilbert", "--seed", "3", "--plot"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert "plot_cbf.svg" in names
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_different_seed_differs(tmp_path):
    base = ["track", "--scenario", "mrwm", "--duration", "0.5", "--method", "cbf"]
    main(base + ["--seed", "1", "--out", str(tmp_path / "a")])
    main(base + ["--seed", "2", "--out", str(tmp_path / "b")])
    assert _data(tmp_path / "a" / "record.csv") != _data(tmp_path / "b" / "record.csv")


def test_replay_closure(tmp_path):
    orig = tmp_path / "orig"
    main(["track", "--scenario", "mrwm", "--duration", "1", "--noise-sigma", "0.005",
          "--method", "cbf-cnf,anf-dtft", "--seed", "7", "--out", str(orig)])
    rep = tmp_path / "rep"
    rc = main(["track", "--scenario", "replay", "--input", str(orig / "record.csv"),
               "--method", "cbf-cnf,anf-dtft", "--out", str(rep)])
    assert rc == 0
    for m in ("cbf-cnf", "anf-dtft"):
        assert _data(orig / f"estimates_{m}.csv") == _data(rep / f"estimates_{m}.csv")


def test_record_round_trip_bit_exact(tmp_path):
    rec = mrwm_generate(MrwmParams(duration_samples=500, noise_sigma1=0.003, rng_seed=2))
    p = tmp_path / "r.csv"
    write_record_csv(p, rec)
    back = read_record_csv(p)
    np.testing.assert_array_equal(back.x1, rec.x1)
    np.testing.assert_array_equal(back.truth.phase_diff_deg, rec.truth.phase_diff_deg)
    assert back.noise_sigma == rec.noise_sigma


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment\nscenario = tone\nfreq: 88\nmethod = cnf\nduration = 0.5\n")
    assert load_config_file(cfg)["freq"] == "88"
    out = tmp_path / "o"
    assert main(["track", "--config", str(cfg), "--freq", "95", "--out", str(out)]) == 0
    est, truth = read_estimates_csv(out / "estimates_cnf.csv")
    assert truth.frequency_hz[0] == 95.0
    assert '"freq": 95.0' in (out / "estimates_cnf.csv").read_text()


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("CMFTRACK_OUT", str(tmp_path / "env"))
    assert main(["simulate", "--scenario", "tone", "--duration", "0.1"]) == 0
    assert (tmp_path / "env" / "record.csv").exists()


def test_simulate_plot(tmp_path):
    assert main(["simulate", "--scenario", "batch", "--plot", "--out", str(tmp_path)]) == 0
    svg = (tmp_path / "record.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


@pytest.mark.parametrize("argv", [
    ["track", "--method", "pll"],
    ["bogus"],
    [],
    ["track", "--span", "x"],
    ["design", "--filter", "nope"],
    ["evaluate"],
])
def test_usage_errors_exit_1(argv, tmp_path):
    assert main(argv + (["--out", str(tmp_path)] if argv and argv[0] != "bogus" else [])) == 1


def test_runtime_error_exit_2(tmp_path):
    assert main(["track", "--scenario", "replay", "--input", str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path)]) == 2
    assert main(["design", "--coeffs", str(tmp_path / "missing.txt"), "--out",
                 str(tmp_path)]) == 2


def test_design_identity_flat(tmp_path):
    assert main(["design", "--filter", "identity", "--points", "256", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "response.csv")
    assert rows[0] == ["freq_hz", "omega_rad", "magnitude_db", "group_delay_samples"]
    vals = np.array([[float(v) for v in r] for r in rows[1:]])
    assert len(vals) == 256
    np.testing.assert_allclose(vals[:, 2], 0.0, atol=1e-12)
    np.testing.assert_allclose(vals[:, 3], 0.0, atol=1e-9)


def _response(tmp_path, name):
    out = tmp_path / name
    assert main(["design", "--filter", name, "--points", "4000", "--plot", "--out", str(out)]) == 0
    rows = _rows(out / "response.csv")
    return np.array([[float(v) for v in r] for r in rows[1:]]), out


def test_design_cbf_peak(tmp_path):
    v, out = _response(tmp_path, "cbf")
    f_peak = v[np.argmax(v[:, 2]), 0]
    assert 85.0 <= f_peak <= 100.0
    # maximally flat top: locate the centre from the -3 dB edges
    band = v[v[:, 2] > v[:, 2].max() - 3.0103, 0]
    assert 0.5 * (band.min() + band.max()) == pytest.approx(92.5, abs=1.0)
    assert (out / "response.svg").exists()
    roots = _rows(out / "roots.csv")
    stages = {r[1] for r in roots[1:]}
    assert stages == {"prototype", "rotated"}
    poles = [r for r in roots[1:] if r[1] == "rotated" and r[2] == "pole"]
    assert len(poles) == 5
    assert all(float(r[5]) < 1 for r in poles)


def test_design_cnf_notch(tmp_path):
    v, _ = _response(tmp_path, "cnf")
    i = np.argmin(v[:, 2])
    assert v[i, 0] == pytest.approx(-92.5, abs=0.5)
    assert v[i, 2] <= -40.0
    # the pass side at +92.5 Hz is near 0 dB
    j = np.argmin(np.abs(v[:, 0] - 92.5))
    assert v[j, 2] > -0.1


def test_design_coeff_file(tmp_path):
    f = tmp_path / "lp.txt"
    f.write_text("kind: low-pass\nfs: 2000\nb: 0.5 0.5\na: 1\n")
    assert main(["design", "--coeffs", str(f), "--points", "400", "--out", str(tmp_path)]) == 0
    v = np.array([[float(x) for x in r] for r in _rows(tmp_path / "response.csv")[1:]])
    # the moving-average zero at Nyquist lands at -Nyquist + 92.5 Hz after rotation
    assert v[np.argmax(v[:, 2]), 0] == pytest.approx(92.5, abs=5.0)


def test_evaluate_subcommand(tmp_path, capsys):
    run = tmp_path / "run"
    main(["track", "--scenario", "batch", "--method", "cbf,cnf", "--out", str(run)])
    capsys.readouterr()
    out = tmp_path / "ev"
    rc = main(["evaluate", "--input", str(run / "estimates_cbf.csv"), str(run / "estimates_cnf.csv"),
               "--out", str(out)])
    assert rc == 0
    a = _rows(run / "report.csv")
    b = _rows(out / "report.csv")
    assert a[0][:7] == b[0][:7]
    for ra, rb in zip(a[1:], b[1:]):
        assert ra[0] == rb[0]
        for x, y in zip(ra[1:5], rb[1:5]):
            assert float(x) == pytest.approx(float(y), rel=1e-12, abs=1e-15)


def test_audit_subcommand(tmp_path, capsys):
    assert main(["audit", "--samples", "1000", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "audit.csv")
    assert [r[0] for r in rows[1:]] == ["cbf", "cnf", "cbf-cnf", "hilbert", "anf-dtft"]
    hil = rows[[r[0] for r in rows].index("hilbert")]
    assert float(hil[2]) == 108.0
    assert "Multiplications" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "cmftrack", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and __version__ in r.stdout
