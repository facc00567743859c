import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from thermal_mbci.cli import main
from thermal_mbci.config import (
    dumps,
    load_config,
    parse_config,
    SEED_ENV,
)
from thermal_mbci.errors import ConfigError

HBT = {
    "unitary": {"construction": "named-preset", "preset": "balanced-beamsplitter"},
    "rates": [1.0, 0.0],
    "ports": [1, 2],
    "times": [0.0, 0.0],
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- configuration -----------------------------------------------------------

def test_config_round_trip(tmp_path):
    doc = {
        "unitary": {"construction": "haar-random", "dim": 4, "seed": 7},
        "rates": [1.0, 0.5, 0.0, 2.0],
        "ports": [1, 3],
        "times": [0.0, 0.5],
        "mc": {"n_samples": 20000, "seed": 3},
    }
    cfg = parse_config(doc)
    again = parse_config(json.loads(dumps(cfg.to_dict())))
    assert again == cfg
    a, b = cfg.to_instance(), again.to_instance()
    assert np.array_equal(a.unitary, b.unitary)
    assert a.sources == b.sources and a.event == b.event


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"rates": [1.0, -1.0]}, "rates[1]"),
        ({"rates": "x"}, "rates"),
        ({"ports": [1, 5]}, "ports[1]"),
        ({"ports": [1, 1]}, "ports"),
        ({"times": [0.0]}, "times"),
        ({"omega0": -1}, "omega0"),
        ({"delta_omega": [1.0, 2.0]}, "delta_omega"),
        ({"spectra": [{}]}, "spectra"),
        ({"formulation": "magic"}, "formulation"),
        ({"unitary": {"construction": "named-preset", "preset": "prism"}}, "unitary.preset"),
        ({"unitary": {"construction": "explicit-entries", "entries": [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]}}, "unitary"),
        ({"M": 3}, "M"),
        ({"time_unit": "fortnights"}, "time_unit"),
    ],
)
def test_config_errors_name_field(patch, field):
    with pytest.raises(ConfigError) as exc:
        parse_config({**HBT, **patch})
    assert exc.value.field == field


def test_time_unit_conversion():
    cfg = parse_config({**HBT, "delta_omega": 0.5, "omega0": 10.0, "times": [0.0, 2.0],
                        "time_unit": "inverse_bandwidth"})
    assert cfg.to_instance().event.times == (0.0, 4.0)


def test_seed_env_override(monkeypatch):
    doc = {**HBT, "unitary": {"construction": "haar-random", "seed": 1}}
    base = parse_config(doc).to_instance().unitary
    monkeypatch.setenv(SEED_ENV, "99")
    over = parse_config(doc).to_instance().unitary
    assert not np.array_equal(base, over)
    monkeypatch.setenv(SEED_ENV, "1")
    assert np.array_equal(parse_config(doc).to_instance().unitary, base)


def test_dumps_17_digits():
    text = dumps({"x": 0.1, "y": [1.0 / 3.0, 2], "z": True})
    assert "0.10000000000000001" in text
    assert "0.33333333333333331" in text
    assert json.loads(text)["y"] == [1.0 / 3.0, 2]


# -- gen-unitary -------------------------------------------------------------

def test_gen_unitary_preset(capsys):
    code, out, _ = run(capsys, "gen-unitary", "--dim", 2, "--preset", "balanced-beamsplitter")
    assert code == 0
    doc = json.loads(out)
    u = np.array(doc["entries"])[..., 0] + 1j * np.array(doc["entries"])[..., 1]
    assert np.allclose(u, np.array([[1, 1], [1, -1]]) / math.sqrt(2), atol=1e-16)
    assert doc["unitarity_residual"] < 1e-15


def test_gen_unitary_deterministic_and_round_trip(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "gen-unitary", "--dim", 6, "--seed", 42, "-o", a)[0] == 0
    assert run(capsys, "gen-unitary", "--dim", 6, "--seed", 42, "-o", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["seed"] == 42 and doc["unitarity_residual"] < 1e-12
    cfg = write(tmp_path, {"unitary": {"file": "a.json"}, "rates": [1.0] * 6,
                           "ports": [2, 5, 6], "times": [0.0, 0.3, -0.2]})
    code, out, _ = run(capsys, "gn", cfg, "--formulation", "per-C")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(1.0, rel=1e-10)
    # inline copy of the file works as well
    cfg2 = write(tmp_path, {"unitary": doc, "rates": [1.0] * 6, "ports": [1], "times": [0.0]}, "c2.json")
    assert run(capsys, "gn", cfg2)[0] == 0


def test_gen_unitary_errors(capsys):
    assert run(capsys, "gen-unitary", "--dim", 0)[0] == 2
    assert run(capsys, "gen-unitary", "--dim", 3, "--preset", "nope")[0] == 2
    assert run(capsys, "gen-unitary", "--dim", 3, "--preset", "balanced-beamsplitter")[0] == 2


# -- gn ------------------------------------------------------------------------

@pytest.mark.parametrize("formulation", ["perm-sum", "per-C", "config-sum", "equal-times", "incoherent", "uncorrelated"])
def test_gn_uniform_rates_every_formulation(tmp_path, capsys, formulation):
    cfg = write(tmp_path, {"unitary": {"construction": "haar-random", "dim": 5, "seed": 3},
                           "rates": [0.7] * 5, "ports": [1, 2, 4], "times": [0.0, 0.5, 1.0]})
    code, out, _ = run(capsys, "gn", cfg, "--formulation", formulation)
    assert code == 0
    rec = json.loads(out)
    assert set(rec) >= {"value", "formulation", "residual_imag", "n_terms", "wall_time_ms"}
    assert rec["value"] == pytest.approx(0.7**3, rel=1e-10)


def test_gn_hbt(tmp_path, capsys):
    cfg = write(tmp_path, HBT)
    code, out, _ = run(capsys, "gn", cfg)
    rec = json.loads(out)
    assert code == 0
    assert rec["value"] == pytest.approx(0.5, abs=1e-15)
    assert rec["g_normalized"] == pytest.approx(2.0, abs=1e-14)
    _, out2, _ = run(capsys, "gn", cfg, "--formulation", "config-sum")
    v2 = json.loads(out2)["value"]
    assert abs(v2 - rec["value"]) <= 1e-9 * rec["value"]


def test_gn_with_mc(tmp_path, capsys):
    cfg = write(tmp_path, {**HBT, "mc": {"n_samples": 40000, "seed": 1}})
    code, out, _ = run(capsys, "gn", cfg)
    rec = json.loads(out)
    assert code == 0
    assert abs(rec["mc"]["mean"] - 0.5) < 5 * rec["mc"]["std_error"]


def test_gn_csv_output(tmp_path, capsys):
    cfg = write(tmp_path, {**HBT, "output": "csv"})
    code, out, _ = run(capsys, "gn", cfg)
    assert code == 0
    rows = read_csv(out)
    assert float(rows[0]["value"]) == pytest.approx(0.5)


def test_gn_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, {**HBT, "rates": [1.0]}, "bad.json")
    code, _, err = run(capsys, "gn", bad)
    assert code == 2 and "ports" in err
    notjson = tmp_path / "x.json"
    notjson.write_text("{")
    assert run(capsys, "gn", notjson)[0] == 2
    big = write(tmp_path, {"unitary": {"construction": "haar-random", "seed": 0}, "rates": [1.0] * 11,
                           "ports": list(range(1, 12)), "times": [0.0] * 11}, "big.json")
    assert run(capsys, "gn", big, "--formulation", "perm-sum")[0] == 3
    assert run(capsys, "gn", big, "--formulation", "config-sum")[0] == 3


# -- scan ----------------------------------------------------------------------

def test_scan_hbt_curve(tmp_path, capsys):
    cfg = write(tmp_path, HBT)
    code, out, _ = run(capsys, "scan", cfg, "--vary", "time-of-port", 2, "--from", 0, "--to", 5, "--steps", 50)
    assert code == 0
    assert out.splitlines()[0] == "tau,g_n,g_n_normalized"
    rows = read_csv(out)
    assert len(rows) == 51
    taus = [float(r["tau"]) for r in rows]
    assert np.allclose(np.diff(taus), 0.1)
    for r in rows:
        tau = float(r["tau"])
        assert abs(float(r["g_n_normalized"]) - (1 + math.exp(-tau**2))) <= 1e-9


def test_scan_far_endpoint_and_uniform(tmp_path, capsys):
    cfg = write(tmp_path, HBT)
    _, out, _ = run(capsys, "scan", cfg, "--vary", "time-of-port", 1, "--from", 0, "--to", 20, "--steps", 4)
    assert abs(float(read_csv(out)[-1]["g_n_normalized"]) - 1.0) <= 1e-6
    uni = write(tmp_path, {"unitary": {"construction": "haar-random", "seed": 2, "dim": 4},
                           "rates": [1.5] * 4, "ports": [1, 3, 4], "times": [0, 0, 0]}, "u.json")
    _, out, _ = run(capsys, "scan", uni, "--vary", "time-of-port", 3, "--from", -2, "--to", 2, "--steps", 8)
    assert all(float(r["g_n"]) == pytest.approx(1.5**3, rel=1e-10) for r in read_csv(out))


def test_scan_errors(tmp_path, capsys):
    cfg = write(tmp_path, HBT)
    assert run(capsys, "scan", cfg, "--vary", "rate-of-port", 1, "--from", 0, "--to", 1, "--steps", 3)[0] == 2
    assert run(capsys, "scan", cfg, "--vary", "time-of-port", 3, "--from", 0, "--to", 1, "--steps", 3)[0] == 2


# -- validate and bench ---------------------------------------------------------

def test_validate_identities(capsys):
    code, out, _ = run(capsys, "validate", "--suite", "identities", "--trials", 20)
    assert code == 0
    summary = json.loads(out[out.rindex("{"):])
    assert summary["pass"] and summary["max_rel_err"] < 1e-10 and summary["trials"] == 20


def test_validate_equivalence(capsys):
    code, out, _ = run(capsys, "validate", "--suite", "equivalence", "--trials", 25, "--seed", 4)
    summary = json.loads(out[out.rindex("{"):])
    assert code == 0 and summary["pass"] and summary["max_rel_err"] < 1e-9


def test_validate_mc_small(capsys):
    code, out, _ = run(capsys, "validate", "--suite", "mc", "--trials", 3, "--samples", 50000)
    summary = json.loads(out[out.rindex("{"):])
    assert summary["suite"] == "mc"
    assert code == (0 if summary["pass"] else 1)


def test_validate_failure_exit_code(capsys, monkeypatch):
    import thermal_mbci.validation as val
    monkeypatch.setattr(val, "EQUIVALENCE_RTOL", -1.0)
    code, out, _ = run(capsys, "validate", "--suite", "equivalence", "--trials", 1)
    assert code == 1
    assert "failing instance" in out and '"entries"' in out


def test_bench(capsys):
    code, out, _ = run(capsys, "bench", "--kernel", "ryser", "--sizes", "4,8,12,16")
    assert code == 0
    rows = read_csv(out)
    assert [int(r["n"]) for r in rows] == [4, 8, 12, 16]
    assert all(float(r["median_ns"]) > 0 and float(r["throughput"]) > 0 for r in rows)
    # cost grows like 2^n; compare sizes far enough apart to dominate timer noise
    assert float(rows[3]["median_ns"]) > float(rows[1]["median_ns"])


def test_bench_guards(capsys):
    assert run(capsys, "bench", "--kernel", "naive", "--sizes", "11")[0] == 3
    assert run(capsys, "bench", "--kernel", "ryser", "--sizes", "31")[0] == 3
    assert run(capsys, "bench", "--sizes", "4", "--repeats", "2")[0] == 2


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, HBT)
    proc = subprocess.run([sys.executable, "-m", "thermal_mbci.cli", "gn", str(cfg)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(0.5)
