import csv
import io
import json
import math

import numpy as np
import pytest

from fockport.cli import config_hash, main
from fockport.fock import DensityMatrix, FockSpace, vacuum
from fockport.qubit import PSI_2, encode_qubit
from fockport.reproduce import criterion_6


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def write_config(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_teleport_default_report(capsys):
    code, out = run(capsys, "teleport", "--seed", "5")
    assert code == 0
    doc = json.loads(out.out)
    assert doc["seed"] == 5
    assert doc["config_hash"] == config_hash(doc["config"])
    for key in ("f_state", "f_qubit", "f_thr", "success_prob"):
        assert 0 <= doc["report"][key] <= 1
    assert set(doc["fractions_out"]) == {"vacuum", "qubit", "multiphoton"}


def test_teleport_optimal_gain_is_attenuated_input(capsys, tmp_path):
    r = 0.71
    cfg = {"eta": 1.0, "alpha": [PSI_2.alpha.real, 0], "beta": [PSI_2.beta.real, 0],
           "g": math.tanh(r), "r": r, "l": 0.0, "cutoff": 8}
    code, out = run(capsys, "teleport", "--config", write_config(tmp_path, cfg))
    assert code == 0
    rho = DensityMatrix.from_dict(json.loads(out.out)["output"])
    sp = FockSpace(2, 8)
    g2 = math.tanh(r) ** 2
    expected = g2 * encode_qubit(PSI_2, sp).density().elements + (1 - g2) * vacuum(sp).elements
    np.testing.assert_allclose(rho.elements, expected, atol=1e-12)


def test_teleport_csv(capsys):
    code, out = run(capsys, "teleport", "--format", "csv")
    assert code == 0
    lines = out.out.splitlines()
    assert lines[0].startswith("# config_hash=")
    assert len(list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))) == 1


@pytest.mark.parametrize("body", ["{bad json", "[1, 2]", '{"nonsense": 1}', '{"eta": 2.0}', '{"qubit": "psi9"}'])
def test_bad_config_is_usage_error(capsys, tmp_path, body):
    code, out = run(capsys, "teleport", "--config", write_config(tmp_path, body))
    assert code == 2
    assert "usage error" in out.err


def test_missing_config_is_io_error(capsys, tmp_path):
    code, _ = run(capsys, "teleport", "--config", str(tmp_path / "absent.json"))
    assert code == 3


def test_unknown_command_and_help(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "--help")[0] == 0


def test_sweep_gain_table(capsys, tmp_path):
    code, _ = run(capsys, "sweep-gain", "--out", str(tmp_path / "o"))
    assert code == 0
    text = (tmp_path / "o" / "sweep.csv").read_text()
    assert text.startswith("# config_hash=")
    rows = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
    assert len(rows) == 12
    assert {float(r["r"]) for r in rows} == {0.71, 1.01, 1.56}


def test_fine_sweep_has_interior_state_maximum(capsys, tmp_path):
    gains = [round(0.3 + 0.01 * k, 2) for k in range(71)]
    cfg = write_config(tmp_path, {"r": 1.01, "l": 0.0, "gains": gains, "eta": 0.69})
    code, out = run(capsys, "sweep-gain", "--config", cfg, "--format", "json")
    assert code == 0
    rows = json.loads(out.out)["rows"]
    f = np.array([row["f_state"] for row in rows])
    k = int(np.argmax(f))
    assert 0 < k < len(f) - 1
    # single maximum: rises then falls
    assert np.all(np.diff(f[: k + 1]) > 0) and np.all(np.diff(f[k:]) < 0)
    # vacuum admixture pulls the peak above tanh r (0.82 vs 0.766 here)
    assert abs(gains[k] - math.tanh(1.01)) < 0.1


def test_sweep_empty_grid(capsys, tmp_path):
    code, _ = run(capsys, "sweep-gain", "--config", write_config(tmp_path, {"gains": []}))
    assert code == 2


def test_classical_bound(capsys, tmp_path):
    cfg = write_config(tmp_path, {"eta": [0.0, 0.693, 1.0], "mc_trials": 20000})
    code, out = run(capsys, "classical-bound", "--config", cfg, "--seed", "3")
    assert code == 0
    rows = {row["eta"]: row for row in json.loads(out.out)["rows"]}
    assert rows[0.0]["f_star"] == 1.0
    assert round(rows[0.693]["f_star"], 3) == 0.769
    assert rows[1.0]["f_star"] == pytest.approx(2 / 3)


def test_outputs_deterministic(capsys, tmp_path):
    cfg = write_config(tmp_path, {"eta": [0.5], "mc_trials": 5000})
    a = run(capsys, "classical-bound", "--config", cfg, "--seed", "8")[1].out
    b = run(capsys, "classical-bound", "--config", cfg, "--seed", "8")[1].out
    c = run(capsys, "classical-bound", "--config", cfg, "--seed", "9")[1].out
    assert a == b
    assert a != c


def test_unwritable_output_dir(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _ = run(capsys, "reproduce", "--out", str(blocker / "sub"))
    assert code == 3


def test_forced_lossless_shows_overshoot():
    res = criterion_6(l_override=0.0)
    assert res.informational["l_override"] == 0.0
    assert res.informational["f_state_overshoot"] > 0.1
    assert not res.checks["envelope_in_loss_range"]
