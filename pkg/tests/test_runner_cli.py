from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from qsurvival import cli, runner, tbm
from qsurvival.config import parse_config
from qsurvival.errors import QuadratureError

QRW_MODEL = """
[model]
kind = "qrw"
N = {N}
theta_deg = 80.0
a = [1.0, 0.0]
b = [0.0, 1.0]
"""

TBM_MODEL = """
[model]
kind = "tbm"
N = {N}
gamma = 1.0
"""


def write(tmp_path: Path, text: str, name: str = "cfg.toml") -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def run_cli(tmp_path, text, command, *extra) -> tuple[int, Path]:
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(write(tmp_path, text)), "--out", str(out), *extra])
    return code, out


def test_propagate_qrw(tmp_path):
    code, out = run_cli(tmp_path, QRW_MODEL.format(N=7) + "[propagate]\nt = 25\n", "propagate")
    assert code == 0
    header, data = read_csv(out / "propagate.csv")
    assert tuple(header) == runner.PROPAGATE_HEADER
    assert data.shape == (7, 4)
    assert data[:, 3].max() < 1e-10
    assert data[:, 1].sum() == pytest.approx(1.0, abs=1e-12)


def test_propagate_tbm_and_initial_time(tmp_path):
    code, out = run_cli(tmp_path, TBM_MODEL.format(N=20) + "[propagate]\nt = 3.7\n", "propagate")
    assert code == 0
    _, data = read_csv(out / "propagate.csv")
    assert data[:, 1].sum() == pytest.approx(1.0, abs=1e-12)
    assert data[:, 3].max() < 1e-8
    code, out = run_cli(tmp_path, TBM_MODEL.format(N=20) + "[propagate]\nt = 0.0\n", "propagate")
    _, data = read_csv(out / "propagate.csv")
    np.testing.assert_allclose(data[:, 1], np.eye(20)[0], atol=1e-15)
    np.testing.assert_allclose(data[:, 2], np.eye(20)[0], atol=1e-15)


def test_propagate_rejects_fractional_qrw_time(tmp_path):
    code, _ = run_cli(tmp_path, QRW_MODEL.format(N=7) + "[propagate]\nt = 2.5\n", "propagate")
    assert code == cli.EXIT_CONFIG


SURVIVAL_TBM = TBM_MODEL.format(N=10) + """
[law]
kind = "continuous_delta"
tau0 = 0.4

[run]
scheme = "{scheme}"
m_max = 60
realizations = 4
keep_traces = 2
"""


def test_survival_projected_delta_matches_power_of_q(tmp_path):
    code, out = run_cli(tmp_path, SURVIVAL_TBM.format(scheme="projected"), "survival")
    assert code == 0
    header, data = read_csv(out / "survival.csv")
    assert tuple(header) == runner.SURVIVAL_CLOSED_FORM_HEADER
    q = tbm.q_return(tbm.TbmParams(10), 0.4)
    np.testing.assert_allclose(data[:, 1], q ** data[:, 0], rtol=1e-10)
    np.testing.assert_allclose(data[:, 5], q ** data[:, 0], rtol=1e-10)
    np.testing.assert_allclose(data[:, 6], q ** data[:, 0], rtol=1e-10)
    header, traces = read_csv(out / "traces.csv")
    assert header == ["m", "S_0", "S_1"]


def test_survival_first_detection_rows_are_exact(tmp_path):
    code, out = run_cli(tmp_path, SURVIVAL_TBM.format(scheme="leftover"), "survival")
    assert code == 0
    header, data = read_csv(out / "survival.csv")
    assert tuple(header) == runner.SURVIVAL_HEADER
    S, F = data[:, 1], data[:, 3]
    np.testing.assert_array_equal(F, np.concatenate([[1.0], S[:-1]]) - S)
    assert not (out / "checkpoints" / "survival.npz").exists()


def test_reruns_are_byte_identical_and_manifest_checksums_match(tmp_path):
    text = SURVIVAL_TBM.format(scheme="leftover").replace('kind = "continuous_delta"\ntau0 = 0.4', 'kind = "half_normal"\nsigma = 0.5')
    digests = []
    for i in range(2):
        out = tmp_path / f"out{i}"
        assert cli.main(["survival", "--config", str(write(tmp_path, text)), "--out", str(out), "--seed", "77"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        for name, digest in manifest["outputs"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
        assert manifest["master_seed"] == 77
        assert manifest["csv_schema"] == runner.CSV_SCHEMA_VERSION
        assert manifest["conclusive"] is True
        digests.append(manifest["outputs"])
    assert digests[0] == digests[1]
    other = tmp_path / "other"
    cli.main(["survival", "--config", str(write(tmp_path, text)), "--out", str(other), "--seed", "78"])
    assert (other / "survival.csv").read_bytes() != (tmp_path / "out0" / "survival.csv").read_bytes()


def test_workers_flag_does_not_change_output(tmp_path):
    text = SURVIVAL_TBM.format(scheme="leftover").replace("realizations = 4", "realizations = 130").replace(
        'kind = "continuous_delta"\ntau0 = 0.4', 'kind = "continuous_exponential"\nr = 2.0'
    )
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = str(write(tmp_path, text))
    assert cli.main(["survival", "--config", cfg, "--out", str(a), "--workers", "1"]) == 0
    assert cli.main(["survival", "--config", cfg, "--out", str(b), "--workers", "2"]) == 0
    assert (a / "survival.csv").read_bytes() == (b / "survival.csv").read_bytes()


def test_rate_function_command(tmp_path):
    text = QRW_MODEL.format(N=20) + "[rate_function]\ntaus = [2, 4, 6]\nprobs = [0.5, 0.3, 0.2]\nn_points = 21\n"
    code, out = run_cli(tmp_path, text, "rate-function")
    assert code == 0
    header, data = read_csv(out / "rate_function.csv")
    assert tuple(header) == runner.RATE_FUNCTION_HEADER
    assert data.shape == (21, 2) and np.all(data[:, 1] >= 0)
    report = json.loads((out / "rate_function_report.json").read_text())
    assert report["I_at_x_star"] < 1e-12


def test_synthetic_self_test(tmp_path):
    text = "[synthetic]\nm1 = 75.0\nm_max = 10000\nsizes = [16, 24, 32]\n"
    code, out = run_cli(tmp_path, text, "synthetic")
    assert code == 0
    report = json.loads((out / "synthetic_report.json").read_text())
    assert report["m1"]["m_star"] == pytest.approx(75.0, rel=0.1)
    assert report["m2"]["delta"] == pytest.approx(3.0, abs=0.1)


def test_inconclusive_scan_exits_3(tmp_path):
    text = QRW_MODEL.format(N=8) + '[law]\nkind = "discrete_delta"\ntau0 = 2\n[run]\nm_max = 30\n[scan]\nsizes = [8, 10]\n'
    code, out = run_cli(tmp_path, text, "scan")
    assert code == cli.EXIT_INCONCLUSIVE
    report = json.loads((out / "scan_report.json").read_text())
    assert report["per_size"]["8"]["m1"]["conclusive"] is False
    assert json.loads((out / "manifest.json").read_text())["conclusive"] is False


def test_configuration_errors_exit_2(tmp_path):
    assert run_cli(tmp_path, "[bogus]\n", "survival")[0] == cli.EXIT_CONFIG
    assert run_cli(tmp_path, QRW_MODEL.format(N=8), "propagate")[0] == cli.EXIT_CONFIG
    assert cli.main(["survival", "--config", str(tmp_path / "missing.toml")]) == cli.EXIT_CONFIG
    assert cli.main(["survival"]) == 2
    assert cli.main(["survival", "--config", "x", "--seed", "-1"]) == 2


def test_numerical_failure_exits_4(tmp_path, monkeypatch):
    def boom(cfg):
        raise QuadratureError("did not converge")

    monkeypatch.setitem(cli._COMMANDS, "propagate", (boom, ""))
    assert run_cli(tmp_path, QRW_MODEL.format(N=8) + "[propagate]\nt = 1\n", "propagate")[0] == cli.EXIT_NUMERICAL


def test_apply_overrides():
    cfg = parse_config(QRW_MODEL.format(N=8))
    new = runner.apply_overrides(cfg, seed=2**64 - 1, workers=3, out="elsewhere")
    assert (new.run.master_seed, new.run.workers, new.run.out) == (2**64 - 1, 3, "elsewhere")
    assert cfg.run.master_seed == 0
    assert runner.apply_overrides(cfg) == cfg


def test_csv_floats_round_trip():
    x = [math.pi, 1e-300, 0.1 + 0.2]
    text = runner._csv_text(["v"], [[v] for v in x])
    assert [float(line) for line in text.splitlines()[1:]] == x
