import json

import numpy as np
import pytest

from specvort.cli import main
from specvort.config import ConfigError, SimConfig
from specvort.field import mode_set, random_divergence_free
from specvort.serialize import (field_from_bytes, field_from_json,
                                field_to_bytes, field_to_json)


# ---------- config ----------

def test_config_defaults_valid():
    cfg = SimConfig()
    assert cfg["M"] == 6
    assert cfg["theta.kind"] == "shell"


def test_config_validation_reports_fields():
    with pytest.raises(ConfigError) as exc:
        SimConfig({"delta": 0.7, "dt": -1.0})
    msg = str(exc.value)
    assert "delta" in msg and "dt" in msg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        SimConfig({"viscosity": 1.0})


def test_config_overrides_dotted_paths():
    cfg = SimConfig().with_overrides(["theta.N=8", "nu=2.5",
                                      "N_ladder=[2,4,8]"])
    assert cfg["theta.N"] == 8
    assert cfg["nu"] == 2.5
    assert cfg["N_ladder"] == [2, 4, 8]


def test_config_hash_canonical():
    a = SimConfig({"nu": 2.0, "M": 4})
    b = SimConfig({"M": 4, "nu": 2.0})
    assert a.hash() == b.hash()
    assert a.hash() != SimConfig({"nu": 2.0, "M": 5}).hash()


def test_config_file_roundtrip(tmp_path):
    cfg = SimConfig({"nu": 3.0})
    p = tmp_path / "c.json"
    p.write_text(cfg.canonical_json())
    again = SimConfig.from_file(p)
    assert again.hash() == cfg.hash()


# ---------- field serialization ----------

def test_field_json_roundtrip():
    f = random_divergence_free(mode_set(3), np.random.default_rng(0), norm=1.0)
    g = field_from_json(field_to_json(f))
    assert g.ms.max_mode == 3
    assert np.array_equal(g.coeff, f.coeff)


def test_field_binary_roundtrip():
    f = random_divergence_free(mode_set(4), np.random.default_rng(1), norm=2.0)
    g = field_from_bytes(field_to_bytes(f))
    assert np.array_equal(g.coeff, f.coeff)


def test_field_binary_rejects_garbage():
    with pytest.raises(ValueError):
        field_from_bytes(b"NOTAFILE" + b"\x00" * 64)


def test_field_json_rejects_wrong_doc():
    with pytest.raises(ValueError):
        field_from_json(json.dumps({"format": "other"}))


# ---------- CLI ----------

def test_cli_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate"]) == 2


def test_cli_bad_config_value_exits_2(capsys):
    assert main(["decay", "delta=0.9"]) == 2
    assert "delta" in capsys.readouterr().err


def test_cli_unknown_override_exits_2(capsys):
    assert main(["decay", "nonsense.key=1"]) == 2


def test_cli_verify_identities(tmp_path, capsys):
    rc = main(["verify-identities", "--out", str(tmp_path), "theta.N=2"])
    assert rc == 0
    body = (tmp_path / "identities.csv").read_text()
    assert body.splitlines()[0].startswith("N,gamma,l,beta,defect")
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["metadata"]["rng_algorithm"] == "philox4x64"
    assert len(report["metadata"]["config_hash"]) == 64


def test_cli_corrector_limit_decreasing(tmp_path, capsys):
    rc = main(["corrector-limit", "--N", "2,4", "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    d = report["defects"]
    assert d[1] < d[0]


def test_cli_simulate_writes_series(tmp_path):
    rc = main(["simulate", "--out", str(tmp_path), "M=3", "T=0.01",
               "samples=1", "theta.N=1"])
    assert rc == 0
    lines = (tmp_path / "series_000.csv").read_text().splitlines()
    assert lines[0] == "t,norm_sq,grad_norm_sq,sob_minus_delta,cutoff"
    assert len(lines) == 12  # header + 11 steps (t=0 included)


def test_cli_decay_passes(tmp_path):
    rc = main(["decay", "--out", str(tmp_path), "nu=0.0", "T=0.2", "M=4"])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["checks"]["passed"] is True


def test_cli_rerun_byte_identical_csv(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["M=3", "T=0.01", "samples=2", "theta.N=1", "nu=1.0"]
    assert main(["simulate", "--out", str(out1)] + args) == 0
    assert main(["simulate", "--out", str(out2)] + args) == 0
    for name in ("series_000.csv", "series_001.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_scaling_limit_small(tmp_path):
    rc = main(["scaling-limit", "--out", str(tmp_path), "M=3", "T=0.01",
               "samples=2", "N_ladder=[1,4]", "nu=2.0"])
    assert rc == 0
    body = (tmp_path / "summary.csv").read_text()
    assert body.splitlines()[0].startswith("N,dist_l2h_q25")
