import json
import os
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delone_ids.cli import main
from delone_ids.config import SCHEMA, ConfigError, ExperimentConfig, canonicalize, config_hash, dumps, validate
from delone_ids.delone_core import Box, ParameterError
from delone_ids.hulls import make_fibonacci
from delone_ids.kernels import assemble, patch_count_potential

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDENS = Path(__file__).resolve().parent / "goldens"


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# schema --------------------------------------------------------------------------------


def test_all_shipped_configs_validate():
    for p in sorted(CONFIGS.glob("*.json")):
        ExperimentConfig.load(p)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc:
        validate({"experiment": "verify", "generator": {"kind": "periodic"}, "colour": 1})
    assert any(e.startswith("/:") and "colour" in e for e in exc.value.errors)


def test_error_paths_are_reported():
    bad = {
        "experiment": "ids",
        "generator": {"kind": "periodic", "dim": 3},
        "kernel": {"name": "adjacency", "rho": -1},
        "boxes": {"L0": 8, "count": 2},
        "grid": {"lo": 0, "hi": 1, "m": 5},
    }
    with pytest.raises(ConfigError) as exc:
        validate(bad)
    paths = {e.split(":")[0] for e in exc.value.errors}
    assert "/generator/dim" in paths
    assert any(p.startswith("/kernel") for p in paths)


def test_required_by_experiment():
    with pytest.raises(ConfigError, match="grid"):
        validate({"experiment": "ids", "generator": {"kind": "periodic"}, "kernel": {"name": "identity"}, "boxes": {"L0": 4, "count": 1}})
    with pytest.raises(ConfigError, match="radii"):
        validate({"experiment": "density", "generator": {"kind": "periodic"}, "options": {}})


def test_canonical_round_trip_idempotent():
    for p in sorted(CONFIGS.glob("*.json")):
        data = json.loads(p.read_text())
        once = dumps(data)
        assert dumps(json.loads(once)) == once
        assert ExperimentConfig.from_dict(data).to_dict() == canonicalize(data)


def test_hash_ignores_output_dir_and_key_order():
    a = json.loads((CONFIGS / "free_z_ids.json").read_text())
    b = dict(reversed(list(a.items())))
    b["output_dir"] = "elsewhere"
    assert config_hash(a) == config_hash(b)
    a2 = dict(a, seed=5)
    assert config_hash(a2) != config_hash(a)


@settings(max_examples=40)
@given(st.integers(0, 2**31), st.sampled_from(["per_volume", "per_site"]), st.floats(1, 100), st.integers(1, 5))
def test_round_trip_property(seed, norm, L0, count):
    cfg = {
        "experiment": "tau",
        "generator": {"kind": "substitution", "rule": "fibonacci"},
        "kernel": {"op": "scale", "factor": 2.0, "arg": {"name": "identity"}},
        "boxes": {"L0": L0, "count": count},
        "seed": seed,
        "normalization": norm,
    }
    once = dumps(cfg)
    assert dumps(json.loads(once)) == once
    assert config_hash(json.loads(once)) == config_hash(cfg)


def test_schema_command(capsys):
    assert main(["schema"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads(json.dumps(SCHEMA))


# run -------------------------------------------------------------------------------------


def test_verify_on_z(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "z_verify.json"), "--out", str(tmp_path)]) == 0
    summary = (tmp_path / "summary.txt").read_text()
    assert "packing ok" in summary and "covering ok" in summary
    out = capsys.readouterr().out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config_hash"] in out
    assert report["ok"] is True


def test_malformed_kernel_name(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "free_z_ids.json").read_text())
    cfg["kernel"] = {"name": "adjacencyy", "rho": 1.0}
    code = main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "o")])
    assert code != 0
    err = capsys.readouterr().err
    assert "at /kernel" in err
    assert not (tmp_path / "o").exists()


def test_unreadable_config(tmp_path, capsys):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_invalid_perturbation_exit(tmp_path, capsys):
    # delta >= r could merge points, so it is refused up front
    cfg = {"experiment": "verify", "generator": {"kind": "perturbed", "base": {"kind": "periodic"}, "delta": 0.6, "seed": 1}, "boxes": {"halfwidths": [20]}}
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
    assert "delta" in capsys.readouterr().err


def test_failed_check_exits_one(tmp_path):
    cfg = json.loads((CONFIGS / "fibonacci_tau.json").read_text())
    cfg["options"]["expected"] = 0.5
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["checks"]["tau_expected"] is False


@pytest.mark.parametrize("name,files", [("free_z_ids", ["counting.csv"]), ("fibonacci_gaps", ["gaps.csv", "counting.csv"])])
def test_golden_bit_identical(tmp_path, name, files):
    assert main(["run", str(CONFIGS / f"{name}.json"), "--out", str(tmp_path)]) == 0
    for f in files:
        assert (tmp_path / f).read_bytes() == (GOLDENS / name / f).read_bytes(), f


def test_report_schema_keys(tmp_path):
    main(["run", str(CONFIGS / "free_z_ids.json"), "--out", str(tmp_path)])
    report = json.loads((tmp_path / "report.json").read_text())
    for key in ("config_hash", "generator", "kernel", "boxes", "grid", "columns", "diagnostics", "tau", "shubin_table", "gaps"):
        assert key in report
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert "timestamp" in meta
    header = (tmp_path / "counting.csv").read_text().splitlines()[0]
    assert header == "E,count,per_volume,per_site,box_halfwidth,omega_id,seed"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "delone_ids", "schema"], capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 0 and json.loads(r.stdout)["title"]


# verify suite --------------------------------------------------------------------------------


def test_verify_only_and_mutation(capsys):
    assert main(["verify", "--only", "kernel_bound"]) == 0
    assert main(["verify", "--only", "kernel_bound", "--mutate", "halve_bound"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "kernel_bound" in out


def test_padding_message():
    with pytest.raises(ParameterError) as exc:
        assemble(patch_count_potential(1.0, 2.0), make_fibonacci(), Box.interval(-5, 5), padding=0.5)
    assert "rerun with padding >= 2" in str(exc.value)
