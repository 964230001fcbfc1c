import json
import subprocess
import sys

import pytest

from fairfilter.cli import _parse_params, main
from fairfilter.data import load_dataset


def test_parse_params():
    assert _parse_params(["n_per_group=10", "p_intra=0.2"]) == {"n_per_group": 10, "p_intra": 0.2}
    with pytest.raises(ValueError):
        _parse_params(["oops"])
    with pytest.raises(ValueError):
        _parse_params(["seed=abc"])


def test_synth_writes_loadable_files(tmp_path, capsys):
    assert main(["synth", "n_per_group=15", "community_size=6", "seed=2", "--out", str(tmp_path / "s")]) == 0
    out = capsys.readouterr().out.split()
    ds = load_dataset(out[0], out[1])
    assert ds.graph.node_count == 30 and ds.sensitive.sum() == 15
    assert len(ds.communities["planted"]) == 6


def test_synth_bad_param(capsys):
    assert main(["synth", "bogus=1"]) == 2
    assert "error" in capsys.readouterr().err


def test_run_and_report(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "datasets": [{"synth": {"n_per_group": 10, "community_size": 6, "p_intra": 0.3}}],
        "tasks": [{"kind": "diffusion", "fractions": [0.5]}],
        "filters": ["ppr0.85sym"], "methods": ["none", "mult"], "seeds": [0],
        "output": {"results": "r.csv", "report": "r.md"},
    }))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "r.csv").exists() and (tmp_path / "r.md").exists()
    capsys.readouterr()
    assert main(["report", str(tmp_path / "r.csv")]) == 0
    assert "mult util_loss" in capsys.readouterr().out


def test_run_rejects_out_of_scope(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "datasets": [{"synth": {}}], "tasks": [{"kind": "diffusion", "fractions": [0.5]}],
        "filters": ["ppr0.85sym"], "methods": ["fp"], "seeds": [0],
    }))
    assert main(["run", str(cfg)]) == 2
    assert "out of scope" in capsys.readouterr().err


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--configs", "1", "--depths", "3"]) == 0
    assert "2 checks" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fairfilter", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("run", "report", "gradcheck", "synth"):
        assert cmd in proc.stdout
