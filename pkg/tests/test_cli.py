import json

from gsmooth.cli import main


def write_config(path, **overrides):
    config = {
        "kappa": 0.1,
        "t1": 2.0,
        "seed": 12,
        "drive": {"n_impulses": 2, "s": 50.0, "w": 0.15},
    }
    config.update(overrides)
    path.write_text(json.dumps(config))
    return path


def test_simulate_writes_artifacts(tmp_path, capsys):
    cfg = write_config(tmp_path / "config.json")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "trajectories.csv").exists()
    assert (out / "detections.json").exists()
    assert (out / "manifest.json").exists()
    assert "scenario done" in capsys.readouterr().out


def test_simulate_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path / "config.json")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    main(["simulate", "--config", str(cfg), "--out", str(a), "--seed", "1"])
    main(["simulate", "--config", str(cfg), "--out", str(b), "--seed", "2"])
    main(["simulate", "--config", str(cfg), "--out", str(c), "--seed", "1"])
    ta, tb, tc = (p / "trajectories.csv" for p in (a, b, c))
    assert ta.read_bytes() != tb.read_bytes()
    assert ta.read_bytes() == tc.read_bytes()


def test_invalid_config_exits_1(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"kappa": -5.0}))
    assert main(["simulate", "--config", str(cfg)]) == 1
    assert "error" in capsys.readouterr().err


def test_unstable_config_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "config.json", kappa=400.0, drive={"n_impulses": 0})
    assert main(["simulate", "--config", str(cfg)]) == 2
    assert "instability" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 1


def test_sweep_command(tmp_path, capsys):
    cfg = write_config(tmp_path / "config.json")
    out = tmp_path / "out"
    code = main(["sweep", "--config", str(cfg), "--axes", "kappa=0.1,0.5",
                 "--runs", "1", "--out", str(out)])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "kappa,metric,value,n_runs"
    assert "detection_fraction" in capsys.readouterr().out

def test_sweep_bad_axis_exits_1(tmp_path):
    cfg = write_config(tmp_path / "config.json")
    assert main(["sweep", "--config", str(cfg), "--axes", "kappa=abc", "--runs", "1"]) == 1


def test_roc_command(tmp_path, capsys):
    cfg = write_config(tmp_path / "config.json")
    out = tmp_path / "out"
    code = main(["roc", "--config", str(cfg), "--alphas", "0.25,0.5,0.75",
                 "--runs", "2", "--out", str(out)])
    assert code == 0
    lines = (out / "roc.csv").read_text().splitlines()
    assert lines[0] == "alpha,fpr,tpr"
    assert len(lines) == 4
    assert "alpha=0.500" in capsys.readouterr().out
