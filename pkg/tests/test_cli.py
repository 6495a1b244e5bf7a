import json

import pytest

from rfadvdef import cli

from test_service import tiny_config


def write_config(tmp_path, **overrides):
    cfg = tiny_config(tmp_path / "out", **overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_missing_config_file(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["synth", "--config", str(tmp_path / "nope.json")])


def test_synth_subcommand(tmp_path, capsys):
    path = write_config(tmp_path)
    rc = cli.main(["synth", "--config", str(path)])
    assert rc == 0
    body = json.loads(capsys.readouterr().out)
    assert body["stage"] == "synth"
    assert (tmp_path / "out" / "train.rfds").exists()


def test_out_and_seed_overrides(tmp_path, capsys):
    path = write_config(tmp_path)
    rc = cli.main(["synth", "--config", str(path), "--out", str(tmp_path / "alt"),
                   "--seed", "99"])
    assert rc == 0
    assert (tmp_path / "alt" / "train.rfds").exists()
    meta = json.loads((tmp_path / "alt" / "train.json").read_text())
    assert meta["seed"] == 99


def test_missing_upstream_is_actionable(tmp_path, capsys):
    path = write_config(tmp_path)
    rc = cli.main(["eval", "--config", str(path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "rf-advdef" in err


def test_config_schema_error_has_field_path(tmp_path, capsys):
    cfg = tiny_config(tmp_path / "out")
    cfg["train"]["epochs"] = 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    rc = cli.main(["synth", "--config", str(path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "train.epochs" in err
