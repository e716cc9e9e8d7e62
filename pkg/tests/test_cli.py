import csv
import json

import pytest
import yaml

from qclength import cli
from qclength.config import PRESETS, dumps, loads, merged, preset, validate


def _small(**over):
    cfg = {
        "name": "small",
        "model": {"kind": "XY", "n_sites": 10, "gamma": 0.5, "boundary": "periodic"},
        "panels": [{"mean": 0.5, "fixed": 1.0}, {"mean": 1.5}],
        "measures": ["concurrence", "discord"],
        "realizations": 12,
        "seed": 4,
        "workers": 1,
    }
    cfg.update(over)
    return cfg


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_valid_and_round_trip(name):
    cfg = preset(name)
    assert validate(cfg) == []
    text = dumps(cfg)
    assert dumps(loads(text)) == text


def test_preset_parameters():
    fig1 = preset("fig1")
    assert fig1["model"]["n_sites"] == 50 and fig1["model"]["gamma"] == 0.5
    assert [p["mean"] for p in fig1["panels"]] == [0.5, 0.8, 1.1, 1.5]
    t1 = merged(preset("table1"))
    assert t1["model"]["n_sites"] == 24 and t1["solver"] == "mps"
    assert sorted((p["mean"], p["delta"]) for p in t1["panels"]) == [(0.5, 0.1), (0.5, 0.5), (1.5, 0.1), (1.5, 0.5)]
    assert t1["realizations"] == 8000


def test_cross_field_diagnostics():
    cfg = preset("table1")
    cfg["solver"] = "freefermion"
    assert any("solver" in d for d in validate(cfg))
    cfg = preset("fig1")
    cfg["solver"] = "mps"
    assert any("open" in d for d in validate(cfg))


def test_unknown_keys_and_types_rejected():
    assert any("unknown key" in d for d in validate(_small(realisations=3)))
    cfg = _small()
    cfg["model"]["gama"] = 0.5
    assert any(d.startswith("model.gama") for d in validate(cfg))
    assert any("realizations" in d for d in validate(_small(realizations=-5)))
    assert any("realizations" in d for d in validate(_small(realizations="ten")))
    assert any("panels[0].mean" in d for d in validate(_small(panels=[{"fixed": 1.0}])))
    assert any("schema_version" in d for d in validate(_small(schema_version=9)))


def _write(tmp_path, cfg):
    p = tmp_path / "exp.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def test_validate_command(tmp_path, capsys):
    assert cli.main(["validate", "--preset", "fig2"]) == 0
    assert cli.main(["validate", "--config", _write(tmp_path, _small(realizations=-1))]) == 2
    assert "realizations" in capsys.readouterr().err
    assert cli.main(["validate", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["validate", "--preset", "fig99"]) == 2


def test_negative_realizations_leave_no_artifacts(tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["run", "--config", _write(tmp_path, _small()), "--realizations", "-3", "--out", str(out)])
    assert rc != 0
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["exp.yaml"]


def test_solver_failure_leaves_no_artifacts(tmp_path, monkeypatch):
    import qclength.quench as q

    def broken(*a, **k):
        raise np_error

    np_error = ArithmeticError("diverged")
    monkeypatch.setattr(q, "ground_states", broken)
    out = tmp_path / "out"
    rc = cli.main(["run", "--config", _write(tmp_path, _small()), "--out", str(out)])
    assert rc == 3
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["exp.yaml"]


def test_run_artifacts_and_idempotence(tmp_path):
    path = _write(tmp_path, _small())
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", path, "--out", str(a)]) == 0
    assert cli.main(["run", "--config", path, "--out", str(b), "--workers", "2"]) == 0
    csvs = sorted(p.name for p in a.glob("series_*.csv"))
    # 2 panels x 2 measures x {ordered, quenched}
    assert len(csvs) == 8
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()
        with open(a / name) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["r", "mean", "std_error", "n_realizations"]
    dats = list(a.glob("plot_*.dat"))
    assert len(dats) == 8
    assert all(len(line.split()) == 2 for line in dats[0].read_text().splitlines()[1:])
    fits = json.loads((a / "fits.json").read_text())
    assert len(fits) == 8 and {f["kind"] for f in fits} == {"ordered", "quenched"}
    meta = json.loads((a / "metadata.json").read_text())
    assert meta["seed"] == 4 and meta["config"]["realizations"] == 12
    # the stored config reproduces the run
    c = tmp_path / "c"
    assert cli.main(["run", "--config", str(a / "config.yaml"), "--out", str(c)]) == 0
    for name in csvs:
        assert (a / name).read_bytes() == (c / name).read_bytes()


def test_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("QCLENGTH_REALIZATIONS", "3")
    monkeypatch.setenv("QCLENGTH_SEED", "77")
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, _small()), "--out", str(out), "--seed", "78"]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["realizations"] == 3
    assert meta["seed"] == 78
    monkeypatch.setenv("QCLENGTH_WORKERS", "many")
    assert cli.main(["validate", "--config", _write(tmp_path, _small())]) == 2


def test_monogamy_and_scaling_outputs(tmp_path):
    cfg = _small(
        panels=[{"mean": 1.5, "n_sites": n} for n in (8, 10, 12, 14)],
        measures=["discord"],
        monogamy=True,
        scaling={"transform": "xi"},
    )
    out = tmp_path / "m"
    assert cli.main(["run", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    mono = json.loads((out / "monogamy.json").read_text())
    assert len(mono) == 4 and "sum" in mono[0]["ordered"]
    sc = json.loads((out / "scaling.json").read_text())
    assert sc["transform"] == "xi" and len(sc["n_sites"]) == 4


def test_presets_and_dump(capsys):
    assert cli.main(["presets"]) == 0
    assert capsys.readouterr().out.split() == sorted(PRESETS)
    assert cli.main(["dump", "table1"]) == 0
    assert loads(capsys.readouterr().out) == preset("table1")


def test_mutually_exclusive_sources(tmp_path):
    assert cli.main(["validate", "--preset", "fig1", "--config", _write(tmp_path, _small())]) == 2
    assert cli.main(["validate"]) == 2
