import csv
import json

import pytest

from sram6t import cli, config
from sram6t.config import ConfigError, RunConfig, build_cell, from_dict, loads

FAST = {"analysis": {"transient": False, "sweep_cr": [1.0, 2.0]}}

# (document, dotted key the error must name)
MALFORMED = [
    ({"bogus": 1}, "bogus"),
    ({"technology": {"vdd": -1.2}}, "technology.vdd"),
    ({"technology": {"vdd": "1.2"}}, "technology.vdd"),
    ({"technology": {"cells_per_bitline": 2.5}}, "technology.cells_per_bitline"),
    ({"technology": {"nmos": {"alpha": 2.5}}}, "technology.nmos.alpha"),
    ({"technology": {"nmos": {"polarity": "p"}}}, "technology.nmos.polarity"),
    ({"technology": {"pmos": {"Vt": 0.4}}}, "technology.pmos.Vt"),
    ({"technology": {"ser": {"beta_e": 0}}}, "technology.ser.beta_e"),
    ({"technology": {"ser": {"flux": -1}}}, "technology.ser.flux"),
    ({"cell": {"cr": 0.5}}, "cell.cr"),
    ({"cell": {"pr": True}}, "cell.pr"),
    ({"cell": {"wmin_um": 0}}, "cell.wmin_um"),
    ({"cell": {"overrides": {"n_c": {"Vt0": 0.3}}}}, "cell.overrides.n_c"),
    ({"cell": {"overrides": {"n_a": {"W": 0.3}}}}, "cell.overrides.n_a.W"),
    ({"analysis": {"sweep_cr": [1.0, 3.0]}}, "analysis.sweep_cr"),
    ({"analysis": {"sweep_vwl": {"start": 0.8, "stop": 0.4}}}, "analysis.sweep_vwl.stop"),
    ({"analysis": {"montecarlo": {"trials": 0}}}, "analysis.montecarlo.trials"),
    ({"analysis": {"montecarlo": {"metrics": ["v_trip", "nope"]}}}, "analysis.montecarlo.metrics"),
    ({"analysis": {"seed": -3}}, "analysis.seed"),
    ({"output": {"dir": ""}}, "output.dir"),
]


@pytest.mark.parametrize("doc,key", MALFORMED, ids=[k for _, k in MALFORMED])
def test_malformed_config_exits_2(tmp_path, capsys, doc, key):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError) as e:
        config.load(path)
    assert e.value.key == key
    assert cli.main(["characterize", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert key in capsys.readouterr().err


def test_invalid_json_and_missing_file(tmp_path):
    with pytest.raises(ConfigError) as e:
        loads("{not json")
    assert e.value.key == "<document>"
    with pytest.raises(ConfigError) as e:
        config.load(tmp_path / "absent.json")
    assert e.value.key == "<file>"


def test_default_roundtrip():
    cfg = RunConfig.default()
    assert from_dict(cfg.to_dict()) == cfg
    assert loads(cfg.dumps()).dumps() == cfg.dumps()


def test_partial_config_roundtrip():
    doc = {"technology": {"vdd": 1.1, "nmos": {"Vt0": 0.35}, "ser": {"flux": 2.0}},
           "cell": {"cr": 1.5, "overrides": {"acc_a": {"Vt0": 0.4}}},
           "analysis": {"seed": 7, "montecarlo": {"trials": 50, "metrics": ["v_read"]}}}
    cfg = from_dict(doc)
    assert cfg.technology.vdd == 1.1 and cfg.technology.nmos.Vt0 == 0.35
    assert cfg.ser.flux == 2.0 and cfg.analysis.seed == 7
    assert from_dict(cfg.to_dict()) == cfg


def test_overrides_apply_to_one_device():
    cfg = from_dict({"cell": {"overrides": {"acc_a": {"Vt0": 0.45}}}})
    d = build_cell(cfg)
    assert d.acc_a.Vt0 == 0.45 and d.acc_b.Vt0 != 0.45


def _run(tmp_path, name, cmd, doc, *extra):
    out = tmp_path / name
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(json.dumps(doc))
    code = cli.main([cmd, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def _rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_sweep_cr_outputs(tmp_path):
    code, out = _run(tmp_path, "s", "sweep-cr", FAST)
    assert code == 0
    area = _rows(out / "area.csv")
    assert [float(r["relative_area"]) for r in area] == [1.0, pytest.approx(4 / 3)]
    assert list(_rows(out / "rsnm.csv")[0]) == ["cr", "rsnm_V", "hold_snm_V", "v_read_V", "v_trip_V"]
    assert list(_rows(out / "ser.csv")[0]) == ["cr", "qcrit_e_fC", "qcrit_h_fC", "ser_norm"]
    assert list(_rows(out / "leakage.csv")[0]) == ["cr", "pr", "i_s1_A", "i_s2_A", "i_s3_A",
                                                   "supply_A", "bitline_A"]
    assert list(_rows(out / "write_margins.csv")[0]) == ["cr", "wnm_V", "wlvm_V"]
    first = (out / "rsnm.csv").read_text().splitlines()[0]
    assert first.startswith("# figure:") and not any(c.isdigit() for c in first.split("CR")[0][9:])


def test_outputs_byte_identical(tmp_path):
    _, a = _run(tmp_path, "a", "sweep-cr", FAST)
    _, b = _run(tmp_path, "b", "sweep-cr", FAST)
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_montecarlo_identical_across_threads(tmp_path):
    doc = {"analysis": {"seed": 3, "montecarlo": {"trials": 40, "chunk": 8,
                                                  "metrics": ["v_trip", "srrv"]}}}
    c1, a = _run(tmp_path, "m1", "montecarlo", doc, "--threads", "1")
    c2, b = _run(tmp_path, "m4", "montecarlo", doc, "--threads", "4")
    assert c1 == c2 == 0
    for f in ("mc_v_trip.csv", "mc_srrv.csv", "mc_summary.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    rows = _rows(a / "mc_summary.csv")
    assert [r["metric"] for r in rows] == ["v_trip", "srrv"]
    assert sum(int(r["count"]) for r in _rows(a / "mc_v_trip.csv")) == 40


def test_montecarlo_needs_seed(tmp_path, capsys):
    code, _ = _run(tmp_path, "m", "montecarlo", {"analysis": {"montecarlo": {"trials": 5}}})
    assert code == 2
    assert "analysis.seed" in capsys.readouterr().err


def test_seed_flag_overrides(tmp_path):
    doc = {"analysis": {"montecarlo": {"trials": 10, "metrics": ["v_trip"]}}}
    code, out = _run(tmp_path, "m", "montecarlo", doc, "--seed", "5")
    assert code == 0 and "seed 5" in (out / "mc_summary.csv").read_text().splitlines()[0]


def test_sweep_vwl_outputs(tmp_path):
    doc = {"analysis": {"sweep_vwl": {"start": 0.6, "step": 0.2}}}
    code, out = _run(tmp_path, "v", "sweep-vwl", doc)
    assert code == 0
    rs = [float(r["rsnm_V"]) for r in _rows(out / "rsnm_vs_vwl.csv")]
    assert len(rs) == 4 and all(b <= a for a, b in zip(rs, rs[1:]))
    assist = _rows(out / "read_assist.csv")[0]
    assert float(assist["reference_cr"]) == 2.0


def test_characterize_functional_failure(tmp_path):
    doc = {"analysis": {"transient": False},
           "cell": {"overrides": {"n_b": {"Vt0": 0.75}}}}
    code, out = _run(tmp_path, "c", "characterize", doc)
    assert code == 4
    assert (out / "characterize.csv").exists()


def test_characterize_fast(tmp_path):
    code, out = _run(tmp_path, "c", "characterize", {"analysis": {"transient": False}})
    assert code == 0
    row = _rows(out / "characterize.csv")[0]
    assert row["read_delay_s"] == "" and float(row["rsnm_V"]) > 0


def test_bad_flags(tmp_path):
    assert cli.main(["characterize", "--threads", "0", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])


def test_assist_level_interpolates():
    assert cli.assist_level([0.0, 0.5, 1.0], [0.3, 0.2, 0.1], 0.15) == pytest.approx(0.75)
    assert cli.assist_level([0.0, 1.0], [0.1, 0.05], 0.2) is None
