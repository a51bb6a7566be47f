import json

import pytest

from hhlfaddeev.cli import DEFAULTS, _join_negative_values, build_parser, config_fields, run


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_negative_values_are_glued_to_flags():
    assert _join_negative_values(["tune", "--e2", "-1e-4"]) == ["tune", "--e2=-1e-4"]
    assert _join_negative_values(["--e2=-1", "--r", "2"]) == ["--e2=-1", "--r", "2"]


def test_reference(capsys):
    code, out, _ = call(capsys, "reference")
    data = json.loads(out)
    assert code == 0
    assert data["bosons"]["0"] == pytest.approx(-2.7238, rel=5e-4)
    assert data["fermions"]["5"] == pytest.approx(-1.0004, rel=5e-4)


def test_tune_contact(capsys):
    code, out, _ = call(capsys, "tune", "--shape", "contact", "--r", "0", "--e2", "-1e-4")
    assert code == 0
    assert json.loads(out)["v0"] == pytest.approx(-(2e-4) ** 0.5, rel=1e-12)


def test_two_body_reports_weinberg_values(capsys):
    code, out, _ = call(capsys, "two-body", "--shape", "gauss", "--r", "1", "--e2", "-1e-3",
                        "--energy", "-0.5", "--nu-max", "3")
    data = json.loads(out)
    assert code == 0
    assert [s["r"] for s in data["bound_states"]] == [0, 1]
    assert data["bound_states"][1]["energy"] == pytest.approx(-1e-3, rel=1e-6)
    assert len(data["weinberg"]["eta"]) == 3


def test_spectrum_contact_fermions(capsys):
    code, out, _ = call(capsys, "spectrum", "--shape", "contact", "--r", "0", "--e2", "-1e-3",
                        "--symmetry", "fermion")
    data = json.loads(out)
    assert code == 0
    assert [s["n"] for s in data["states"]] == [1, 3, 5]


def test_wavefunction_and_fidelity(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path, e2 in ((a, "-1e-3"), (b, "-1e-5")):
        code, out, _ = call(capsys, "wavefunction", "--shape", "contact", "--r", "0", "--e2", e2,
                            "--n", "1", "--out", str(path))
        assert code == 0 and json.loads(out)["norm"] == pytest.approx(1.0)
    code, out, _ = call(capsys, "fidelity", "--a", str(a), "--b", str(b))
    assert code == 0
    assert json.loads(out)["F"] == pytest.approx(1.0, abs=1e-6)


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"potential": {"depth": 1}}))
    code, _, err = call(capsys, "tune", "--config", str(cfg))
    assert code == 2 and "depth" in err
    cfg.write_text(json.dumps({"solver": {}}))
    assert call(capsys, "tune", "--config", str(cfg))[0] == 2


def test_config_file_values_are_used(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"potential": {"shape": "contact", "r": 0, "e2": -2e-2}}))
    code, out, _ = call(capsys, "tune", "--config", str(cfg))
    assert code == 0 and json.loads(out)["target"] == -2e-2


def test_invalid_input_exits_2(capsys):
    assert call(capsys, "tune", "--shape", "square", "--r", "0", "--e2", "-1e-3")[0] == 2
    assert call(capsys, "tune", "--shape", "gauss", "--r", "0", "--e2", "1e-3")[0] == 2


def test_unreachable_tuning_target_exits_3(capsys):
    code, _, err = call(capsys, "tune", "--shape", "contact", "--r", "1", "--e2", "-1e-3")
    assert code == 3 and "r=0" in err


def test_ablate_mask_without_resonant_term_exits_2(capsys):
    assert call(capsys, "ablate", "--shape", "gauss", "--masks", "0,1")[0] == 2


def test_help_lists_every_config_field(capsys):
    parser = build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(["sweep", "--help"])
    text = capsys.readouterr().out.replace("\n", " ")
    for name in config_fields():
        assert name in text
    assert len(config_fields()) == sum(len(v) for v in DEFAULTS.values())


def test_missing_subcommand_is_a_usage_error(capsys):
    assert call(capsys)[0] == 2
