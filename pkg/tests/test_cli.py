import json

import numpy as np
import pytest

from s3minimal.cli import REPORT_ENV, SCHEMA_VERSION, build_parser, main, resolve_options, run
from s3minimal.errors import ConfigParseError


def _report(out_dir, command):
    return json.loads((out_dir / f"{command}.json").read_text())


def test_verify_config_passes(tmp_path):
    assert main(["verify-config", "--N", "4", "--out", str(tmp_path)]) == 0
    rep = _report(tmp_path, "verify-config")
    assert rep["schema_version"] == SCHEMA_VERSION
    assert rep["passed"] and rep["failed"] == []
    counts = rep["stages"]["verify-config"]["values"]["counts"]
    assert counts == {"acol": 6, "rcol": 12, "scaf": 12, "ptcol_per_circle": [8], "prisms": 192}


def test_corrupted_circle_fails(tmp_path, capsys):
    assert main(["verify-config", "--N", "4", "--corrupt", "--out", str(tmp_path)]) == 1
    rep = _report(tmp_path, "verify-config")
    assert "verify-config:rcol_hopf_images" in rep["failed"]
    assert "FAILED verify-config:rcol_hopf_images" in capsys.readouterr().err


def test_reports_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["killing", "--N", "4", "--samples", "500", "--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert (a / "killing.json").read_bytes() == (b / "killing.json").read_bytes()


def test_seed_changes_sampling(tmp_path):
    main(["killing", "--N", "4", "--samples", "500", "--seed", "1", "--out", str(tmp_path / "a")])
    main(["killing", "--N", "4", "--samples", "500", "--seed", "2", "--out", str(tmp_path / "b")])
    ra, rb = _report(tmp_path / "a", "killing"), _report(tmp_path / "b", "killing")
    assert ra["stages"] != rb["stages"]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"N": 12, "seed": 3, "orbit-samples": 50}))
    args = build_parser().parse_args(["coloring", "--config", str(cfg), "--N", "4"])
    opts = resolve_options(args)
    assert opts["N"] == 4
    assert opts["seed"] == 3
    assert opts["orbit_samples"] == 50
    assert opts["refine"] == 4


@pytest.mark.parametrize(
    "content",
    ["{not json", "[1, 2]", json.dumps({"bogus": 1}), json.dumps({"N": "four"}), json.dumps({"weld_tol": "x"})],
)
def test_bad_config_exit_code(tmp_path, content, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(content)
    assert main(["verify-config", "--config", str(cfg)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["verify-config", "--config", str(tmp_path / "nope.json")]) == 2


def test_full_requires_n_in_4_plus_8z():
    with pytest.raises(ConfigParseError):
        run("full", {**_defaults(), "N": 8})


def test_stage_error_exit_code(capsys):
    assert main(["verify-config", "--N", "3"]) == 3
    assert "stage verify-config failed: InvalidN" in capsys.readouterr().err


def test_report_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(REPORT_ENV, str(tmp_path / "env"))
    assert main(["verify-config", "--N", "4"]) == 0
    assert (tmp_path / "env" / "verify-config.json").exists()


def test_flag_out_overrides_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(REPORT_ENV, str(tmp_path / "env"))
    assert main(["verify-config", "--N", "4", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "verify-config.json").exists()
    assert not (tmp_path / "env").exists()


def _defaults():
    args = build_parser().parse_args(["verify-config"])
    return resolve_options(args)


def test_enumerate_group_n4():
    rep = run("enumerate-group", {**_defaults(), "N": 4})
    assert rep["passed"], rep["failed"]
    v = rep["stages"]["enumerate-group"]["values"]
    assert v["order"] == 192 and v["kernel_order"] == 4 and v["stabilizer_T_C1_order"] == 32


def test_coloring_n12():
    rep = run("coloring", {**_defaults(), "N": 12})
    assert rep["passed"], rep["failed"]
    assert rep["stages"]["coloring"]["values"]["orbit_sizes"] == [288, 288]


def test_coloring_n8_recorded_inconsistent():
    rep = run("coloring", {**_defaults(), "N": 8})
    assert rep["failed"] == ["coloring:consistent"]
    assert len(rep["stages"]["coloring"]["values"]["witness"]) >= 3


def test_solve_disc_with_export(tmp_path):
    out = tmp_path / "disc.ply"
    opts = {**_defaults(), "refine": 3, "orbit_samples": 50, "export": str(out), "export_format": "ply"}
    rep = run("solve-disc", opts)
    assert rep["passed"], rep["failed"]
    assert out.read_text().startswith("ply")


def test_assemble_choe_soret():
    opts = {**_defaults(), "k": 2, "m": 1, "refine": 3, "orbit_samples": 50}
    rep = run("assemble", opts)
    assert rep["passed"], rep["failed"]
    v = rep["stages"]["assemble"]["values"]
    assert v["genus"] == 9 == v["expected_genus"]
    assert np.isclose(v["expected_total_curvature"], -v["copies"] * np.pi)


def test_choe_soret_rejects_bad_parameters():
    with pytest.raises(ConfigParseError):
        run("killing", {**_defaults(), "k": 1, "m": 1})


@pytest.mark.slow
def test_full_m0(tmp_path):
    assert main(["full", "--m", "0", "--refine", "3", "--orbit-samples", "100", "--samples", "2000",
                 "--out", str(tmp_path)]) == 0
    rep = _report(tmp_path, "full")
    v = rep["stages"]["assemble"]["values"]
    assert v["group_order"] == 192 and v["genus"] == 25 and v["chi"] == -48 and v["copies"] == 96
    assert abs(v["total_curvature"] + 96 * np.pi) < 0.02 * 96 * np.pi
