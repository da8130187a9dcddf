import json

import pandas as pd
import pytest

from app import build_parser, main
from src.cli.utils.helpers import config_hash
from src.cli.utils.validators import build_config, validate_config
from src.modelling.errors import ConfigInvalid


def _result(path):
    return json.loads(path.read_text(encoding="utf-8"))["result"]


def test_unknown_keys_are_reported():
    is_valid, errors = validate_config("exponents", {"d": 2, "bogus": 1})
    assert not is_valid
    assert errors == ["bogus: unknown key"]


def test_invalid_values_name_their_key():
    with pytest.raises(ConfigInvalid) as excinfo:
        build_config("solve-nls", flags={"T": "-1"})
    assert excinfo.value.key == "T"
    with pytest.raises(ConfigInvalid) as excinfo:
        build_config("admissible", flags={"q": "1"})
    assert excinfo.value.key == "q"


def test_flags_override_file_and_defaults():
    config = build_config("exponents", {"alpha": "5"}, {"p": "3", "alpha": None})
    assert config == {"d": 2, "p": 3, "alpha": "5"}
    assert build_config("solve-nls", flags={"mu": ["1", "0.5"]})["mu"] == [1.0, 0.5]


def test_config_hash_ignores_key_order():
    assert config_hash("exponents", {"d": 2, "p": 2}) == config_hash("exponents", {"p": 2, "d": 2})
    assert config_hash("exponents", {"d": 2, "p": 2}) != config_hash("exponents", {"d": 2, "p": 3})


def test_parser_exposes_config_keys_as_flags():
    args = build_parser().parse_args(["transform-roundtrip", "--n-s", "16", "--trials", "2"])
    assert args.n_s == "16"
    assert args.trials == "2"
    assert args.M is None


def test_admissible_writes_csv(tmp_path):
    assert main(["admissible", "--p", "3", "--q", "2", "--r", "inf", "--outdir", str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / "admissible.csv", comment="#")
    assert list(frame.columns) == ["q", "r", "admissible", "endpoint", "sigma"]
    assert not frame.loc[0, "admissible"]
    assert (tmp_path / "admissible.csv").read_text(encoding="utf-8").startswith("# htype-lab 0.1.0 admissible")


def test_group_check_exit_codes(tmp_path):
    assert main(["group-check", "--d", "2", "--p", "3", "--outdir", str(tmp_path)]) == 0
    assert all(_result(tmp_path / "group_check.json")["acceptance"].values())
    assert main(["group-check", "--d", "1", "--p", "2", "--outdir", str(tmp_path)]) == 2


def test_bad_config_file_exits_with_two(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"d": 2, "unknown": 1}), encoding="utf-8")
    assert main(["exponents", "--config", str(config), "--outdir", str(tmp_path)]) == 2
    assert main(["exponents", "--config", str(tmp_path / "missing.json"), "--outdir", str(tmp_path)]) == 2


def test_exponents_summary(tmp_path):
    assert main(["exponents", "--outdir", str(tmp_path)]) == 0
    result = _result(tmp_path / "exponents.json")
    assert result["s_star"] == "7/2"
    assert result["critical_pair"]["q"] == "4"
    assert result["critical_pair"]["r"] == "inf"
    assert result["contraction_time_exponent"] == "1/2"


def test_pair_search_scans_the_range(tmp_path):
    assert main(["pair-search", "--outdir", str(tmp_path)]) == 0
    result = _result(tmp_path / "pair_search.json")
    assert len(result["pairs"]) == 8
    assert (result["pairs"][0]["q"], result["pairs"][0]["r"]) == ("4", "inf")
    assert all(row["admissible"] for row in result["pairs"])
    assert main(["pair-search", "--s", "3", "--outdir", str(tmp_path)]) == 0
    assert _result(tmp_path / "pair_search.json")["pairs"][0]["q"] is None


def test_artifacts_are_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["exponents", "--alpha", "7/3", "--outdir", str(first)]) == 0
    assert main(["exponents", "--alpha", "7/3", "--outdir", str(second)]) == 0
    assert (first / "exponents.json").read_bytes() == (second / "exponents.json").read_bytes()


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HTYPE_LAB_OUT", str(tmp_path / "env_out"))
    assert main(["admissible"]) == 0
    assert (tmp_path / "env_out" / "admissible.json").exists()


def test_report_aggregates_artifacts(tmp_path):
    assert main(["report", "--outdir", str(tmp_path)]) == 2
    main(["group-check", "--outdir", str(tmp_path)])
    main(["exponents", "--outdir", str(tmp_path)])
    assert main(["report", "--outdir", str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / "report.csv", comment="#")
    assert set(frame["artifact"]) == {"group_check", "exponents"}
    markdown = (tmp_path / "report.md").read_text(encoding="utf-8")
    assert "## group_check (group-check): passed" in markdown


def test_small_transform_roundtrip(tmp_path):
    argv = [
        "transform-roundtrip", "--d", "1", "--p", "1", "--M", "4", "--n-s", "16",
        "--band", "3", "--trials", "2", "--outdir", str(tmp_path),
    ]
    assert main(argv) == 0
    frame = pd.read_csv(tmp_path / "transform_roundtrip.csv", comment="#")
    assert len(frame) == 2
    assert frame["roundtrip_error"].max() <= 1e-6


def test_converged_solver_passes_every_acceptance_check(tmp_path):
    argv = [
        "solve-nls", "--s", "19/5", "--M", "2", "--n-s", "8", "--n-t", "4",
        "--amplitude", "0.05", "--outdir", str(tmp_path),
    ]
    assert main(argv) == 0
    acceptance = _result(tmp_path / "solve_nls.json")["acceptance"]
    assert acceptance == {"converged": True, "contraction": True, "mass_drift": True}


def test_unconverged_solver_fails_acceptance(tmp_path):
    argv = [
        "solve-nls", "--s", "19/5", "--M", "2", "--n-s", "8", "--n-t", "4",
        "--n-iter", "1", "--outdir", str(tmp_path),
    ]
    assert main(argv) == 4
    assert len(list((tmp_path / "solve_nls_states").glob("u_*.spec"))) == 5
    frame = pd.read_csv(tmp_path / "solve_nls.csv", comment="#")
    assert list(frame.columns) == ["iteration", "d_Xs", "d_X0", "mass", "T"]
