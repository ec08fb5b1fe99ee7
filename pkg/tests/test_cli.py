# Copyright 2023 Cloudbase Solutions Srl
#
#    Licensed under the Apache License, Version 2.0 (the "License"); you may
#    not use this file except in compliance with the License. You may obtain
#    a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#    WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#    License for the specific language governing permissions and limitations
#    under the License.

import json

import pytest
import yaml

from secantcert import main
from secantcert import verifier


def _run(tmp_path, *argv: str) -> int:
    return main.main_with_args([*argv, "--out", str(tmp_path / "certs"), "--threads", "1"])


def test_check_proven(tmp_path, capsys):
    assert _run(tmp_path, "check", "7", "8", "--seed", "1") == main.EXIT_PROVEN
    out = capsys.readouterr().out
    assert out.startswith("Using random seed: 1\n")
    assert "T(7, 8; 0, 0, 0) is TRUE (SUBABUNDANT)" in out
    assert (tmp_path / "certs" / "T_7_8_0_0_0.json").is_file()
    assert (tmp_path / "certs" / "T_7_8_0_0_0.txt").read_text().rstrip("\n") == out.rstrip("\n")


def test_check_basic(tmp_path, capsys):
    assert _run(tmp_path, "check", "7", "8", "--seed", "1", "--basic") == main.EXIT_PROVEN
    assert "Unoptimised matrix has rank 120 vs. 120 from R(Y)." in capsys.readouterr().out


def test_check_json(tmp_path, capsys):
    assert _run(tmp_path, "check", "8", "9", "--seed", "5", "--format", "json") == 0
    val = json.loads(capsys.readouterr().out)
    assert list(val)[:3] == ["version", "seed", "prime"]
    assert val["seed"] == 5
    assert val["verdict"] == "PROVEN_TRUE"


def test_check_defective(tmp_path, capsys):
    assert _run(tmp_path, "check", "2", "2", "--retries", "0") == main.EXIT_UNKNOWN
    out = capsys.readouterr().out
    assert "is UNKNOWN" in out
    assert "Note: known defective [CGG2002]" in out


@pytest.mark.parametrize("argv", [
    ["check", "2", "2", "1"],
    ["check", "8", "9", "--prime", "8190"],
    ["check", "8", "-1"],
    ["check", "8"],
    ["check", "8", "0"],
    ["check", "8", "9", "--d", "1"],
    ["check", "7", "8", "--seed", "18446744073709551621"],
    ["frobnicate"],
])
def test_usage_errors(tmp_path, argv):
    assert _run(tmp_path, *argv) == main.EXIT_USAGE


def test_env_overrides(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SECANTCERT_PRIME", "not-a-prime")
    assert _run(tmp_path, "formulas", "8") == main.EXIT_USAGE

    monkeypatch.setenv("SECANTCERT_PRIME", "65521")
    assert _run(tmp_path, "check", "7", "8", "--seed", "3", "--format", "json") == 0
    assert json.loads(capsys.readouterr().out)["prime"] == 65521

    assert _run(tmp_path, "check", "7", "8", "--seed", "3", "--format", "json",
                "--prime", "8191") == 0
    assert json.loads(capsys.readouterr().out)["prime"] == 8191


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.yml"
    cfg.write_text(yaml.safe_dump({"seed": 42, "format": "json"}))
    assert _run(tmp_path, "check", "7", "8", "--config", str(cfg)) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 42

    cfg.write_text(yaml.safe_dump({"seeed": 42}))
    assert _run(tmp_path, "check", "7", "8", "--config", str(cfg)) == main.EXIT_USAGE


def test_formulas(tmp_path, capsys):
    assert _run(tmp_path, "formulas", "8") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[:3] == ["N(8) = 165", "s1(8) = 9", "s2(8) = 10"]

    assert _run(tmp_path, "formulas", "79") == 0
    out = capsys.readouterr().out
    assert "t(79) = 279" in out
    assert "two-block statement: T(79, 96; 183, 183, 0)" in out

    assert _run(tmp_path, "formulas", "7") == main.EXIT_USAGE
    assert "n ≥ 8 required; T(7,3;8) handled directly" in capsys.readouterr().err


def test_verify(tmp_path, capsys):
    assert _run(tmp_path, "check", "7", "8", "--seed", "1") == 0
    path = tmp_path / "certs" / "T_7_8_0_0_0.json"
    capsys.readouterr()

    assert _run(tmp_path, "verify", str(path)) == main.EXIT_PROVEN
    assert "replays to 120 vs. 120 expected (PROVEN_TRUE)" in capsys.readouterr().out

    val = json.loads(path.read_text())
    val["rank"] -= 1
    path.write_text(json.dumps(val))
    assert _run(tmp_path, "verify", str(path)) == main.EXIT_MISMATCH
    assert "REPLAY MISMATCH" in capsys.readouterr().out

    path.write_text("{}")
    assert _run(tmp_path, "verify", str(path)) == main.EXIT_USAGE
    assert _run(tmp_path, "verify", str(tmp_path / "missing.json")) == main.EXIT_USAGE


def test_verify_unknown(tmp_path):
    assert _run(tmp_path, "check", "2", "2", "--retries", "0") == main.EXIT_UNKNOWN
    path = tmp_path / "certs" / "T_2_2_0_0_0.json"
    assert _run(tmp_path, "verify", str(path)) == main.EXIT_UNKNOWN


def test_conclude_empty_store(tmp_path, capsys):
    assert _run(tmp_path, "conclude", "100", "--i", "1") == main.EXIT_UNKNOWN
    out = capsys.readouterr().out
    assert "T(100, 879; 0, 0, 0) is not proven; missing facts:" in out
    assert "  T(71, 0; 96, 96, 96)" in out


def test_conclude_with_axioms(tmp_path, capsys):
    statements = []
    for case in verifier.BaseCase:
        for i in (1, 2):
            statements.extend(verifier.base_case_suite(case, i))
    axioms = tmp_path / "axioms.yml"
    axioms.write_text(yaml.safe_dump({"axioms": [
        {"statement": str(st), "tag": "assumed"} for st in statements]}))

    assert _run(tmp_path, "conclude", "100", "--axioms", str(axioms)) == 0
    out = capsys.readouterr().out
    assert out.startswith("n=100: T(100, 879; 0, 0, 0) and T(100, 880; 0, 0, 0) hold")
    assert "[axiom: assumed" in out

    assert _run(tmp_path, "conclude", "100", "--i", "2", "--axioms", str(axioms),
                "--format", "json") == 0
    val = json.loads(capsys.readouterr().out)
    assert val["proven"]
    assert val["derivation"]["i"] == 2

    assert _run(tmp_path, "conclude", "7", "--i", "1") == main.EXIT_USAGE


def test_conclude_small_n(tmp_path, capsys):
    assert _run(tmp_path, "conclude", "9", "--small-n-axiom") == 0
    assert "nondefective for all s" in capsys.readouterr().out
    assert _run(tmp_path, "conclude", "9") == main.EXIT_UNKNOWN


def test_conclude_from_certificates(tmp_path, capsys):
    assert _run(tmp_path, "check", "7", "8", "--seed", "1") == 0
    capsys.readouterr()
    assert _run(tmp_path, "conclude", "7") == 0
    assert "n=7: T(7, 8; 0, 0, 0) holds" in capsys.readouterr().out


def test_expected_dim(tmp_path, capsys):
    assert _run(tmp_path, "expected-dim", "8", "9") == 0
    out = capsys.readouterr().out
    assert "= min(153, 165) = 153 (subabundant)" in out
    assert "known defective" not in out

    assert _run(tmp_path, "expected-dim", "2", "2") == 0
    assert "known defective [CGG2002]" in capsys.readouterr().out

    assert _run(tmp_path, "expected-dim", "6", "3", "--d", "2", "--format", "json") == 0
    val = json.loads(capsys.readouterr().out)
    assert val["known_exception"]
    assert val["generic_rank"] == 4


def test_base_cases(tmp_path, capsys):
    argv = ["base-cases", "iv", "--max-n", "10", "--seed", "7"]
    assert _run(tmp_path, *argv) == main.EXIT_PROVEN
    out = capsys.readouterr().out
    assert "3/3 statements proven or already certified." in out
    for name in ("T_8_9_0_0_0", "T_9_11_0_0_0", "T_10_13_0_0_0"):
        assert (tmp_path / "certs" / f"{name}.json").is_file()

    assert _run(tmp_path, *argv, "--format", "json") == main.EXIT_PROVEN
    rows = json.loads(capsys.readouterr().out)
    assert [row["verdict"] for row in rows] == ["SKIPPED"] * 3

    assert _run(tmp_path, "base-cases", "v") == main.EXIT_USAGE


def test_scaling(tmp_path, capsys):
    argv = ["scaling", "iv", "--n", "8", "9", "--seed", "1"]
    assert _run(tmp_path, *argv) == main.EXIT_PROVEN
    out = capsys.readouterr().out
    assert "T(9, 11; 0, 0, 0)" in out
    assert "Case (iv) log-log slope:" in out
    assert "(predicted exponent 9)" in out

    assert _run(tmp_path, *argv, "--format", "json") == main.EXIT_PROVEN
    val = json.loads(capsys.readouterr().out)
    assert [s["statement"] for s in val["samples"]] == ["T(8, 9; 0, 0, 0)", "T(9, 11; 0, 0, 0)"]

    assert _run(tmp_path, *argv, "--max-slope", "-100") == main.EXIT_UNKNOWN
    assert _run(tmp_path, "scaling", "iv", "--n", "8") == main.EXIT_USAGE
    assert _run(tmp_path, "scaling", "ii", "--n", "40", "44") == main.EXIT_USAGE
    assert _run(tmp_path, "scaling", "iv") == main.EXIT_USAGE
