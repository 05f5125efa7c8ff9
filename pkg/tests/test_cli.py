import io
import json
from pathlib import Path

import pytest

from daerelax.cli import (EXIT_CHECK, EXIT_F1, EXIT_F2, EXIT_F3, EXIT_METHOD, EXIT_OK, EXIT_USAGE, main,
                          parse_pivot, parse_xi)

GOLDEN = Path(__file__).parent / "golden"


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def test_modify_intro_matches_golden_file(tmp_path):
    emitted = tmp_path / "intro_sub.dae"
    code, text = run("modify", "intro", "--method", "substitution", "--emit", str(emitted))
    assert code == EXIT_OK
    assert emitted.read_text() == (GOLDEN / "intro_substitution.dae").read_text()
    assert emitted.read_text().splitlines()[1] == "eq x3 = 0;"


def test_modify_lcfail_with_lc_is_a_method_failure():
    code, text = run("modify", "lcfail", "--method", "lc")
    assert code == EXIT_METHOD
    assert "LCConditionError" in text


def test_analyze_exit_codes():
    assert run("analyze", "intro")[0] == EXIT_F3
    assert run("analyze", "no_matching")[0] == EXIT_F1
    assert run("analyze", "singular_point")[0] == EXIT_F2
    code, text = run("analyze", "lcfail", "--show-entries")
    assert "D[1,1] = x2'" in text


def test_modify_structural_failure_exit_code():
    assert run("modify", "no_matching")[0] == EXIT_F1


def test_usage_errors():
    assert run()[0] == EXIT_USAGE
    assert run("analyze", "does_not_exist.dae")[0] == EXIT_USAGE
    assert run("modify", "intro", "--p", "0,0,0")[0] == EXIT_USAGE


def test_parse_errors_exit_with_usage(tmp_path):
    bad = tmp_path / "bad.dae"
    bad.write_text("var x1;\neq x1 + z = 0;\n")
    assert run("analyze", str(bad))[0] == EXIT_USAGE


def test_pivot_and_xi_parsing():
    assert parse_pivot("r=11,I={3,4,5},J={3,4,6}") == {"r": 10, "I": (2, 3, 4), "J": (2, 3, 5)}
    assert parse_xi("x1'=0.5,der(x2,2)=1") == {("x1", 1): 0.5, ("x2", 2): 1.0}


def test_report_and_trajectory_check(tmp_path):
    rep = tmp_path / "r.json"
    code, text = run("modify", "lcfail", "--method", "aug", "--trajectory", "lcfail.traj", "--out", str(rep))
    assert code == EXIT_OK
    data = json.loads(rep.read_text())
    assert data["residual_check"]["passed"] is True
    assert data["options"]["method"] == "augmentation"


def test_reports_are_deterministic_for_a_seed(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("modify", "pendulum", "--seed", "3", "--out", str(a))
    run("modify", "pendulum", "--seed", "3", "--out", str(b))
    assert a.read_text() == b.read_text()


def test_check_subcommand(tmp_path):
    emitted = tmp_path / "lc_aug.dae"
    run("modify", "lcfail", "--method", "aug", "--emit", str(emitted))
    code, text = run("check", "lcfail", "--against", str(emitted), "--trajectory", "lcfail.traj")
    assert code == EXIT_OK, text
    wrong = tmp_path / "wrong.traj"
    wrong.write_text("trajectory { x1 = t; x2 = t; grid = 0:0.5:1; }")
    assert run("check", "lcfail", "--against", str(emitted), "--trajectory", str(wrong))[0] == EXIT_CHECK


def test_manual_pivot_selection_on_the_command_line():
    code, text = run("modify", "ring_modulator", "--method", "sub", "--pivot", "r=5,I={3,4,6},J={3,4,5}")
    assert code == EXIT_METHOD and "NonlinearTargetsError" in text
    code, text = run("modify", "ring_modulator", "--method", "aug", "--pivot", "r=5,I={3,4,6},J={3,4,5}")
    assert code == EXIT_OK


@pytest.mark.slow
def test_bench_all_instances_reach_ok():
    code, text = run("bench", "--jobs", "2")
    assert code == EXIT_OK
    rows = [ln for ln in text.splitlines()[1:] if ln and not ln.startswith(" ")]
    assert len(rows) == 4 and all(" OK " in ln for ln in rows)
