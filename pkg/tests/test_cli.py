import csv

import pytest
from click.testing import CliRunner

from safectl.cli import EXIT_FOUND, EXIT_OK, EXIT_USAGE, cli
from safectl.scenario import load_scenario

HEADER = ["t", "x", "v", "a_n", "a_s", "x_c", "v_c", "intervened"]


@pytest.fixture
def invoke():
    runner = CliRunner()

    def call(*args):
        return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)
    return call


def test_simulate_fig2(invoke, root, tmp_path):
    out = tmp_path / "fig2.csv"
    res = invoke("simulate", root / "scenarios" / "fig2.toml", "--out", out)
    assert res.exit_code == EXIT_OK, res.output
    rows = list(csv.reader(out.open()))
    assert rows[0] == HEADER
    assert float(rows[-1][2]) == 0 and float(rows[-1][1]) <= 28


def test_simulate_violation_exit_code(invoke, root, tmp_path):
    out = tmp_path / "fig3.csv"
    res = invoke("simulate", root / "scenarios" / "fig3_witness.toml", "--out", out)
    assert res.exit_code == EXIT_FOUND
    assert float(list(csv.reader(out.open()))[-1][0]) == pytest.approx(0.1225148226554414, abs=1e-12)


def test_simulate_is_byte_identical(invoke, root, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    invoke("simulate", root / "scenarios" / "fig2.toml", "--out", a)
    invoke("simulate", root / "scenarios" / "fig2.toml", "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_bad_scenario_is_usage_error(invoke, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('model = "m1"\nsurprise = 1\n')
    res = invoke("simulate", bad, "--out", tmp_path / "x.csv")
    assert res.exit_code == EXIT_USAGE
    assert "surprise" in res.output
    res = invoke("simulate", tmp_path / "missing.toml")
    assert res.exit_code == EXIT_USAGE


def test_check_clean_and_violating(invoke, tmp_path):
    res = invoke("check", "--model", "m3", "--episodes", 200, "--obligations", 200, "--seed", 1,
                 "--replay-out", tmp_path / "r.toml")
    assert res.exit_code == EXIT_OK, res.output
    assert "seed = 1" in res.output
    replay = tmp_path / "cex.toml"
    res = invoke("check", "--model", "m3-wrong", "--params", "2,3,5,1", "--episodes", 2000,
                 "--obligations", 0, "--replay-out", replay)
    assert res.exit_code == EXIT_FOUND
    cfg = load_scenario(replay).config
    assert cfg.model == "m3-wrong"
    res = invoke("simulate", replay, "--out", tmp_path / "cex.csv")
    assert res.exit_code == EXIT_FOUND


def test_check_rejects_bad_params(invoke):
    assert invoke("check", "--model", "m1", "--params", "1,2").exit_code == EXIT_USAGE
    assert invoke("check", "--model", "m5", "--params", "2,6,5,0.5").exit_code == EXIT_USAGE


def test_compare(invoke, tmp_path):
    report, margins = tmp_path / "r.txt", tmp_path / "m.csv"
    res = invoke("compare", "--samples", 1000, "--seed", 2, "--report", report, "--margins-csv", margins)
    assert res.exit_code == EXIT_OK
    assert "passed = true" in report.read_text() and "seed = 2" in report.read_text()
    assert margins.read_text().startswith("a_s_min,")


def test_hp_commands(invoke, root, tmp_path):
    corpus = root / "src" / "safectl" / "corpus"
    state = [a for kv in ("x=0", "v=1", "xc=10", "asmin=5", "anmax=2", "anmin=3", "T=0.5")
             for a in ("--state", kv)]
    res = invoke("hp", "run", corpus / "model1.hp", "--depth", 1, "--samples", 1, *state)
    assert res.exit_code == EXIT_OK and res.output.startswith("completed")
    res = invoke("hp", "run", corpus / "model1.hp", "--state", "x=0")
    assert res.exit_code == EXIT_USAGE and res.output.startswith("Error:")
    prog = tmp_path / "p.hp"
    prog.write_text("x := 1 ++ x := 2")
    res = invoke("hp", "run", prog, "--state", "x=0")
    assert res.exit_code == EXIT_OK and res.output == "completed x=1\ncompleted x=2\n"
    out = tmp_path / "c.replay"
    res = invoke("hp", "check", prog, "--init", "x = 0", "--post", "x <= 1", "--state", "x=0",
                 "--replay-out", out)
    assert res.exit_code == EXIT_FOUND
    res = invoke("hp", "replay", prog, out, "--post", "x <= 1")
    assert res.exit_code == EXIT_FOUND
    res = invoke("hp", "check", prog, "--init", "x = 0", "--post", "x <= 2", "--state", "x=0",
                 "--replay-out", out)
    assert res.exit_code == EXIT_OK and "not a proof" in res.output


def test_hp_check_corpus(invoke, root, tmp_path):
    out = tmp_path / "m3w.replay"
    res = invoke("hp", "check", root / "src" / "safectl" / "corpus" / "model3_wrong.hp",
                 "--depth", 1, "--replay-out", out)
    assert res.exit_code == EXIT_FOUND
    res = invoke("hp", "replay", root / "src" / "safectl" / "corpus" / "model3_wrong.hp", out)
    assert res.exit_code == EXIT_FOUND


def test_hp_syntax_error(invoke, tmp_path):
    prog = tmp_path / "bad.hp"
    prog.write_text("x := ")
    res = invoke("hp", "run", prog)
    assert res.exit_code == EXIT_USAGE and "line 1" in res.output


def test_studies(invoke, tmp_path):
    res = invoke("study", "falsify", "--episodes", 200, "--seed", 3)
    assert res.exit_code == EXIT_FOUND and "seed = 3" in res.output
    res = invoke("study", "endstep", "--members", 20)
    assert "details.endpoint_violations = 0" in res.output
    res = invoke("study", "obligations", "--model", "m1", "--samples", 500)
    assert res.exit_code == EXIT_OK
