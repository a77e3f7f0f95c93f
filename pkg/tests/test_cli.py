import json
import math
from pathlib import Path

import pytest

from levyexit.cli import build_parser, main

GOLDEN = Path(__file__).parent / "golden"
COMMANDS = ["predict", "minimize", "simulate", "sweep", "verify-bounds", "report"]

PLAN = {
    "measure": {"kind": "ExpPower", "alpha": 0.5},
    "potential": "Quadratic",
    "eps_grid": [0.2, 0.15, 0.1],
    "n_paths": 120,
    "regime": "subexp",
    "master_seed": 5,
}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_predict_subexp(capsys):
    code, out, _ = run(capsys, "predict", "--regime", "subexp", "--alpha", "0.5", "--eps", "0.25")
    assert code == 0
    assert json.loads(out)["rate_constant"] == pytest.approx(0.270671, abs=1e-6)


def test_predict_superexp(capsys):
    code, out, _ = run(capsys, "predict", "--regime", "superexp", "--alpha", "2", "--eps", "0.25")
    assert code == 0
    assert json.loads(out)["log_mean_exit"] == pytest.approx(9.41944, abs=1e-3)


def test_predict_measure_json(capsys):
    m = json.dumps({"kind": "ExpPower", "alpha": 0.5})
    code, out, _ = run(capsys, "predict", "--measure", m, "--regime", "bounded", "--theta", "0.5", "--eps", "0.04")
    assert code == 0
    assert json.loads(out)["log_mean_exit"] == pytest.approx(5 * math.sqrt(2))


def test_predict_bounded_needs_theta(capsys):
    code, _, err = run(capsys, "predict", "--regime", "bounded", "--alpha", "0.5", "--eps", "0.25")
    assert code == 2 and "theta" in err


def test_predict_domain_error(capsys):
    code, _, _ = run(capsys, "predict", "--regime", "subexp", "--alpha", "2", "--eps", "0.25")
    assert code == 2


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["predict", "--regime", "subexp", "--alpha", "0.5", "--eps", "0.25", "--bogus"])
    assert exc.value.code == 2


def test_minimize(capsys):
    code, out, _ = run(capsys, "minimize", "--alpha", "0.5", "--theta", "0.4", "--k", "3")
    data = json.loads(out)
    assert code == 0
    assert data["closed"] == pytest.approx(1.712124, abs=1e-6)
    assert data["brute"] == pytest.approx(data["closed"], abs=0.02)
    code, _, _ = run(capsys, "minimize", "--alpha", "2", "--theta", "0.3", "--k", "3")
    assert code == 2


def test_simulate_and_dump(capsys, tmp_path):
    dump = tmp_path / "events.csv"
    argv = ["simulate", "--alpha", "0.5", "--eps", "0.1", "--n-paths", "3", "--seed", "4", "--dump-events", str(dump)]
    code, out, _ = run(capsys, *argv)
    rows = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and len(rows) == 3
    lines = dump.read_text().splitlines()
    assert lines[0] == "path_id,S_k,W_k"
    assert len(lines) - 1 == sum(r["n_large_jumps"] for r in rows)
    assert run(capsys, *argv)[1] == out


def test_simulate_pdmp_with_diffusion_fails(capsys):
    code, _, _ = run(capsys, "simulate", "--alpha", "0.5", "--eps", "0.1", "--d", "0.5")
    assert code == 2


def test_sweep_outputs_and_determinism(capsys, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps(PLAN))
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "sweep", str(plan), "--output", str(a))[0] == 0
    assert run(capsys, "sweep", str(plan), "--output", str(b), "--threads", "3")[0] == 0
    csv_a = (a / "sweep.csv").read_bytes()
    assert csv_a == (b / "sweep.csv").read_bytes()
    assert (a / "fit.json").read_bytes() == (b / "fit.json").read_bytes()
    assert len(csv_a.decode().splitlines()) == 1 + len(PLAN["eps_grid"])
    code, out, _ = run(capsys, "report", str(a))
    assert code == 0 and "slope=" in out


def test_sweep_rejects_small_n_paths(capsys, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({**PLAN, "n_paths": 10}))
    code, _, err = run(capsys, "sweep", str(plan), "--output", str(tmp_path / "out"))
    assert code == 2 and "n_paths" in err


def test_report_missing_dir(capsys, tmp_path):
    assert run(capsys, "report", str(tmp_path))[0] == 2


def test_verify_big_sum_defaults(capsys):
    code, out, _ = run(capsys, "verify-bounds", "--lemma", "34")
    assert code == 0
    assert out.count("[PASS]") == 6


def test_verify_survival_bounds(capsys):
    code, out, _ = run(capsys, "verify-bounds", "--lemma", "31")
    assert code == 0 and "FAIL" not in out
    assert run(capsys, "verify-bounds", "--lemma", "31", "--C", "2", "--T", "0.5")[0] == 2


def test_verify_small_sup_skip(capsys, caplog):
    code, out, _ = run(capsys, "verify-bounds", "--lemma", "33", "--g", "2", "--f", "2.02", "--T", "1")
    assert code == 0
    assert "SKIP" in out
    assert any("outside the asserted regime" in r.message for r in caplog.records)


def test_verify_deterministic(capsys):
    a = run(capsys, "verify-bounds", "--lemma", "34", "--samples", "2000", "--seed", "3")[1]
    b = run(capsys, "verify-bounds", "--lemma", "34", "--samples", "2000", "--seed", "3")[1]
    assert a == b


def test_output_file(capsys, tmp_path):
    out = tmp_path / "pred.json"
    code, stdout, _ = run(capsys, "predict", "--regime", "subexp", "--alpha", "0.5", "--eps", "0.25", "--output", str(out))
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text(encoding="utf-8"))["regime"] == "SubExp"


def _help_text(name):
    parser = build_parser()
    if name == "main":
        return parser.format_help()
    sub = next(a for a in parser._actions if a.dest == "command")
    return sub.choices[name].format_help()


@pytest.mark.parametrize("name", ["main"] + COMMANDS)
def test_help_golden(name, monkeypatch):
    monkeypatch.setenv("COLUMNS", "80")
    assert _help_text(name) == (GOLDEN / f"help_{name}.txt").read_text()
