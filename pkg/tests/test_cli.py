import csv
import io
import json
from pathlib import Path

import pytest

from hydrasim import reference
from hydrasim.cli import main
from hydrasim.ledger import load

DEEP_REORG = """
chains 2
lag 1
alloc 10 10
at 1 mine chain=0
at 2 mine chain=1
at 3 mine chain=0
at 4 mine chain=1
at 5 mine chain=0
at 6 mine chain=1
at 7 mine chain=0 parent=genesis
"""


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analytic_text_and_json(capsys):
    code, out, _ = run(capsys, "analytic", "-q", "0.16", "-N", "32", "-w", "5")
    assert code == 0 and "0.0785" in out
    code, out, _ = run(capsys, "analytic", "-q", "0.16", "-N", "32", "-w", "5", "--json", "--composed")
    payload = json.loads(out)
    assert code == 0 and payload["probability"] == pytest.approx(0.0785, abs=5e-4)


@pytest.mark.parametrize("argv", [
    ["analytic", "-q", "0", "-N", "32", "-w", "5"],
    ["analytic", "-q", "0.5", "-N", "32", "-w", "5"],
    ["analytic", "-q", "0.1", "-N", "0", "-w", "5"],
    ["analytic", "-q", "0.1", "-N", "4"],
    ["nonsense"],
    [],
])
def test_usage_errors_exit_1(capsys, argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1


def test_numerical_failure_exits_2(capsys):
    code, _, err = run(capsys, "analytic", "-q", "0.26", "-N", "32", "-w", "9",
                       "--tol-rel", "1e-16", "--tol-abs", "1e-18")
    assert code == 2 and "numerical failure" in err


def test_table1_json(capsys):
    code, out, _ = run(capsys, "table1", "--json", "--trials", "2000")
    cells = json.loads(out)["cells"]
    assert code == 0 and len(cells) == len(reference.QS) * len(reference.WS)
    flagged = [c for c in cells if "note" in c]
    assert [(c["q"], c["w"]) for c in flagged] == [(0.06, 2)]
    assert flagged[0]["probability"] == pytest.approx(0.0323, abs=5e-4)
    assert "simulated" in flagged[0]


def test_table1_text(capsys):
    code, out, _ = run(capsys, "table1", "--trials", "0")
    assert code == 0 and "computed" in out and "q=0.06, w=2" in out


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "-q", "0.1,0.2", "-N", "1,4", "-w", "1-3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 12
    assert {r["w"] for r in rows} == {"1", "2", "3"}
    code, out, _ = run(capsys, "sweep", "-q", "0.16", "-N", "32", "-w", "5", "--json")
    cells = json.loads(out)["cells"]
    assert code == 0 and cells[0]["probability"] == pytest.approx(0.0785, abs=5e-4)


def test_montecarlo(capsys):
    code, out, _ = run(capsys, "montecarlo", "-q", "0.26", "-N", "4", "-w", "3", "--trials", "5000", "--json")
    payload = json.loads(out)
    assert code == 0 and payload["trials"] == 5000 and 0 < payload["probability"] < 1


def test_throughput(capsys):
    code, out, _ = run(capsys, "throughput")
    assert code == 0 and out.strip() == "231.48 tps"
    code, out, _ = run(capsys, "throughput", "--interval", "600", "--json")
    assert json.loads(out)["tps"] == pytest.approx(6.94, abs=0.01)


def test_simulate_fork_cascade(capsys, tmp_path):
    scenario = str(Path(__file__).parents[1] / "scenarios" / "fork_cascade.txt")
    export, balances = tmp_path / "chain.txt", tmp_path / "bal.csv"
    code, out, _ = run(capsys, "simulate", scenario, "--json", "--export", str(export), "--balances", str(balances))
    report = json.loads(out)
    assert code == 0
    assert len(report["reorgs"]) == 1
    rejected = {(r["tx"]["from"], r["tx"]["to"], r["tx"]["value"]) for r in report["rejected"]}
    assert (11, 21, 25) in rejected
    with open(export) as fp:
        assert load(fp, 2).state_digest().hex() == report["state_digest"]
    assert balances.read_text().startswith("account,balance\n")

    code, again, _ = run(capsys, "simulate", scenario, "--json")
    assert json.loads(again)["state_digest"] == report["state_digest"]


def test_simulate_empty_scenario(capsys, tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# nothing happens\n")
    code, out, _ = run(capsys, "simulate", str(path), "--json")
    report = json.loads(out)
    assert code == 0 and report["blocks"] == [] and report["tree_height"] == 0


def test_simulate_deep_reorg_exits_3(capsys, tmp_path):
    path = tmp_path / "deep.txt"
    path.write_text(DEEP_REORG)
    code, out, err = run(capsys, "simulate", str(path))
    assert code == 3 and "VIOLATION" in out and "scenario violation" in err


def test_simulate_bad_file_exits_1(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("at 1 tx 99 1 5\n")
    code, _, err = run(capsys, "simulate", str(path))
    assert code == 1 and "no allocation" in err
    code, _, _ = run(capsys, "simulate", str(tmp_path / "missing.txt"))
    assert code == 1
