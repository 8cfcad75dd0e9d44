import subprocess
import sys

import pytest

from lrarnn.cli import main
from lrarnn.diagnostics import read_trace
from lrarnn.harness import RESULTS_HEADER, read_results
from lrarnn.tasks import Dataset

SMALL = ["--hidden", "6", "--val-size", "40", "--max-iters", "20", "--k", "2"]


def test_gen(tmp_path):
    out = tmp_path / "d.txt"
    assert main(["gen", "--task", "temporal-order-3bit", "--seq-len", "20", "--count", "30",
                 "--seed", "5", "--out", str(out)]) == 0
    ds = Dataset.load(out, n_symbols=6, n_classes=8)
    assert len(ds) == 30 and ds.seq_len == 20 and set(ds.labels) <= set(range(8))
    again = tmp_path / "e.txt"
    main(["gen", "--task", "temporal-order-3bit", "--seq-len", "20", "--count", "30",
          "--seed", "5", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_train_writes_results_and_trace(tmp_path, capsys):
    res, trace = tmp_path / "r.csv", tmp_path / "t.csv"
    code = main(["train", "--task", "random-permutation", "--seq-len", "10", "--trainer", "lra",
                 *SMALL, "--trace", str(trace), "--out", str(res)])
    assert code == 0
    assert "converged=" in capsys.readouterr().out
    row = read_results(res)[0]
    assert list(row) == RESULTS_HEADER and row["iterations"] == "20"
    rows, partial = read_trace(trace)
    assert len(rows) == 20 * 9 and not partial


def test_summarize(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    main(["train", "--task", "random-permutation", "--seq-len", "10", *SMALL,
          "--trace", str(trace)])
    capsys.readouterr()
    assert main(["summarize", "--trace", str(trace)]) == 0
    out = capsys.readouterr().out
    assert "reference layer t=8" in out


def test_scale_flag_and_overrides(tmp_path):
    from lrarnn.cli import _train_config, build_parser
    args = build_parser().parse_args(["train", "--task", "temporal-order", "--seq-len", "10",
                                      "--scale", "--max-iters", "5"])
    cfg = _train_config(args)
    assert (cfg.hidden, cfg.val_size, cfg.max_iters) == (50, 2000, 5)
    args = build_parser().parse_args(["train", "--task", "temporal-order", "--seq-len", "10"])
    cfg = _train_config(args)
    assert (cfg.hidden, cfg.val_size, cfg.max_iters) == (100, 10000, 100000)


def test_grid_and_curriculum(tmp_path):
    grid = tmp_path / "g.json"
    grid.write_text('{"alpha": [0.1], "gamma": [0.01], "k": [2], "hidden": 6, '
                    '"val_size": 40, "max_iters": 10}')
    assert main(["grid", "--task", "temporal-order", "--seq-len", "10", "--grid", str(grid),
                 "--out", str(tmp_path / "g")]) == 0
    assert len(read_results(tmp_path / "g" / "results.csv")) == 1
    assert main(["curriculum", "--task", "temporal-order", "--trainer", "lra",
                 "--grid", str(grid), "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "max_T.txt").read_text() == "-\n"


@pytest.mark.parametrize("argv", [
    [],
    ["train", "--task", "nope", "--seq-len", "10"],
    ["train", "--task", "temporal-order"],
    ["train", "--task", "temporal-order", "--seq-len", "5"],
    ["train", "--task", "temporal-order", "--seq-len", "10", "--alpha", "-1"],
    ["train", "--task", "temporal-order", "--seq-len", "10", "--trainer", "bptt",
     "--trace", "x.csv"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        sys.exit(main(argv))
    assert exc.value.code == 1


def test_runtime_errors(tmp_path):
    assert main(["summarize", "--trace", str(tmp_path / "missing.csv")]) == 2
    assert main(["gen", "--task", "temporal-order", "--seq-len", "10", "--count", "3",
                 "--out", str(tmp_path / "no" / "such" / "dir.txt")]) == 2


def test_malformed_trace_is_usage_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nonsense\n")
    assert main(["summarize", "--trace", str(bad)]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lrarnn", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "summarize" in proc.stdout
