import csv
import math
import textwrap

import numpy as np
import pytest

from blocksg.cli import main, parse_params
from blocksg.experiment import (
    ConfigError,
    derive_seed,
    format_table,
    parse_config,
    report_table,
    splitmix64,
    summary_stats,
    summarize,
    TrialResult,
)
from blocksg.problems import dense_read, libsvm_read

SMALL = """
[experiment]
name = "small"
trials = {trials}
master_seed = 42
output = "out"

[problem]
name = "least_squares"
dim = 6
n_samples = {n_samples}
mode = "finite_sum"

[[solver]]
name = "BSG"
method = "bsg"
epochs = {epochs}
record_every = 0.5
stepsize = {{ kind = "dim_sqrt", theta = 0.2 }}
batch = {{ kind = "constant", m = 2 }}

[[solver]]
name = "SG"
method = "sg"
epochs = {epochs}
stepsize = {{ kind = "dim_sqrt", theta = 0.2 }}
batch = {{ kind = "constant", m = 2 }}
"""


def write_config(tmp_path, trials=2, n_samples="[20, 40]", epochs=1, extra=""):
    p = tmp_path / "exp.toml"
    p.write_text(SMALL.format(trials=trials, n_samples=n_samples, epochs=epochs) + textwrap.dedent(extra))
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestRun:
    def test_outputs_and_determinism(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["run", "-q", str(cfg)]) == 0
        out = tmp_path / "out"
        files = sorted(p.relative_to(out) for p in out.rglob("*") if p.is_file())
        first = {f: (out / f).read_bytes() for f in files}
        assert main(["run", "-q", str(cfg)]) == 0
        assert {f: (out / f).read_bytes() for f in files} == first
        assert (out / "traces" / "N20" / "trial0001__SG.csv").is_file()
        rows = read_csv(out / "final.csv")
        assert len(rows) == 1 + 2 * 2 * 2
        trace = read_csv(out / "traces" / "N40" / "trial0000__BSG.csv")
        assert trace[0] == ["trial", "solver", "epoch", "seconds", "objective", "metric"]
        assert [float(r[2]) for r in trace[1:]] == [0.0, 0.5, 1.0]
        assert all(r[3] == "0" for r in trace[1:])
        assert "runs written" in capsys.readouterr().out

    def test_table_shape(self, tmp_path):
        main(["run", "-q", str(write_config(tmp_path))])
        lines = (tmp_path / "out" / "table.txt").read_text().splitlines()
        assert lines[0].split() == ["N", "BSG", "SG"]
        assert [ln.split()[0] for ln in lines[1:]] == ["N20", "N40"]

    def test_zero_budget_reports_initial_objective(self, tmp_path):
        main(["run", "-q", str(write_config(tmp_path, trials=1, n_samples="20", epochs=0))])
        rows = read_csv(tmp_path / "out" / "final.csv")[1:]
        trace = read_csv(tmp_path / "out" / "traces" / "all" / "trial0000__BSG.csv")
        assert len(trace) == 2
        assert float(rows[0][6]) == float(trace[1][4])

    def test_single_trial_std_zero(self, tmp_path):
        main(["run", "-q", str(write_config(tmp_path, trials=1, n_samples="20"))])
        summary = read_csv(tmp_path / "out" / "summary.csv")
        assert summary[0] == ["sweep", "solver", "count", "mean", "std", "min", "max"]
        assert all(float(r[4]) == 0.0 and r[2] == "1" for r in summary[1:])

    def test_master_seed_changes_results(self, tmp_path):
        cfg = write_config(tmp_path, trials=1, n_samples="20")
        main(["run", "-q", str(cfg)])
        a = (tmp_path / "out" / "final.csv").read_text()
        cfg.write_text(cfg.read_text().replace("master_seed = 42", "master_seed = 43"))
        main(["run", "-q", str(cfg)])
        assert (tmp_path / "out" / "final.csv").read_text() != a

    @pytest.mark.parametrize("extra, text", [
        ("[evaluation]\nbogus = 1\n", "bogus"),
        ("", None),
    ])
    def test_unknown_keys(self, tmp_path, capsys, extra, text):
        cfg = write_config(tmp_path, extra=extra)
        if text is None:
            cfg.write_text(cfg.read_text().replace("dim = 6", "dim = 6\nwidth = 3"))
            text = "width"
        assert main(["run", str(cfg)]) == 1
        assert text in capsys.readouterr().err

    @pytest.mark.parametrize("old, new", [
        ("trials = 2", "trials = 0"),
        ('method = "sg"', 'method = "adam"'),
        ('kind = "dim_sqrt", theta = 0.2 }\nbatch', 'kind = "dim_sqrt", theta = -1.0 }\nbatch'),
        ("n_samples = [20, 40]", "n_samples = [20, 0]"),
        ('name = "SG"', 'name = "BSG"'),
        ("[experiment]", "[experiment\n"),
    ])
    def test_invalid_values(self, tmp_path, old, new):
        cfg = write_config(tmp_path)
        text = cfg.read_text()
        assert old in text
        cfg.write_text(text.replace(old, new, 1))
        assert main(["run", "-q", str(cfg)]) == 1

    def test_missing_config(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.toml")]) == 1

    def test_numerical_failure(self, tmp_path):
        cfg = write_config(tmp_path, trials=1, n_samples="20")
        cfg.write_text(cfg.read_text().replace('{ kind = "dim_sqrt", theta = 0.2 }',
                                               '{ kind = "constant", theta = 1e150, cap = false }'))
        with np.errstate(all="ignore"):
            assert main(["run", "-q", str(cfg)]) == 2


class TestReport:
    def test_missing_prefix(self, tmp_path, capsys):
        assert main(["report", str(tmp_path / "none")]) == 1
        assert "no results" in capsys.readouterr().err

    def test_recomputes_mean_and_std(self, tmp_path, capsys):
        out = tmp_path / "res"
        out.mkdir()
        (out / "final.csv").write_text(
            "sweep,n_samples,trial,solver,final_objective,final_metric,final_value\n"
            "all,10,0,BSG,1,,1\nall,10,1,BSG,3,,3\n")
        assert main(["report", str(out)]) == 0
        rows, _ = report_table(out)
        assert rows[0].mean == 2.0 and rows[0].std == pytest.approx(math.sqrt(2.0))
        assert "2.00e+00" in capsys.readouterr().out
        assert (out / "summary.csv").is_file()

    def test_bad_header(self, tmp_path):
        (tmp_path / "final.csv").write_text("a,b\n")
        assert main(["report", str(tmp_path)]) == 2

    def test_report_matches_run(self, tmp_path):
        main(["run", "-q", str(write_config(tmp_path))])
        before = (tmp_path / "out" / "summary.csv").read_bytes()
        assert main(["report", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "summary.csv").read_bytes() == before


class TestGenData:
    def test_logistic(self, tmp_path):
        p = tmp_path / "l.svm"
        assert main(["gen-data", "logistic", "n_features=5,n_samples=12,seed=3", str(p)]) == 0
        X, y = libsvm_read(p, n_features=5)
        assert X.shape == (12, 5) and set(y) == {-1.0, 1.0}

    def test_bilinear_then_subsample(self, tmp_path):
        a, b = tmp_path / "b.txt", tmp_path / "s.txt"
        assert main(["gen-data", "bilinear", "d1=4,d2=30,n_samples=6", str(a)]) == 0
        assert main(["gen-data", "subsample", f"source={a},n_slices=5,repeats=2", str(b)]) == 0
        X, y = dense_read(b)
        assert X.shape == (12, 4, 5) and y.shape == (12,)

    @pytest.mark.parametrize("argv", [
        ["gen-data", "logistic", "bogus=1", "x"],
        ["gen-data", "logistic", "n_features", "x"],
        ["gen-data", "tensor", "", "x"],
        ["gen-data", "subsample", "", "x"],
        ["frobnicate"],
        [],
    ])
    def test_usage_errors(self, tmp_path, argv):
        argv = [str(tmp_path / a) if a == "x" else a for a in argv]
        assert main(argv) == 1

    def test_help_is_success(self):
        assert main(["--help"]) == 0

    def test_parse_params(self):
        assert parse_params("a=1, b=0.5,c=name") == {"a": 1, "b": 0.5, "c": "name"}
        assert parse_params("") == {}
        with pytest.raises(ConfigError):
            parse_params("=3")


class TestCheck:
    def test_passing_suites(self, capsys):
        assert main(["check", "--suite", "dual", "--suite", "prox"]) == 0
        assert "2/2 suites passed" in capsys.readouterr().out

    def test_recursion_suite_fails(self, capsys):
        assert main(["check", "--suite", "recursion"]) == 2
        assert capsys.readouterr().out.startswith("FAIL")


class TestSeedsAndSummaries:
    def test_splitmix_reference(self):
        # first output of the reference generator seeded with 0
        assert splitmix64(0) == 0xE220A8397B1DCDAF

    def test_derive_seed(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert len({derive_seed(0, a, b) for a in range(20) for b in range(20)}) == 400
        assert 0 <= derive_seed(2 ** 64 - 1, 5) < 2 ** 64

    def test_summary_stats(self):
        assert summary_stats([1.0, 3.0]) == (2, 2.0, pytest.approx(math.sqrt(2)), 1.0, 3.0)
        assert summary_stats([5.0])[2] == 0.0
        with pytest.raises(ValueError):
            summary_stats([])

    def test_table_fills_missing_cells(self):
        rows = summarize([TrialResult("N1", 1, 0, "A", 1.0, None, 1.0), TrialResult("N2", 2, 0, "B", 2.0, None, 2.0)])
        lines = format_table(rows).splitlines()
        assert lines[1].split() == ["N1", "1.00e+00", "-"]

    def test_relative_paths(self, tmp_path):
        raw = {"problem": {"name": "least_squares", "dim": 3, "n_samples": 5, "mode": "finite_sum"},
               "experiment": {"output": "o"}, "solver": [{"iterations": 1}]}
        assert parse_config(raw, tmp_path).output == tmp_path / "o"

    def test_bad_evaluation_combination(self):
        raw = {"problem": {"name": "logistic", "n_features": 3, "n_samples": 10},
               "evaluation": {"final": "empirical_loss"}, "solver": [{"iterations": 1}]}
        with pytest.raises(ConfigError):
            parse_config(raw)
