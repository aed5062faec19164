import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from tesae import cli, data, modelfile
from tesae.grammar import parse_tree

HYPER = ["--dim", "24", "--svm-c", "10"]


def run(capsys, *argv, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.run(["--quiet", "gen-boolean", "--count", "80", "--seed", "5", "--out", str(d / "train.trees")]) == 0
    assert cli.run(["--quiet", "train", "--grammar", "boolean", "--data", str(d / "train.trees"),
                    *HYPER, "--out", str(d / "m.model")]) == 0
    return d


class TestGenerate:
    def test_boolean_stdout(self, capsys):
        code, out, _ = run(capsys, "gen-boolean", "--count", "7", "--seed", "2")
        assert code == 0
        lines = out.splitlines()
        assert [parse_tree(ln) for ln in lines] == data.gen_boolean(data.GenConfig(count=7, seed=2))

    def test_global_seed(self, capsys):
        a = run(capsys, "--seed", "4", "gen-expr", "--count", "5")[1]
        b = run(capsys, "gen-expr", "--count", "5", "--seed", "4")[1]
        c = run(capsys, "gen-expr", "--count", "5")[1]
        assert a == b != c

    def test_expressions(self, capsys):
        out = run(capsys, "gen-expr", "--count", "4")[1]
        assert all(parse_tree(ln).size() == 11 for ln in out.splitlines())


class TestModelCommands:
    def test_model_file_valid(self, workdir):
        m = modelfile.load_model(workdir / "m.model")
        assert m.dim == 24 and m.hyper.svm_C == 10.0

    def test_linear_kernel_flag(self, workdir):
        from tesae.readout import LinearClassifier
        path = workdir / "linear.model"
        assert cli.run(["--quiet", "train", "--grammar", "boolean", "--data", str(workdir / "train.trees"),
                        *HYPER, "--kernel", "linear", "--out", str(path)]) == 0
        m = modelfile.load_model(path)
        assert m.hyper.kernel == "linear"
        assert all(isinstance(c, LinearClassifier) for c in m.classifiers.values())
        assert modelfile.load_model(workdir / "m.model").hyper.kernel == "rbf"

    def test_train_is_deterministic(self, workdir):
        other = workdir / "again.model"
        assert cli.run(["--quiet", "train", "--grammar", "boolean", "--data", str(workdir / "train.trees"),
                        *HYPER, "--out", str(other)]) == 0
        assert other.read_bytes() == (workdir / "m.model").read_bytes()

    def test_encode_decode(self, capsys, workdir):
        model = str(workdir / "m.model")
        code, out, _ = run(capsys, "encode", "--model", model, "and(x, not(y))", "x")
        assert code == 0
        vectors = out.splitlines()
        assert len(vectors) == 2 and all(len(v.split(",")) == 24 for v in vectors)
        m = modelfile.load_model(model)
        from tesae.autoencoder import encode
        assert np.array([float(v) for v in vectors[0].split(",")]).tobytes() == \
            encode(m, parse_tree("and(x, not(y))"))[2].tobytes()
        code, out, _ = run(capsys, "decode", "--model", model, *vectors)
        assert code == 0
        decoded = [parse_tree(ln) for ln in out.splitlines()]
        assert decoded == [m.decode(np.array([float(v) for v in vec.split(",")])) for vec in vectors]

    def test_stdin(self, capsys, workdir, monkeypatch):
        model = str(workdir / "m.model")
        code, out, _ = run(capsys, "encode", "--model", model, stdin="x\n\ny\n", monkeypatch=monkeypatch)
        assert code == 0 and len(out.splitlines()) == 2

    def test_decode_wrong_dimension(self, capsys, workdir):
        code, _, err = run(capsys, "decode", "--model", str(workdir / "m.model"), "0.1,0.2,0.3")
        assert code == 2
        assert "n = 24" in err

    def test_decode_negative_leading(self, capsys, workdir):
        vec = ",".join(["-0.25"] * 24)
        code, out, _ = run(capsys, "decode", "--model", str(workdir / "m.model"), vec)
        assert code == 0 and parse_tree(out.strip())

    def test_decode_bad_vector(self, capsys, workdir):
        code, _, err = run(capsys, "decode", "--model", str(workdir / "m.model"), "0.1,abc")
        assert code == 2

    def test_eval(self, capsys, workdir):
        report = workdir / "eval.csv"
        code, out, _ = run(capsys, "eval", "--model", str(workdir / "m.model"),
                           "--data", str(workdir / "train.trees"), "--out", str(report))
        assert code == 0
        assert "rmse" in out and "grammatical 1.000000" in out
        rows = list(csv.reader(report.open()))
        assert rows[0] == ["index", "tree", "decoded", "distance", "grammatical"] and len(rows) == 81

    def test_export_codes(self, capsys, workdir):
        code, out, _ = run(capsys, "export-codes", "--model", str(workdir / "m.model"),
                           "--data", str(workdir / "train.trees"))
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and len(rows) == 81 and len(rows[0]) == 26

    def test_optimize(self, capsys, workdir):
        hist = workdir / "hist.csv"
        code, out, _ = run(capsys, "optimize", "--model", str(workdir / "m.model"), "--data",
                           str(workdir / "train.trees"), "--objective", "boolean", "--budget", "100",
                           "--pop", "10", "--iters", "10", "--out", str(hist))
        assert code == 0
        lines = dict(ln.split(" ", 1) for ln in out.splitlines())
        assert int(lines["evaluations"]) == 100
        assert int(lines["score"]) >= 0
        parse_tree(lines["tree"])
        assert len(hist.read_text().splitlines()) == 11


class TestReports:
    def test_crossval_csv(self, capsys, workdir):
        out_a, out_b = workdir / "cv_a.csv", workdir / "cv_b.csv"
        for path in (out_a, out_b):
            code, out, _ = run(capsys, "--quiet", "crossval", "--grammar", "boolean", "--data",
                               str(workdir / "train.trees"), *HYPER, "--folds", "4", "--jobs", "1",
                               "--no-timings", "--out", str(path))
            assert code == 0 and "RMSE" in out
        assert out_a.read_bytes() == out_b.read_bytes()
        header = json.loads(out_a.read_text().splitlines()[0][2:])
        assert header["hyperparameters"]["dim"] == 24

    def test_hypersearch(self, capsys, workdir):
        code, out, _ = run(capsys, "hypersearch", "--grammar", "boolean", "--data", str(workdir / "train.trees"),
                           "--val-data", str(workdir / "train.trees"), "--trials", "2", "--dim", "12",
                           "--variant", "esae", "--jobs", "1")
        assert code == 0
        best = json.loads(out)
        assert best["hyperparameters"]["dim"] == 12 and best["val_rmse"] >= 0


class TestScore:
    def test_anchors(self, capsys):
        code, out, _ = run(capsys, "score", "--objective", "boolean", "and(x, not(y))", "and(y, and(x, x))")
        assert code == 0 and out.split() == ["1", "0"]
        code, out, _ = run(capsys, "score", "--objective", "expr", "+(/(1, 3), +(x, sin(*(x, x))))", "1")
        assert out.split()[0] == "0" and float(out.split()[1]) == pytest.approx(3.5623526276387389, rel=1e-15)

    def test_not_in_language(self, capsys):
        code, _, err = run(capsys, "score", "--objective", "boolean", "and(x, z)")
        assert code == 2 and "error" in err

    def test_syntax_error(self, capsys):
        code, _, _ = run(capsys, "score", "--objective", "boolean", "and(x,")
        assert code == 2


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [],
        ["frobnicate"],
        ["score"],
        ["score", "--objective", "nope", "x"],
        ["gen-boolean", "--count", "zero"],
        ["gen-boolean", "--count", "0"],
        ["crossval", "--grammar", "boolean", "--data", "x", "--folds", "0"],
    ])
    def test_exit_one(self, capsys, argv):
        assert run(capsys, *argv)[0] == 1

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "encode", "--model", str(tmp_path / "none.model"), "x")
        assert code == 2

    def test_corrupt_model(self, capsys, tmp_path):
        bad = tmp_path / "bad.model"
        bad.write_text('{"format_version": "tesae-1"')
        assert run(capsys, "encode", "--model", str(bad), "x")[0] == 2

    def test_bad_grammar_file(self, capsys, tmp_path):
        g = tmp_path / "g.txt"
        g.write_text("start: S\nS -> a\nS -> a\n")
        trees = tmp_path / "t.trees"
        trees.write_text("a\n")
        assert run(capsys, "train", "--grammar", str(g), "--data", str(trees), "--out", str(tmp_path / "m"))[0] == 2

    def test_help_lists_defaults(self, capsys):
        for command in ("gen-boolean", "gen-expr", "train", "crossval", "hypersearch", "optimize", "score",
                        "encode", "decode", "eval", "export-codes"):
            code, out, _ = run(capsys, command, "--help")
            assert code == 0
            parser = cli.build_parser()._subparsers._group_actions[0].choices[command]
            opts = [a for a in parser._actions if a.option_strings and not a.required and a.dest != "help"]
            flat = " ".join(out.split())
            for a in opts:
                assert a.option_strings[-1] in flat
                shown = cli._Formatter(command)._get_help_string(a)
                assert "default:" in shown or "if unset" in shown, a.dest

    def test_jobs_default(self):
        import os
        args = cli.build_parser().parse_args(["crossval", "--grammar", "boolean", "--data", "x"])
        assert args.jobs == len(os.sched_getaffinity(0))

    def test_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "tesae", "score", "--objective", "boolean", "and(x, not(y))"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.strip() == "1"
        proc = subprocess.run([sys.executable, "-m", "tesae", "bogus"], capture_output=True, text=True)
        assert proc.returncode == 1
