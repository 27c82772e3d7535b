"""End-to-end command-line flows in a temporary directory.

Commands run in process through cli.main so exit codes and outputs can be
asserted directly. Exit code contract: 0 success, 1 usage error, 2 data
error.
"""

import pytest

from beamparse import synthetic, trees
from beamparse.cli import main

from conftest import FIGURE_TEXT


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Shared corpus, scorer, and pruner built once through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-corpus", "--out", str(root / "train.txt"), "--trees", "120",
                 "--seed", "3"]) == 0
    assert main(["gen-corpus", "--out", str(root / "dev.txt"), "--trees", "25",
                 "--seed", "4"]) == 0
    assert main(["train-scorer", "--treebank", str(root / "train.txt"),
                 "--out", str(root / "scorer.txt"), "--m", "3", "--alpha", "0.05"]) == 0
    assert main(["train-pruner", "--treebank", str(root / "train.txt"),
                 "--out", str(root / "pruner.txt"), "--c", "2", "--de", "8",
                 "--dh", "16", "--epochs", "3", "--seed", "0"]) == 0
    return root


class TestGenCorpus:
    def test_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        run(capsys, "gen-corpus", "--out", a, "--trees", 10, "--seed", 7)
        run(capsys, "gen-corpus", "--out", b, "--trees", 10, "--seed", 7)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_params(self, tmp_path, capsys):
        code, _, err = run(capsys, "gen-corpus", "--out", tmp_path / "x", "--trees", 0)
        assert code == 1 and "error" in err


class TestTrainScorer:
    def test_prints_perplexity(self, workdir, capsys):
        code, out, _ = run(capsys, "train-scorer", "--treebank", workdir / "train.txt",
                           "--out", workdir / "scorer2.txt", "--m", "2", "--alpha", "0.1")
        assert code == 0
        assert "perplexity" in out

    def test_perplexity_decreases_with_alpha(self, workdir, capsys):
        ppl = {}
        for alpha in ("1.0", "0.1"):
            _, out, _ = run(capsys, "train-scorer", "--treebank", workdir / "train.txt",
                            "--out", workdir / f"s{alpha}.txt", "--m", "2",
                            "--alpha", alpha)
            ppl[alpha] = float(out.split("perplexity")[1].split()[0])
        assert ppl["0.1"] < ppl["1.0"]

    def test_empty_treebank(self, tmp_path, capsys):
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        code, _, err = run(capsys, "train-scorer", "--treebank", empty,
                           "--out", tmp_path / "s.txt")
        assert code == 2

    def test_invalid_order(self, workdir, capsys):
        code, _, _ = run(capsys, "train-scorer", "--treebank", workdir / "train.txt",
                         "--out", workdir / "bad.txt", "--m", "0")
        assert code == 1

    def test_mode_recovery_single_tree(self, tmp_path, capsys):
        tb = tmp_path / "one.txt"
        tb.write_text(FIGURE_TEXT + "\n")
        scorer = tmp_path / "scorer.txt"
        run(capsys, "train-scorer", "--treebank", tb, "--out", scorer,
            "--m", "2", "--alpha", "1e-9")
        out_path = tmp_path / "decoded.txt"
        # full word beam: the k/10 default is a diversity bottleneck, not a
        # good setting for recovering an argmax this sparse
        code, _, _ = run(capsys, "decode", "--input", tb, "--scorer", scorer,
                         "--out", out_path, "--k", "20", "--kw", "k")
        assert code == 0
        assert out_path.read_text().strip() == FIGURE_TEXT


class TestTrainPruner:
    def test_seed_determinism(self, workdir, capsys):
        a, b = workdir / "pa.txt", workdir / "pb.txt"
        for path in (a, b):
            code, _, _ = run(capsys, "train-pruner", "--treebank", workdir / "train.txt",
                             "--out", path, "--c", "1", "--de", "4", "--dh", "8",
                             "--epochs", "2", "--seed", "11")
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_loss_reported_and_decreasing(self, workdir, capsys):
        code, out, _ = run(capsys, "train-pruner", "--treebank", workdir / "train.txt",
                           "--out", workdir / "p2.txt", "--c", "1", "--de", "4",
                           "--dh", "8", "--epochs", "3")
        assert code == 0
        initial = float(out.split("initial loss")[1].split()[0])
        final = float(out.split("final loss")[1].split()[0])
        assert final < initial

    def test_overfit_single_context(self, tmp_path, capsys):
        tb = tmp_path / "one.txt"
        tb.write_text((FIGURE_TEXT + "\n") * 8)
        code, out, _ = run(capsys, "train-pruner", "--treebank", tb,
                           "--out", tmp_path / "p.txt", "--c", "2", "--de", "8",
                           "--dh", "16", "--lr", "0.5", "--batch", "8",
                           "--epochs", "200")
        assert code == 0
        assert float(out.split("final loss")[1].split()[0]) < 0.1


class TestDecode:
    def test_writes_trees_and_diagnostics(self, workdir, capsys):
        out = workdir / "decoded.txt"
        code, text, _ = run(capsys, "decode", "--input", workdir / "dev.txt",
                            "--scorer", workdir / "scorer.txt", "--out", out,
                            "--k", "20", "--kw", "k", "--ks", "1",
                            "--max-open", "12", "--max-struct", "10")
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 25
        assert all(line.startswith("(") for line in lines)
        diag = (workdir / "decoded.txt.diag.tsv").read_text().splitlines()
        assert diag[0].startswith("sentence_id\t")
        assert len(diag) == 26

    def test_prune_noop_at_p_one(self, workdir, capsys):
        plain, hooked = workdir / "plain.txt", workdir / "hooked.txt"
        base = ["decode", "--input", workdir / "dev.txt", "--scorer",
                workdir / "scorer.txt", "--k", "20", "--max-open", "12",
                "--max-struct", "10"]
        assert run(capsys, *base, "--out", plain)[0] == 0
        assert run(capsys, *base, "--out", hooked, "--prune-model",
                   workdir / "pruner.txt", "--p", "1.0")[0] == 0
        assert plain.read_bytes() == hooked.read_bytes()

    def test_pruning_reduces_states(self, workdir, capsys):
        out_u = workdir / "unpruned.txt"
        out_p = workdir / "pruned.txt"
        base = ["decode", "--input", workdir / "dev.txt", "--scorer",
                workdir / "scorer.txt", "--k", "20", "--max-open", "12",
                "--max-struct", "10"]
        run(capsys, *base, "--out", out_u)
        run(capsys, *base, "--out", out_p, "--prune-model", workdir / "pruner.txt",
            "--p", "8/26")
        def total_states(path):
            lines = (path.parent / (path.name + ".diag.tsv")).read_text().splitlines()[1:]
            return sum(int(l.split("\t")[3]) for l in lines)
        assert total_states(out_p) < total_states(out_u)

    def test_jobs_preserve_output(self, workdir, capsys):
        seq_out, par_out = workdir / "seq.txt", workdir / "par.txt"
        base = ["decode", "--input", workdir / "dev.txt", "--scorer",
                workdir / "scorer.txt", "--k", "10", "--max-open", "12",
                "--max-struct", "10"]
        run(capsys, *base, "--out", seq_out, "--jobs", "1")
        run(capsys, *base, "--out", par_out, "--jobs", "2")
        assert seq_out.read_bytes() == par_out.read_bytes()

    def test_tokens_input(self, workdir, tmp_path, capsys):
        sents = tmp_path / "sents.txt"
        sents.write_text("det0 noun0 verb0 .\npro1 verb2 det1 noun3 .\n")
        out = tmp_path / "out.txt"
        code, _, _ = run(capsys, "decode", "--input", sents, "--scorer",
                         workdir / "scorer.txt", "--out", out, "--k", "10")
        assert code == 0
        assert len(out.read_text().splitlines()) == 2

    def test_blank_sentence_is_data_error(self, workdir, tmp_path, capsys):
        sents = tmp_path / "sents.txt"
        sents.write_text("det0 noun0\n\n")
        code, _, err = run(capsys, "decode", "--input", sents, "--scorer",
                           workdir / "scorer.txt", "--out", tmp_path / "o.txt",
                           "--input-format", "tokens")
        assert code == 2
        assert "empty sentence" in err

    def test_missing_scorer(self, workdir, tmp_path, capsys):
        code, _, _ = run(capsys, "decode", "--input", workdir / "dev.txt",
                         "--scorer", tmp_path / "nope.txt", "--out", tmp_path / "o.txt")
        assert code == 2

    def test_config_file_and_flag_precedence(self, workdir, tmp_path, capsys):
        cfg = tmp_path / "decode.cfg"
        cfg.write_text("k=10\nkw=k\nmax_open=12\nmax_struct=10\n")
        out_cfg = tmp_path / "cfg.txt"
        out_flag = tmp_path / "flag.txt"
        out_k10 = tmp_path / "k10.txt"
        base = ["decode", "--input", workdir / "dev.txt", "--scorer", workdir / "scorer.txt"]
        run(capsys, *base, "--out", out_k10, "--k", "10", "--kw", "k",
            "--max-open", "12", "--max-struct", "10")
        run(capsys, *base, "--out", out_cfg, "--config", cfg)
        assert out_cfg.read_bytes() == out_k10.read_bytes()
        # the flag overrides the config file's k
        run(capsys, *base, "--out", out_flag, "--config", cfg, "--k", "30")
        diag = (tmp_path / "flag.txt.diag.tsv").read_text()
        diag_cfg = (tmp_path / "cfg.txt.diag.tsv").read_text()
        states = lambda d: sum(int(l.split("\t")[3]) for l in d.splitlines()[1:])
        assert states(diag) > states(diag_cfg)

    def test_rerun_byte_identical(self, workdir, capsys):
        a, b = workdir / "r1.txt", workdir / "r2.txt"
        base = ["decode", "--input", workdir / "dev.txt", "--scorer",
                workdir / "scorer.txt", "--k", "10"]
        run(capsys, *base, "--out", a)
        run(capsys, *base, "--out", b)
        assert a.read_bytes() == b.read_bytes()


class TestStats:
    def test_report_shape(self, workdir, capsys):
        code, out, _ = run(capsys, "stats", "--treebank", workdir / "train.txt",
                           "--c", "0,1,2", "--min-occurrences", "5",
                           "--coverage", "0.99")
        assert code == 0
        lines = out.splitlines()
        assert lines[0].lstrip().startswith("c")
        assert sum(1 for l in lines if "p_min" in l) == 3

    def test_single_tree_degenerate(self, tmp_path, capsys):
        tb = tmp_path / "one.txt"
        tb.write_text(FIGURE_TEXT + "\n")
        code, out, _ = run(capsys, "stats", "--treebank", tb, "--c", "2",
                           "--min-occurrences", "1", "--coverage", "0.99")
        assert code == 0
        assert "p_min = 1/3" in out

    def test_empty_corpus(self, tmp_path, capsys):
        empty = tmp_path / "empty.txt"
        empty.write_text("\n")
        code, _, _ = run(capsys, "stats", "--treebank", empty)
        assert code == 2


class TestEval:
    def test_identity(self, workdir, tmp_path, capsys):
        code, out, _ = run(capsys, "eval", "--pred", workdir / "dev.txt",
                           "--gold", workdir / "dev.txt")
        assert code == 0
        assert out.splitlines()[-1] == "100.00 100.00 100.00"

    def test_flattened_example(self, tmp_path, capsys):
        pred, gold = tmp_path / "pred.txt", tmp_path / "gold.txt"
        pred.write_text(FIGURE_TEXT + "\n")
        gold.write_text("(S (NP He) (VP had an idea) .)\n")
        code, out, _ = run(capsys, "eval", "--pred", pred, "--gold", gold)
        assert code == 0
        assert out.splitlines()[-1] == "100.00 75.00 85.71"

    def test_per_sentence_tsv(self, workdir, tmp_path, capsys):
        tsv = tmp_path / "per.tsv"
        run(capsys, "eval", "--pred", workdir / "dev.txt", "--gold",
            workdir / "dev.txt", "--per-sentence", tsv)
        lines = tsv.read_text().splitlines()
        assert lines[0].startswith("sentence_id")
        assert len(lines) == 26

    def test_mismatched_line_counts(self, workdir, tmp_path, capsys):
        short = tmp_path / "short.txt"
        short.write_text("(X w)\n")
        code, _, _ = run(capsys, "eval", "--pred", short, "--gold", workdir / "dev.txt")
        assert code == 2


class TestSweep:
    def test_grid_rows(self, workdir, tmp_path, capsys):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text("k=10,20\nkw=k,k/2\nks=0\np=1\nmax_open=12\nmax_struct=10\n")
        out = tmp_path / "sweep.tsv"
        code, _, _ = run(capsys, "sweep", "--config", cfg, "--scorer",
                         workdir / "scorer.txt", "--dev", workdir / "dev.txt",
                         "--out", out)
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].split("\t") == [
            "search", "k", "kw", "ks", "p", "f1", "states_mean", "status"
        ]
        assert len(lines) == 5  # 2 x 2 grid
        assert all(l.split("\t")[-1] == "ok" for l in lines[1:])

    def test_states_decrease_with_p(self, workdir, tmp_path, capsys):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text("k=15\nkw=k\nks=1\np=1,8/26\nmax_open=12\nmax_struct=10\n")
        out = tmp_path / "sweep.tsv"
        code, _, _ = run(capsys, "sweep", "--config", cfg, "--scorer",
                         workdir / "scorer.txt", "--dev", workdir / "dev.txt",
                         "--prune-model", workdir / "pruner.txt", "--out", out)
        assert code == 0
        rows = [l.split("\t") for l in out.read_text().splitlines()[1:]]
        by_p = {r[4]: float(r[6]) for r in rows}
        assert by_p["8/26"] < by_p["1"]

    def test_flag_overrides_grid(self, workdir, tmp_path, capsys):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text("k=10,20,30\n")
        code, out, _ = run(capsys, "sweep", "--config", cfg, "--scorer",
                           workdir / "scorer.txt", "--dev", workdir / "dev.txt",
                           "--k", "10")
        assert code == 0
        rows = out.splitlines()
        assert len([l for l in rows if l and not l.startswith("search")]) == 1

    def test_bad_grid_point_recorded(self, workdir, tmp_path, capsys):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text("k=10\np=1,2\n")  # p=2 is invalid
        code, out, _ = run(capsys, "sweep", "--config", cfg, "--scorer",
                           workdir / "scorer.txt", "--dev", workdir / "dev.txt",
                           "--prune-model", workdir / "pruner.txt")
        assert code == 0
        lines = out.splitlines()[1:]
        assert sum("error" in l for l in lines) == 1
        assert sum(l.endswith("ok") for l in lines) == 1


class TestUsage:
    def test_unknown_flag(self, capsys):
        code, _, _ = run(capsys, "decode", "--bogus", "x")
        assert code == 1

    def test_unknown_command(self, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == 1
