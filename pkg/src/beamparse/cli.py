"""Batch command line: corpus generation, training, decoding, statistics,
evaluation, and parameter sweeps.

Exit codes: 0 success, 1 usage error, 2 data error. Every command is
deterministic given identical inputs, flags, and seeds; randomness funnels
through the single --seed value where a command has any.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from concurrent import futures
from fractions import Fraction
from typing import Optional, Sequence

from . import evaluation, pruning, scoring, search, synthetic, trees
from .actions import tree_to_actions
from .trees import VocabPolicy


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; usage errors are 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number or fraction: {text!r}") from None


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise UsageError(message)


def _load_treebank(path, strip_pos: bool) -> list[trees.Internal]:
    return trees.load_treebank(path, VocabPolicy(strip_pos=strip_pos))


def _prepare_corpus(path, strip_pos: bool, min_count: int):
    """Treebank -> (resolved trees, vocabularies, action sequences)."""
    raw = _load_treebank(path, strip_pos)
    if not raw:
        raise ValueError(f"no trees in {path}")
    nts, words = trees.build_vocab(raw, min_count)
    resolved = [trees.resolve_tree(t, nts, words) for t in raw]
    return resolved, nts, words, [tree_to_actions(t) for t in resolved]


def cmd_gen_corpus(args) -> int:
    _require(args.trees >= 1, "--trees must be >= 1")
    _require(args.max_words >= args.min_words >= 1, "bad word-count bounds")
    corpus = synthetic.sample_corpus(
        args.trees, seed=args.seed, max_words=args.max_words, min_words=args.min_words
    )
    trees.write_treebank(args.out, corpus)
    print(f"wrote {len(corpus)} trees to {args.out}")
    return 0


def cmd_train_scorer(args) -> int:
    _require(args.order >= 1, "--m must be >= 1")
    _require(args.alpha > 0, "--alpha must be > 0")
    _require(args.min_count >= 1, "--min-count must be >= 1")
    _, nts, words, sequences = _prepare_corpus(
        args.treebank, not args.keep_pos, args.min_count
    )
    vocab = scoring.ActionVocab(nts, words)
    scorer = scoring.train_count_scorer(sequences, vocab, args.order, args.alpha)
    scorer.save(args.out)
    ppl = scorer.perplexity(sequences)
    print(f"trained order-{args.order} scorer on {len(sequences)} sequences")
    print(f"actions {vocab.size} (nonterminals {len(nts)}, words {len(words)})")
    print(f"perplexity {ppl:.4f}")
    return 0


def cmd_train_pruner(args) -> int:
    _require(args.context >= 0, "--c must be >= 0")
    _require(args.epochs >= 1, "--epochs must be >= 1")
    _require(args.embed_dim >= 1 and args.hidden_dim >= 1, "dims must be >= 1")
    _require(args.learning_rate > 0, "--lr must be > 0")
    _require(args.batch_size >= 1, "--batch must be >= 1")
    _, nts, words, sequences = _prepare_corpus(
        args.treebank, not args.keep_pos, args.min_count
    )
    hp = pruning.PruneHyperparams(
        embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    result = pruning.prune_train(sequences, nts, words, args.context, hp)
    result.model.save(args.out)
    print(f"trained order-{args.context} pruner on {len(sequences)} sequences")
    print(f"initial loss {result.losses[0]:.4f}")
    print(f"final loss {result.final_loss:.4f}")
    return 0


def _read_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _relative_size(expr: str, k: int) -> int:
    """Beam-relative size: an integer literal, "k", or "k/<divisor>"."""
    expr = expr.strip()
    if expr == "k":
        return k
    if expr.startswith("k/"):
        divisor = int(expr[2:])
        if divisor < 1:
            raise ValueError(f"bad divisor in {expr!r}")
        return max(1, k // divisor)
    return int(expr)


def _build_search_config(values: dict[str, str]) -> search.SearchConfig:
    k = int(values["k"])
    _require(k >= 1, "--k must be >= 1")
    kw = _relative_size(values["kw"], k) if values.get("kw") else max(1, k // 10)
    ks = _relative_size(values["ks"], k) if values.get("ks") is not None and values.get("ks") != "" else k // 100
    return search.SearchConfig(
        beam_size=k,
        word_beam=min(kw, k),
        fast_track=min(ks, min(kw, k)),
        max_open=int(values.get("max_open", 100)),
        max_struct_per_word=int(values.get("max_struct", 40)),
        variant=values.get("search", "word"),
    )


def _read_sentences(path, scorer, input_format: str, strip_pos: bool):
    """Sentences as vocabulary tokens; from a treebank or one-per-line text."""
    with open(path, encoding="utf-8") as f:
        text = f.read()
    if input_format == "auto":
        stripped = text.lstrip()
        input_format = "trees" if stripped.startswith("(") else "tokens"
    words = scorer.action_vocab.words
    if input_format == "trees":
        policy = VocabPolicy(strip_pos=strip_pos)
        return [
            [words.token(w.surface) for w in trees.leaves(t)]
            for t in trees.parse_bracketed(text, policy)
        ]
    sentences = []
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.split()
        if not tokens:
            raise ValueError(f"{path}:{lineno}: empty sentence")
        sentences.append([words.token(t) for t in tokens])
    return sentences


_WORKER: dict = {}


def _init_worker(scorer, config):
    _WORKER["scorer"] = scorer
    _WORKER["config"] = config


def _decode_one(job):
    idx, sentence = job
    tree, diag = search.decode_sentence(sentence, _WORKER["scorer"], _WORKER["config"])
    diag.index = idx
    return trees.serialize_bracketed(tree), diag


def _decode_all(sentences, scorer, config, jobs: int):
    if not sentences:
        raise ValueError("no sentences to decode")
    if jobs <= 1:
        out = []
        for idx, sentence in enumerate(sentences):
            tree, diag = search.decode_sentence(sentence, scorer, config)
            diag.index = idx
            out.append((trees.serialize_bracketed(tree), diag))
        return out
    with futures.ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(scorer, config)
    ) as pool:
        return list(pool.map(_decode_one, enumerate(sentences), chunksize=8))


def _decode_settings(args) -> dict[str, str]:
    """defaults < config file < explicit flags"""
    values: dict[str, str] = {"k": "2000"}
    if args.config:
        values.update(_read_config_file(args.config))
    for key, flag in (
        ("k", args.k),
        ("kw", args.kw),
        ("ks", args.ks),
        ("p", args.p),
        ("search", args.search),
        ("max_open", args.max_open),
        ("max_struct", args.max_struct),
    ):
        if flag is not None:
            values[key] = str(flag)
    return values


def _attach_pruner(config, values, prune_model):
    p = _fraction(values.get("p", "1"))
    _require(0 < p <= 1, "--p must be in (0, 1]")
    if prune_model is not None:
        model = pruning.PruneModel.load(prune_model)
        config.prune = pruning.OpenPruner(model, p)


def cmd_decode(args) -> int:
    scorer = scoring.CountScorer.load(args.scorer)
    values = _decode_settings(args)
    config = _build_search_config(values)
    _attach_pruner(config, values, args.prune_model)
    sentences = _read_sentences(
        args.input, scorer, args.input_format, not args.keep_pos
    )
    results = _decode_all(sentences, scorer, config, args.jobs)
    with open(args.out, "w", encoding="utf-8") as f:
        for line, _ in results:
            f.write(line + "\n")
    diag_path = args.diagnostics or (args.out + ".diag.tsv")
    with open(diag_path, "w", encoding="utf-8") as f:
        f.write(search.DIAGNOSTICS_HEADER + "\n")
        for _, diag in results:
            f.write(diag.as_line() + "\n")
    failures = sum(d.failed for _, d in results)
    print(f"decoded {len(results)} sentences ({failures} fallbacks) to {args.out}")
    return 0


def cmd_stats(args) -> int:
    _require(args.min_occurrences >= 1, "--min-occurrences must be >= 1")
    _require(0 < args.coverage <= 1, "--coverage must be in (0, 1]")
    contexts = [int(c) for c in args.contexts.split(",")]
    _require(all(c >= 0 for c in contexts), "context sizes must be >= 0")
    _, nts, words, sequences = _prepare_corpus(
        args.treebank, not args.keep_pos, args.min_count
    )
    all_stats = [
        pruning.corpus_open_stats(sequences, nts, words, c, args.min_occurrences)
        for c in contexts
    ]
    print(pruning.format_stats_table(all_stats))
    for stats in all_stats:
        bound = pruning.lower_bound_p(stats.cumulative, args.coverage, len(nts))
        print(
            f"c={stats.context_size}: inputs {stats.input_count}, "
            f"p_min = {bound.numerator}/{bound.denominator} ~ {float(bound):.3f}"
        )
    return 0


def cmd_eval(args) -> int:
    policy = VocabPolicy(strip_pos=args.strip_pos)
    pred = trees.load_treebank(args.pred, policy)
    gold = trees.load_treebank(args.gold, policy)
    score = evaluation.score_corpus(pred, gold)
    print(score.report())
    if args.per_sentence:
        with open(args.per_sentence, "w", encoding="utf-8") as f:
            f.write(score.per_sentence_tsv() + "\n")
    return 0


def cmd_sweep(args) -> int:
    grid_spec = _read_config_file(args.config)
    overrides = {
        "search": args.search,
        "k": args.k,
        "kw": args.kw,
        "ks": args.ks,
        "p": args.p,
    }
    for key, value in overrides.items():
        if value is not None:
            grid_spec[key] = str(value)
    axes = {
        key: [v.strip() for v in grid_spec.get(key, default).split(",")]
        for key, default in (
            ("search", "word"),
            ("k", "200"),
            ("kw", "k/10"),
            ("ks", "k/100"),
            ("p", "1"),
        )
    }
    scorer = scoring.CountScorer.load(args.scorer)
    gold = _load_treebank(args.dev, not args.keep_pos)
    if not gold:
        raise ValueError(f"no trees in {args.dev}")
    words = scorer.action_vocab.words
    sentences = [[words.token(w.surface) for w in trees.leaves(t)] for t in gold]
    model = (
        pruning.PruneModel.load(args.prune_model) if args.prune_model else None
    )

    rows = ["search\tk\tkw\tks\tp\tf1\tstates_mean\tstatus"]
    points = itertools.product(
        axes["search"], axes["k"], axes["kw"], axes["ks"], axes["p"]
    )
    for variant, k_s, kw_s, ks_s, p_s in points:
        cells = [variant, k_s, kw_s, ks_s, p_s]
        try:
            values = {"search": variant, "k": k_s, "kw": kw_s, "ks": ks_s}
            config = _build_search_config(values)
            p = _fraction(p_s)
            if not 0 < p <= 1:
                raise ValueError("p must be in (0, 1]")
            if model is not None:
                config.prune = pruning.OpenPruner(model, p)
            results = _decode_all(sentences, scorer, config, args.jobs)
            pred = [
                trees.parse_bracketed(line, VocabPolicy(strip_pos=False))[0]
                for line, _ in results
            ]
            score = evaluation.score_corpus(pred, gold)
            states = [d.states_expanded for _, d in results]
            rows.append(
                "\t".join(
                    cells
                    + [f"{score.f1:.2f}", f"{sum(states) / len(states):.1f}", "ok"]
                )
            )
        except (ValueError, RuntimeError) as exc:
            rows.append("\t".join(cells + ["-", "-", f"error: {exc}"]))
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        print(f"wrote {len(rows) - 1} sweep rows to {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="beamparse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="write a synthetic treebank")
    p.add_argument("--out", required=True)
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-words", type=int, default=24)
    p.add_argument("--min-words", type=int, default=3)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train-scorer", help="train the count-based action scorer")
    p.add_argument("--treebank", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--m", dest="order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--keep-pos", action="store_true")
    p.set_defaults(func=cmd_train_scorer)

    p = sub.add_parser("train-pruner", help="train the coarse open-pruning model")
    p.add_argument("--treebank", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--c", dest="context", type=int, default=2)
    p.add_argument("--de", dest="embed_dim", type=int, default=32)
    p.add_argument("--dh", dest="hidden_dim", type=int, default=128)
    p.add_argument("--lr", dest="learning_rate", type=float, default=0.05)
    p.add_argument("--batch", dest="batch_size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--keep-pos", action="store_true")
    p.set_defaults(func=cmd_train_pruner)

    p = sub.add_parser("decode", help="decode sentences to bracketed trees")
    p.add_argument("--input", required=True, help="treebank or one sentence per line")
    p.add_argument("--scorer", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--diagnostics", help="sidecar TSV (default: <out>.diag.tsv)")
    p.add_argument("--search", choices=("word", "action"))
    p.add_argument("--k", type=int)
    p.add_argument("--kw", help='word beam: int, "k", or "k/<div>"')
    p.add_argument("--ks", help='fast-track count: int, "k", or "k/<div>"')
    p.add_argument("--prune-model")
    p.add_argument("--p", help='pruning fraction, e.g. "8/26" or "0.5"')
    p.add_argument("--max-open", type=int)
    p.add_argument("--max-struct", type=int)
    p.add_argument("--config", help="key=value defaults, overridden by flags")
    p.add_argument("--input-format", choices=("auto", "trees", "tokens"), default="auto")
    p.add_argument("--keep-pos", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("stats", help="open-output statistics and p lower bounds")
    p.add_argument("--treebank", required=True)
    p.add_argument("--c", dest="contexts", default="0,1,2", help="comma list")
    p.add_argument("--min-occurrences", type=int, default=20)
    p.add_argument("--coverage", type=float, default=0.99)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--keep-pos", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="labeled-bracket scores: predicted vs gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--per-sentence", help="optional per-sentence TSV path")
    p.add_argument("--strip-pos", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="decode+eval over a settings grid")
    p.add_argument("--config", required=True, help="grid file: key=v1,v2 lines")
    p.add_argument("--scorer", required=True)
    p.add_argument("--dev", required=True, help="gold treebank")
    p.add_argument("--prune-model")
    p.add_argument("--out", help="TSV path (default: stdout)")
    p.add_argument("--search")
    p.add_argument("--k")
    p.add_argument("--kw")
    p.add_argument("--ks")
    p.add_argument("--p")
    p.add_argument("--keep-pos", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
