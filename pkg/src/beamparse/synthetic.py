"""Seeded synthetic treebanks for desk-scale experiments and tests.

Two generators: ``random_tree`` draws arbitrary well-formed trees (any
structure, unary chains included) for roundtrip-style tests, and a small
fixed PCFG with a Zipf-weighted lexicon produces corpora whose statistics
resemble real treebanks closely enough to exercise training, decoding,
pruning, and evaluation end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .trees import Internal, Leaf, Nonterminal, Tree, UNRESOLVED, WordToken


def _zipf_weights(n: int, exponent: float = 0.8) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def _wordlist(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


@dataclass
class Pcfg:
    """Production rules over nonterminals plus weighted lexical classes."""

    rules: dict[str, list[tuple[tuple[str, ...], float]]]
    lexicon: dict[str, list[str]]
    start: str = "S"

    def __post_init__(self):
        self._rule_weights = {
            lhs: np.array([w for _, w in rhs]) / sum(w for _, w in rhs)
            for lhs, rhs in self.rules.items()
        }
        self._lex_weights = {
            cls: _zipf_weights(len(words)) for cls, words in self.lexicon.items()
        }

    def nonterminals(self) -> list[str]:
        return sorted(self.rules)


def benchmark_grammar() -> Pcfg:
    """Fixed 11-nonterminal grammar, ~390 word types."""
    return Pcfg(
        rules={
            "S": [
                (("NP", "VP", "punct"), 0.48),
                (("NP", "VP", "PP", "punct"), 0.17),
                (("ADVP", "NP", "VP", "punct"), 0.12),
                (("NP", "VP", "SBAR", "punct"), 0.09),
                (("PP", "NP", "VP", "punct"), 0.08),
                (("NP", "PRN", "VP", "punct"), 0.06),
            ],
            "NP": [
                (("det", "noun"), 0.30),
                (("det", "ADJP", "noun"), 0.13),
                (("pro",), 0.14),
                (("det", "noun", "PP"), 0.09),
                (("NML", "noun"), 0.08),
                (("noun",), 0.08),
                (("det", "noun", "SBAR"), 0.04),
                (("QP", "noun"), 0.07),
                (("NP", "CONJP"), 0.07),
            ],
            "VP": [
                (("verb", "NP"), 0.38),
                (("verb",), 0.14),
                (("verb", "NP", "PP"), 0.14),
                (("verb", "PP"), 0.10),
                (("adv", "verb", "NP"), 0.09),
                (("verb", "SBAR"), 0.09),
                (("verb", "ADJP"), 0.06),
            ],
            "PP": [(("prep", "NP"), 1.0)],
            "SBAR": [(("comp", "NP", "VP"), 1.0)],
            "ADJP": [
                (("adj",), 0.55),
                (("adv", "adj"), 0.30),
                (("adj", "PP"), 0.15),
            ],
            "ADVP": [(("adv",), 0.8), (("adv", "adv"), 0.2)],
            "NML": [(("noun", "noun"), 0.6), (("adj", "noun"), 0.4)],
            "QP": [(("num",), 0.6), (("adv", "num"), 0.4)],
            "CONJP": [(("conj", "NP"), 1.0)],
            "PRN": [(("comma", "NP", "comma"), 1.0)],
        },
        lexicon={
            "noun": _wordlist("noun", 150),
            "verb": _wordlist("verb", 100),
            "adj": _wordlist("adj", 60),
            "adv": _wordlist("adv", 40),
            "prep": _wordlist("prep", 10),
            "det": _wordlist("det", 6),
            "pro": _wordlist("pro", 8),
            "comp": _wordlist("comp", 4),
            "num": _wordlist("num", 8),
            "conj": _wordlist("conj", 4),
            "comma": [","],
            "punct": ["."],
        },
    )


class _TooDeep(Exception):
    pass


def _expand(grammar: Pcfg, symbol: str, rng: np.random.Generator, depth: int) -> Tree:
    if symbol in grammar.lexicon:
        words = grammar.lexicon[symbol]
        pick = rng.choice(len(words), p=grammar._lex_weights[symbol])
        return Leaf(WordToken(UNRESOLVED, words[pick]))
    if depth > 60:
        raise _TooDeep
    options = grammar.rules[symbol]
    rhs = options[rng.choice(len(options), p=grammar._rule_weights[symbol])][0]
    children = tuple(_expand(grammar, s, rng, depth + 1) for s in rhs)
    return Internal(Nonterminal(UNRESOLVED, symbol), children)


def _word_count(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return 1
    return sum(_word_count(c) for c in tree.children)


def sample_tree(
    grammar: Pcfg,
    rng: np.random.Generator,
    max_words: int = 24,
    min_words: int = 3,
) -> Internal:
    """One tree from the grammar, resampled until the length fits."""
    while True:
        try:
            tree = _expand(grammar, grammar.start, rng, 0)
        except _TooDeep:
            continue
        if min_words <= _word_count(tree) <= max_words:
            return tree  # type: ignore[return-value]


def sample_corpus(
    n_trees: int,
    seed: int = 0,
    grammar: Optional[Pcfg] = None,
    max_words: int = 24,
    min_words: int = 3,
) -> list[Internal]:
    grammar = grammar or benchmark_grammar()
    rng = np.random.default_rng(seed)
    return [sample_tree(grammar, rng, max_words, min_words) for _ in range(n_trees)]


DEFAULT_LABELS = ("A", "B", "C", "D", "E", "F")


def random_tree(
    rng: np.random.Generator,
    labels: Sequence[str] = DEFAULT_LABELS,
    vocab: Optional[Sequence[str]] = None,
    max_words: int = 12,
) -> Internal:
    """Arbitrary well-formed tree: random branching, unary chains allowed."""
    words = list(vocab) if vocab is not None else _wordlist("w", 30)
    n = int(rng.integers(1, max_words + 1))
    leaves = [
        Leaf(WordToken(UNRESOLVED, words[int(rng.integers(len(words)))]))
        for _ in range(n)
    ]

    def label() -> Nonterminal:
        return Nonterminal(UNRESOLVED, labels[int(rng.integers(len(labels)))])

    def build(lo: int, hi: int, depth: int) -> Tree:
        if hi - lo == 1:
            if depth > 0 and (depth > 20 or rng.random() < 0.6):
                return leaves[lo]
            return Internal(label(), (build(lo, hi, depth + 1),))
        if depth < 15 and rng.random() < 0.15:
            # unary constituent over a multi-word span
            return Internal(label(), (build(lo, hi, depth + 1),))
        k = int(rng.integers(2, min(4, hi - lo) + 1))
        cuts = sorted(rng.choice(np.arange(lo + 1, hi), size=k - 1, replace=False))
        bounds = [lo, *map(int, cuts), hi]
        children = tuple(
            build(bounds[i], bounds[i + 1], depth + 1) for i in range(k)
        )
        return Internal(label(), children)

    return build(0, n, 0)  # type: ignore[return-value]
