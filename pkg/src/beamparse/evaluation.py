"""Labeled-bracket precision/recall/F1 between predicted and gold trees.

One bracket per internal node, root included, multiplicity preserved for
nested identical spans; no label equivalence classes and no punctuation
deletion. Labels are compared as strings and leaves only contribute spans,
so scores are invariant to unknown-word substitution.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .trees import Internal, Leaf, Tree

Bracket = tuple[str, int, int]  # label, span start, span end (word indices)


class EvalError(ValueError):
    pass


def extract_brackets(tree: Tree) -> Counter:
    """Multiset of (label, start, end) over the tree's internal nodes."""
    brackets: Counter = Counter()

    def walk(node: Tree, start: int) -> int:
        if isinstance(node, Leaf):
            return start + 1
        end = start
        for child in node.children:
            end = walk(child, end)
        brackets[(node.label.label, start, end)] += 1
        return end

    walk(tree, 0)
    return brackets


def word_count(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return 1
    return sum(word_count(child) for child in tree.children)


@dataclass
class SentenceScore:
    index: int
    matched: int
    predicted: int
    gold: int
    skipped: bool = False
    note: str = ""


@dataclass
class CorpusScore:
    recall: float  # LR, percent
    precision: float  # LP, percent
    f1: float  # percent
    matched: int
    predicted: int
    gold: int
    sentences: list[SentenceScore]

    def report(self) -> str:
        return "LR LP F1\n" + (
            f"{self.recall:.2f} {self.precision:.2f} {self.f1:.2f}"
        )

    def per_sentence_tsv(self) -> str:
        lines = ["sentence_id\tmatched\tpredicted\tgold\tskipped\tnote"]
        for s in self.sentences:
            lines.append(
                f"{s.index}\t{s.matched}\t{s.predicted}\t{s.gold}\t{int(s.skipped)}\t{s.note}"
            )
        return "\n".join(lines)


def score_corpus(pred: Sequence[Internal], gold: Sequence[Internal]) -> CorpusScore:
    """Corpus-level labeled-bracket scores.

    Tree lists must have equal length; a per-sentence word-count mismatch is
    recorded and that sentence is skipped from the aggregates.
    """
    if len(pred) != len(gold):
        raise EvalError(
            f"predicted {len(pred)} trees but gold has {len(gold)}"
        )
    matched = predicted = gold_total = 0
    records: list[SentenceScore] = []
    for i, (p, g) in enumerate(zip(pred, gold)):
        if word_count(p) != word_count(g):
            records.append(
                SentenceScore(
                    i, 0, 0, 0, skipped=True,
                    note=f"word count mismatch: {word_count(p)} vs {word_count(g)}",
                )
            )
            continue
        pb = extract_brackets(p)
        gb = extract_brackets(g)
        m = sum((pb & gb).values())
        records.append(SentenceScore(i, m, sum(pb.values()), sum(gb.values())))
        matched += m
        predicted += sum(pb.values())
        gold_total += sum(gb.values())
    precision = 100.0 * matched / predicted if predicted else 0.0
    recall = 100.0 * matched / gold_total if gold_total else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return CorpusScore(recall, precision, f1, matched, predicted, gold_total, records)
