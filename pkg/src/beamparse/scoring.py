"""Generative action scorers: P(action | history) over the full action space.

Scorers see only the action history, never future words; the log probability
of a complete sequence is the sum of per-step log scores. Two reference
scorers are provided: a deterministic table scorer for oracle tests and a
count-based model with additive smoothing that stands in for an expensive
neural scorer at small scale.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections import Counter, defaultdict
from typing import Iterable, Mapping, Optional, Sequence

from .actions import Action, ActionVocab, Close, Open, Shift

History = Sequence[Action]

SCORER_FORMAT = "beamparse-scorer v1"


class ScoringError(RuntimeError):
    """Raised when a scorer fails to evaluate a pool of successors."""


class Scorer(ABC):
    """Batch scoring contract shared by all search procedures.

    Implementations must behave as proper conditional distributions: the
    exponentiated scores over the full action vocabulary sum to 1 for every
    reachable history.
    """

    action_vocab: ActionVocab

    @abstractmethod
    def score_actions(self, history: History, candidates: Sequence[Action]) -> list[float]:
        """Log probability of each candidate given the action history."""

    def score_pool(
        self, pool: Sequence[tuple[History, Sequence[Action]]]
    ) -> list[list[float]]:
        """Score one pool of (history, candidates) pairs; scorers that
        amortize batched evaluation can override this."""
        return [self.score_actions(h, c) for h, c in pool]

    def sequence_log_prob(self, actions: Sequence[Action]) -> float:
        total = 0.0
        for t in range(len(actions)):
            total += self.score_actions(actions[:t], [actions[t]])[0]
        return total


class TableScorer(Scorer):
    """Explicit (history, action) -> probability table with a default
    distribution for unlisted histories. Test oracle; every distribution
    must be strictly positive and sum to 1 within 1e-9."""

    def __init__(
        self,
        action_vocab: ActionVocab,
        default: Mapping[int, float] | Sequence[float],
        table: Optional[Mapping[tuple[int, ...], Mapping[int, float]]] = None,
    ):
        self.action_vocab = action_vocab
        self.default = self._check_dist(dict(enumerate(default)) if not isinstance(default, Mapping) else default)
        self.table = {}
        for history, dist in (table or {}).items():
            self.table[tuple(history)] = self._check_dist(dist)

    def _check_dist(self, dist: Mapping[int, float]) -> dict[int, float]:
        dist = dict(dist)
        if len(dist) != self.action_vocab.size:
            raise ValueError("distribution must cover the full action vocabulary")
        if any(p <= 0.0 for p in dist.values()):
            raise ValueError("distribution entries must be strictly positive")
        total = sum(dist.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"distribution sums to {total}, not 1")
        return dist

    def score_actions(self, history: History, candidates: Sequence[Action]) -> list[float]:
        ids = self.action_vocab.indices(history)
        dist = self.table.get(ids, self.default)
        return [math.log(dist[self.action_vocab.index(a)]) for a in candidates]


def uniform_scorer(action_vocab: ActionVocab) -> TableScorer:
    p = 1.0 / action_vocab.size
    return TableScorer(action_vocab, [p] * action_vocab.size)


class CountScorer(Scorer):
    """Order-m count model with additive smoothing over the action space.

    P(a | ctx) = (count(ctx, a) + alpha) / (count(ctx) + alpha * |actions|)
    where ctx is the last m action ids, padded at the start of a sequence
    with a reserved begin symbol.
    """

    def __init__(
        self,
        action_vocab: ActionVocab,
        order: int,
        alpha: float,
        counts: Optional[Mapping[tuple[int, ...], Mapping[int, int]]] = None,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        self.action_vocab = action_vocab
        self.order = order
        self.alpha = alpha
        self.counts: dict[tuple[int, ...], Counter[int]] = {}
        self.totals: dict[tuple[int, ...], int] = {}
        for ctx, dist in (counts or {}).items():
            c = Counter({a: int(n) for a, n in dist.items()})
            self.counts[tuple(ctx)] = c
            self.totals[tuple(ctx)] = sum(c.values())
        # log memo tables; counts and totals are small repeating integers
        self._log_num: dict[int, float] = {}
        self._log_denom: dict[int, float] = {}

    def _context(self, history: History) -> tuple[int, ...]:
        m = self.order
        tail = history[-m:] if len(history) >= m else history
        ids = self.action_vocab.indices(tail)
        pad = (self.action_vocab.bos_id,) * (m - len(ids))
        return pad + ids

    def observe(self, sequence: Sequence[Action]) -> None:
        for t in range(len(sequence)):
            ctx = self._context(sequence[:t])
            a = self.action_vocab.index(sequence[t])
            self.counts.setdefault(ctx, Counter())[a] += 1
            self.totals[ctx] = self.totals.get(ctx, 0) + 1

    def log_prob(self, context: tuple[int, ...], action_id: int) -> float:
        total = self.totals.get(context, 0)
        count = self.counts[context].get(action_id, 0) if total else 0
        num = self._log_num.get(count)
        if num is None:
            num = self._log_num[count] = math.log(count + self.alpha)
        denom = self._log_denom.get(total)
        if denom is None:
            denom = self._log_denom[total] = math.log(
                total + self.alpha * self.action_vocab.size
            )
        return num - denom

    def score_actions(self, history: History, candidates: Sequence[Action]) -> list[float]:
        ctx = self._context(history)
        return [self.log_prob(ctx, self.action_vocab.index(a)) for a in candidates]

    def sequence_log_prob(self, actions: Sequence[Action]) -> float:
        ids = self.action_vocab.indices(actions)
        padded = (self.action_vocab.bos_id,) * self.order + ids
        return sum(
            self.log_prob(padded[t : t + self.order], ids[t]) for t in range(len(ids))
        )

    def perplexity(self, corpus: Iterable[Sequence[Action]]) -> float:
        """exp of the average negative log probability per action."""
        total, n = 0.0, 0
        for seq in corpus:
            total += self.sequence_log_prob(seq)
            n += len(seq)
        if n == 0:
            raise ValueError("empty corpus")
        return math.exp(-total / n)

    def save(self, path) -> None:
        av = self.action_vocab
        with open(path, "w", encoding="utf-8") as f:
            f.write(SCORER_FORMAT + "\n")
            f.write(f"order {self.order}\n")
            f.write(f"alpha {self.alpha!r}\n")
            f.write(f"nonterminals {len(av.nonterminals)}\n")
            for label in av.nonterminals.labels():
                f.write(label + "\n")
            f.write(f"words {len(av.words)}\n")
            for surface in av.words.surfaces():
                f.write(surface + "\n")
            f.write(f"contexts {len(self.counts)}\n")
            for ctx in sorted(self.counts):
                pairs = " ".join(
                    f"{a}:{n}" for a, n in sorted(self.counts[ctx].items())
                )
                f.write(",".join(map(str, ctx)) + " " + pairs + "\n")

    @classmethod
    def load(cls, path) -> "CountScorer":
        from .trees import NonterminalVocab, WordVocab

        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        it = iter(lines)
        header = next(it)
        if header != SCORER_FORMAT:
            raise ValueError(f"not a scorer file (header {header!r})")
        order = int(next(it).split()[1])
        alpha = float(next(it).split()[1])
        n_nt = int(next(it).split()[1])
        labels = [next(it) for _ in range(n_nt)]
        n_w = int(next(it).split()[1])
        surfaces = [next(it) for _ in range(n_w)]
        av = ActionVocab(NonterminalVocab(labels), WordVocab(surfaces))
        counts: dict[tuple[int, ...], dict[int, int]] = {}
        n_ctx = int(next(it).split()[1])
        for _ in range(n_ctx):
            ctx_part, *pairs = next(it).split()
            ctx = tuple(int(x) for x in ctx_part.split(","))
            counts[ctx] = {int(a): int(n) for a, n in (p.split(":") for p in pairs)}
        return cls(av, order, alpha, counts)


def train_count_scorer(
    corpora: Iterable[Sequence[Action]],
    action_vocab: ActionVocab,
    order: int,
    alpha: float,
) -> CountScorer:
    """Populate an order-m count scorer from gold action sequences."""
    scorer = CountScorer(action_vocab, order, alpha)
    n = 0
    for seq in corpora:
        scorer.observe(seq)
        n += 1
    if n == 0:
        raise ValueError("empty training corpus")
    return scorer


def score_successors(
    scorer: Scorer, history: History, candidates: Sequence[Action]
) -> list[float]:
    """Free-function form of the scorer contract."""
    return scorer.score_actions(history, candidates)


def mean_log_prob_by_kind(
    scorer: Scorer, sequences: Iterable[Sequence[Action]]
) -> dict[str, float]:
    """Mean gold-step log probability per action kind (open/close/shift).

    Exposes the structural/lexical probability imbalance: in a generative
    model the few structural actions absorb far more mass per symbol than
    the large shift vocabulary.
    """
    sums: dict[str, float] = defaultdict(float)
    counts: dict[str, int] = defaultdict(int)
    for seq in sequences:
        for t, action in enumerate(seq):
            kind = (
                "open" if isinstance(action, Open)
                else "close" if isinstance(action, Close)
                else "shift"
            )
            sums[kind] += scorer.score_actions(seq[:t], [action])[0]
            counts[kind] += 1
    return {kind: sums[kind] / counts[kind] for kind in sums}
