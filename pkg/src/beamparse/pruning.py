"""Coarse open-action pruning: model, training, filter, corpus statistics.

A cheap order-c model conditions on the last c actions (with every shift
collapsed to one unlexicalized symbol) plus the next word, and predicts the
next collapsed action through a one-hidden-layer ReLU network with a softmax
output. During search its scores rank the pooled open successors of a bucket
and only the top p-fraction survive; close and shift successors are never
pruned. The forward and backward passes are written out explicitly so the
gradients can be checked against finite differences.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .actions import Action, Close, Open, Shift
from .trees import NonterminalVocab, WordToken, WordVocab

PRUNER_FORMAT = "beamparse-pruner v1"

PruneFraction = Union[Fraction, float, int]


class CollapsedActions:
    """Index over the collapsed action space: one open and one close per
    nonterminal plus a single unlexicalized shift. ``bos_id`` is the extra
    begin-padding symbol used only in context positions."""

    def __init__(self, nonterminals: NonterminalVocab):
        self.nonterminals = nonterminals
        self.n_nt = len(nonterminals)
        self.shift_id = 2 * self.n_nt
        self.size = 2 * self.n_nt + 1
        self.bos_id = self.size

    def collapse(self, action: Action) -> int:
        if isinstance(action, Open):
            return self.nonterminals.by_label(action.nt.label).id
        if isinstance(action, Close):
            return self.n_nt + self.nonterminals.by_label(action.nt.label).id
        return self.shift_id

    def label(self, index: int) -> str:
        if index < self.n_nt:
            return f"open:{self.nonterminals.by_id(index).label}"
        if index < 2 * self.n_nt:
            return f"close:{self.nonterminals.by_id(index - self.n_nt).label}"
        return "shift"


def collapse_context(
    history: Sequence[Action], c: int, collapsed: CollapsedActions
) -> tuple[int, ...]:
    """Last c actions as collapsed ids, begin-padded when history is short."""
    if c == 0:
        return ()
    tail = history[-c:]
    ids = tuple(collapsed.collapse(a) for a in tail)
    return (collapsed.bos_id,) * (c - len(ids)) + ids


@dataclass
class PruneConfig:
    """Pruning fraction and context size; p = 1 disables pruning."""

    p: PruneFraction = Fraction(1)
    context: int = 2

    def __post_init__(self):
        if not 0 < Fraction(self.p) <= 1:
            raise ValueError("pruning fraction must be in (0, 1]")
        if self.context < 0:
            raise ValueError("context size must be >= 0")


@dataclass
class PruneHyperparams:
    embed_dim: int = 32
    hidden_dim: int = 128
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0


class PruneModel:
    """One-hidden-layer network over embedded (context actions, next word).

    The input is the concatenation of c collapsed-action embeddings and one
    word embedding; the output is a softmax distribution over the collapsed
    action space. Word ids index the model's own vocabulary plus a reserved
    end-of-sentence row used once all words are shifted.
    """

    PARAMS = ("action_emb", "word_emb", "w1", "b1", "w2", "b2")

    def __init__(
        self,
        nonterminals: NonterminalVocab,
        words: WordVocab,
        context: int,
        action_emb: np.ndarray,
        word_emb: np.ndarray,
        w1: np.ndarray,
        b1: np.ndarray,
        w2: np.ndarray,
        b2: np.ndarray,
    ):
        self.collapsed = CollapsedActions(nonterminals)
        self.words = words
        self.context = context
        self.eos_word_id = len(words)
        self.action_emb = action_emb  # [collapsed size + bos, d_e]
        self.word_emb = word_emb  # [vocab size + eos, d_e]
        self.w1 = w1  # [d_h, (c+1) * d_e]
        self.b1 = b1
        self.w2 = w2  # [collapsed size, d_h]
        self.b2 = b2
        self.embed_dim = action_emb.shape[1]
        self.hidden_dim = w1.shape[0]
        expected = (context + 1) * self.embed_dim
        if w1.shape[1] != expected:
            raise ValueError(f"w1 expects input width {expected}, got {w1.shape[1]}")

    @classmethod
    def zero(
        cls,
        nonterminals: NonterminalVocab,
        words: WordVocab,
        context: int,
        embed_dim: int = 32,
        hidden_dim: int = 128,
    ) -> "PruneModel":
        collapsed = CollapsedActions(nonterminals)
        d_in = (context + 1) * embed_dim
        return cls(
            nonterminals,
            words,
            context,
            np.zeros((collapsed.size + 1, embed_dim)),
            np.zeros((len(words) + 1, embed_dim)),
            np.zeros((hidden_dim, d_in)),
            np.zeros(hidden_dim),
            np.zeros((collapsed.size, hidden_dim)),
            np.zeros(collapsed.size),
        )

    @classmethod
    def random(
        cls,
        nonterminals: NonterminalVocab,
        words: WordVocab,
        context: int,
        embed_dim: int = 32,
        hidden_dim: int = 128,
        rng: Optional[np.random.Generator] = None,
    ) -> "PruneModel":
        rng = rng or np.random.default_rng(0)
        collapsed = CollapsedActions(nonterminals)
        d_in = (context + 1) * embed_dim
        return cls(
            nonterminals,
            words,
            context,
            rng.normal(0.0, 0.1, (collapsed.size + 1, embed_dim)),
            rng.normal(0.0, 0.1, (len(words) + 1, embed_dim)),
            rng.normal(0.0, math.sqrt(2.0 / d_in), (hidden_dim, d_in)),
            np.zeros(hidden_dim),
            rng.normal(0.0, math.sqrt(2.0 / hidden_dim), (collapsed.size, hidden_dim)),
            np.zeros(collapsed.size),
        )

    def word_id(self, surface_or_token) -> int:
        surface = (
            surface_or_token.surface
            if isinstance(surface_or_token, WordToken)
            else surface_or_token
        )
        return self.words.id_of(surface)

    def next_word_id(self, sentence: Sequence[WordToken], word_index: int) -> int:
        if word_index >= len(sentence):
            return self.eos_word_id
        return self.word_id(sentence[word_index])

    def _inputs(self, contexts: np.ndarray, word_ids: np.ndarray) -> np.ndarray:
        batch = word_ids.shape[0]
        parts = []
        if self.context > 0:
            parts.append(self.action_emb[contexts].reshape(batch, -1))
        parts.append(self.word_emb[word_ids])
        return np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]

    def forward(self, contexts: np.ndarray, word_ids: np.ndarray) -> np.ndarray:
        """Batched distribution over collapsed actions; rows sum to 1."""
        v = self._inputs(contexts, word_ids)
        z1 = v @ self.w1.T + self.b1
        h = np.maximum(z1, 0.0)
        z2 = h @ self.w2.T + self.b2
        z2 = z2 - z2.max(axis=1, keepdims=True)
        e = np.exp(z2)
        return e / e.sum(axis=1, keepdims=True)

    def forward_single(self, context_ids: Sequence[int], word_id: int) -> np.ndarray:
        contexts = np.asarray([context_ids], dtype=np.int64).reshape(1, self.context)
        return self.forward(contexts, np.asarray([word_id]))[0]

    def save(self, path) -> None:
        def write_array(f, name, arr):
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim == 1:
                f.write(f"vector {name} {arr.shape[0]}\n")
                f.write(" ".join(repr(x) for x in arr.tolist()) + "\n")
            else:
                f.write(f"matrix {name} {arr.shape[0]} {arr.shape[1]}\n")
                for row in arr.tolist():
                    f.write(" ".join(repr(x) for x in row) + "\n")

        with open(path, "w", encoding="utf-8") as f:
            f.write(PRUNER_FORMAT + "\n")
            f.write(f"context {self.context}\n")
            f.write(f"dims {self.embed_dim} {self.hidden_dim}\n")
            f.write(f"nonterminals {self.collapsed.n_nt}\n")
            for label in self.collapsed.nonterminals.labels():
                f.write(label + "\n")
            f.write(f"words {len(self.words)}\n")
            for surface in self.words.surfaces():
                f.write(surface + "\n")
            for name in self.PARAMS:
                write_array(f, name, getattr(self, name))

    @classmethod
    def load(cls, path) -> "PruneModel":
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        it = iter(lines)
        header = next(it)
        if header != PRUNER_FORMAT:
            raise ValueError(f"not a pruning model file (header {header!r})")
        context = int(next(it).split()[1])
        _, d_e, d_h = next(it).split()
        n_nt = int(next(it).split()[1])
        labels = [next(it) for _ in range(n_nt)]
        n_w = int(next(it).split()[1])
        surfaces = [next(it) for _ in range(n_w)]
        arrays = {}
        for name in cls.PARAMS:
            spec = next(it).split()
            if spec[0] == "vector":
                (n,) = (int(spec[2]),)
                arrays[name] = np.array([float(x) for x in next(it).split()])
                assert arrays[name].shape == (n,)
            else:
                rows, cols = int(spec[2]), int(spec[3])
                data = [[float(x) for x in next(it).split()] for _ in range(rows)]
                arrays[name] = np.array(data)
                assert arrays[name].shape == (rows, cols)
        return cls(
            NonterminalVocab(labels), WordVocab(surfaces), context, **arrays
        )


def prune_forward(
    model: PruneModel, context: Sequence[Action], next_word
) -> np.ndarray:
    """Distribution over collapsed actions given raw context actions and the
    next word (token or surface; out-of-vocabulary maps to the unknown row)."""
    ids = collapse_context(context, model.context, model.collapsed)
    return model.forward_single(ids, model.word_id(next_word))


def build_training_set(
    sequences: Iterable[Sequence[Action]], model: PruneModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(contexts, next-word ids, collapsed targets) for every gold step.

    The next word at a step is the word of the next shift in the sequence,
    or the reserved end-of-sentence id once all words are shifted.
    """
    contexts: list[tuple[int, ...]] = []
    word_ids: list[int] = []
    targets: list[int] = []
    for seq in sequences:
        upcoming = [a.word for a in seq if isinstance(a, Shift)]
        word_pos = 0
        for t, action in enumerate(seq):
            contexts.append(collapse_context(seq[:t], model.context, model.collapsed))
            if word_pos < len(upcoming):
                word_ids.append(model.word_id(upcoming[word_pos]))
            else:
                word_ids.append(model.eos_word_id)
            targets.append(model.collapsed.collapse(action))
            if isinstance(action, Shift):
                word_pos += 1
    ctx = np.asarray(contexts, dtype=np.int64).reshape(len(targets), model.context)
    return ctx, np.asarray(word_ids, dtype=np.int64), np.asarray(targets, dtype=np.int64)


def loss_and_grads(
    model: PruneModel,
    contexts: np.ndarray,
    word_ids: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy of the gold collapsed actions and its analytic
    gradients for every parameter group (backpropagation by hand)."""
    batch = targets.shape[0]
    v = model._inputs(contexts, word_ids)
    z1 = v @ model.w1.T + model.b1
    h = np.maximum(z1, 0.0)
    z2 = h @ model.w2.T + model.b2
    shifted = z2 - z2.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -log_probs[np.arange(batch), targets].mean()

    probs = np.exp(log_probs)
    g2 = probs
    g2[np.arange(batch), targets] -= 1.0
    g2 /= batch
    d_w2 = g2.T @ h
    d_b2 = g2.sum(axis=0)
    d_h = g2 @ model.w2
    d_z1 = d_h * (z1 > 0.0)
    d_w1 = d_z1.T @ v
    d_b1 = d_z1.sum(axis=0)
    d_v = d_z1 @ model.w1

    d_action_emb = np.zeros_like(model.action_emb)
    d = model.embed_dim
    for pos in range(model.context):
        np.add.at(d_action_emb, contexts[:, pos], d_v[:, pos * d : (pos + 1) * d])
    d_word_emb = np.zeros_like(model.word_emb)
    np.add.at(d_word_emb, word_ids, d_v[:, model.context * d :])

    return float(loss), {
        "action_emb": d_action_emb,
        "word_emb": d_word_emb,
        "w1": d_w1,
        "b1": d_b1,
        "w2": d_w2,
        "b2": d_b2,
    }


@dataclass
class TrainResult:
    model: PruneModel
    losses: list[float]  # full-set loss before training, then after each epoch

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def prune_train(
    sequences: Sequence[Sequence[Action]],
    nonterminals: NonterminalVocab,
    words: WordVocab,
    context: int,
    hyperparams: Optional[PruneHyperparams] = None,
) -> TrainResult:
    """Mini-batch gradient descent on gold action sequences."""
    hp = hyperparams or PruneHyperparams()
    if not sequences:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(hp.seed)
    model = PruneModel.random(
        nonterminals, words, context, hp.embed_dim, hp.hidden_dim, rng
    )
    contexts, word_ids, targets = build_training_set(sequences, model)
    m = targets.shape[0]

    def full_loss() -> float:
        probs = model.forward(contexts, word_ids)
        return float(-np.log(probs[np.arange(m), targets]).mean())

    losses = [full_loss()]
    for epoch in range(hp.epochs):
        order = rng.permutation(m)
        for start in range(0, m, hp.batch_size):
            batch = order[start : start + hp.batch_size]
            loss, grads = loss_and_grads(
                model, contexts[batch], word_ids[batch], targets[batch]
            )
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch starting {start}"
                )
            for name, grad in grads.items():
                param = getattr(model, name)
                param -= hp.learning_rate * grad
        losses.append(full_loss())
    return TrainResult(model, losses)


def _survivor_indices(
    model: PruneModel,
    p: PruneFraction,
    pool: Sequence[tuple],
    sentence: Sequence[WordToken],
) -> tuple[list[int], int]:
    """Indices (in pool order) of the open successors kept by the quantile
    rule: top floor(p*N) by coarse score, at least one, ties by pool order.
    Second element counts uses of the min-1 floor rescue."""
    n_items = len(pool)
    if n_items == 0:
        return [], 0
    p = Fraction(p)
    if not 0 < p <= 1:
        raise ValueError("pruning fraction must be in (0, 1]")
    if p == 1:
        return list(range(n_items)), 0
    keep_n = math.floor(p * n_items)
    rescued = 0
    if keep_n == 0:
        keep_n, rescued = 1, 1

    # one forward pass per distinct (context, next word)
    keys = []
    for hyp, _ in pool:
        ctx = collapse_context(hyp.history, model.context, model.collapsed)
        keys.append((ctx, model.next_word_id(sentence, hyp.word_index)))
    distinct = sorted(set(keys))
    ctx_arr = np.asarray([k[0] for k in distinct], dtype=np.int64).reshape(
        len(distinct), model.context
    )
    word_arr = np.asarray([k[1] for k in distinct], dtype=np.int64)
    dists = model.forward(ctx_arr, word_arr)
    by_key = {key: dists[i] for i, key in enumerate(distinct)}

    scores = [
        by_key[key][model.collapsed.collapse(action)]
        for key, (_, action) in zip(keys, pool)
    ]
    order = sorted(range(n_items), key=lambda i: (-scores[i], i))
    return sorted(order[:keep_n]), rescued


def prune_open_successors(
    model: PruneModel,
    p: PruneFraction,
    pool: Sequence[tuple],
    sentence: Sequence[WordToken],
) -> list[tuple]:
    """Surviving (hypothesis, open action) pairs, in original pool order.

    The pool is gathered across all hypotheses of the current bucket; close
    and shift successors never pass through here. With p = 1 the pool is
    returned unchanged without evaluating the model.
    """
    keep, _ = _survivor_indices(model, p, pool, sentence)
    return [pool[i] for i in keep]


@dataclass
class OpenPruner:
    """Search hook wiring a trained coarse model and a pruning fraction."""

    model: PruneModel
    p: PruneFraction = Fraction(1)

    def filter_open_indices(self, items, sentence):
        return _survivor_indices(self.model, self.p, items, sentence)


@dataclass
class OpenStats:
    """Cumulative distribution of unique open outputs per pruning input."""

    context_size: int
    n_nonterminals: int
    input_count: int
    cumulative: list[float]  # percent of inputs with <= n unique opens, n = 1..N


def corpus_open_stats(
    sequences: Sequence[Sequence[Action]],
    nonterminals: NonterminalVocab,
    words: WordVocab,
    context: int,
    min_occurrences: int = 20,
) -> OpenStats:
    """Occurrence statistics of pruning inputs over gold data.

    A pruning input is the pair (collapsed c-action context, next word).
    Inputs seen at least ``min_occurrences`` times with at least one open
    output contribute their number of distinct open outputs to the
    cumulative table.
    """
    if not sequences:
        raise ValueError("empty corpus")
    if min_occurrences < 1:
        raise ValueError("min_occurrences must be >= 1")
    collapsed = CollapsedActions(nonterminals)
    eos_id = len(words)
    counts: Counter = Counter()
    opens: dict[tuple, set[int]] = {}
    for seq in sequences:
        upcoming = [a.word for a in seq if isinstance(a, Shift)]
        word_pos = 0
        for t, action in enumerate(seq):
            ctx = collapse_context(seq[:t], context, collapsed)
            if word_pos < len(upcoming):
                wid = words.id_of(upcoming[word_pos].surface)
            else:
                wid = eos_id
            key = (ctx, wid)
            counts[key] += 1
            if isinstance(action, Open):
                opens.setdefault(key, set()).add(
                    nonterminals.by_label(action.nt.label).id
                )
            if isinstance(action, Shift):
                word_pos += 1
    qualifying = [
        key
        for key, n in counts.items()
        if n >= min_occurrences and key in opens
    ]
    if not qualifying:
        raise ValueError(
            f"no pruning inputs occur >= {min_occurrences} times with an open output"
        )
    n_nt = len(nonterminals)
    sizes = Counter(len(opens[key]) for key in qualifying)
    total = len(qualifying)
    cumulative = []
    running = 0
    for n in range(1, n_nt + 1):
        running += sizes.get(n, 0)
        cumulative.append(100.0 * running / total)
    return OpenStats(context, n_nt, total, cumulative)


def lower_bound_p(
    cumulative: Sequence[float], coverage: float, n_nonterminals: int
) -> Fraction:
    """Smallest n/N whose cumulative percentage reaches the coverage target.

    ``cumulative`` holds percentages for n = 1, 2, ... (a prefix is fine);
    coverage is a fraction in (0, 1].
    """
    if not 0 < coverage <= 1:
        raise ValueError("coverage must be in (0, 1]")
    threshold = coverage * 100.0 - 1e-9
    for i, pct in enumerate(cumulative):
        if pct >= threshold:
            return Fraction(i + 1, n_nonterminals)
    raise ValueError(
        f"coverage {coverage} not reachable within the first {len(cumulative)} entries"
    )


def format_stats_table(stats: Sequence[OpenStats]) -> str:
    """Aligned text table: one row per context size, one column per n."""
    if not stats:
        raise ValueError("no statistics to format")
    width = max(s.n_nonterminals for s in stats)
    header = ["c"] + [str(n) for n in range(1, width + 1)]
    rows = [header]
    for s in stats:
        row = [str(s.context_size)]
        row += [f"{pct:.1f}" for pct in s.cumulative]
        row += [""] * (width - len(s.cumulative))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows
    )
