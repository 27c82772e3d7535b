"""Beam-search decoding over the shift-reduce action space.

Two procedures share one successor-validity rule set: plain action-level
beam search, where hypotheses are grouped by action count, and word-level
search, where hypotheses are grouped by (words shifted, structural actions
since the last shift) so lexical and structural actions never compete
across groups. Word-level search supports a separate word beam, fast-track
promotion of shift successors past the top-k filter, and an optional
coarse-pruning hook over open successors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

from .actions import Action, Close, Open, Shift, actions_to_tree
from .scoring import Scorer, ScoringError
from .trees import Internal, Leaf, Nonterminal, NonterminalVocab, WordToken


@dataclass(eq=False, slots=True)
class Hypothesis:
    """Immutable search state; extension returns a new hypothesis.

    ``word_index`` counts shifts taken and ``struct_index`` counts actions
    since the last shift, so (word_index, struct_index) are the bucket
    coordinates of word-level search. ``insertion_seq`` is a monotone
    creation counter used to break score ties deterministically.
    """

    history: tuple[Action, ...]
    log_prob: float
    word_index: int
    struct_index: int
    open_stack: tuple[Nonterminal, ...]
    insertion_seq: int

    @classmethod
    def initial(cls) -> "Hypothesis":
        return cls((), 0.0, 0, 0, (), 0)

    @property
    def last_action(self) -> Optional[Action]:
        return self.history[-1] if self.history else None

    @property
    def complete(self) -> bool:
        return bool(self.history) and not self.open_stack

    def extend(self, action: Action, step_log_prob: float, seq: int) -> "Hypothesis":
        if isinstance(action, Shift):
            word_index, struct_index = self.word_index + 1, 0
            stack = self.open_stack
        elif isinstance(action, Open):
            word_index, struct_index = self.word_index, self.struct_index + 1
            stack = self.open_stack + (action.nt,)
        else:
            word_index, struct_index = self.word_index, self.struct_index + 1
            stack = self.open_stack[:-1]
        return Hypothesis(
            self.history + (action,),
            self.log_prob + step_log_prob,
            word_index,
            struct_index,
            stack,
            seq,
        )


class PruneHook(Protocol):
    """Coarse filter over the pooled open successors of one bucket."""

    def filter_open_indices(
        self, items: Sequence[tuple[Hypothesis, Open]], sentence: Sequence[WordToken]
    ) -> tuple[list[int], int]:
        """Return (indices of surviving items, count of min-1 floor rescues)."""
        ...


@dataclass
class SearchConfig:
    """Beam search settings.

    ``beam_size`` is the target beam k; ``word_beam`` caps hypotheses at
    word boundaries (defaults to k, i.e. no bottleneck); ``fast_track``
    promotes that many shift successors per pool past filtering (0
    disables). Structural caps guarantee termination: hypotheses at a cap
    simply lack open successors.
    """

    beam_size: int = 2000
    word_beam: Optional[int] = None
    fast_track: int = 0
    max_open: int = 100
    max_struct_per_word: int = 40
    prune: Optional[PruneHook] = None
    tie_break: str = "insertion"
    truncate_word_bucket: bool = True
    variant: str = "word"

    def __post_init__(self):
        if self.word_beam is None:
            self.word_beam = self.beam_size
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if not 1 <= self.word_beam <= self.beam_size:
            raise ValueError("need 1 <= word_beam <= beam_size")
        if not 0 <= self.fast_track <= self.word_beam:
            raise ValueError("need 0 <= fast_track <= word_beam")
        if self.max_open < 1 or self.max_struct_per_word < 1:
            raise ValueError("structural caps must be >= 1")
        if self.tie_break != "insertion":
            raise ValueError(f"unknown tie-break policy {self.tie_break!r}")
        if self.variant not in ("word", "action"):
            raise ValueError(f"unknown search variant {self.variant!r}")


@dataclass
class SearchStats:
    variant: str
    states_expanded: int = 0
    buckets_visited: int = 0
    fast_tracked: int = 0
    prune_floor_hits: int = 0
    word_bucket_sizes: list[int] = field(default_factory=list)


@dataclass
class SearchResult:
    hypotheses: list[Hypothesis]  # complete, best first
    stats: SearchStats

    @property
    def best(self) -> Optional[Hypothesis]:
        return self.hypotheses[0] if self.hypotheses else None


def valid_successors(
    hyp: Hypothesis,
    sentence: Sequence[WordToken],
    nonterminals: NonterminalVocab,
    config: SearchConfig,
) -> list[Action]:
    """Exactly the actions that keep the prefix extendable to a valid tree.

    Opens need an unshifted word left and both structural caps clear; a
    shift needs an open constituent and the next sentence word; the
    innermost constituent may close once it has a completed child (never
    directly after its own open), and the root additionally only after
    every word is shifted. A hypothesis whose root has closed is complete
    and has no successors.
    """
    opens = [Open(nt) for nt in nonterminals]
    shifts = [Shift(w) for w in sentence]
    return _successors(hyp, len(sentence), opens, shifts, config)


def _successors(
    hyp: Hypothesis,
    n: int,
    opens: Sequence[Open],
    shifts: Sequence[Shift],
    config: SearchConfig,
) -> list[Action]:
    # enumeration order (shift, close, opens) is the insertion order used to
    # break score ties, so equal-scoring shifts win over structural actions
    if hyp.complete:
        return []
    out: list[Action] = []
    if hyp.open_stack:
        if hyp.word_index < n:
            out.append(shifts[hyp.word_index])
        if not isinstance(hyp.history[-1], Open) and (
            len(hyp.open_stack) > 1 or hyp.word_index == n
        ):
            out.append(Close(hyp.open_stack[-1]))
    if (
        hyp.word_index < n
        and len(hyp.open_stack) < config.max_open
        and hyp.struct_index < config.max_struct_per_word
    ):
        out.extend(opens)
    return out


def _sort_key(hyp: Hypothesis):
    # higher score first, then earlier insertion
    return (-hyp.log_prob, hyp.insertion_seq)


# scored successor awaiting construction: (total score, pool order, parent,
# action, step score); hypotheses are only built for pool survivors
_Candidate = tuple[float, int, Hypothesis, Action, float]


def _cand_key(cand: _Candidate):
    return (-cand[0], cand[1])


def _scored_candidates(
    hyps: Sequence[Hypothesis],
    sentence: Sequence[WordToken],
    opens: Sequence[Open],
    shifts: Sequence[Shift],
    scorer: Scorer,
    config: SearchConfig,
    stats: SearchStats,
) -> list[_Candidate]:
    """Valid successors of one pool of hypotheses, scored, with the coarse
    open-pruning hook applied before the main scorer runs."""
    n = len(sentence)
    cand_lists = [_successors(h, n, opens, shifts, config) for h in hyps]
    if config.prune is not None:
        items: list[tuple[Hypothesis, Open]] = []
        positions: list[tuple[int, int]] = []
        for hi, cands in enumerate(cand_lists):
            for ci, action in enumerate(cands):
                if isinstance(action, Open):
                    items.append((hyps[hi], action))
                    positions.append((hi, ci))
        if items:
            keep, rescued = config.prune.filter_open_indices(items, sentence)
            stats.prune_floor_hits += rescued
            if len(keep) < len(items):
                dropped = set(range(len(items))).difference(keep)
                drop_positions = {positions[i] for i in dropped}
                cand_lists = [
                    [a for ci, a in enumerate(cands) if (hi, ci) not in drop_positions]
                    for hi, cands in enumerate(cand_lists)
                ]
    try:
        score_lists = scorer.score_pool(
            [(h.history, cands) for h, cands in zip(hyps, cand_lists)]
        )
    except ScoringError:
        raise
    except Exception as exc:
        ids = [h.insertion_seq for h in hyps]
        raise ScoringError(f"scorer failed on pool of hypotheses {ids}") from exc
    out: list[_Candidate] = []
    order = 0
    for hyp, cands, scores in zip(hyps, cand_lists, score_lists):
        base = hyp.log_prob
        for action, score in zip(cands, scores):
            out.append((base + score, order, hyp, action, score))
            order += 1
    stats.states_expanded += order
    return out


def _build_survivors(
    groups: Sequence[list[_Candidate]], counter
) -> list[list[Hypothesis]]:
    """Instantiate the selected candidates, assigning insertion numbers in
    pool order so tie-breaking matches construct-everything semantics."""
    chosen = sorted((c for group in groups for c in group), key=lambda c: c[1])
    made = {
        c[1]: c[2].extend(c[3], c[4], next(counter)) for c in chosen
    }
    return [[made[c[1]] for c in group] for group in groups]


def action_level_search(
    sentence: Sequence[WordToken],
    scorer: Scorer,
    config: SearchConfig,
    on_step: Optional[Callable[[int, list[Hypothesis]], None]] = None,
) -> SearchResult:
    """Plain beam search over action steps.

    All successors of the beam are pooled, the top k survive, and complete
    hypotheses among them move to the finished list. ``on_step`` is called
    with the surviving incomplete beam after each step, for instrumentation.
    An empty finished list is an expected outcome: structural and lexical
    actions compete directly here, which is exactly the failure mode
    word-level search exists to fix.
    """
    n = len(sentence)
    if n == 0:
        raise ValueError("cannot search an empty sentence")
    opens = scorer.action_vocab.opens()
    shifts = [Shift(w) for w in sentence]
    stats = SearchStats(variant="action")
    counter = itertools.count(1)
    beam = [Hypothesis.initial()]
    finished: list[Hypothesis] = []
    # any valid path fits within the structural caps, so this bounds the search
    step_cap = n + (n + 1) * (config.max_struct_per_word + config.max_open) + 2
    for step in range(step_cap):
        if not beam:
            break
        cands = _scored_candidates(beam, sentence, opens, shifts, scorer, config, stats)
        stats.buckets_visited += 1
        cands.sort(key=_cand_key)
        del cands[config.beam_size :]
        (pool,) = _build_survivors([cands], counter)
        beam = []
        for hyp in pool:
            if hyp.complete:
                finished.append(hyp)
            else:
                beam.append(hyp)
        if on_step is not None:
            on_step(step, list(beam))
    finished.sort(key=_sort_key)
    return SearchResult(finished, stats)


def word_level_search(
    sentence: Sequence[WordToken], scorer: Scorer, config: SearchConfig
) -> SearchResult:
    """Bucketed beam search synchronized at word boundaries.

    For each word position i, buckets (i, 0), (i, 1), ... are processed in
    order: each bucket's successors are pooled, fast-track moves the best
    shift successors straight to the next word bucket, the rest are filtered
    to the top k and routed (structural actions to (i, j+1), shifts to
    (i+1, 0), root closes to the completed list). The step for position i
    ends once the next word bucket holds at least word_beam hypotheses or
    the buckets run dry; the next word bucket is then cut to the word beam.
    """
    n = len(sentence)
    if n == 0:
        raise ValueError("cannot search an empty sentence")
    opens = scorer.action_vocab.opens()
    shifts = [Shift(w) for w in sentence]
    stats = SearchStats(variant="word")
    counter = itertools.count(1)
    current = [Hypothesis.initial()]
    completed: list[Hypothesis] = []
    for i in range(n + 1):
        stats.word_bucket_sizes.append(len(current))
        buckets: dict[int, list[Hypothesis]] = {0: current}
        next_word: list[Hypothesis] = []
        j = 0
        while True:
            bucket = buckets.get(j)
            if not bucket:
                break
            stats.buckets_visited += 1
            cands = _scored_candidates(
                bucket, sentence, opens, shifts, scorer, config, stats
            )
            promoted_cands: list[_Candidate] = []
            if config.fast_track > 0 and i < n:
                shift_cands = [c for c in cands if type(c[3]) is Shift]
                shift_cands.sort(key=_cand_key)
                promoted_cands = shift_cands[: config.fast_track]
                if promoted_cands:
                    taken = {c[1] for c in promoted_cands}
                    cands = [c for c in cands if c[1] not in taken]
            cands.sort(key=_cand_key)
            del cands[config.beam_size :]
            promoted, pool = _build_survivors([promoted_cands, cands], counter)
            stats.fast_tracked += len(promoted)
            next_word.extend(promoted)
            for hyp in pool:
                if isinstance(hyp.history[-1], Shift):
                    next_word.append(hyp)
                elif hyp.complete:
                    completed.append(hyp)
                else:
                    buckets.setdefault(j + 1, []).append(hyp)
            if i < n and len(next_word) >= config.word_beam:
                break
            j += 1
        if i < n:
            next_word.sort(key=_sort_key)
            if config.truncate_word_bucket:
                del next_word[config.word_beam :]
            current = next_word
            if not current:
                break
        else:
            completed.sort(key=_sort_key)
            del completed[config.word_beam :]
    completed.sort(key=_sort_key)
    return SearchResult(completed, stats)


@dataclass
class SentenceDiagnostics:
    index: int
    n_words: int
    variant: str
    states_expanded: int
    buckets_visited: int
    completed: int
    failed: bool
    prune_floor_hits: int = 0

    def as_line(self) -> str:
        return "\t".join(
            str(x)
            for x in (
                self.index,
                self.n_words,
                self.variant,
                self.states_expanded,
                self.buckets_visited,
                self.completed,
                int(self.failed),
                self.prune_floor_hits,
            )
        )


DIAGNOSTICS_HEADER = "\t".join(
    (
        "sentence_id",
        "length",
        "variant",
        "states_expanded",
        "buckets_visited",
        "completed",
        "failed",
        "prune_floor_hits",
    )
)


def most_probable_root(scorer: Scorer) -> Nonterminal:
    """The open action the scorer likes best at the start of a sequence."""
    opens = scorer.action_vocab.opens()
    scores = scorer.score_actions((), opens)
    best = min(range(len(opens)), key=lambda i: (-scores[i], opens[i].nt.id))
    return opens[best].nt


def right_branching_tree(
    sentence: Sequence[WordToken], label: Nonterminal
) -> Internal:
    """Fallback parse: words chained under nested constituents of one label."""
    if not sentence:
        raise ValueError("cannot build a tree over zero words")
    node = Internal(label, (Leaf(sentence[-1]),))
    for word in reversed(sentence[:-1]):
        node = Internal(label, (Leaf(word), node))
    return node


def decode_sentence(
    sentence: Sequence[WordToken], scorer: Scorer, config: SearchConfig
) -> tuple[Internal, SentenceDiagnostics]:
    """Best tree for one sentence, with a flagged right-branching fallback
    when the search completes nothing."""
    search = word_level_search if config.variant == "word" else action_level_search
    result = search(sentence, scorer, config)
    stats = result.stats
    best = result.best
    if best is not None:
        tree = actions_to_tree(best.history)
        failed = False
    else:
        tree = right_branching_tree(sentence, most_probable_root(scorer))
        failed = True
    diag = SentenceDiagnostics(
        index=-1,
        n_words=len(sentence),
        variant=stats.variant,
        states_expanded=stats.states_expanded,
        buckets_visited=stats.buckets_visited,
        completed=len(result.hypotheses),
        failed=failed,
        prune_floor_hits=stats.prune_floor_hits,
    )
    return tree, diag


def decode_corpus(
    sentences: Sequence[Sequence[WordToken]], scorer: Scorer, config: SearchConfig
) -> tuple[list[Internal], list[SentenceDiagnostics]]:
    """Argmax tree per sentence plus per-sentence search diagnostics."""
    if not sentences:
        raise ValueError("empty input corpus")
    trees: list[Internal] = []
    diags: list[SentenceDiagnostics] = []
    for idx, sentence in enumerate(sentences):
        tree, diag = decode_sentence(sentence, scorer, config)
        diag.index = idx
        trees.append(tree)
        diags.append(diag)
    return trees, diags
