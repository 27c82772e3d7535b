"""Bracketed constituency trees: structure, parsing, serialization, vocabularies.

Trees contain only nonterminal-labeled internal nodes and word leaves; there
is no part-of-speech layer. Treebanks that carry one can have it removed on
ingestion (see :func:`strip_preterminals`).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

UNK_SURFACE = "<unk>"

# id carried by tokens parsed without a vocabulary
UNRESOLVED = -1


@dataclass(frozen=True)
class Nonterminal:
    id: int
    label: str

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class WordToken:
    id: int
    surface: str

    def __str__(self):
        return self.surface


@dataclass(frozen=True)
class Leaf:
    word: WordToken


@dataclass(frozen=True)
class Internal:
    label: Nonterminal
    children: tuple["Tree", ...]

    def __post_init__(self):
        if not self.children:
            raise TreeStructureError(f"constituent {self.label.label!r} has no children")


Tree = Union[Internal, Leaf]


class TreeStructureError(ValueError):
    """A tree violates a structural invariant (e.g. a childless constituent)."""


class BracketParseError(ValueError):
    """Malformed bracketed text. ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def leaves(tree: Tree) -> list[WordToken]:
    """Leaf tokens in left-to-right order; they spell the sentence."""
    out: list[WordToken] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.append(node.word)
        else:
            stack.extend(reversed(node.children))
    return out


def internal_count(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + sum(internal_count(child) for child in tree.children)


def sentence_surfaces(tree: Tree) -> list[str]:
    return [w.surface for w in leaves(tree)]


class NonterminalVocab:
    """Dense label <-> id mapping for constituent labels."""

    def __init__(self, labels: Iterable[str]):
        self._labels = list(labels)
        self._index = {label: i for i, label in enumerate(self._labels)}
        if len(self._index) != len(self._labels):
            raise ValueError("duplicate nonterminal label")

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __iter__(self) -> Iterator[Nonterminal]:
        return (Nonterminal(i, label) for i, label in enumerate(self._labels))

    def labels(self) -> list[str]:
        return list(self._labels)

    def by_label(self, label: str) -> Nonterminal:
        try:
            return Nonterminal(self._index[label], label)
        except KeyError:
            raise KeyError(f"unknown nonterminal label {label!r}") from None

    def by_id(self, nt_id: int) -> Nonterminal:
        return Nonterminal(nt_id, self._labels[nt_id])


class WordVocab:
    """Closed word vocabulary with a reserved unknown token at id 0."""

    def __init__(self, surfaces: Iterable[str]):
        self._surfaces = list(surfaces)
        if not self._surfaces or self._surfaces[0] != UNK_SURFACE:
            raise ValueError(f"word vocabulary must start with {UNK_SURFACE!r}")
        self._index = {s: i for i, s in enumerate(self._surfaces)}
        if len(self._index) != len(self._surfaces):
            raise ValueError("duplicate word surface")

    unk_id = 0

    def __len__(self) -> int:
        return len(self._surfaces)

    def __contains__(self, surface: str) -> bool:
        return surface in self._index

    def surfaces(self) -> list[str]:
        return list(self._surfaces)

    def id_of(self, surface: str) -> int:
        return self._index.get(surface, self.unk_id)

    def token(self, surface: str) -> WordToken:
        """Map a surface form to a token, keeping the original spelling."""
        return WordToken(self.id_of(surface), surface)

    def surface_of(self, word_id: int) -> str:
        return self._surfaces[word_id]


@dataclass(frozen=True)
class VocabPolicy:
    """How raw bracketed text is interpreted.

    With vocabularies attached, labels must be known and out-of-vocabulary
    words map to the unknown id (surfaces are preserved). ``strip_pos``
    removes a part-of-speech layer when the tree has one; see
    :func:`strip_preterminals`.
    """

    strip_pos: bool = True
    nonterminals: Optional[NonterminalVocab] = None
    words: Optional[WordVocab] = None


def _has_preterminal_layer(tree: Internal) -> bool:
    # A POS-annotated tree has every leaf wrapped in its own unary parent.
    # Canonical trees attach at least one word directly to a phrasal node
    # with siblings, so this predicate makes stripping idempotent.
    def check(node: Tree, parent_arity: int) -> bool:
        if isinstance(node, Leaf):
            return parent_arity == 1
        return all(check(child, len(node.children)) for child in node.children)

    return all(check(child, len(tree.children)) for child in tree.children)


def strip_preterminals(tree: Internal) -> Internal:
    """Remove the part-of-speech layer from a POS-annotated tree.

    Each leaf's immediate unary parent is deleted and the leaf attaches to
    its grandparent. Applied only when the whole tree carries the layer
    (every leaf wrapped in a unary parent), so canonical trees pass through
    unchanged. The root is never removed.
    """
    if not _has_preterminal_layer(tree):
        return tree

    def rebuild(node: Internal) -> Internal:
        children: list[Tree] = []
        for child in node.children:
            if isinstance(child, Internal):
                if len(child.children) == 1 and isinstance(child.children[0], Leaf):
                    children.append(child.children[0])
                else:
                    children.append(rebuild(child))
            else:
                children.append(child)
        return Internal(node.label, tuple(children))

    if len(tree.children) == 1 and isinstance(tree.children[0], Leaf):
        return tree  # root preterminal: nothing above to attach the leaf to
    return rebuild(tree)


_TOKEN = re.compile(r"\(|\)|[^()\s]+")


def parse_bracketed(text: str, policy: Optional[VocabPolicy] = None) -> list[Internal]:
    """Parse bracketed text into trees, one per top-level parenthesis group.

    Accepts PTB-style unlabeled top-level wrappers ``( (S ...) )``. Raises
    :class:`BracketParseError` on unbalanced input and
    :class:`TreeStructureError` on childless constituents.
    """
    if policy is None:
        policy = VocabPolicy()
    tokens = [(m.group(), m.start()) for m in _TOKEN.finditer(text)]
    trees: list[Internal] = []
    pos = 0

    def make_leaf(surface: str) -> Leaf:
        if policy.words is not None:
            return Leaf(policy.words.token(surface))
        return Leaf(WordToken(UNRESOLVED, surface))

    def make_label(label: str) -> Nonterminal:
        if policy.nonterminals is not None:
            return policy.nonterminals.by_label(label)
        return Nonterminal(UNRESOLVED, label)

    def parse_group(i: int, top_level: bool):
        # tokens[i] is the opening paren
        open_offset = tokens[i][1]
        i += 1
        if i >= len(tokens):
            raise BracketParseError("unbalanced parentheses at end of input", len(text))
        tok, off = tokens[i]
        if tok == "(":
            # unlabeled wrapper, PTB outermost group
            if not top_level:
                raise BracketParseError("constituent missing a label", off)
            inner, i = parse_group(i, top_level=False)
            if i >= len(tokens) or tokens[i][0] != ")":
                raise BracketParseError(
                    "top-level wrapper must contain exactly one tree",
                    tokens[i][1] if i < len(tokens) else len(text),
                )
            return inner, i + 1
        if tok == ")":
            raise BracketParseError("constituent missing a label", off)
        label = make_label(tok)
        i += 1
        children: list[Tree] = []
        while True:
            if i >= len(tokens):
                raise BracketParseError("unbalanced parentheses at end of input", len(text))
            tok, off = tokens[i]
            if tok == ")":
                if not children:
                    raise TreeStructureError(
                        f"constituent {label.label!r} has no children"
                    )
                return Internal(label, tuple(children)), i + 1
            if tok == "(":
                child, i = parse_group(i, top_level=False)
                children.append(child)
            else:
                children.append(make_leaf(tok))
                i += 1

    while pos < len(tokens):
        tok, off = tokens[pos]
        if tok != "(":
            raise BracketParseError(f"expected '(' but found {tok!r}", off)
        tree, pos = parse_group(pos, top_level=True)
        if policy.strip_pos:
            tree = strip_preterminals(tree)
        trees.append(tree)
    return trees


def serialize_bracketed(tree: Tree) -> str:
    """Canonical single-line bracketed form with single spaces."""
    if isinstance(tree, Leaf):
        return tree.word.surface
    inner = " ".join(serialize_bracketed(child) for child in tree.children)
    return f"({tree.label.label} {inner})"


def build_vocab(
    trees: Iterable[Internal], min_count: int = 1
) -> tuple[NonterminalVocab, WordVocab]:
    """Closed vocabularies from a treebank.

    Nonterminals keep every label seen; words need count >= min_count and the
    unknown token is always present at id 0. Index order is frequency
    descending with lexicographic tie-breaks, so assignment is deterministic.
    """
    trees = list(trees)
    if not trees:
        raise ValueError("cannot build vocabularies from an empty treebank")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    label_counts: Counter[str] = Counter()
    word_counts: Counter[str] = Counter()

    def visit(node: Tree):
        if isinstance(node, Leaf):
            word_counts[node.word.surface] += 1
            return
        label_counts[node.label.label] += 1
        for child in node.children:
            visit(child)

    for tree in trees:
        visit(tree)

    by_freq = lambda counts: sorted(counts, key=lambda s: (-counts[s], s))
    labels = by_freq(label_counts)
    words = [UNK_SURFACE] + [
        s for s in by_freq(word_counts) if word_counts[s] >= min_count and s != UNK_SURFACE
    ]
    return NonterminalVocab(labels), WordVocab(words)


def resolve_tree(tree: Internal, nts: NonterminalVocab, words: WordVocab) -> Internal:
    """Re-index a tree's labels and words against the given vocabularies."""

    def walk(node: Tree) -> Tree:
        if isinstance(node, Leaf):
            return Leaf(words.token(node.word.surface))
        return Internal(nts.by_label(node.label.label), tuple(walk(c) for c in node.children))

    return walk(tree)  # type: ignore[return-value]


def load_treebank(path, policy: Optional[VocabPolicy] = None) -> list[Internal]:
    with open(path, encoding="utf-8") as f:
        return parse_bracketed(f.read(), policy)


def write_treebank(path, trees: Iterable[Tree]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for tree in trees:
            f.write(serialize_bracketed(tree) + "\n")
