"""Shift-reduce action algebra and tree <-> action-sequence conversion.

A tree linearizes in left-to-right depth-first order: opening a constituent,
emitting its children, closing it; leaves become word shifts. Close actions
carry their nonterminal, which must match the innermost open constituent, so
the annotated and unannotated views coincide.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .trees import Internal, Leaf, Nonterminal, NonterminalVocab, Tree, WordToken, WordVocab


@dataclass(frozen=True)
class Open:
    nt: Nonterminal

    def __str__(self):
        return f"({self.nt.label}"


@dataclass(frozen=True)
class Close:
    nt: Nonterminal

    def __str__(self):
        return f"{self.nt.label})"


@dataclass(frozen=True)
class Shift:
    word: WordToken

    def __str__(self):
        return self.word.surface


Action = Union[Open, Close, Shift]


class ActionSequenceError(ValueError):
    """An action sequence is not a valid linearization.

    ``index`` names the first offending action (len(actions) when the
    sequence ends too early).
    """

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (action index {index})")
        self.index = index


def tree_to_actions(tree: Internal) -> list[Action]:
    """Depth-first linearization; length is 2*internal_nodes + leaves."""
    out: list[Action] = []

    def walk(node: Tree):
        if isinstance(node, Leaf):
            out.append(Shift(node.word))
            return
        out.append(Open(node.label))
        for child in node.children:
            walk(child)
        out.append(Close(node.label))

    walk(tree)
    return out


def actions_to_tree(actions: Sequence[Action]) -> Internal:
    """Inverse of tree_to_actions; rejects invalid sequences.

    Raises :class:`ActionSequenceError` on a premature or mismatched close,
    a childless constituent, material outside the root, or leftover open
    constituents.
    """
    # stack frames: (label, children so far)
    stack: list[tuple[Nonterminal, list[Tree]]] = []
    root: Internal | None = None
    for i, action in enumerate(actions):
        if root is not None:
            raise ActionSequenceError("action after the root constituent closed", i)
        if isinstance(action, Open):
            stack.append((action.nt, []))
        elif isinstance(action, Shift):
            if not stack:
                raise ActionSequenceError("shift outside any open constituent", i)
            stack[-1][1].append(Leaf(action.word))
        else:
            if not stack:
                raise ActionSequenceError("close with no open constituent", i)
            label, children = stack[-1]
            if label != action.nt:
                raise ActionSequenceError(
                    f"close label {action.nt.label!r} does not match open {label.label!r}", i
                )
            if not children:
                raise ActionSequenceError(
                    f"constituent {label.label!r} closed with no children", i
                )
            stack.pop()
            node = Internal(label, tuple(children))
            if stack:
                stack[-1][1].append(node)
            else:
                root = node
    if root is None:
        raise ActionSequenceError("sequence ended with open constituents", len(actions))
    return root


def format_actions(actions: Iterable[Action]) -> str:
    """Render as the one-line text form: "(X" opens, "X)" closes, bare words."""
    return " ".join(str(a) for a in actions)


def parse_action_line(line: str, nts: NonterminalVocab, words: WordVocab) -> list[Action]:
    """Parse one rendered action sequence back into actions."""
    out: list[Action] = []
    for tok in line.split():
        if tok.startswith("("):
            out.append(Open(nts.by_label(tok[1:])))
        elif tok.endswith(")"):
            out.append(Close(nts.by_label(tok[:-1])))
        else:
            out.append(Shift(words.token(tok)))
    return out


def read_action_file(path, nts: NonterminalVocab, words: WordVocab) -> list[list[Action]]:
    with open(path, encoding="utf-8") as f:
        return [parse_action_line(line, nts, words) for line in f if line.strip()]


def write_action_file(path, sequences: Iterable[Sequence[Action]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for seq in sequences:
            f.write(format_actions(seq) + "\n")


class ActionVocab:
    """Dense index over the full action space of a (nonterminal, word) pair
    of vocabularies: opens first, then closes, then one shift per word type.

    ``bos_id`` is a reserved begin-of-sequence symbol used only for history
    padding; it is not a real action and does not count toward ``size``.
    """

    def __init__(self, nts: NonterminalVocab, words: WordVocab):
        self.nonterminals = nts
        self.words = words
        self.n_nt = len(nts)
        self.size = 2 * self.n_nt + len(words)
        self.bos_id = self.size

    def __len__(self) -> int:
        return self.size

    def index(self, action: Action) -> int:
        cls = type(action)
        if cls is Open:
            return action.nt.id
        if cls is Close:
            return self.n_nt + action.nt.id
        word_id = action.word.id
        if word_id < 0:
            raise ValueError(
                f"shift of unresolved word {action.word.surface!r}; apply a vocabulary first"
            )
        return 2 * self.n_nt + word_id

    def action(self, index: int) -> Action:
        if index < self.n_nt:
            return Open(self.nonterminals.by_id(index))
        if index < 2 * self.n_nt:
            return Close(self.nonterminals.by_id(index - self.n_nt))
        word_id = index - 2 * self.n_nt
        return Shift(WordToken(word_id, self.words.surface_of(word_id)))

    def indices(self, actions: Sequence[Action]) -> tuple[int, ...]:
        return tuple(self.index(a) for a in actions)

    def opens(self) -> list[Open]:
        return [Open(nt) for nt in self.nonterminals]
