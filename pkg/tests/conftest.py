import pytest

from beamparse import actions, scoring, trees
from beamparse.trees import Internal, Leaf, Nonterminal, WordToken

FIGURE_TEXT = "(S (NP He) (VP had (NP an idea)) .)"


def make_tree(spec, nts=None, words=None):
    """Build a tree from a nested (label, children...) spec with strings as
    leaves, resolving against vocabularies when given."""
    label, *children = spec
    built = tuple(
        Leaf(words.token(c) if words else WordToken(trees.UNRESOLVED, c))
        if isinstance(c, str)
        else make_tree(c, nts, words)
        for c in children
    )
    nt = nts.by_label(label) if nts else Nonterminal(trees.UNRESOLVED, label)
    return Internal(nt, built)


@pytest.fixture(scope="session")
def figure_vocab():
    raw = trees.parse_bracketed(FIGURE_TEXT)[0]
    return trees.build_vocab([raw])


@pytest.fixture(scope="session")
def figure_tree(figure_vocab):
    nts, words = figure_vocab
    raw = trees.parse_bracketed(FIGURE_TEXT)[0]
    return trees.resolve_tree(raw, nts, words)


@pytest.fixture(scope="session")
def figure_actions(figure_tree):
    return actions.tree_to_actions(figure_tree)


@pytest.fixture(scope="session")
def figure_action_vocab(figure_vocab):
    nts, words = figure_vocab
    return actions.ActionVocab(nts, words)


def tiny_vocab(n_labels=2, word_surfaces=("a", "b")):
    """Small closed vocabularies for oracle-scale search tests."""
    nts = trees.NonterminalVocab([chr(ord("X") + i) for i in range(n_labels)])
    words = trees.WordVocab([trees.UNK_SURFACE, *word_surfaces])
    return nts, words


def uniform_table_scorer(nts, words):
    return scoring.uniform_scorer(actions.ActionVocab(nts, words))
