"""Decoding toolkit for generative shift-reduce constituency parsers:
action- and word-level beam search with fast-track candidate selection,
coarse open-action pruning, and the treebank/training/evaluation machinery
to exercise them end to end.
"""

from .actions import (
    Action,
    ActionSequenceError,
    ActionVocab,
    Close,
    Open,
    Shift,
    actions_to_tree,
    format_actions,
    parse_action_line,
    tree_to_actions,
)
from .evaluation import extract_brackets, score_corpus
from .pruning import (
    OpenPruner,
    PruneConfig,
    PruneHyperparams,
    PruneModel,
    corpus_open_stats,
    lower_bound_p,
    prune_forward,
    prune_open_successors,
    prune_train,
)
from .scoring import (
    CountScorer,
    Scorer,
    TableScorer,
    score_successors,
    train_count_scorer,
    uniform_scorer,
)
from .search import (
    Hypothesis,
    SearchConfig,
    SearchResult,
    action_level_search,
    decode_corpus,
    valid_successors,
    word_level_search,
)
from .trees import (
    BracketParseError,
    Internal,
    Leaf,
    Nonterminal,
    NonterminalVocab,
    Tree,
    TreeStructureError,
    VocabPolicy,
    WordToken,
    WordVocab,
    build_vocab,
    parse_bracketed,
    serialize_bracketed,
)

__version__ = "0.1.0"
