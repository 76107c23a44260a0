"""Causal pair mining, cause-effect graphs and disjunctively constrained decoding."""

from .ceg import CauseEffectGraph, build_graph, query_candidates
from .dpc import (
    DisjunctiveConstraintSet,
    Hypothesis,
    constrained_beam_search,
    nbest_decode,
    random_sampling_decode,
)
from .miner import CausalPair, MinerConfig, mine_corpus
from .morphology import Lexicon, default_lexicon
from .pipeline import GenerationConfig, div_metric, generate, knn_baseline
from .scoring import NGramModel, TokenScorer, Vocabulary, perplexity, train_ngram

__version__ = "0.1.0"

__all__ = [
    "CausalPair", "CauseEffectGraph", "DisjunctiveConstraintSet", "GenerationConfig",
    "Hypothesis", "Lexicon", "MinerConfig", "NGramModel", "TokenScorer", "Vocabulary",
    "build_graph", "constrained_beam_search", "default_lexicon", "div_metric", "generate",
    "knn_baseline", "mine_corpus", "nbest_decode", "perplexity", "query_candidates",
    "random_sampling_decode", "train_ngram",
]
