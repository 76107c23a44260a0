"""Guided cause/effect generation plus the KNN baseline and the Div metric.

``generate`` picks constraint lemmas from the cause-effect graph, expands
each into its inflections as one disjunctive set, runs one constrained
search per lemma, then merges everything and reranks by negative
log-likelihood.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .ceg import CAUSE_OF, EFFECT_OF, CauseEffectGraph, query_candidates
from .dpc import DisjunctiveConstraintSet, Hypothesis, constrained_beam_search, nbest_decode
from .miner import CausalPair
from .morphology import Lexicon
from .scoring import TokenScorer
from .text import normalize, words

log = logging.getLogger(__name__)

DIRECTIONS = {"cause": CAUSE_OF, "effect": EFFECT_OF}


@dataclass
class GenerationConfig:
    direction: str = "cause"
    n_constraints: int = 300
    per_constraint_keep: int = 5
    final_k: int = 10
    beam_size: int = 10
    k_max: int = 20
    length_normalize: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be 'cause' or 'effect', got {self.direction!r}")
        if self.n_constraints < 1 or self.per_constraint_keep < 1 or self.final_k < 1:
            raise ValueError("N, M and K must be >= 1")
        if self.final_k > self.n_constraints * self.per_constraint_keep:
            raise ValueError("K must not exceed N * M")


@dataclass(frozen=True)
class GeneratedOutput:
    text: str
    nll: float
    constraint: str | None
    satisfied: bool
    fallback: bool = False
    tokens: tuple[int, ...] = field(default=(), compare=False, repr=False)

    def to_json(self) -> dict:
        return {"text": self.text, "nll": self.nll, "constraint": self.constraint,
                "satisfied": self.satisfied, "fallback": self.fallback}


@dataclass
class GenerationResult:
    input: str
    direction: str
    outputs: list[GeneratedOutput]
    fallback: bool = False
    candidates: list[tuple[str, int]] = field(default_factory=list)
    skipped_lemmas: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"input": self.input, "direction": self.direction,
                "outputs": [o.to_json() for o in self.outputs]}


def _nll(h: Hypothesis, normalize_len: bool) -> float:
    if normalize_len and h.tokens:
        return -h.logprob / len(h.tokens)
    return -h.logprob


def constraint_set(lemma: str, lexicon: Lexicon, scorer: TokenScorer,
                   set_id: int = 0) -> DisjunctiveConstraintSet | None:
    """All in-vocabulary inflections of ``lemma`` as one set, or None if none survive."""
    vocab = scorer.vocab
    seqs = []
    for form in sorted(lexicon.variants(lemma)):
        ids = vocab.encode(words(form))
        if ids and vocab.unk not in ids:
            seqs.append(tuple(ids))
    if not seqs:
        return None
    return DisjunctiveConstraintSet(set_id, tuple(seqs))


def generate(input_sentence: str, graph: CauseEffectGraph, scorer: TokenScorer,
             lexicon: Lexicon, config: GenerationConfig | None = None) -> GenerationResult:
    config = config or GenerationConfig()
    toks = words(input_sentence)
    if not toks:
        raise ValueError("input sentence is empty")
    lemmas = {lexicon.lemmatize(w) for w in toks if lexicon.is_open_class(w)}
    cands = query_candidates(graph, lemmas, DIRECTIONS[config.direction], config.n_constraints)
    result = GenerationResult(input_sentence, config.direction, [], candidates=cands)

    jobs = []
    for lemma, _freq in cands:
        cset = constraint_set(lemma, lexicon, scorer)
        if cset is None:
            result.skipped_lemmas.append(lemma)
        else:
            jobs.append((lemma, cset))
    if result.skipped_lemmas:
        log.info("skipped %d lemmas with no in-vocabulary variants", len(result.skipped_lemmas))

    vocab = scorer.vocab
    if not jobs:
        result.fallback = True
        hyps = nbest_decode(scorer, config.beam_size, config.k_max)
        result.outputs = [
            GeneratedOutput(h.text(vocab), _nll(h, config.length_normalize), None, h.satisfied,
                            True, h.tokens)
            for h in hyps[:config.final_k]
        ]
        return result

    def run(job):
        lemma, cset = job
        hyps = constrained_beam_search(scorer, [cset], config.beam_size, config.k_max)
        return lemma, [h for h in hyps if h.satisfied][:config.per_constraint_keep]

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            per_lemma = list(pool.map(run, jobs))
    else:
        per_lemma = [run(j) for j in jobs]

    best: dict[str, GeneratedOutput] = {}
    for lemma, hyps in per_lemma:  # lemma rank order, so ties keep the higher-ranked lemma
        for h in hyps:
            out = GeneratedOutput(h.text(vocab), _nll(h, config.length_normalize), lemma, True,
                                  False, h.tokens)
            prev = best.get(out.text)
            if prev is None or out.nll < prev.nll:
                best[out.text] = out
    ranked = sorted(best.values(), key=lambda o: (o.nll, o.text))
    result.outputs = ranked[:config.final_k]
    return result


class KnnIndex:
    """Token-level inverted index over one side of a causal-pair corpus."""

    def __init__(self, pairs: Iterable[CausalPair], direction: str):
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be 'cause' or 'effect', got {direction!r}")
        # to retrieve causes we search the effect side, and vice versa
        self.search_side = "effect" if direction == "cause" else "cause"
        self.return_side = direction
        self.records: list[tuple[list[str], str]] = []
        self.postings: dict[str, set[int]] = {}
        for pair in pairs:
            key_toks = words(getattr(pair, self.search_side))
            idx = len(self.records)
            self.records.append((key_toks, getattr(pair, self.return_side)))
            for t in set(key_toks):
                self.postings.setdefault(t, set()).add(idx)

    def search(self, query: str, k: int) -> list[str]:
        q = words(query)
        if not q or k < 1:
            return []
        postings = [self.postings.get(t, set()) for t in set(q)]
        hits = set.intersection(*postings) if postings else set()
        counts: Counter = Counter()
        surface: dict[str, str] = {}
        n = len(q)
        for idx in sorted(hits):
            toks, text = self.records[idx]
            if any(toks[i:i + n] == q for i in range(len(toks) - n + 1)):
                key = normalize(text)
                counts[key] += 1
                surface.setdefault(key, text)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [surface[key] for key, _ in ranked[:k]]


def knn_baseline(input_sentence: str, corpus: Iterable[CausalPair] | KnnIndex, direction: str,
                 k: int) -> list[str]:
    """Retrieve causes (or effects) of corpus pairs whose other side contains the input."""
    index = corpus if isinstance(corpus, KnnIndex) else KnnIndex(corpus, direction)
    return index.search(input_sentence, k)


def div_metric(gold_answers: Sequence[str], outputs_top3: Sequence[str]) -> float:
    """Clipped unigram precision of each output against the gold answers,
    averaged over outputs, with no brevity penalty.  Lower is more diverse."""
    if not outputs_top3 or len(outputs_top3) > 3:
        raise ValueError("expected between 1 and 3 outputs")
    max_ref: Counter = Counter()
    for ref in gold_answers:
        for tok, c in Counter(words(ref)).items():
            max_ref[tok] = max(max_ref[tok], c)
    precisions = []
    for out in outputs_top3:
        toks = words(out)
        if not toks:
            precisions.append(0.0)
            continue
        clipped = sum(min(c, max_ref[t]) for t, c in Counter(toks).items())
        precisions.append(clipped / len(toks))
    return sum(precisions) / len(precisions)
