"""Deterministic toy scorers and brute-force oracles shared by the tests."""

from __future__ import annotations

import math

import numpy as np

from causalgen.dpc import contains_sequence
from causalgen.scoring import TokenScorer, Vocabulary


class RandomScorer(TokenScorer):
    """Next-token distribution drawn from a RNG seeded by (seed, prefix)."""

    def __init__(self, n_words: int = 0, seed: int = 0, peaked: float = 1.0, tokens=None):
        self.vocab = Vocabulary(tokens if tokens is not None else [f"w{i}" for i in range(n_words)])
        self.seed = seed
        self.peaked = peaked
        self._cache = {}

    def score_next(self, prefix):
        key = tuple(prefix)
        hit = self._cache.get(key)
        if hit is None:
            rng = np.random.default_rng([self.seed, len(key), *key])
            logits = rng.normal(size=len(self.vocab)) * self.peaked
            hit = logits - np.logaddexp.reduce(logits)
            self._cache[key] = hit
        return hit


class TableScorer(TokenScorer):
    """Scorer defined by an explicit function prefix -> {token: prob}."""

    def __init__(self, vocab, fn):
        self.vocab = vocab
        self.fn = fn

    def score_next(self, prefix):
        probs = np.zeros(len(self.vocab))
        for tok, p in self.fn(tuple(prefix)).items():
            probs[self.vocab.id(tok) if isinstance(tok, str) else tok] = p
        with np.errstate(divide="ignore"):
            return np.log(probs / probs.sum())


def allowed_tokens(vocab, banned=None):
    banned = {vocab.bos, vocab.unk} if banned is None else set(banned)
    return [t for t in range(len(vocab)) if t not in banned]


def satisfies(tokens, sets):
    body = [t for t in tokens]
    return all(any(contains_sequence(body, seq) for seq in s.sequences) for s in sets)


def exhaustive_best(scorer, sets, k_max, banned=None, top=1):
    """Best-scoring finished sequences meeting every set, by depth-first
    enumeration of all sequences up to ``k_max`` tokens.

    A sequence is finished when it ends in EOS or reaches ``k_max``.
    Returns a list of (logprob, tokens), best first; ties by token ids.
    """
    vocab = scorer.vocab
    eos = vocab.eos
    toks = allowed_tokens(vocab, banned)
    found = []

    def bound():
        if len(found) < top:
            return -math.inf
        return found[top - 1][0]

    def visit(prefix, lp):
        if lp < bound() - 1e-12:
            return  # log-probs only decrease
        scores = scorer.score_next(prefix)
        for t in toks:
            seq = prefix + (t,)
            slp = lp + float(scores[t])
            if t == eos or len(seq) == k_max:
                body = seq[:-1] if t == eos else seq
                if satisfies(body, sets):
                    found.append((slp, seq))
                    found.sort(key=lambda x: (-x[0], x[1]))
                    del found[top:]
            else:
                visit(seq, slp)

    visit((), 0.0)
    return found


def exhaustive_plain(scorer, k_max, banned=None, top=1):
    return exhaustive_best(scorer, [], k_max, banned, top)
