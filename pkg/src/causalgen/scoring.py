"""Token scoring contract, a Laplace-smoothed n-gram reference model, and
evaluation formulas (perplexity, word accuracy, margin ranking loss)."""

from __future__ import annotations

import abc
import math
import struct
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BOS, EOS, UNK = "<s>", "</s>", "<unk>"


class Vocabulary:
    """Token strings with fixed ids; specials occupy ids 0-2 (BOS, EOS, UNK)."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = [BOS, EOS, UNK]
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        for tok in tokens:
            if tok in self._ids:
                if tok in (BOS, EOS, UNK):
                    continue
                raise ValueError(f"duplicate vocabulary token {tok!r}")
            self._ids[tok] = len(self.tokens)
            self.tokens.append(tok)

    bos = 0
    eos = 1
    unk = 2

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, token: str) -> int:
        return self._ids.get(token, self.unk)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._ids.get(t, self.unk) for t in tokens]

    def decode(self, ids: Iterable[int], strip_eos: bool = True) -> list[str]:
        return [self.tokens[i] for i in ids if not (strip_eos and i == self.eos)]

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocabulary":
        seen = set()
        for sent in sentences:
            seen.update(sent)
        seen -= {BOS, EOS, UNK}
        return cls(sorted(seen))

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        toks = [t for t in Path(path).read_text("utf-8").split("\n") if t]
        if toks[:3] != [BOS, EOS, UNK]:
            raise ValueError(f"{path}: vocabulary must start with {BOS}, {EOS}, {UNK}")
        return cls(toks[3:])


class TokenScorer(abc.ABC):
    """Autoregressive next-token distribution over ``vocab``.

    ``score_next`` returns natural-log probabilities for every vocabulary id
    given a prefix of generated ids (BOS is implicit, not part of the prefix).
    Implementations must be deterministic and safe to share read-only.
    """

    vocab: Vocabulary

    @abc.abstractmethod
    def score_next(self, prefix: Sequence[int]) -> np.ndarray:
        ...


class CountingScorer(TokenScorer):
    """Wraps a scorer and counts ``score_next`` calls."""

    def __init__(self, inner: TokenScorer):
        self.inner = inner
        self.vocab = inner.vocab
        self.calls = 0

    def score_next(self, prefix):
        self.calls += 1
        return self.inner.score_next(prefix)


_MODEL_MAGIC = b"CGNGRAM\x00"
_MODEL_VERSION = 1


class NGramModel(TokenScorer):
    """Add-alpha smoothed n-gram model with back-off to shorter histories.

    P(w | h) = (c(h, w) + alpha) / (c(h) + alpha * |V|), using the longest
    suffix of the padded history whose count is non-zero; the empty history
    (unigram) is always usable.
    """

    def __init__(self, vocab: Vocabulary, order: int = 2, alpha: float = 1.0):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        self.vocab = vocab
        self.order = order
        self.alpha = float(alpha)
        # counts[h] -> Counter of next ids, for every history length 0..order-1
        self.counts: dict[tuple[int, ...], Counter] = defaultdict(Counter)
        self.totals: Counter = Counter()
        self._cache: dict[tuple[int, ...], np.ndarray] = {}

    def _pad(self, ids: Sequence[int]) -> list[int]:
        return [self.vocab.bos] * (self.order - 1) + list(ids)

    def observe(self, ids: Sequence[int]) -> None:
        seq = self._pad(ids) + [self.vocab.eos]
        start = self.order - 1
        for i in range(start, len(seq)):
            w = seq[i]
            for k in range(self.order):
                h = tuple(seq[i - k:i])
                self.counts[h][w] += 1
                self.totals[h] += 1
        self._cache.clear()

    def history(self, prefix: Sequence[int]) -> tuple[int, ...]:
        """The history actually used for ``prefix`` after back-off."""
        if self.order == 1:
            return ()
        padded = self._pad(prefix)
        for k in range(self.order - 1, 0, -1):
            h = tuple(padded[len(padded) - k:])
            if self.totals.get(h, 0) > 0:
                return h
        return ()

    def prob(self, word: int, prefix: Sequence[int]) -> float:
        h = self.history(prefix)
        return (self.counts[h][word] + self.alpha) / (self.totals[h] + self.alpha * len(self.vocab))

    def score_next(self, prefix: Sequence[int]) -> np.ndarray:
        h = self.history(prefix)
        hit = self._cache.get(h)
        if hit is not None:
            return hit
        V = len(self.vocab)
        row = np.full(V, self.alpha, dtype=np.float64)
        for w, c in self.counts.get(h, {}).items():
            row[w] += c
        out = np.log(row) - math.log(self.totals.get(h, 0) + self.alpha * V)
        out.setflags(write=False)
        self._cache[h] = out
        return out

    def save(self, path: str | Path) -> None:
        out = bytearray(_MODEL_MAGIC)
        out += struct.pack("<HHdI", _MODEL_VERSION, self.order, self.alpha, len(self.vocab))
        for tok in self.vocab.tokens:
            raw = tok.encode("utf-8")
            out += struct.pack("<H", len(raw)) + raw
        entries = sorted(
            (h, w, c) for h, ctr in self.counts.items() for w, c in ctr.items()
        )
        out += struct.pack("<I", len(entries))
        for h, w, c in entries:
            out += struct.pack("<B", len(h))
            out += struct.pack(f"<{len(h)}I", *h)
            out += struct.pack("<IQ", w, c)
        Path(path).write_bytes(bytes(out))

    @classmethod
    def load(cls, path: str | Path) -> "NGramModel":
        data = Path(path).read_bytes()
        if not data.startswith(_MODEL_MAGIC):
            raise ValueError(f"{path}: not an n-gram model file")
        pos = len(_MODEL_MAGIC)
        version, order, alpha, nvocab = struct.unpack_from("<HHdI", data, pos)
        if version != _MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        pos += struct.calcsize("<HHdI")
        toks = []
        for _ in range(nvocab):
            (ln,) = struct.unpack_from("<H", data, pos)
            pos += 2
            toks.append(data[pos:pos + ln].decode("utf-8"))
            pos += ln
        model = cls(Vocabulary(toks[3:]), order, alpha)
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        for _ in range(n):
            (k,) = struct.unpack_from("<B", data, pos)
            pos += 1
            h = struct.unpack_from(f"<{k}I", data, pos)
            pos += 4 * k
            w, c = struct.unpack_from("<IQ", data, pos)
            pos += 12
            model.counts[tuple(h)][w] = c
            model.totals[tuple(h)] += c
        return model


def train_ngram(corpus: Iterable[Sequence[str]], order: int = 2, alpha: float = 1.0,
                vocab: Vocabulary | None = None) -> NGramModel:
    """Fit counts on tokenized sentences; the vocabulary defaults to the corpus types."""
    sentences = [list(s) for s in corpus]
    vocab = vocab or Vocabulary.build(sentences)
    model = NGramModel(vocab, order, alpha)
    for sent in sentences:
        model.observe(vocab.encode(sent))
    return model


def _positions(corpus: Iterable[Sequence[int]], eos: int):
    n_sent = 0
    for ids in corpus:
        n_sent += 1
        seq = list(ids) + [eos]
        for i, w in enumerate(seq):
            yield seq[:i], w
    if n_sent == 0:
        raise ValueError("corpus is empty")


def perplexity(model: TokenScorer, corpus: Iterable[Sequence[int]]) -> float:
    """exp of the mean negative log-probability over every token and each EOS."""
    total, n = 0.0, 0
    for prefix, w in _positions(corpus, model.vocab.eos):
        total += float(model.score_next(prefix)[w])
        n += 1
    return math.exp(-total / n)


def word_accuracy(model: TokenScorer, corpus: Iterable[Sequence[int]]) -> float:
    """Fraction of positions where the argmax prediction (lowest id on ties) is the reference."""
    hits, n = 0, 0
    for prefix, w in _positions(corpus, model.vocab.eos):
        hits += int(np.argmax(model.score_next(prefix)) == w)
        n += 1
    return hits / n


def margin_ranking_loss(pos_scores: Sequence[float], neg_scores: Sequence[float],
                        m: float = 0.3, lam: float = 1e-5, param_norm_sq: float = 0.0) -> float:
    """Sum of hinge terms max(0, m - pos + neg) plus (lam / 2) * ||theta||^2.

    The parameter norm is supplied by the caller; this module owns no model
    parameters.
    """
    if len(pos_scores) != len(neg_scores):
        raise ValueError(f"score lists differ in length: {len(pos_scores)} vs {len(neg_scores)}")
    if m <= 0:
        raise ValueError("margin must be > 0")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    hinge = math.fsum(max(0.0, m - p + q) for p, q in zip(pos_scores, neg_scores))
    return hinge + lam / 2.0 * param_norm_sq
