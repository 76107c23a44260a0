"""Pattern-based mining of sentential (cause, effect) pairs.

A sentence is matched against the causal pattern inventory; when exactly one
pattern fires, the text left of it and the text right of it become the two
arguments, ordered by the pattern's category (EPC: effect-pattern-cause,
CPE: cause-pattern-effect).  Candidates then go through the length,
negation and passive-voice filters, and the surviving pairs are
deduplicated on normalized text.
"""

from __future__ import annotations

import csv
import enum
import gzip
import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .text import Token, is_punct, normalize, split_sentences, tokenize

GAP = "..."
MAX_GAP_TOKENS = 12

NEGATION_CUES = frozenset({"not", "n't", "never", "no", "cannot"})
BE_FORMS = frozenset({"be", "am", "is", "are", "was", "were", "been", "being"})
AUXILIARIES = BE_FORMS | frozenset(
    {"do", "does", "did", "have", "has", "had", "will", "would", "shall", "should",
     "can", "could", "may", "might", "must", "ca", "wo"}
)
# -ed/-en words that are not participles
_NOT_PARTICIPLES = frozenset(
    {"when", "then", "than", "often", "even", "seven", "eleven", "ten", "open", "oven",
     "children", "kitchen", "garden", "women", "men", "between", "listen", "happen",
     "hundred", "red", "bed", "need", "indeed", "speed", "seed", "feed", "wed",
     "sacred", "naked", "wicked", "wretched", "token", "golden", "wooden", "sudden",
     "heaven", "citizen", "chicken", "again"}
)


class Category(str, enum.Enum):
    EPC = "EPC"
    CPE = "CPE"


class SemanticClass(str, enum.Enum):
    CAUSE = "CAUSE"
    EXPLANATION = "EXPLANATION"
    CONDITION = "CONDITION"
    PURPOSE = "PURPOSE"
    PREVENTION = "PREVENTION"


@dataclass(frozen=True)
class CausalPattern:
    surface: str
    category: Category
    semantic_class: SemanticClass
    id: str

    def __post_init__(self):
        if not self.surface or self.surface != self.surface.strip():
            raise ValueError(f"bad pattern surface {self.surface!r}")

    @property
    def pieces(self) -> tuple[tuple[str, ...], ...]:
        """Lowercased token pieces; gapped patterns ("if ... then") have two."""
        return _pieces(self.surface)

    @property
    def length(self) -> int:
        return sum(len(p) for p in self.pieces)


@lru_cache(maxsize=None)
def _pieces(surface: str) -> tuple[tuple[str, ...], ...]:
    parts = [p.strip() for p in surface.lower().split(GAP)]
    out = tuple(tuple(t.lower for t in tokenize(p)) for p in parts)
    if any(not p for p in out):
        raise ValueError(f"pattern {surface!r} has an empty piece")
    return out


def load_patterns(path: str | Path | None = None) -> list[CausalPattern]:
    """Read a (surface, category, semantic_class, id) TSV; default is the shipped inventory."""
    if path is None:
        text = resources.files("causalgen.data").joinpath("patterns.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    patterns = []
    seen = set()
    for lineno, row in enumerate(csv.reader(text.splitlines(), delimiter="\t"), 1):
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 4:
            raise ValueError(f"pattern file line {lineno}: expected 4 columns")
        surface, cat, klass, pid = row
        if pid in seen:
            raise ValueError(f"pattern file line {lineno}: duplicate id {pid!r}")
        seen.add(pid)
        patterns.append(CausalPattern(surface, Category(cat), SemanticClass(klass), pid))
    return patterns


@lru_cache(maxsize=None)
def _participle_lexicon() -> frozenset[str]:
    raw = resources.files("causalgen.data").joinpath("participles.txt").read_text("utf-8")
    return frozenset(w.strip() for w in raw.splitlines() if w.strip() and not w.startswith("#"))


@dataclass
class MinerConfig:
    patterns: list[CausalPattern] = field(default_factory=load_patterns)
    min_arg_tokens: int = 2
    negation_window: int = 3
    enable_passive_filter: bool = True
    enable_negation_filter: bool = True

    def __post_init__(self):
        if self.min_arg_tokens < 1:
            raise ValueError("min_arg_tokens must be >= 1")
        if self.negation_window < 0:
            raise ValueError("negation_window must be >= 0")


@dataclass(frozen=True)
class CausalPair:
    cause: str
    effect: str
    pattern_id: str
    direction: Category
    source_sentence: str
    source_offset: int = 0

    def key(self) -> tuple[str, str]:
        return normalize(self.cause), normalize(self.effect)

    def to_json(self) -> dict:
        return {
            "cause": self.cause,
            "effect": self.effect,
            "pattern": self.pattern_id,
            "direction": self.direction.value,
            "sentence": self.source_sentence,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CausalPair":
        return cls(obj["cause"], obj["effect"], obj.get("pattern", ""),
                   Category(obj.get("direction", "EPC")), obj.get("sentence", ""))


@dataclass(frozen=True)
class Span:
    start: int  # token index, inclusive
    end: int  # token index, exclusive

    def __len__(self) -> int:
        return max(0, self.end - self.start)

    def text(self, tokens: list[Token], sentence: str) -> str:
        if not len(self):
            return ""
        return sentence[tokens[self.start].start:tokens[self.end - 1].end]


@dataclass(frozen=True)
class PatternMatch:
    pattern: CausalPattern
    left: Span
    right: Span
    # token positions occupied by the pattern itself
    positions: tuple[int, ...]


def _find_piece(lowered: list[str], piece: tuple[str, ...], start: int) -> int:
    n = len(piece)
    for i in range(start, len(lowered) - n + 1):
        if tuple(lowered[i:i + n]) == piece:
            return i
    return -1


def _occurrences(lowered: list[str], pattern: CausalPattern):
    pieces = pattern.pieces
    first = pieces[0]
    i = _find_piece(lowered, first, 0)
    while i >= 0:
        if len(pieces) == 1:
            yield tuple(range(i, i + len(first)))
        else:
            j = i + len(first)
            k = _find_piece(lowered, pieces[1], j + 1)
            if k >= 0 and k - j <= MAX_GAP_TOKENS:
                yield tuple(range(i, j)) + tuple(range(k, k + len(pieces[1])))
        i = _find_piece(lowered, first, i + 1)


def _trim(span: Span, lowered: list[str]) -> Span:
    s, e = span.start, span.end
    while s < e and is_punct(lowered[s]):
        s += 1
    while e > s and is_punct(lowered[e - 1]):
        e -= 1
    return Span(s, e)


def match_pattern(sentence: list[Token] | str, config: MinerConfig) -> PatternMatch | None:
    """Locate the single causal pattern in a sentence and its argument spans.

    Occurrences nested in or overlapping a longer occurrence are discarded
    (``because of`` beats ``because``).  If the survivors come from two or
    more distinct patterns the sentence is ambiguous and nothing is returned.
    """
    tokens = tokenize(sentence) if isinstance(sentence, str) else sentence
    lowered = [t.lower for t in tokens]
    occs = []
    for pat in config.patterns:
        for pos in _occurrences(lowered, pat):
            occs.append((pat, pos))
    if not occs:
        return None
    # longest first; ties: earliest start, then id
    occs.sort(key=lambda o: (-len(o[1]), o[1][0], o[0].id))
    kept: list = []
    covered: set[int] = set()
    for pat, pos in occs:
        lo, hi = pos[0], pos[-1]
        if any(lo <= c <= hi for c in covered):
            continue
        kept.append((pat, pos))
        covered.update(range(lo, hi + 1))
    if len({p.id for p, _ in kept}) != 1:
        return None
    pat, pos = min(kept, key=lambda o: o[1][0])
    left = Span(0, pos[0])
    right = Span(pos[-1] + 1, len(tokens))
    if len(pat.pieces) > 1 and not _trim(left, lowered):
        # "if X then Y": nothing precedes the pattern, so the gap is the left argument
        gap_start = pos[len(pat.pieces[0]) - 1] + 1
        gap_end = pos[len(pat.pieces[0])]
        left = Span(gap_start, gap_end)
    return PatternMatch(pat, _trim(left, lowered), _trim(right, lowered), pos)


class Reject(str, enum.Enum):
    AMBIGUOUS = "ambiguous"
    SHORT = "short"
    NEGATION = "negation"
    PASSIVE = "passive"


def _looks_participle(word: str) -> bool:
    if word in _participle_lexicon():
        return True
    if word in _NOT_PARTICIPLES or len(word) < 4:
        return False
    return word.endswith(("ed", "en")) and word.isalpha()


def _main_clause(words: list[str]) -> list[str]:
    for i, w in enumerate(words):
        if w in {",", ";", ":"}:
            return words[:i]
    return words


def _is_passive(words: list[str]) -> bool:
    clause = _main_clause(words)
    for i, w in enumerate(clause):
        if w in BE_FORMS:
            if any(_looks_participle(x) for x in clause[i + 1:i + 3]):
                return True
    return False


def _argument_negated(words: list[str]) -> bool:
    if any(w in NEGATION_CUES for w in words[:3]):
        return True
    for i, w in enumerate(words[:-1]):
        if w in AUXILIARIES:
            return words[i + 1] in NEGATION_CUES
    return False


@dataclass
class Candidate:
    """A matched sentence before filtering."""

    pair: CausalPair
    cause_words: list[str]
    effect_words: list[str]
    preceding: list[str]  # words immediately before the pattern


def build_candidate(sentence: str, tokens: list[Token], m: PatternMatch,
                    offset: int = 0) -> Candidate:
    lowered = [t.lower for t in tokens]
    left_words = lowered[m.left.start:m.left.end]
    right_words = lowered[m.right.start:m.right.end]
    left_text = m.left.text(tokens, sentence)
    right_text = m.right.text(tokens, sentence)
    if m.pattern.category is Category.EPC:
        cause, effect = right_text, left_text
        cause_w, effect_w = right_words, left_words
    else:
        cause, effect = left_text, right_text
        cause_w, effect_w = left_words, right_words
    first = m.positions[0]
    pair = CausalPair(cause, effect, m.pattern.id, m.pattern.category, sentence, offset)
    return Candidate(pair, cause_w, effect_w, lowered[:first])


def apply_filters(candidate: Candidate, config: MinerConfig) -> tuple[bool, Reject | None]:
    """Accept/reject a candidate; the first failing filter names the reason."""
    if (len([w for w in candidate.cause_words if not is_punct(w)]) < config.min_arg_tokens
            or len([w for w in candidate.effect_words if not is_punct(w)]) < config.min_arg_tokens):
        return False, Reject.SHORT
    if config.enable_negation_filter:
        window = candidate.preceding[-config.negation_window:] if config.negation_window else []
        if (any(w in NEGATION_CUES for w in window)
                or _argument_negated(candidate.cause_words)
                or _argument_negated(candidate.effect_words)):
            return False, Reject.NEGATION
    if config.enable_passive_filter:
        if _is_passive(candidate.cause_words) or _is_passive(candidate.effect_words):
            return False, Reject.PASSIVE
    return True, None


@dataclass
class MiningStats:
    documents: int = 0
    sentences: int = 0
    malformed: int = 0
    accepted: int = 0
    duplicates: int = 0
    per_pattern: Counter = field(default_factory=Counter)
    rejects: Counter = field(default_factory=Counter)
    directions: Counter = field(default_factory=Counter)

    def merge(self, other: "MiningStats") -> None:
        self.documents += other.documents
        self.sentences += other.sentences
        self.malformed += other.malformed
        self.accepted += other.accepted
        self.duplicates += other.duplicates
        self.per_pattern.update(other.per_pattern)
        self.rejects.update(other.rejects)
        self.directions.update(other.directions)

    def to_json(self) -> dict:
        return {
            "documents": self.documents,
            "sentences": self.sentences,
            "malformed": self.malformed,
            "accepted": self.accepted,
            "duplicates": self.duplicates,
            "per_pattern": dict(sorted(self.per_pattern.items())),
            "rejects": {r.value: self.rejects.get(r.value, 0) for r in Reject},
            "EPC": self.directions.get("EPC", 0),
            "CPE": self.directions.get("CPE", 0),
        }


def _any_pattern(lowered: list[str], config: MinerConfig) -> bool:
    return any(next(_occurrences(lowered, pat), None) is not None for pat in config.patterns)


def mine_document(doc: str | bytes, config: MinerConfig) -> tuple[list[CausalPair], MiningStats]:
    """Mine one document (not deduplicated)."""
    stats = MiningStats(documents=1)
    if isinstance(doc, bytes):
        try:
            doc = doc.decode("utf-8")
        except UnicodeDecodeError:
            stats.malformed += 1
            return [], stats
    pairs = []
    search_from = 0
    for sentence in split_sentences(doc):
        stats.sentences += 1
        char_off = doc.find(sentence, search_from)
        if char_off >= 0:
            search_from = char_off + len(sentence)
        byte_off = len(doc[:max(char_off, 0)].encode("utf-8"))
        tokens = tokenize(sentence)
        m = match_pattern(tokens, config)
        if m is None:
            # patterns present but no single winner
            if _any_pattern([t.lower for t in tokens], config):
                stats.rejects[Reject.AMBIGUOUS.value] += 1
            continue
        cand = build_candidate(sentence, tokens, m, byte_off)
        ok, reason = apply_filters(cand, config)
        if not ok:
            stats.rejects[reason.value] += 1
            continue
        pairs.append(cand.pair)
    return pairs, stats


def _mine_batch(args) -> list[tuple[list[CausalPair], MiningStats]]:
    docs, config = args
    return [mine_document(d, config) for d in docs]


def _batched(items: Iterable, size: int) -> Iterator[list]:
    batch = []
    for item in items:
        batch.append(item)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


class Miner:
    """Streaming miner with a final dedup merge.

    Documents are mined in input order (in batches across worker processes
    when ``threads > 1``); the merge keeps the first occurrence of each
    normalized (cause, effect) pair, so output is identical for any thread
    count.
    """

    def __init__(self, config: MinerConfig | None = None, threads: int = 1, batch_size: int = 256):
        self.config = config or MinerConfig()
        self.threads = max(1, threads)
        self.batch_size = batch_size
        self.stats = MiningStats()

    def _results(self, documents: Iterable[str | bytes]):
        if self.threads == 1:
            for doc in documents:
                yield mine_document(doc, self.config)
            return
        batches = ((b, self.config) for b in _batched(documents, self.batch_size))
        with ProcessPoolExecutor(max_workers=self.threads) as pool:
            for batch in pool.map(_mine_batch, batches):
                yield from batch

    def mine(self, documents: Iterable[str | bytes]) -> Iterator[CausalPair]:
        seen: set[tuple[str, str]] = set()
        for pairs, stats in self._results(documents):
            self.stats.merge(stats)
            for pair in pairs:
                key = pair.key()
                if key in seen:
                    self.stats.duplicates += 1
                    continue
                seen.add(key)
                self.stats.accepted += 1
                self.stats.per_pattern[pair.pattern_id] += 1
                self.stats.directions[pair.direction.value] += 1
                yield pair


def mine_corpus(documents: Iterable[str | bytes], config: MinerConfig | None = None,
                threads: int = 1) -> tuple[list[CausalPair], MiningStats]:
    miner = Miner(config, threads=threads)
    pairs = list(miner.mine(documents))
    return pairs, miner.stats


def read_documents(path: str | Path) -> Iterator[bytes]:
    """Yield raw lines (one document each) from a plain or gzip text file."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        for line in fh:
            line = line.rstrip(b"\r\n")
            if line.strip():
                yield line


def write_jsonl(pairs: Iterable[CausalPair], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_json(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[CausalPair]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield CausalPair.from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad causal-pair record ({exc})") from exc
