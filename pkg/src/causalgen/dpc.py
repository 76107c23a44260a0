"""Beam search with disjunctive positive constraints.

Every constraint sequence of every disjunctive set lives on one shared trie.
A hypothesis tracks trie pointers (root always re-seeded) and the set ids it
has satisfied.  When a generated token completes any sequence of set ``p``,
all of ``p``'s sequences are pruned from that hypothesis's trie, so the
remaining sequences of the same set stop attracting forced tokens.

Beam slots are split across banks, one bank per number of satisfied sets,
so hypotheses that have made constraint progress are never starved by
higher-scoring unconstrained ones.

Also here: plain N-best beam search, a conjunctive positive-constraint
decoder (the non-disjunctive baseline) and ancestral sampling.
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .scoring import TokenScorer, Vocabulary
from .text import words


@dataclass(frozen=True)
class DisjunctiveConstraintSet:
    """Token sequences of which at least one must appear in the output."""

    set_id: int
    sequences: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seqs = []
        for seq in self.sequences:
            seq = tuple(int(t) for t in seq)
            if not seq:
                raise ValueError(f"constraint set {self.set_id} contains an empty sequence")
            if seq not in seqs:
                seqs.append(seq)
        if not seqs:
            raise ValueError(f"constraint set {self.set_id} is empty")
        object.__setattr__(self, "sequences", tuple(seqs))


class _Node:
    __slots__ = ("children", "terminal", "count")

    def __init__(self):
        self.children: dict[int, _Node] = {}
        self.terminal: set[int] = set()
        # live (set, sequence) memberships routed through the edge into this node
        self.count = 0

    def copy(self) -> "_Node":
        n = _Node()
        n.terminal = set(self.terminal)
        n.count = self.count
        n.children = {t: c.copy() for t, c in self.children.items()}
        return n


class ConstraintTrie:
    """Shared trie over all constraint sequences with per-edge reference counts.

    A sequence listed in two sets is one path whose terminal node carries
    both set ids.  :meth:`prune` removes one set's memberships and deletes
    exactly the edges whose count drops to zero.
    """

    def __init__(self):
        self.root = _Node()
        self.sets: dict[int, tuple[tuple[int, ...], ...]] = {}
        self.pruned_sets: set[int] = set()

    @classmethod
    def build(cls, sets: Iterable[DisjunctiveConstraintSet]) -> "ConstraintTrie":
        trie = cls()
        for s in sets:
            if s.set_id in trie.sets:
                raise ValueError(f"duplicate set id {s.set_id}")
            trie.sets[s.set_id] = s.sequences
            for seq in s.sequences:
                node = trie.root
                for tok in seq:
                    node = node.children.setdefault(tok, _Node())
                    node.count += 1
                node.terminal.add(s.set_id)
        return trie

    def copy(self) -> "ConstraintTrie":
        t = ConstraintTrie()
        t.root = self.root.copy()
        t.sets = self.sets
        t.pruned_sets = set(self.pruned_sets)
        return t

    def prune(self, set_id: int) -> None:
        if set_id in self.pruned_sets:
            return
        self.pruned_sets.add(set_id)
        for seq in self.sets[set_id]:
            path = [self.root]
            for tok in seq:
                path.append(path[-1].children[tok])
            path[-1].terminal.discard(set_id)
            for node in path[1:]:
                node.count -= 1
            for depth, node in enumerate(path[1:]):
                if node.count == 0:
                    del path[depth].children[seq[depth]]
                    break

    def pruned(self, set_ids: Iterable[int]) -> "ConstraintTrie":
        t = self.copy()
        for sid in sorted(set_ids):
            t.prune(sid)
        return t

    def node(self, path: Sequence[int]) -> _Node | None:
        node = self.root
        for tok in path:
            node = node.children.get(tok)
            if node is None:
                return None
        return node

    def paths(self) -> list[tuple[tuple[int, ...], frozenset[int]]]:
        """Every root-to-terminal path with its live owning set ids."""
        out = []
        stack = [((), self.root)]
        while stack:
            path, node = stack.pop()
            if node.terminal:
                out.append((path, frozenset(node.terminal)))
            for tok, child in node.children.items():
                stack.append((path + (tok,), child))
        return sorted(out)

    def live_memberships(self) -> int:
        """Number of live (set, sequence) memberships, counted from terminal markers."""
        return sum(len(owners) for _, owners in self.paths())

    @property
    def live_sets(self) -> set[int]:
        return set(self.sets) - self.pruned_sets

    def __len__(self) -> int:
        """Node count, root included."""
        n, stack = 0, [self.root]
        while stack:
            node = stack.pop()
            n += 1
            stack.extend(node.children.values())
        return n


def build_trie(sets: Iterable[DisjunctiveConstraintSet]) -> ConstraintTrie:
    return ConstraintTrie.build(sets)


class _TrieFamily:
    """Pruned copies of one search's trie, memoized by satisfied-set collection."""

    def __init__(self, base: ConstraintTrie):
        self.base = base
        self._tries: dict[frozenset[int], ConstraintTrie] = {frozenset(): base}

    def get(self, satisfied: frozenset[int]) -> ConstraintTrie:
        t = self._tries.get(satisfied)
        if t is None:
            t = self.base.pruned(satisfied)
            self._tries[satisfied] = t
        return t


@dataclass(frozen=True, eq=False)
class ConstraintState:
    trie: ConstraintTrie
    pointers: frozenset[tuple[int, ...]]
    satisfied: frozenset[int]
    total: int
    family: _TrieFamily | None = field(default=None, repr=False)

    @property
    def unsatisfied(self) -> int:
        return self.total - len(self.satisfied)

    @property
    def depths(self) -> dict[tuple[int, ...], int]:
        return {p: len(p) for p in self.pointers}

    @property
    def bank(self) -> int:
        return len(self.satisfied)

    def forced_tokens(self) -> set[int]:
        """Tokens that extend at least one live pointer."""
        out: set[int] = set()
        for p in self.pointers:
            node = self.trie.node(p)
            if node is not None:
                out.update(node.children)
        return out

    def key(self):
        return self.satisfied, self.pointers


def initial_state(trie: ConstraintTrie) -> ConstraintState:
    base = trie.copy()
    family = _TrieFamily(base)
    total = len(trie.sets)
    satisfied = frozenset(trie.pruned_sets)
    return ConstraintState(family.get(satisfied) if satisfied else base,
                           frozenset({()}), satisfied, total, family)


def advance_state(state: ConstraintState, token: int) -> ConstraintState:
    """Follow ``token`` from every pointer; prune whole sets that get completed."""
    trie = state.trie
    pointers = {()}
    reached: set[int] = set()
    for p in state.pointers:
        node = trie.node(p)
        if node is None:
            continue
        child = node.children.get(token)
        if child is None:
            continue
        pointers.add(p + (token,))
        reached |= child.terminal
    satisfied = state.satisfied
    newly = reached - satisfied
    if newly:
        satisfied = satisfied | newly
        if state.family is not None:
            trie = state.family.get(satisfied)
        else:
            trie = trie.pruned(newly)
        pointers = {p for p in pointers if trie.node(p) is not None} | {()}
    return ConstraintState(trie, frozenset(pointers), satisfied, state.total, state.family)


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    logprob: float
    state: Any = None
    finished: bool = False
    satisfied: bool = True

    @property
    def nll(self) -> float:
        return -self.logprob

    def text(self, vocab: Vocabulary) -> str:
        return " ".join(vocab.decode(self.tokens))

    def to_json(self, vocab: Vocabulary) -> dict:
        return {
            "text": self.text(vocab),
            "tokens": vocab.decode(self.tokens, strip_eos=False),
            "logprob": self.logprob,
            "satisfied": self.satisfied,
        }


def rank_key(h: Hypothesis):
    return (not h.satisfied, -h.logprob, h.tokens)


def _banned_ids(vocab: Vocabulary, banned: Iterable[int] | None) -> set[int]:
    return {vocab.bos, vocab.unk} if banned is None else set(banned)


def _top_tokens(scores: np.ndarray, k: int, mask: set[int]) -> list[int]:
    order = np.argsort(-scores, kind="stable")
    out = []
    for t in order:
        t = int(t)
        if t in mask or not np.isfinite(scores[t]):
            continue
        out.append(t)
        if len(out) == k:
            break
    return out


def allocate_banks(cands: list, beam_size: int, bank_of: Callable, sort_key: Callable) -> list:
    """Select up to ``beam_size`` candidates split evenly across banks.

    Remainder slots go to higher banks; slots a bank cannot fill are handed
    on to other banks, highest first.  If there are more non-empty banks than
    slots, the highest banks win one slot each.
    """
    banks: dict[int, list] = defaultdict(list)
    for c in cands:
        banks[bank_of(c)].append(c)
    if not banks:
        return []
    order = sorted(banks, reverse=True)
    for b in order:
        banks[b].sort(key=sort_key)
    if len(order) >= beam_size:
        return [banks[b][0] for b in order[:beam_size]]
    base, rem = divmod(beam_size, len(order))
    take = {b: min(len(banks[b]), base + (1 if i < rem else 0)) for i, b in enumerate(order)}
    spare = beam_size - sum(take.values())
    while spare > 0:
        moved = False
        for b in order:
            if spare and take[b] < len(banks[b]):
                extra = min(spare, len(banks[b]) - take[b])
                take[b] += extra
                spare -= extra
                moved = True
        if not moved:
            break
    return [c for b in order for c in banks[b][:take[b]]]


class _Constraints:
    """Adapter giving the beam loop a uniform view of constraint tracking."""

    def initial(self): ...
    def advance(self, state, token: int): ...
    def forced(self, state) -> set[int]: ...
    def bank(self, state) -> int: ...
    def done(self, state) -> bool: ...


class _DisjunctiveTracker(_Constraints):
    def __init__(self, trie: ConstraintTrie):
        self.trie = trie
        self._memo: dict = {}

    def initial(self):
        return initial_state(self.trie)

    def advance(self, state, token):
        key = (state.key(), token)
        hit = self._memo.get(key)
        if hit is None:
            hit = advance_state(state, token)
            self._memo[key] = hit
        return hit

    def forced(self, state):
        return state.forced_tokens()

    def bank(self, state):
        return len(state.satisfied)

    def done(self, state):
        return state.unsatisfied == 0


def _beam_search(scorer: TokenScorer, tracker: _Constraints, beam_size: int, k_max: int,
                 banned: Iterable[int] | None, select: Callable) -> list[Hypothesis]:
    if beam_size < 1 or k_max < 1:
        raise ValueError("beam_size and k_max must be >= 1")
    vocab = scorer.vocab
    eos = vocab.eos
    mask = _banned_ids(vocab, banned)
    start = tracker.initial()
    beam = [Hypothesis((), 0.0, start, False, tracker.done(start))]
    finished: list[Hypothesis] = []
    # hypotheses cut off by k_max with unmet sets; returned only if nothing satisfies
    unmet: list[Hypothesis] = []
    for _ in range(k_max):
        cands = []
        for h in beam:
            scores = scorer.score_next(h.tokens)
            step_mask = mask if h.satisfied else mask | {eos}
            tokens = set(_top_tokens(scores, beam_size, step_mask))
            tokens.update(t for t in tracker.forced(h.state) if t not in step_mask)
            for t in sorted(tokens):
                st = tracker.advance(h.state, t)
                seq = h.tokens + (t,)
                lp = h.logprob + float(scores[t])
                fin = t == eos or len(seq) == k_max
                if fin and not tracker.done(st):
                    unmet.append(Hypothesis(seq, lp, st, True, False))
                    continue
                # (bank, -logprob, tokens, state, finished)
                cands.append((tracker.bank(st), -lp, seq, st, fin))
        unmet = sorted(unmet, key=rank_key)[:beam_size]
        chosen = select(cands, beam_size)
        beam = []
        for bank, neg_lp, seq, st, fin in chosen:
            h = Hypothesis(seq, -neg_lp, st, fin, tracker.done(st))
            (finished if fin else beam).append(h)
        if not beam:
            break
    pool = finished if finished else unmet
    return sorted(pool, key=rank_key)[:beam_size]


def _bank_select(cands, beam_size):
    return allocate_banks(cands, beam_size, bank_of=lambda c: c[0], sort_key=lambda c: (c[1], c[2]))


def constrained_beam_search(scorer: TokenScorer,
                            constraints: Iterable[DisjunctiveConstraintSet] | ConstraintTrie,
                            beam_size: int = 5, k_max: int = 20,
                            banned: Iterable[int] | None = None) -> list[Hypothesis]:
    """Decode with disjunctive positive constraints.

    Returns up to ``beam_size`` finished hypotheses ranked satisfied-first,
    then by log-probability, then by token ids.  Hypotheses that end with
    unmet sets (only possible by hitting ``k_max``) are returned, flagged
    ``satisfied=False``, only when no hypothesis satisfies every set.  EOS is
    never emitted while a set is unmet.  ``banned`` ids are never generated
    (default: BOS and UNK).
    """
    trie = constraints if isinstance(constraints, ConstraintTrie) else build_trie(constraints)
    return _beam_search(scorer, _DisjunctiveTracker(trie), beam_size, k_max, banned, _bank_select)


class _Unconstrained(_Constraints):
    def initial(self):
        return None

    def advance(self, state, token):
        return None

    def forced(self, state):
        return ()

    def bank(self, state):
        return 0

    def done(self, state):
        return True


def _plain_select(cands, beam_size):
    return sorted(cands, key=lambda c: (c[1], c[2]))[:beam_size]


def nbest_decode(scorer: TokenScorer, beam_size: int = 5, k_max: int = 20,
                 banned: Iterable[int] | None = None) -> list[Hypothesis]:
    """Standard beam search: every step keeps the ``beam_size`` best expansions."""
    return _beam_search(scorer, _Unconstrained(), beam_size, k_max, banned, _plain_select)


@dataclass(frozen=True)
class _ConjunctiveState:
    met: tuple[bool, ...]
    progress: tuple[int, int] | None  # (constraint index, tokens matched so far)


class _ConjunctiveTracker(_Constraints):
    """Every phrase must appear; one phrase may be in progress at a time."""

    def __init__(self, phrases: Sequence[Sequence[int]]):
        self.phrases = [tuple(p) for p in phrases]
        if any(not p for p in self.phrases):
            raise ValueError("empty constraint phrase")

    def initial(self):
        return _ConjunctiveState(tuple(False for _ in self.phrases), None)

    def advance(self, state, token):
        met = list(state.met)
        if state.progress is not None:
            i, j = state.progress
            if self.phrases[i][j] == token:
                j += 1
                if j == len(self.phrases[i]):
                    met[i] = True
                    return _ConjunctiveState(tuple(met), None)
                return _ConjunctiveState(tuple(met), (i, j))
            # abandoned partial phrase; the token may still start another one
        for i, phrase in enumerate(self.phrases):
            if not met[i] and phrase[0] == token:
                if len(phrase) == 1:
                    met[i] = True
                    return _ConjunctiveState(tuple(met), None)
                return _ConjunctiveState(tuple(met), (i, 1))
        return _ConjunctiveState(tuple(met), None)

    def forced(self, state):
        if state.progress is not None:
            i, j = state.progress
            return {self.phrases[i][j]}
        return {p[0] for p, m in zip(self.phrases, state.met) if not m}

    def bank(self, state):
        n = sum(len(p) for p, m in zip(self.phrases, state.met) if m)
        if state.progress is not None:
            n += state.progress[1]
        return n

    def done(self, state):
        return all(state.met)


def conjunctive_beam_search(scorer: TokenScorer, phrases: Sequence[Sequence[int]],
                            beam_size: int = 5, k_max: int = 20,
                            banned: Iterable[int] | None = None) -> list[Hypothesis]:
    """Positive-constraint decoding where every phrase must appear.

    Banks count constraint tokens met, as in grid/dynamic-beam-allocation
    decoding; this is the baseline the disjunctive search generalizes.
    """
    return _beam_search(scorer, _ConjunctiveTracker(phrases), beam_size, k_max, banned,
                        _bank_select)


def enumerate_conjunctive(scorer: TokenScorer, sets: Sequence[DisjunctiveConstraintSet],
                          beam_size: int = 5, k_max: int = 20,
                          banned: Iterable[int] | None = None) -> list[Hypothesis]:
    """Emulate disjunctive constraints by one conjunctive pass per variant combination.

    Runs prod(len(set.sequences)) searches and merges their results.
    """
    merged: dict[tuple[int, ...], Hypothesis] = {}
    for combo in itertools.product(*(s.sequences for s in sets)):
        for h in conjunctive_beam_search(scorer, combo, beam_size, k_max, banned):
            if h.tokens not in merged:
                merged[h.tokens] = h
    hyps = list(merged.values())
    good = [h for h in hyps if h.satisfied]
    return sorted(good or hyps, key=rank_key)[:beam_size]


def random_sampling_decode(scorer: TokenScorer, n_samples: int, k_max: int, seed: int,
                           banned: Iterable[int] | None = None) -> list[Hypothesis]:
    """Ancestral sampling from ``score_next``; banned ids are masked and the
    rest renormalized.  Reported log-probabilities are the model's own."""
    rng = np.random.default_rng(seed)
    vocab = scorer.vocab
    mask = sorted(_banned_ids(vocab, banned))
    out = []
    for _ in range(n_samples):
        seq: list[int] = []
        lp = 0.0
        while len(seq) < k_max:
            scores = scorer.score_next(seq)
            p = np.exp(scores)
            p[mask] = 0.0
            total = p.sum()
            if total <= 0:
                break
            cdf = np.cumsum(p / total)
            t = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            t = min(t, len(p) - 1)
            seq.append(t)
            lp += float(scores[t])
            if t == vocab.eos:
                break
        out.append(Hypothesis(tuple(seq), lp, None, True, True))
    return out


def contains_sequence(tokens: Sequence[int], seq: Sequence[int]) -> bool:
    n = len(seq)
    return any(tuple(tokens[i:i + n]) == tuple(seq) for i in range(len(tokens) - n + 1))


def load_constraints(source: str | Path | list, vocab: Vocabulary,
                     tokenizer: Callable[[str], list[str]] = words) -> list[DisjunctiveConstraintSet]:
    """Parse a JSON list of sets (each a list of strings) into constraint sets.

    Raises ValueError if any constraint token is outside the vocabulary.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = source
    if not isinstance(data, list) or not all(isinstance(s, list) for s in data):
        raise ValueError("constraints must be a JSON list of lists of strings")
    sets = []
    for i, members in enumerate(data):
        seqs = []
        for phrase in members:
            if not isinstance(phrase, str):
                raise ValueError(f"constraint set {i}: expected strings, got {phrase!r}")
            toks = tokenizer(phrase)
            ids = vocab.encode(toks)
            bad = [t for t, j in zip(toks, ids) if j == vocab.unk]
            if bad:
                raise ValueError(f"constraint {phrase!r} has out-of-vocabulary tokens {bad}")
            seqs.append(tuple(ids))
        sets.append(DisjunctiveConstraintSet(i, tuple(seqs)))
    return sets
