import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalgen.dpc import (
    DisjunctiveConstraintSet, advance_state, allocate_banks, build_trie,
    conjunctive_beam_search, constrained_beam_search, contains_sequence, enumerate_conjunctive,
    initial_state, load_constraints, nbest_decode, random_sampling_decode, rank_key,
)
from causalgen.scoring import CountingScorer, Vocabulary

from toys import RandomScorer, TableScorer, exhaustive_best, exhaustive_plain, satisfies

RAIN = {"rain": 3, "rains": 4, "rained": 5, "raining": 6}


def dcs(set_id, *seqs):
    return DisjunctiveConstraintSet(set_id, tuple(tuple(s) for s in seqs))


def random_sets(rng, vocab_size, n_sets, max_variants=4, max_len=2):
    words = list(range(3, vocab_size))
    sets = []
    for i in range(n_sets):
        seqs = {tuple(rng.choice(words) for _ in range(rng.randint(1, max_len)))
                for _ in range(rng.randint(1, max_variants))}
        sets.append(dcs(i, *sorted(seqs)))
    return sets


def replay(trie, tokens):
    state = initial_state(trie)
    states = [state]
    for t in tokens:
        state = advance_state(state, t)
        states.append(state)
    return states


# -- constraint sets and trie ------------------------------------------------

def test_set_validation_and_dedup():
    s = dcs(0, (3, 4), (3, 4), (5,))
    assert s.sequences == ((3, 4), (5,))
    with pytest.raises(ValueError):
        dcs(0)
    with pytest.raises(ValueError):
        dcs(0, ())


def test_trie_rain_variants():
    trie = build_trie([dcs(0, *[(i,) for i in RAIN.values()])])
    assert sorted(trie.root.children) == [3, 4, 5, 6]
    assert all(trie.root.children[t].terminal == {0} for t in RAIN.values())
    assert len(trie) == 5


def test_trie_empty():
    trie = build_trie([])
    assert len(trie) == 1 and trie.paths() == []


def test_trie_prefix_sharing():
    trie = build_trie([dcs(0, (3, 4)), dcs(1, (3, 5))])
    assert list(trie.root.children) == [3]
    a = trie.root.children[3]
    assert a.children[4].terminal == {0} and a.children[5].terminal == {1}
    assert len(trie) == 4


def test_trie_shared_sequence_two_markers():
    trie = build_trie([dcs(0, (3, 4)), dcs(1, (3, 4), (6,))])
    assert trie.paths() == [((3, 4), frozenset({0, 1})), ((6,), frozenset({1}))]


def test_trie_duplicate_set_id():
    with pytest.raises(ValueError):
        build_trie([dcs(0, (3,)), dcs(0, (4,))])


def test_prune_keeps_shared_prefix():
    trie = build_trie([dcs(0, (3, 4)), dcs(1, (3, 5))])
    trie.prune(0)
    assert trie.paths() == [((3, 5), frozenset({1}))]
    assert trie.root.children[3].count == 1
    trie.prune(1)
    assert trie.paths() == [] and len(trie) == 1


def test_prune_shared_path_survives_for_other_set():
    trie = build_trie([dcs(0, (3, 4)), dcs(1, (3, 4))])
    trie.prune(0)
    assert trie.paths() == [((3, 4), frozenset({1}))]


def test_prune_idempotent():
    trie = build_trie([dcs(0, (3, 4), (5,)), dcs(1, (3,))])
    trie.prune(0)
    before = trie.paths()
    trie.prune(0)
    assert trie.paths() == before == [((3,), frozenset({1}))]


# -- state advancement -------------------------------------------------------

def test_advance_rained_prunes_whole_set():
    trie = build_trie([dcs(0, *[(i,) for i in RAIN.values()])])
    s0 = initial_state(trie)
    assert s0.unsatisfied == 1 and s0.forced_tokens() == {3, 4, 5, 6}
    s1 = advance_state(s0, RAIN["rained"])
    assert s1.satisfied == {0} and s1.unsatisfied == 0
    assert s1.trie.paths() == [] and s1.forced_tokens() == set()
    assert s1.pointers == {()}
    # the caller's trie is untouched
    assert len(trie.paths()) == 4


def test_advance_dead_end_resets_to_root():
    trie = build_trie([dcs(0, (3, 4, 5))])
    s = advance_state(advance_state(initial_state(trie), 3), 7)
    assert s.pointers == {()} and s.satisfied == frozenset()


def test_advance_overlap_satisfies_both_sets():
    trie = build_trie([dcs(0, (3, 4)), dcs(1, (3, 4), (6,))])
    s = advance_state(advance_state(initial_state(trie), 3), 4)
    assert s.satisfied == {0, 1} and s.unsatisfied == 0


def test_advance_keeps_restart_pointer():
    # "a a b": after "a a" both the depth-1 and depth-2 pointers must survive
    trie = build_trie([dcs(0, (3, 3, 4))])
    states = replay(trie, [3, 3, 3, 4])
    assert states[2].pointers == {(), (3,), (3, 3)}
    assert states[-1].satisfied == {0}


def test_already_satisfied_is_noop():
    trie = build_trie([dcs(0, (3,)), dcs(1, (4,))])
    s = advance_state(initial_state(trie), 3)
    s2 = advance_state(s, 3)
    assert s2.satisfied == s.satisfied and s2.trie is s.trie


def test_initial_state_respects_pruned_trie():
    trie = build_trie([dcs(0, (3,)), dcs(1, (4,))])
    trie.prune(0)
    s = initial_state(trie)
    assert s.satisfied == {0} and s.forced_tokens() == {4}


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10_000))
def test_state_invariants_along_random_paths(seed):
    rng = random.Random(seed)
    sets = random_sets(rng, 8, rng.randint(1, 3))
    trie = build_trie(sets)
    total = sum(len(s.sequences) for s in sets)
    tokens = [rng.randint(3, 7) for _ in range(8)]
    prev = frozenset()
    for i, st_ in enumerate(replay(trie, tokens)):
        # conservation
        done = sum(len(s.sequences) for s in sets if s.set_id in st_.satisfied)
        assert st_.trie.live_memberships() + done == total
        # monotone satisfaction
        assert prev <= st_.satisfied
        prev = st_.satisfied
        assert st_.unsatisfied == len(sets) - len(st_.satisfied)
        assert () in st_.pointers
        # satisfaction agrees with a substring scan of the prefix
        for s in sets:
            hit = any(contains_sequence(tokens[:i], q) for q in s.sequences)
            assert (s.set_id in st_.satisfied) == hit
        # whole-set pruning: forced tokens only come from live sets
        live = [q for s in sets if s.set_id not in st_.satisfied for q in s.sequences]
        for t in st_.forced_tokens():
            assert any(q[:len(p) + 1] == p + (t,) for p in st_.pointers for q in live)


# -- bank allocation ---------------------------------------------------------

def test_allocate_even_split_remainder_high():
    cands = [(b, i) for b in (0, 1, 2) for i in range(5)]
    got = allocate_banks(cands, 8, bank_of=lambda c: c[0], sort_key=lambda c: c[1])
    from collections import Counter
    assert Counter(b for b, _ in got) == {2: 3, 1: 3, 0: 2}


def test_allocate_spare_slots_redistributed():
    cands = [(2, 0)] + [(0, i) for i in range(10)]
    got = allocate_banks(cands, 6, bank_of=lambda c: c[0], sort_key=lambda c: c[1])
    assert got == [(2, 0)] + [(0, i) for i in range(5)]


def test_allocate_more_banks_than_slots():
    cands = [(b, 0) for b in range(5)]
    got = allocate_banks(cands, 2, bank_of=lambda c: c[0], sort_key=lambda c: c[1])
    assert got == [(4, 0), (3, 0)]


# -- search ------------------------------------------------------------------

def test_empty_constraints_equal_nbest():
    for seed in range(10):
        sc = RandomScorer(6, seed)
        a = constrained_beam_search(sc, [], 4, 5)
        b = nbest_decode(sc, 4, 5)
        assert [(h.tokens, h.logprob) for h in a] == [(h.tokens, h.logprob) for h in b]


def test_singleton_equals_conjunctive():
    for seed in range(10):
        sc = RandomScorer(7, seed)
        tok = 3 + seed % 4
        a = constrained_beam_search(sc, [dcs(0, (tok,))], 3, 5)
        b = conjunctive_beam_search(sc, [(tok,)], 3, 5)
        assert [(h.tokens, h.logprob) for h in a] == [(h.tokens, h.logprob) for h in b]


def test_beam_one_is_greedy():
    sc = RandomScorer(5, seed=11)
    h = nbest_decode(sc, 1, 6)[0]
    seq = []
    mask = {sc.vocab.bos, sc.vocab.unk}
    while len(seq) < 6:
        row = sc.score_next(seq).copy()
        row[list(mask)] = -np.inf
        t = int(np.argmax(row))
        seq.append(t)
        if t == sc.vocab.eos:
            break
    assert h.tokens == tuple(seq)


def test_nbest_large_beam_is_exact():
    for seed in range(5):
        sc = RandomScorer(5, seed, peaked=2.0)
        best = exhaustive_plain(sc, 4)[0]
        h = nbest_decode(sc, 4096, 4)[0]
        assert h.tokens == best[1]
        assert abs(h.logprob - best[0]) < 1e-9


def test_dpc_large_beam_matches_oracle():
    rng = random.Random(5)
    for seed in range(8):
        sc = RandomScorer(rng.randint(5, 8), seed)
        sets = random_sets(rng, len(sc.vocab), rng.randint(1, 2))
        k = rng.randint(3, 5)
        oracle = exhaustive_best(sc, sets, k)
        hyps = constrained_beam_search(sc, sets, 4096, k)
        if not oracle:
            assert not hyps[0].satisfied
            continue
        assert hyps[0].satisfied
        assert abs(hyps[0].logprob - oracle[0][0]) <= 1e-9


def test_hypothesis_invariants():
    rng = random.Random(2)
    for seed in range(20):
        sc = RandomScorer(7, seed)
        sets = random_sets(rng, 10, 2)
        k = 6
        for h in constrained_beam_search(sc, sets, 5, k):
            lp = sum(float(sc.score_next(h.tokens[:i])[t]) for i, t in enumerate(h.tokens))
            assert abs(lp - h.logprob) < 1e-9
            assert h.finished
            assert h.tokens[-1] == sc.vocab.eos or len(h.tokens) == k
            if h.tokens[-1] == sc.vocab.eos:
                assert h.satisfied
            assert sc.vocab.bos not in h.tokens and sc.vocab.unk not in h.tokens
            body = h.tokens[:-1] if h.tokens[-1] == sc.vocab.eos else h.tokens
            assert h.satisfied == satisfies(body, sets)


def test_results_ranked():
    sc = RandomScorer(8, 3)
    hyps = constrained_beam_search(sc, [dcs(0, (4,), (5, 6))], 6, 6)
    assert hyps == sorted(hyps, key=rank_key)


def test_unreachable_constraint_flagged_unsatisfied():
    sc = RandomScorer(6, 1)
    hyps = constrained_beam_search(sc, [dcs(0, (3, 4, 5, 6))], 4, 3)
    assert hyps and all(not h.satisfied for h in hyps)
    assert all(len(h.tokens) == 3 for h in hyps)


def test_argument_validation():
    sc = RandomScorer(4)
    with pytest.raises(ValueError):
        constrained_beam_search(sc, [], 0, 3)
    with pytest.raises(ValueError):
        nbest_decode(sc, 2, 0)


def test_accepts_prebuilt_trie():
    sc = RandomScorer(6, 4)
    sets = [dcs(0, (3,), (4,))]
    a = constrained_beam_search(sc, build_trie(sets), 3, 4)
    b = constrained_beam_search(sc, sets, 3, 4)
    assert [h.tokens for h in a] == [h.tokens for h in b]


def test_search_deterministic():
    sc = RandomScorer(8, 9)
    sets = [dcs(0, (3,), (4, 5)), dcs(1, (6,), (7,))]
    runs = {tuple((h.tokens, h.logprob) for h in constrained_beam_search(sc, sets, 5, 6))
            for _ in range(3)}
    assert len(runs) == 1


def test_single_pass_cheaper_than_enumeration():
    sc = RandomScorer(10, 0)
    sets = [dcs(0, (3,), (4,), (5,), (6,)), dcs(1, (7,), (8,), (9,), (10,))]
    one = CountingScorer(sc)
    constrained_beam_search(one, sets, 5, 6)
    many = CountingScorer(sc)
    enumerate_conjunctive(many, sets, 5, 6)
    assert one.calls < many.calls / 4


# -- sampling ----------------------------------------------------------------

def test_sampling_point_mass():
    v = Vocabulary(["a", "b"])
    sc = TableScorer(v, lambda p: {"a": 1.0} if len(p) < 2 else {v.eos: 1.0})
    out = random_sampling_decode(sc, 20, 5, seed=1)
    assert {h.tokens for h in out} == {(3, 3, 1)}
    assert all(h.logprob == 0.0 for h in out)


def test_sampling_seeded():
    sc = RandomScorer(6, 2)
    a = random_sampling_decode(sc, 30, 5, seed=7)
    b = random_sampling_decode(sc, 30, 5, seed=7)
    c = random_sampling_decode(sc, 30, 5, seed=8)
    assert [h.tokens for h in a] == [h.tokens for h in b]
    assert [h.tokens for h in a] != [h.tokens for h in c]


def test_sampling_never_emits_banned():
    sc = RandomScorer(4, 0)
    out = random_sampling_decode(sc, 200, 4, seed=0)
    assert all(sc.vocab.bos not in h.tokens and sc.vocab.unk not in h.tokens for h in out)


def test_sampling_frequencies_within_three_sigma():
    v = Vocabulary(["a", "b", "c"])
    first = {"a": 0.5, "b": 0.3, "c": 0.2}
    after = {"a": {"b": 0.6, "c": 0.4}, "b": {"a": 0.9, v.eos: 0.1}, "c": {v.eos: 1.0}}

    def fn(prefix):
        if not prefix:
            return first
        return after[v.tokens[prefix[-1]]]

    sc = TableScorer(v, fn)
    n = 100_000
    out = random_sampling_decode(sc, n, 2, seed=123)
    firsts = np.bincount([h.tokens[0] for h in out], minlength=len(v))
    for tok, p in first.items():
        sigma = (n * p * (1 - p)) ** 0.5
        assert abs(firsts[v.id(tok)] - n * p) <= 3 * sigma
    # second token after "a"
    a_id, b_id = v.id("a"), v.id("b")
    after_a = [h.tokens[1] for h in out if h.tokens[0] == a_id]
    m = len(after_a)
    k = sum(t == b_id for t in after_a)
    assert abs(k - 0.6 * m) <= 3 * (m * 0.6 * 0.4) ** 0.5


# -- constraint file ---------------------------------------------------------

def test_load_constraints(tmp_path):
    v = Vocabulary(["rain", "rains", "heavy", "storm"])
    p = tmp_path / "c.json"
    p.write_text(json.dumps([["rain", "rains", "heavy rain"], ["storm"]]))
    sets = load_constraints(p, v)
    assert sets[0].sequences == ((3,), (4,), (5, 3))
    assert sets[1].set_id == 1 and sets[1].sequences == ((6,),)
    assert load_constraints([], v) == []


def test_load_constraints_rejects_oov_and_bad_shape():
    v = Vocabulary(["rain"])
    with pytest.raises(ValueError, match="out-of-vocabulary"):
        load_constraints([["snow"]], v)
    with pytest.raises(ValueError):
        load_constraints({"a": 1}, v)
    with pytest.raises(ValueError):
        load_constraints([[3]], v)
