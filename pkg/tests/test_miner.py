import gzip
import json
from pathlib import Path

import pytest

from causalgen.miner import (
    CausalPair, Category, MinerConfig, Reject, apply_filters, build_candidate,
    load_patterns, match_pattern, mine_corpus, mine_document, read_documents, read_jsonl,
    write_jsonl,
)
from causalgen.text import normalize, tokenize

FIXTURES = Path(__file__).parent / "fixtures"
CONFIG = MinerConfig()


def fixture_docs():
    return list(read_documents(FIXTURES / "fixture_corpus.txt"))


def gold():
    return [json.loads(l) for l in (FIXTURES / "fixture_gold.jsonl").read_text().splitlines() if l]


def cand(sentence):
    toks = tokenize(sentence)
    m = match_pattern(toks, CONFIG)
    assert m is not None, sentence
    return build_candidate(sentence, toks, m)


def test_pattern_file_well_formed():
    pats = load_patterns()
    assert len({p.id for p in pats}) == len(pats)
    for p in pats:
        assert p.surface == p.surface.strip() and p.surface
        assert p.category in (Category.EPC, Category.CPE)


def test_pattern_file_errors(tmp_path):
    bad = tmp_path / "p.tsv"
    bad.write_text("because\tEPC\tCAUSE\n")
    with pytest.raises(ValueError):
        load_patterns(bad)
    bad.write_text("because\tXYZ\tCAUSE\tbecause\n")
    with pytest.raises(ValueError):
        load_patterns(bad)


def test_match_because():
    s = "I am very sad because I lost my phone"
    m = match_pattern(s, CONFIG)
    toks = tokenize(s)
    assert m.pattern.id == "because"
    assert m.left.text(toks, s) == "I am very sad"
    assert m.right.text(toks, s) == "I lost my phone"


def test_match_resulted_in_is_cpe():
    s = "The earthquake resulted in many deaths"
    c = cand(s)
    assert c.pair.direction is Category.CPE
    assert (c.pair.cause, c.pair.effect) == ("The earthquake", "many deaths")


def test_match_two_patterns_is_ambiguous():
    assert match_pattern("He left so that she could sleep, because he cared", CONFIG) is None


def test_match_none():
    assert match_pattern("The cat sat on the mat.", CONFIG) is None


def test_longest_surface_wins():
    c = cand("The game was cancelled because of the heavy rain.")
    assert c.pair.pattern_id == "because_of"
    assert c.pair.cause == "the heavy rain"


def test_same_pattern_twice_is_not_ambiguous():
    m = match_pattern("She cried because he left because of work", CONFIG)
    # "because of" is a different pattern from "because": ambiguous
    assert m is None
    m = match_pattern("He smiled because she laughed because it was funny", CONFIG)
    assert m is not None and m.pattern.id == "because"


def test_gapped_if_then():
    c = cand("If the ice melts then the sea level rises.")
    assert c.pair.pattern_id == "if_then"
    assert c.pair.cause == "the ice melts"
    assert c.pair.effect == "the sea level rises"


def test_arguments_punctuation_trimmed():
    c = cand("The roads were icy, so the school closed early.")
    assert c.pair.cause == "The roads were icy"
    assert c.pair.effect == "the school closed early"


def test_filter_accepts_plain_sentence():
    assert apply_filters(cand("I am very sad because I lost my phone"), CONFIG) == (True, None)


def test_filter_negation_before_pattern():
    c = cand("I did not go because it rained hard")
    assert apply_filters(c, CONFIG) == (False, Reject.NEGATION)


def test_filter_negation_disabled():
    c = cand("I did not go because it rained hard")
    cfg = MinerConfig(enable_negation_filter=False)
    assert apply_filters(c, cfg) == (True, None)


def test_filter_passive():
    c = cand("The window was broken because the kids threw a ball")
    assert apply_filters(c, CONFIG) == (False, Reject.PASSIVE)
    assert apply_filters(c, MinerConfig(enable_passive_filter=False)) == (True, None)


def test_filter_short():
    c = cand("Rain caused flooding in town")
    assert apply_filters(c, CONFIG) == (False, Reject.SHORT)
    assert apply_filters(c, MinerConfig(min_arg_tokens=1)) == (True, None)


def test_config_validation():
    with pytest.raises(ValueError):
        MinerConfig(min_arg_tokens=0)


def test_fixture_corpus_matches_gold():
    pairs, stats = mine_corpus(fixture_docs())
    got = [{"cause": p.cause, "effect": p.effect, "pattern": p.pattern_id,
            "direction": p.direction.value} for p in pairs]
    assert got == gold()
    assert stats.sentences == 40
    assert stats.to_json()["rejects"] == {"ambiguous": 3, "short": 2, "negation": 3, "passive": 3}
    assert stats.duplicates == 1


def test_fixture_invariants():
    pairs, _ = mine_corpus(fixture_docs())
    for p in pairs:
        s = p.source_sentence
        assert len(tokenize(p.cause)) >= 2 and len(tokenize(p.effect)) >= 2
        ci, ei = s.find(p.cause), s.find(p.effect)
        assert ci >= 0 and ei >= 0
        assert ci + len(p.cause) <= ei or ei + len(p.effect) <= ci
        # EPC: effect precedes the pattern; CPE: cause precedes it
        first = ei if p.direction is Category.EPC else ci
        assert first == min(ci, ei)
    keys = [p.key() for p in pairs]
    assert len(keys) == len(set(keys))


def test_dedup_idempotent():
    doc = "The storm caused a lot of damage to the town."
    once, _ = mine_corpus([doc])
    twice, stats = mine_corpus([doc, doc])
    assert once == twice and stats.duplicates == 1


def test_dedup_normalized():
    pairs, _ = mine_corpus(["The storm caused a lot of damage.",
                            "the  STORM caused a lot of damage!"])
    assert len(pairs) == 1


def test_zero_pattern_corpus():
    pairs, stats = mine_corpus(["The cat sat on the mat.", "Nothing happened today."])
    js = stats.to_json()
    assert pairs == []
    assert js["accepted"] == 0 and js["duplicates"] == 0 and js["per_pattern"] == {}
    assert set(js["rejects"].values()) == {0}
    assert js["EPC"] == js["CPE"] == 0


def test_malformed_bytes_skipped():
    pairs, stats = mine_corpus([b"\xff\xfe bad", "I am very sad because I lost my phone".encode()])
    assert stats.malformed == 1 and len(pairs) == 1


def test_thread_count_invariant():
    docs = fixture_docs() * 3
    one, s1 = mine_corpus(docs, threads=1)
    many, s4 = mine_corpus(docs, threads=4)
    assert one == many and s1.to_json() == s4.to_json()


def test_source_offset_is_byte_offset():
    doc = "Café time. I am very sad because I lost my phone."
    pairs, _ = mine_document(doc, CONFIG)
    raw = doc.encode()
    off = pairs[0].source_offset
    assert raw[off:].decode().startswith("I am very sad")


def test_jsonl_round_trip(tmp_path):
    pairs, _ = mine_corpus(fixture_docs())
    out = tmp_path / "cb.jsonl"
    assert write_jsonl(pairs, out) == len(pairs)
    back = list(read_jsonl(out))
    assert [(p.cause, p.effect, p.pattern_id, p.direction) for p in back] == \
        [(p.cause, p.effect, p.pattern_id, p.direction) for p in pairs]
    rec = json.loads(out.read_text().splitlines()[0])
    assert set(rec) == {"cause", "effect", "pattern", "direction", "sentence"}


def test_read_jsonl_bad_record(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"cause": "a b"}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        list(read_jsonl(p))


def test_read_documents_gzip(tmp_path):
    p = tmp_path / "docs.txt.gz"
    with gzip.open(p, "wb") as fh:
        fh.write(b"one doc.\n\nsecond doc.\n")
    assert list(read_documents(p)) == [b"one doc.", b"second doc."]


def test_pair_key_normalizes():
    p = CausalPair("The  Storm", "DAMAGE done", "cause", Category.CPE, "")
    assert p.key() == (normalize("the storm"), "damage done")
