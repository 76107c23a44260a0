"""Cause Effect Graph: lemma -> lemma causal edges weighted by co-occurrence.

Edges are harvested from mined (cause, effect) pairs as the cross product of
the content lemmas on each side.  Part-of-speech filtering is approximated by
the lexicon's closed-class word list, so no tagger is needed.
"""

from __future__ import annotations

import hashlib
import io
import struct
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .morphology import Lexicon, default_lexicon
from .text import words

GRAPH_MAGIC = "#causalgen-ceg"
GRAPH_VERSION = 1
INDEX_MAGIC = b"CEGIDX\x00\x01"

CAUSE_OF = "cause-of"
EFFECT_OF = "effect-of"


def _side_text(pair, side: str) -> str:
    if isinstance(pair, Mapping):
        return pair[side]
    return getattr(pair, side)


def content_lemmas(text: str, lexicon: Lexicon) -> set[str]:
    out = set()
    for w in words(text):
        if not lexicon.is_open_class(w):
            continue
        lemma = lexicon.lemmatize(w)
        if lexicon.is_open_class(lemma):
            out.add(lemma)
    return out


def extract_lexical_pairs(pair, lexicon: Lexicon | None = None) -> set[tuple[str, str]]:
    """Cross product of cause-side and effect-side content lemmas.

    ``pair`` is a :class:`~causalgen.miner.CausalPair` or any mapping with
    ``cause`` and ``effect`` text.
    """
    lexicon = lexicon or default_lexicon()
    causes = content_lemmas(_side_text(pair, "cause"), lexicon)
    effects = content_lemmas(_side_text(pair, "effect"), lexicon)
    return {(c, e) for c in causes for e in effects}


def _sorted_adjacency(items: Iterable[tuple[str, int]]) -> list[tuple[str, int]]:
    return sorted(items, key=lambda kv: (-kv[1], kv[0]))


@dataclass
class CauseEffectGraph:
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    out_index: dict[str, list[tuple[str, int]]] = field(default_factory=dict, repr=False)
    in_index: dict[str, list[tuple[str, int]]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.edges and not (self.out_index or self.in_index):
            self.reindex()

    def reindex(self) -> None:
        out: dict[str, list] = {}
        inn: dict[str, list] = {}
        for (c, e), f in self.edges.items():
            if f < 1:
                raise ValueError(f"edge {(c, e)} has non-positive frequency {f}")
            out.setdefault(c, []).append((e, f))
            inn.setdefault(e, []).append((c, f))
        self.out_index = {k: _sorted_adjacency(v) for k, v in out.items()}
        self.in_index = {k: _sorted_adjacency(v) for k, v in inn.items()}

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, lemma: str) -> bool:
        return lemma in self.out_index or lemma in self.in_index

    @property
    def nodes(self) -> set[str]:
        return set(self.out_index) | set(self.in_index)

    def digest(self) -> str:
        """Content hash of the sorted edge list (for order-invariance checks)."""
        h = hashlib.sha256()
        for (c, e), f in sorted(self.edges.items()):
            h.update(f"{c}\t{e}\t{f}\n".encode("utf-8"))
        return h.hexdigest()

    def query_candidates(self, input_lemmas: Iterable[str], direction: str, n: int):
        return query_candidates(self, input_lemmas, direction, n)

    # -- persistence -------------------------------------------------------

    def save(self, path: str | Path) -> Path:
        """Write the sorted TSV edge list and its binary node index sidecar.

        Returns the index path (``<path>.idx``).
        """
        path = Path(path)
        buf = io.BytesIO()
        header = f"{GRAPH_MAGIC}\tv{GRAPH_VERSION}\n".encode("utf-8")
        buf.write(header)
        offsets: dict[str, list[int]] = {}
        for (c, e), f in sorted(self.edges.items()):
            pos = buf.tell()
            buf.write(f"{c}\t{e}\t{f}\n".encode("utf-8"))
            entry = offsets.setdefault(c, [pos, 0])
            entry[1] += 1
        path.write_bytes(buf.getvalue())
        idx_path = Path(str(path) + ".idx")
        with open(idx_path, "wb") as fh:
            fh.write(INDEX_MAGIC)
            fh.write(struct.pack("<I", len(offsets)))
            for node in sorted(offsets):
                raw = node.encode("utf-8")
                pos, count = offsets[node]
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<QI", pos, count))
        return idx_path

    @classmethod
    def load(cls, path: str | Path) -> "CauseEffectGraph":
        path = Path(path)
        edges: dict[tuple[str, str], int] = {}
        with open(path, encoding="utf-8") as fh:
            _check_header(fh.readline(), path)
            for lineno, line in enumerate(fh, 2):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
                edges[(parts[0], parts[1])] = int(parts[2])
        return cls(edges)


def _check_header(line: str, path) -> None:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 2 or parts[0] != GRAPH_MAGIC:
        raise ValueError(f"{path}: not a cause-effect graph file")
    if parts[1] != f"v{GRAPH_VERSION}":
        raise ValueError(f"{path}: unsupported graph version {parts[1]}")


class GraphIndex:
    """Random access to one cause node's out-edges without loading the graph.

    Reads the ``.idx`` sidecar into a dict (node -> byte offset, row count)
    and seeks into the TSV on each lookup.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._offsets: dict[str, tuple[int, int]] = {}
        data = Path(str(self.path) + ".idx").read_bytes()
        if not data.startswith(INDEX_MAGIC):
            raise ValueError(f"{self.path}.idx: bad index header")
        pos = len(INDEX_MAGIC)
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", data, pos)
            pos += 2
            node = data[pos:pos + ln].decode("utf-8")
            pos += ln
            off, count = struct.unpack_from("<QI", data, pos)
            pos += 12
            self._offsets[node] = (off, count)

    def __contains__(self, node: str) -> bool:
        return node in self._offsets

    def out_edges(self, node: str) -> list[tuple[str, int]]:
        if node not in self._offsets:
            return []
        off, count = self._offsets[node]
        out = []
        with open(self.path, "rb") as fh:
            fh.seek(off)
            for _ in range(count):
                c, e, f = fh.readline().decode("utf-8").rstrip("\n").split("\t")
                assert c == node, "index out of sync with graph file"
                out.append((e, int(f)))
        return _sorted_adjacency(out)


def count_lexical_pairs(pairs: Iterable, lexicon: Lexicon | None = None) -> Counter:
    lexicon = lexicon or default_lexicon()
    counts: Counter = Counter()
    for pair in pairs:
        counts.update(extract_lexical_pairs(pair, lexicon))
    return counts


def _count_shard(args) -> Counter:
    shard, lexicon = args
    return count_lexical_pairs(shard, lexicon)


def _shards(items: Sequence, n: int) -> list[Sequence]:
    size = max(1, -(-len(items) // n))
    return [items[i:i + size] for i in range(0, len(items), size)]


def build_graph(pairs: Iterable, threshold: int = 5, lexicon: Lexicon | None = None,
                threads: int = 1) -> CauseEffectGraph:
    """Count lexical pairs over ``pairs`` and keep edges with frequency > threshold.

    With ``threads > 1`` the input is split into shards counted in separate
    processes and merged; counting is commutative so the result does not
    depend on the split.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    lexicon = lexicon or default_lexicon()
    if threads > 1:
        items = list(pairs)
        counts: Counter = Counter()
        if items:
            shards = _shards(items, threads)
            with ProcessPoolExecutor(max_workers=min(threads, len(shards))) as pool:
                for part in pool.map(_count_shard, [(s, lexicon) for s in shards]):
                    counts.update(part)
    else:
        counts = count_lexical_pairs(pairs, lexicon)
    edges = {k: v for k, v in counts.items() if v > threshold}
    return CauseEffectGraph(edges)


def query_candidates(graph: CauseEffectGraph, input_lemmas: Iterable[str], direction: str,
                     n: int) -> list[tuple[str, int]]:
    """Top-``n`` neighbour lemmas, frequencies summed across the input lemmas.

    ``cause-of`` looks for causes of the inputs (in-edges), ``effect-of`` for
    effects (out-edges).  Input lemmas themselves are never returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if direction == CAUSE_OF:
        index = graph.in_index
    elif direction == EFFECT_OF:
        index = graph.out_index
    else:
        raise ValueError(f"direction must be {CAUSE_OF!r} or {EFFECT_OF!r}, got {direction!r}")
    inputs = set(input_lemmas)
    totals: Counter = Counter()
    for lemma in sorted(inputs):
        for other, freq in index.get(lemma, ()):
            if other not in inputs:
                totals[other] += freq
    return _sorted_adjacency(totals.items())[:n]

