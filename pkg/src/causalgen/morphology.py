"""English lemmatization and inflectional variant generation.

Lookups go through an exception lexicon first (irregular forms, derived
forms such as ``rainy``, words that merely look inflected); anything not in
the table falls back to suffix rules.  Rule-based lemmatization works by
generate-and-check: a candidate stem is accepted only if regular inflection
of that stem reproduces the input word, which keeps ``lemmatize`` and
``variants`` consistent with each other.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

VOWELS = frozenset("aeiou")

VARIANT_CLASSES = frozenset(
    {"lemma", "plural", "3sg", "past", "pastpart", "gerund", "comparative",
     "superlative", "derived", "adj"}
)

# exception classes that replace the corresponding rule-generated slot
_SLOT = {
    "plural": "s", "3sg": "s",
    "past": "past", "pastpart": "past",
    "gerund": "ing",
    "comparative": "er", "superlative": "est",
}


def _is_consonant(ch: str) -> bool:
    return ch.isalpha() and ch not in VOWELS


def _vowel_groups(word: str) -> int:
    groups, prev = 0, False
    for ch in word:
        cur = ch in VOWELS or ch == "y"
        if cur and not prev:
            groups += 1
        prev = cur
    return groups


def _short_cvc(stem: str) -> bool:
    """Single-syllable consonant-vowel-consonant ending (stop, love→lov)."""
    if len(stem) < 3:
        return False
    a, b, c = stem[-3], stem[-2], stem[-1]
    return (
        _is_consonant(a) and b in VOWELS and _is_consonant(c)
        and c not in "wxy" and _vowel_groups(stem) == 1
    )


def s_form(lemma: str) -> str:
    if len(lemma) > 1 and lemma.endswith("y") and _is_consonant(lemma[-2]):
        return lemma[:-1] + "ies"
    if lemma.endswith(("s", "x", "z", "ch", "sh")):
        return lemma + "es"
    return lemma + "s"


def past_form(lemma: str) -> str:
    if len(lemma) > 1 and lemma.endswith("y") and _is_consonant(lemma[-2]):
        return lemma[:-1] + "ied"
    if lemma.endswith("e"):
        return lemma + "d"
    if _short_cvc(lemma):
        return lemma + lemma[-1] + "ed"
    return lemma + "ed"


def gerund_form(lemma: str) -> str:
    if lemma.endswith("ie") and len(lemma) > 2:
        return lemma[:-2] + "ying"
    if lemma.endswith("e") and not lemma.endswith(("ee", "ye", "oe")) and len(lemma) > 2:
        return lemma[:-1] + "ing"
    if _short_cvc(lemma):
        return lemma + lemma[-1] + "ing"
    return lemma + "ing"


def _graded_stem(lemma: str) -> str:
    if len(lemma) > 1 and lemma.endswith("y") and _is_consonant(lemma[-2]):
        return lemma[:-1] + "i"
    if lemma.endswith("e"):
        return lemma[:-1]
    if _short_cvc(lemma):
        return lemma + lemma[-1]
    return lemma


def comparative_form(lemma: str) -> str:
    return _graded_stem(lemma) + "er"


def superlative_form(lemma: str) -> str:
    return _graded_stem(lemma) + "est"


def _doubled_form(stem: str, word: str) -> bool:
    """Final-consonant doubling on a stressed last syllable (format -> formatted)."""
    if len(stem) < 3 or not (_is_consonant(stem[-3]) and stem[-2] in VOWELS
                             and _is_consonant(stem[-1]) and stem[-1] not in "wxy"):
        return False
    return word in (stem + stem[-1] + "ed", stem + stem[-1] + "ing")


def _plausible_stem(stem: str) -> bool:
    return len(stem) >= 2 and any(ch in VOWELS or ch == "y" for ch in stem)


def _stem_candidates(stem: str) -> list[str]:
    """Ordered lemma guesses for a word with an -ed/-ing/-er/-est suffix removed."""
    if len(stem) >= 2 and stem[-1] == stem[-2] and _is_consonant(stem[-1]):
        if stem[-1] in "lsz":
            return [stem, stem[:-1]]
        return [stem[:-1], stem]
    if (_short_cvc(stem) or stem.endswith(("v", "c", "dg", "uz", "iz", "yz"))
            or (len(stem) >= 3 and stem[-1] == "g" and stem[-2] in VOWELS)
            or (stem.endswith("at") and _is_consonant(stem[-3:-2]) and _vowel_groups(stem) >= 2)
            or (len(stem) >= 3 and stem[-1] == "l" and _is_consonant(stem[-2]) and stem[-2] != "l")):
        return [stem + "e", stem]
    return [stem, stem + "e"]


@dataclass
class Lexicon:
    """Exception table plus the open-class hint used for content filtering."""

    lemma_map: dict[str, str] = field(default_factory=dict)
    variant_map: dict[str, set[str]] = field(default_factory=lambda: defaultdict(set))
    slots: dict[tuple[str, str], set[str]] = field(default_factory=lambda: defaultdict(set))
    adjectives: set[str] = field(default_factory=set)
    closed_class: frozenset[str] = frozenset()

    def __post_init__(self):
        self._lemma_cache: dict[str, str] = {}

    @classmethod
    def load(cls, path: str | Path | None = None, stopwords: str | Path | None = None) -> "Lexicon":
        """Read a (form, lemma, variant_class) TSV; defaults to the shipped table."""
        if path is None:
            text = resources.files("causalgen.data").joinpath("lexicon.tsv").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        if stopwords is None:
            stop_text = resources.files("causalgen.data").joinpath("stopwords.txt").read_text("utf-8")
        else:
            stop_text = Path(stopwords).read_text("utf-8")
        closed = frozenset(
            w.strip() for w in stop_text.splitlines() if w.strip() and not w.startswith("#")
        )
        lex = cls(closed_class=closed)
        rows = [r for r in csv.reader(text.splitlines(), delimiter="\t") if r and not r[0].startswith("#")]
        for lineno, row in enumerate(rows, 1):
            if len(row) != 3:
                raise ValueError(f"lexicon row {lineno}: expected 3 columns, got {len(row)}")
            form, lemma, klass = (c.strip().lower() for c in row)
            if klass not in VARIANT_CLASSES:
                raise ValueError(f"lexicon row {lineno}: unknown variant class {klass!r}")
            lex.add(form, lemma, klass)
        lex.check()
        return lex

    def add(self, form: str, lemma: str, klass: str) -> None:
        self.lemma_map.setdefault(lemma, lemma)
        if self.lemma_map.get(form, form) == form:  # first non-self mapping wins
            self.lemma_map[form] = lemma
        self.variant_map[lemma].update((lemma, form))
        if klass == "adj":
            self.adjectives.add(lemma)
        elif klass in _SLOT:
            self.slots[(lemma, _SLOT[klass])].add(form)
        self._lemma_cache = {}

    def check(self) -> None:
        """Every table lemma must be a fixed point, otherwise lemmatize is not idempotent."""
        for form, lemma in self.lemma_map.items():
            if self.lemma_map.get(lemma, lemma) != lemma:
                raise ValueError(
                    f"lexicon chains {form!r} -> {lemma!r} -> {self.lemma_map[lemma]!r}"
                )

    def is_open_class(self, word: str) -> bool:
        return word not in self.closed_class and any(ch.isalpha() for ch in word)

    # -- rules -------------------------------------------------------------

    def rule_forms(self, lemma: str) -> dict[str, str]:
        if lemma in self.adjectives:
            return {"er": comparative_form(lemma), "est": superlative_form(lemma)}
        return {"s": s_form(lemma), "past": past_form(lemma), "ing": gerund_form(lemma)}

    def _acceptable(self, cand: str, word: str) -> bool:
        if not _plausible_stem(cand) or cand in self.closed_class:
            return False
        if self.lemma_map.get(cand, cand) != cand:
            return False
        if word not in self.rule_forms(cand).values() and not _doubled_form(cand, word):
            return False
        return self._reduce(cand) is None

    def _reduce(self, word: str) -> str | None:
        """Rule-based lemma for ``word`` or None when no suffix rule applies."""
        cands: list[str] = []
        if word.endswith("ies") and len(word) > 4:
            cands.append(word[:-3] + "y")
        if word.endswith("ied") and len(word) > 4:
            cands.append(word[:-3] + "y")
        if word.endswith("iest") and len(word) > 5:
            cands.append(word[:-4] + "y")
        if word.endswith("ier") and len(word) > 4:
            cands.append(word[:-3] + "y")
        if word.endswith("es") and word[:-2].endswith(("s", "x", "z", "ch", "sh")):
            cands.append(word[:-2])
        if (word.endswith("s") and len(word) >= 4
                and not word.endswith(("ss", "us", "is", "ous"))):
            cands.append(word[:-1])
        if word.endswith("ing") and len(word) >= 5:
            cands.extend(_stem_candidates(word[:-3]))
        if word.endswith("ed") and len(word) >= 5 and not word.endswith("eed"):
            cands.extend(_stem_candidates(word[:-2]))
            cands.append(word[:-1])  # love -> loved
        if word.endswith("est") and len(word) >= 6:
            cands.extend(_stem_candidates(word[:-3]))
        if word.endswith("er") and len(word) >= 5:
            cands.extend(_stem_candidates(word[:-2]))
        for cand in cands:
            if cand != word and self._acceptable(cand, word):
                return cand
        return None

    # -- public ------------------------------------------------------------

    def lemmatize(self, word: str) -> str:
        """Map a lowercase token to its lemma; unknown forms map to themselves.

        >>> Lexicon.load().lemmatize("babies")
        'baby'
        """
        if not word:
            raise ValueError("cannot lemmatize an empty token")
        hit = self.lemma_map.get(word)
        if hit is not None:
            return hit
        cached = self._lemma_cache.get(word)
        if cached is None:
            cached = self._reduce(word) or word
            self._lemma_cache[word] = cached
        return cached

    def variants(self, lemma: str) -> set[str]:
        """Inflected forms of ``lemma`` including itself.

        Each rule slot (s-form, past, gerund, and comparative/superlative for
        known gradable adjectives) is filled by the rule unless the exception
        table supplies forms for that slot; derived forms come from the table
        only.
        """
        out = {lemma}
        for slot, form in self.rule_forms(lemma).items():
            table = self.slots.get((lemma, slot))
            out.update(table if table else (form,))
        out.update(self.variant_map.get(lemma, ()))
        return out


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    return Lexicon.load()
