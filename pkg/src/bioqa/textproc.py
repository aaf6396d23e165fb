"""Shallow linguistic processing shared by every pipeline stage.

Everything in here is deterministic and resource-driven: the tagger is a
lexicon plus a handful of suffix heuristics (coarse tags are all the
question patterns need), sentence splitting is rule based with an editable
abbreviation list, and stemming is the Porter algorithm.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


class ResourceFormatError(ValueError):
    """A resource file line did not parse; carries file and line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class TaggedToken:
    token: Token
    tag: str


@dataclass(frozen=True)
class Sentence:
    text: str
    start: int
    end: int


# Characters that always stand alone as tokens. Hyphens, slashes and
# apostrophes stay inside words ("35-kilogram", "and/or", "Bruton's").
_TOKEN_RE = re.compile(r"[()\[\]{},?.:;!\"]|[^\s()\[\]{},?.:;!\"]+")

# Tags the suffix heuristics can emit on top of whatever the lexicon declares.
_HEURISTIC_TAGS = frozenset({"NN", "NNS", "NNP", "JJ", "VBZ", "VBG", "VBN", "RB"})


def tokenize(text: str) -> list[Token]:
    """Split text into tokens with character offsets.

    Listed punctuation characters become single-character tokens; any other
    run of non-space characters is one token.
    """
    return [Token(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def ngrams(tokens: Sequence[str], n: int) -> list[str]:
    """Sliding window of size n over the token surfaces, joined with '-'."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return ["-".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def remove_stopwords(tokens: Iterable[str], stoplist: set[str]) -> list[str]:
    """Case-insensitive stopword filter; the stoplist holds lowercase words."""
    return [t for t in tokens if t.lower() not in stoplist]


def load_stopwords(path) -> set[str]:
    """One lowercase word per line; blank lines and '#' comments ignored."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return words


def load_abbreviations(path) -> set[str]:
    """Abbreviations (with trailing period) that never end a sentence."""
    abbrevs = set()
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not line.endswith("."):
            raise ResourceFormatError(path, i, f"abbreviation must end with a period: {line!r}")
        abbrevs.add(line.lower())
    return abbrevs


_BOUNDARY_RE = re.compile(r"[.!?]")
_LEADING_PUNCT = "([\"'"


def split_sentences(text: str, abbreviations: set[str] | None = None) -> list[Sentence]:
    """Rule-based sentence splitting.

    A '.', '!' or '?' ends a sentence when it is followed by whitespace and
    then an uppercase letter or digit, unless the word it terminates is in
    the abbreviation list (compared with its trailing period, case folded).
    """
    abbreviations = abbreviations or set()
    boundaries = []
    for m in _BOUNDARY_RE.finditer(text):
        pos = m.end()
        if pos >= len(text):
            continue
        if not text[pos].isspace():
            continue
        rest = text[pos:].lstrip()
        if not rest or not (rest[0].isupper() or rest[0].isdigit()):
            continue
        if m.group(0) == ".":
            word_start = pos - 1
            while word_start > 0 and not text[word_start - 1].isspace():
                word_start -= 1
            word = text[word_start:pos].lstrip(_LEADING_PUNCT).lower()
            if word in abbreviations:
                continue
        boundaries.append(pos)

    sentences = []
    cursor = 0
    for b in boundaries + [len(text)]:
        chunk = text[cursor:b]
        stripped = chunk.strip()
        if stripped:
            start = cursor + (len(chunk) - len(chunk.lstrip()))
            end = start + len(stripped)
            sentences.append(Sentence(text[start:end], start, end))
        cursor = b
    return sentences


class TagLexicon:
    """Word -> POS lookup table read from a TSV file.

    The file also implicitly declares the verb stems used by the '-s' rule
    (every entry tagged VB) and the closed tag inventory.
    """

    def __init__(self, entries: dict[str, str]):
        self.entries = dict(entries)
        self.verb_stems = {w for w, t in self.entries.items() if t == "VB"}
        self.inventory = frozenset(self.entries.values()) | _HEURISTIC_TAGS

    @classmethod
    def from_file(cls, path) -> "TagLexicon":
        entries: dict[str, str] = {}
        for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1].strip():
                raise ResourceFormatError(path, i, f"expected 'word<TAB>tag', got {line!r}")
            entries[parts[0].lower()] = parts[1].strip()
        return cls(entries)


def _is_capitalized(surface: str) -> bool:
    return surface[:1].isalpha() and surface[:1].isupper()


def pos_tag(tokens: Sequence[Token], lexicon: TagLexicon) -> list[TaggedToken]:
    """Tag tokens by lexicon lookup, then suffix heuristics, then NN.

    Heuristics, in order: -s on a known verb stem is VBZ, -ing is VBG,
    -ed is VBN, -ly is RB, a capitalized non-initial word is NNP, a
    digit-led hyphenated word is JJ, a plural-looking -s word is NNS.
    """
    tagged = []
    for i, tok in enumerate(tokens):
        lower = tok.surface.lower()
        tag = lexicon.entries.get(lower)
        if tag is None:
            tag = _heuristic_tag(tok.surface, lower, i, lexicon)
        tagged.append(TaggedToken(tok, tag))
    return tagged


def _heuristic_tag(surface: str, lower: str, index: int, lexicon: TagLexicon) -> str:
    if lower.endswith("s") and (lower[:-1] in lexicon.verb_stems or lower[:-2] in lexicon.verb_stems):
        return "VBZ"
    if lower.endswith("ing") and len(lower) > 4:
        return "VBG"
    if lower.endswith("ed") and len(lower) > 3:
        return "VBN"
    if lower.endswith("ly") and len(lower) > 3:
        return "RB"
    if index > 0 and _is_capitalized(surface):
        return "NNP"
    if "-" in surface and surface[:1].isdigit():
        return "JJ"
    if lower.endswith("s") and not lower.endswith("ss") and len(lower) >= 3 and lower.isalpha():
        return "NNS"
    return "NN"


# ---------------------------------------------------------------------------
# Porter stemmer
# ---------------------------------------------------------------------------
#
# Suffix-stripping stemmer after Porter (1980), in the form distributed by
# the author (which folds in the widely adopted 'bli'/'logi' step-2
# adjustments). Operates on lowercase words; anything shorter than three
# characters is returned unchanged.

_VOWELS = "aeiou"


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    # Number of VC sequences in the [C](VC)^m[V] decomposition.
    m = 0
    i = 0
    n = len(stem)
    while i < n and _is_cons(stem, i):
        i += 1
    while True:
        while i < n and not _is_cons(stem, i):
            i += 1
        if i >= n:
            return m
        m += 1
        while i < n and _is_cons(stem, i):
            i += 1
        if i >= n:
            return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _ends_double_cons(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_cons(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    if not (_is_cons(word, len(word) - 3) and not _is_cons(word, len(word) - 2) and _is_cons(word, len(word) - 1)):
        return False
    return word[-1] not in "wxy"


def _replace(word: str, suffix: str, repl: str, min_measure: int) -> str:
    # Apply 'suffix -> repl' when the remaining stem has measure > min_measure.
    stem = word[: len(word) - len(suffix)]
    if _measure(stem) > min_measure:
        return stem + repl
    return word


def _step1ab(word: str) -> str:
    if word.endswith("s"):
        if word.endswith("sses"):
            word = word[:-2]
        elif word.endswith("ies"):
            word = word[:-3] + "i"
        elif not word.endswith("ss"):
            word = word[:-1]
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
        return word
    for suffix in ("ed", "ing"):
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if not _has_vowel(stem):
                return word
            if stem.endswith(("at", "bl", "iz")):
                return stem + "e"
            if _ends_double_cons(stem) and stem[-1] not in "lsz":
                return stem[:-1]
            if _measure(stem) == 1 and _ends_cvc(stem):
                return stem + "e"
            return stem
    return word


def _step1c(word: str) -> str:
    if word.endswith("y") and _has_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


_STEP2 = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("bli", "ble"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
    ("logi", "log"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

# Ordered so that longer suffixes shadow their tails (ement > ment > ent).
_STEP4 = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def _step4(word: str) -> str:
    for suffix in _STEP4:
        if not word.endswith(suffix):
            continue
        stem_part = word[: len(word) - len(suffix)]
        if suffix == "ion" and not (stem_part and stem_part[-1] in "st"):
            continue
        if _measure(stem_part) > 1:
            return stem_part
        return word  # matched suffix but measure too small; no further tries
    return word


def _step5(word: str) -> str:
    if word.endswith("e"):
        m = _measure(word[:-1])
        if m > 1 or (m == 1 and not _ends_cvc(word[:-1])):
            word = word[:-1]
    if word.endswith("ll") and _measure(word[:-1]) > 1:
        word = word[:-1]
    return word


def stem(word: str) -> str:
    """Porter stem of a word (lowercased first)."""
    word = word.lower()
    if len(word) <= 2:
        return word
    word = _step1ab(word)
    word = _step1c(word)
    for suffix, repl in _STEP2:
        if word.endswith(suffix):
            word = _replace(word, suffix, repl, 0)
            break
    for suffix, repl in _STEP3:
        if word.endswith(suffix):
            word = _replace(word, suffix, repl, 0)
            break
    word = _step4(word)
    word = _step5(word)
    return word
