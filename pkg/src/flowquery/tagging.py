"""Tokenization, entity tagging with approximate matching, and word classes.

Queries mention dataset and diagram entities by name, usually with typos and
case differences.  The tagger compares every k-gram of the query against the
entity names currently in scope and marks close matches, which the parser
then consumes through grammar placeholders.
"""

import re
from dataclasses import dataclass, field, replace

from .errors import RangeError

# Tag categories, in default precedence order for ambiguous matches.
COLUMN = "Column"
NODE_LABEL = "NodeLabel"
NODE_TYPE = "NodeType"
DATASET_NAME = "DatasetName"
CATEGORIES = (COLUMN, NODE_LABEL, NODE_TYPE, DATASET_NAME)

# Display colors per category, consumed by the UI layer.
CATEGORY_COLORS = {
    COLUMN: "green",
    NODE_LABEL: "lightgreen",
    NODE_TYPE: "purple",
    DATASET_NAME: "lightblue",
}

# Coarse part-of-speech classes.
VERB = "Verb"
NOUN = "Noun"
ADJECTIVE = "Adjective"
PREPOSITION = "Preposition"
DETERMINER = "Determiner"
CONJUNCTION = "Conjunction"
NUMBER = "Number"
PRONOUN = "Pronoun"
OTHER = "Other"

# Function indicators.
VISUALIZE = "Visualize"
ENCODE = "Encode"
FILTER = "Filter"
MERGE = "Merge"
HIGHLIGHT = "Highlight"
LINK = "Link"
LOAD = "Load"
UNDO = "Undo"
REDO = "Redo"
REMOVE = "Remove"
INDICATORS = (VISUALIZE, ENCODE, FILTER, MERGE, HIGHLIGHT, LINK, LOAD, UNDO, REDO, REMOVE)

NUMBER_WORDS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11,
    "twelve": 12, "thirteen": 13, "fourteen": 14, "fifteen": 15,
    "sixteen": 16, "seventeen": 17, "eighteen": 18, "nineteen": 19,
    "twenty": 20,
}


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int

    @property
    def normalized(self) -> str:
        return self.text.lower()

    @property
    def is_word(self) -> bool:
        return bool(re.search(r"\w", self.text))


_TOKEN_PATTERN = re.compile(r"\d+\.\d+|\w+(?:['-]\w+)*|[^\w\s]")


def tokenize(query: str) -> list[Token]:
    """Split on whitespace and punctuation; punctuation stays as tokens."""
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_PATTERN.finditer(query)]


def numeric_value(word: str) -> float | None:
    """Value of a numeric literal or a small spelled-out number, else None."""
    lowered = word.lower()
    if lowered in NUMBER_WORDS:
        return float(NUMBER_WORDS[lowered])
    try:
        return float(word)
    except ValueError:
        return None


def levenshtein_ratio(a: str, b: str) -> float:
    """Case-insensitive edit distance divided by the longer string length."""
    a, b = a.lower(), b.lower()
    if not a and not b:
        return 0.0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,  # deletion
                    current[j - 1] + 1,  # insertion
                    previous[j - 1] + (ca != cb),  # substitution
                )
            )
        previous = current
    return previous[len(b)] / len(a)


@dataclass(frozen=True)
class Candidate:
    category: str
    value: str
    ratio: float
    utterance: str


@dataclass(frozen=True)
class TagSpan:
    """A run of tokens recognized as an entity mention.

    ``candidates`` holds every in-threshold reading of the same tokens so a
    user can override the default choice; ``enabled`` is False once a user
    dismissed the tag entirely.
    """

    start: int
    end: int  # exclusive token index
    category: str
    value: str
    ratio: float
    candidates: tuple[Candidate, ...]
    enabled: bool = True

    @property
    def length(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "category": self.category,
            "value": self.value,
            "ratio": round(self.ratio, 6),
            "color": CATEGORY_COLORS[self.category],
            "enabled": self.enabled,
            "candidates": [
                {"category": c.category, "value": c.value, "ratio": round(c.ratio, 6)}
                for c in self.candidates
            ],
        }


@dataclass(frozen=True)
class TaggerConfig:
    max_gram: int = 3
    ratio_threshold: float = 0.2

    def __post_init__(self):
        if self.max_gram < 1:
            raise RangeError("max_gram must be at least 1")
        if not 0 <= self.ratio_threshold < 1:
            raise RangeError("ratio_threshold must lie in [0, 1)")


@dataclass
class TagContext:
    """Entity names in scope: each category maps utterance → canonical value."""

    columns: dict[str, str] = field(default_factory=dict)
    node_labels: dict[str, str] = field(default_factory=dict)
    node_types: dict[str, str] = field(default_factory=dict)
    dataset_names: dict[str, str] = field(default_factory=dict)

    @classmethod
    def build(cls, columns=(), node_labels=(), node_types=(), dataset_names=()) -> "TagContext":
        def as_map(entries):
            if isinstance(entries, dict):
                return dict(entries)
            return {e: e for e in entries}

        return cls(as_map(columns), as_map(node_labels), as_map(node_types), as_map(dataset_names))

    def entries(self):
        for category, table in (
            (COLUMN, self.columns),
            (NODE_LABEL, self.node_labels),
            (NODE_TYPE, self.node_types),
            (DATASET_NAME, self.dataset_names),
        ):
            for utterance, value in table.items():
                yield category, utterance, value


def _candidate_order(candidate: Candidate):
    return (candidate.ratio, CATEGORIES.index(candidate.category), candidate.value)


# A fuzzy name mention never ends on one of these, nor starts on a
# preposition or conjunction: a trailing "by" or a leading "by" belongs to
# the sentence, not to the name, even when the edit ratio of the longer
# gram still clears the threshold.  Leading determiners are exempt (the
# gram "a scatterplot" absorbs its article), and so are exact mentions of
# a name that genuinely contains such a word.
_TRAILING_CLASSES = frozenset({PREPOSITION, DETERMINER, CONJUNCTION})
_LEADING_CLASSES = frozenset({PREPOSITION, CONJUNCTION})


def tag_special_utterances(
    tokens: list[Token],
    context: TagContext,
    config: TaggerConfig = TaggerConfig(),
    lexicon: "Lexicon | None" = None,
) -> list[TagSpan]:
    """Mark token runs that name a column, node label, node type, or dataset.

    Every k-gram (k up to ``max_gram``, extended to the longest multi-word
    name in scope) is compared against every in-scope name; matches within
    the ratio threshold compete per span, and overlapping spans are resolved
    longest-first, then by lowest ratio, then by category precedence.  With
    a ``lexicon``, inexact grams ending on a preposition, determiner, or
    conjunction, or starting on a preposition or conjunction, are never
    proposed.
    """
    entries = list(context.entries())
    if not entries or not tokens:
        return []
    longest = max(len(utterance.split()) for _, utterance, _ in entries)
    max_k = max(config.max_gram, longest)

    proposals = []
    for start in range(len(tokens)):
        for k in range(1, max_k + 1):
            end = start + k
            if end > len(tokens):
                break
            window = tokens[start:end]
            # k-grams never span punctuation such as commas
            if any(not t.is_word for t in window):
                break
            gram = " ".join(t.normalized for t in window)
            candidates = []
            for category, utterance, value in entries:
                ratio = levenshtein_ratio(gram, utterance)
                if ratio <= config.ratio_threshold:
                    candidates.append(Candidate(category, value, ratio, utterance))
            if candidates:
                candidates.sort(key=_candidate_order)
                best = candidates[0]
                if (
                    best.ratio > 0.0
                    and lexicon is not None
                    and (
                        lexicon.get(window[-1].normalized) in _TRAILING_CLASSES
                        or lexicon.get(window[0].normalized) in _LEADING_CLASSES
                    )
                ):
                    continue
                proposals.append(
                    TagSpan(start, end, best.category, best.value, best.ratio, tuple(candidates))
                )

    proposals.sort(
        key=lambda s: (-s.length, s.ratio, CATEGORIES.index(s.category), s.start)
    )
    chosen: list[TagSpan] = []
    taken: set[int] = set()
    for span in proposals:
        covered = set(range(span.start, span.end))
        if covered & taken:
            continue
        taken |= covered
        chosen.append(span)
    chosen.sort(key=lambda s: s.start)
    return chosen


def override_tag(spans: list[TagSpan], index: int, choice) -> list[TagSpan]:
    """Re-pick a span's reading; ``choice`` is a candidate or ``"none"``.

    Picking "none" disables the span so its tokens parse as plain words;
    picking any listed candidate (re-)enables it with that reading.
    """
    if not 0 <= index < len(spans):
        raise RangeError(f"no tag span at index {index}")
    span = spans[index]
    updated = list(spans)
    if choice == "none":
        updated[index] = replace(span, enabled=False)
        return updated
    if isinstance(choice, Candidate):
        wanted = (choice.category, choice.value)
    else:
        wanted = (choice[0], choice[1])
    for candidate in span.candidates:
        if (candidate.category, candidate.value) == wanted:
            updated[index] = replace(
                span,
                category=candidate.category,
                value=candidate.value,
                ratio=candidate.ratio,
                enabled=True,
            )
            return updated
    raise RangeError(f"{wanted} is not a candidate of span {index}")


# ---------------------------------------------------------------------------
# Word classes


class Lexicon:
    """Word → class table loaded from a tab-separated resource file."""

    def __init__(self, entries: dict[str, str]):
        self.entries = {k.lower(): v for k, v in entries.items()}

    @classmethod
    def parse(cls, text: str, valid: tuple[str, ...]) -> "Lexicon":
        entries = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"lexicon line {lineno}: expected 'word<TAB>class'")
            word, cls_name = parts[0].strip(), parts[1].strip()
            if cls_name not in valid:
                raise ValueError(f"lexicon line {lineno}: unknown class '{cls_name}'")
            entries[word] = cls_name
        return cls(entries)

    def get(self, word: str) -> str | None:
        return self.entries.get(word.lower())


def pos_tag(tokens: list[Token], lexicon: Lexicon) -> list[str]:
    """Coarse POS class per token: lexicon lookup plus shape heuristics."""
    tags = []
    for token in tokens:
        word = token.normalized
        from_lexicon = lexicon.get(word)
        if from_lexicon is not None:
            tags.append(from_lexicon)
        elif numeric_value(word) is not None:
            tags.append(NUMBER)
        elif not token.is_word:
            tags.append(OTHER)
        elif word.endswith("ly"):
            tags.append(OTHER)
        elif word.endswith(("ed", "ize", "ise")):
            tags.append(VERB)
        else:
            tags.append(NOUN)
    return tags


class FunctionWordClassifier:
    """Maps verbs like "show" or "find" to the function they indicate.

    Backed by a curated synonym lexicon; an optional scorer callback may
    extend coverage (it receives an unknown word and returns an indicator
    or None).
    """

    def __init__(self, lexicon: Lexicon, scorer=None):
        self.lexicon = lexicon
        self.scorer = scorer

    def classify(self, word: str) -> str | None:
        found = self.lexicon.get(word)
        if found is not None:
            return found
        if self.scorer is not None:
            return self.scorer(word.lower())
        return None
