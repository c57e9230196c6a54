"""Query and token completion for partially typed input.

Query completion is template based: the partial input is aligned,
case-insensitively, against a prefix of each template.  Literal template
words must match typed words (the final typed word may be a bare
prefix), name slots such as ``[column]`` align to any in-scope name of
that kind, and value slots (``[string]``, ``[number]``) swallow one
typed word.  Every aligned candidate is completed — remaining name
slots are filled with in-scope names, value slots stay visible as
placeholders — then checked against the parser; only accepted queries
are suggested, best parse score first.

Token completion is simpler: it extends the word under the cursor to
any in-scope name it prefixes, ordered by the tagger's category
precedence.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import parsing, tagging
from .errors import FlowQueryError

MAX_RESULTS = 8
_MAX_BRANCHES = 64  # cap on alignment branches explored per template

_SLOT_KINDS = {
    "[column]": tagging.COLUMN,
    "[nodetype]": tagging.NODE_TYPE,
    "[nodelabel]": tagging.NODE_LABEL,
    "[dataset]": tagging.DATASET_NAME,
}
_STRING_SLOT = "[string]"
_NUMBER_SLOT = "[number]"
_SAMPLE_STRING = "x"
_SAMPLE_NUMBER = "15"


def load_templates(text: str) -> list[str]:
    """Parse a template resource: one template per line, '#' comments."""
    templates = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            templates.append(line)
    return templates


@dataclass(frozen=True)
class Suggestion:
    text: str  # completed query; [string]/[number] remain for the user
    score: float  # parser score of the validated instantiation


def complete_query(
    partial: str,
    context: tagging.TagContext,
    grammar,
    weights,
    lexicon,
    classifier,
    templates: list[str],
    max_results: int = MAX_RESULTS,
) -> list[Suggestion]:
    """Suggest full queries extending *partial*; every result parses."""
    words = partial.split()
    open_word = bool(partial) and not partial[-1].isspace()
    names = {
        tagging.COLUMN: list(context.columns),
        tagging.NODE_TYPE: list(context.node_types),
        tagging.NODE_LABEL: list(context.node_labels),
        tagging.DATASET_NAME: list(context.dataset_names),
    }

    ranked: dict[str, tuple[float, int]] = {}
    for order, template in enumerate(templates):
        parts = template.split()
        if any(
            not names[_SLOT_KINDS[p.lower()]]
            for p in parts
            if p.lower() in _SLOT_KINDS
        ):
            continue  # a slot kind with nothing in scope cannot be offered
        for texts, done in _align(parts, words, open_word, names):
            tail = [_fill_name_slot(parts, i, names) for i in range(done, len(parts))]
            text = " ".join(texts + tail)
            probe = " ".join(
                texts + [_fill_value_slot(part) for part in tail]
            )
            if text in ranked:
                continue
            score = _parse_score(probe, context, grammar, weights, lexicon, classifier)
            if score is not None:
                ranked[text] = (score, order)

    ordered = sorted(ranked.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))
    return [Suggestion(text, score) for text, (score, _) in ordered[:max_results]]


def complete_token(partial_word: str, context: tagging.TagContext) -> list[tuple[str, str]]:
    """Extend the word being typed to in-scope names it prefixes."""
    needle = partial_word.strip().lower()
    if not needle:
        return []
    found = [
        (utterance, category)
        for category, utterance, _ in context.entries()
        if utterance.lower().startswith(needle) and len(utterance) > len(needle)
    ]
    found.sort(key=lambda uc: (tagging.CATEGORIES.index(uc[1]), len(uc[0]), uc[0]))
    return found


# --- alignment -----------------------------------------------------------------


def _align(parts, words, open_word, names):
    """Yield (texts, parts_consumed) for every way *words* covers a prefix.

    ``texts`` is the rendering of the consumed parts: literal words as
    written in the template, name slots as the in-scope name they
    matched, value slots as the word the user supplied.
    """
    stack = [(0, 0, [])]
    explored = 0
    while stack:
        part_idx, word_idx, texts = stack.pop()
        if word_idx == len(words):
            yield texts, part_idx
            continue
        if part_idx == len(parts):
            continue  # typed more than this template holds
        explored += 1
        if explored > _MAX_BRANCHES:
            return
        part = parts[part_idx]
        lower = part.lower()
        last = word_idx == len(words) - 1
        word = words[word_idx]
        if lower in _SLOT_KINDS:
            for entry in names[_SLOT_KINDS[lower]]:
                consumed = _match_name(entry, words[word_idx:], open_word)
                if consumed:
                    stack.append((part_idx + 1, word_idx + consumed, texts + [entry]))
        elif _STRING_SLOT in lower:
            filled = part.lower().replace(_STRING_SLOT, word.strip('"'))
            stack.append((part_idx + 1, word_idx + 1, texts + [filled]))
        elif _NUMBER_SLOT in lower:
            if tagging.numeric_value(word) is not None:
                stack.append((part_idx + 1, word_idx + 1, texts + [word]))
        elif part == words[word_idx] or lower == word.lower():
            stack.append((part_idx + 1, word_idx + 1, texts + [part]))
        elif last and open_word and lower.startswith(word.lower()):
            stack.append((part_idx + 1, word_idx + 1, texts + [part]))


def _match_name(entry: str, remaining: list[str], open_word: bool) -> int:
    """How many of *remaining* an in-scope name consumes; 0 if none."""
    entry_words = entry.lower().split()
    count = len(entry_words)
    if len(remaining) >= count:
        take = [w.lower() for w in remaining[:count]]
        ends_input = len(remaining) == count
        if take[:-1] == entry_words[:-1]:
            if take[-1] == entry_words[-1]:
                return count
            if ends_input and open_word and entry_words[-1].startswith(take[-1]):
                return count
        return 0
    # The input ends inside a multi-word name: accept a typed prefix.
    typed = " ".join(w.lower() for w in remaining)
    if open_word and entry.lower().startswith(typed):
        return len(remaining)
    return 0


# --- instantiation and validation ---------------------------------------------


def _fill_name_slot(parts, index: int, names) -> str:
    """Render parts[index] for a suggestion; name slots become names."""
    lower = parts[index].lower()
    if lower not in _SLOT_KINDS:
        return parts[index]
    kind = _SLOT_KINDS[lower]
    seen = sum(1 for p in parts[:index] if p.lower() == lower)
    pool = names[kind]
    return pool[seen % len(pool)]


def _fill_value_slot(part: str) -> str:
    lower = part.lower()
    if _STRING_SLOT in lower:
        return lower.replace(_STRING_SLOT, _SAMPLE_STRING)
    if _NUMBER_SLOT in lower:
        return lower.replace(_NUMBER_SLOT, _SAMPLE_NUMBER)
    return part


def _parse_score(
    text, context, grammar, weights, lexicon, classifier
) -> float | None:
    tokens = tagging.tokenize(text)
    spans = tagging.tag_special_utterances(tokens, context, lexicon=lexicon)
    pos = tagging.pos_tag(tokens, lexicon)
    try:
        derivations = parsing.parse(
            tokens, spans, pos, grammar, weights, classifier=classifier
        )
    except FlowQueryError:
        return None
    return derivations[0].score
