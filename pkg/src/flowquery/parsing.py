"""Chart parsing over tagged tokens, derivation ranking, and training.

The parser searches bottom-up for all ways the grammar derives the full
token sequence, evaluating semantic actions as it goes.  Rules may have any
arity; an implicit left-to-right dotted walk matches their right-hand sides,
so the grammar file never needs binarization.  Derivations are ranked by a
linear model over rule-application counts, with a deterministic tie-break.
"""

import random
from collections import Counter
from dataclasses import dataclass

from .errors import ParseRejected, TrainingDataError
from .frames import EntityRef, FunctionFrame, command_signature, evaluate_action
from .grammar import (
    GrammarSpec,
    LITERAL,
    PLACEHOLDER,
    POS_CLASS,
    POS_CLASSES,
    Rule,
    VARIABLE,
    WILDCARD,
)
from .tagging import FunctionWordClassifier, TagSpan, Token, numeric_value

DEFAULT_BEAM_LIMIT = 64
MAX_WILDCARD_TOKENS = 4

# Words that directly name a function; a grammar literal for one of them
# also accepts classified synonyms ("draw" satisfies the literal 'visualize').
_CANONICAL_INDICATOR_WORDS = {
    "visualize": "Visualize",
    "encode": "Encode",
    "filter": "Filter",
    "merge": "Merge",
    "highlight": "Highlight",
    "link": "Link",
    "load": "Load",
    "undo": "Undo",
    "redo": "Redo",
    "remove": "Remove",
}


@dataclass
class Derivation:
    frames: list[FunctionFrame]
    features: dict[str, int]
    score: float
    size: int
    rule_seq: tuple[int, ...]

    def signature(self) -> str:
        return command_signature(self.frames)


def features(derivation: Derivation) -> dict[str, int]:
    return dict(derivation.features)


def score_features(feature_counts, weights: dict[str, float]) -> float:
    return sum(weights.get(name, 0.0) * count for name, count in feature_counts.items())


@dataclass
class _Item:
    value: object
    features: Counter
    score: float
    size: int
    rule_seq: tuple[int, ...]

    def sort_key(self):
        return (-self.score, self.size, self.rule_seq)


class _Chart:
    def __init__(
        self,
        tokens: list[Token],
        tag_spans: list[TagSpan],
        pos_tags: list[str],
        grammar: GrammarSpec,
        weights: dict[str, float],
        beam_limit: int,
        classifier: FunctionWordClassifier | None,
    ):
        self.tokens = tokens
        self.pos_tags = pos_tags
        self.grammar = grammar
        self.weights = weights
        self.beam_limit = beam_limit
        self.classifier = classifier
        self.spans_at: dict[int, list[TagSpan]] = {}
        for span in tag_spans:
            if span.enabled:
                self.spans_at.setdefault(span.start, []).append(span)
        self.cells: dict[tuple[int, int, str], list[_Item]] = {}

    # -- terminal symbol matching -------------------------------------------

    def _literal_matches(self, word: str, token: Token) -> bool:
        if token.normalized == word:
            return True
        indicator = _CANONICAL_INDICATOR_WORDS.get(word)
        if indicator is not None and self.classifier is not None:
            return self.classifier.classify(token.normalized) == indicator
        return False

    def _symbol_matches(self, symbol, start: int, max_end: int):
        """Yield (end, value, features, size, rule_seq) for one RHS symbol."""
        tokens = self.tokens
        if symbol.kind == VARIABLE:
            for end in range(start + 1, max_end + 1):
                for item in self.cells.get((start, end, symbol.value), ()):
                    yield end, item.value, item.features, item.size, item.rule_seq
            return
        if start >= len(tokens):
            return
        token = tokens[start]
        if symbol.kind == LITERAL:
            if start + 1 <= max_end and self._literal_matches(symbol.value, token):
                yield start + 1, token.text, None, 0, ()
        elif symbol.kind == POS_CLASS:
            if start + 1 <= max_end and self.pos_tags[start] == POS_CLASSES[symbol.value]:
                yield start + 1, token.text, None, 0, ()
        elif symbol.kind == PLACEHOLDER:
            yield from self._placeholder_matches(symbol.value, start, max_end)
        elif symbol.kind == WILDCARD:
            limit = min(max_end, start + MAX_WILDCARD_TOKENS)
            feats = Counter({"wild": 1})
            for end in range(start + 1, limit + 1):
                if tokens[end - 1].text == ",":
                    break  # wildcards never cross commas
                text = " ".join(t.text for t in tokens[start:end])
                yield end, text, feats, 0, ()

    def _placeholder_matches(self, kind: str, start: int, max_end: int):
        feats = Counter({f"ph:{kind}": 1})
        if kind == "Number":
            value = numeric_value(self.tokens[start].normalized)
            if value is not None and start + 1 <= max_end:
                yield start + 1, value, feats, 0, ()
        elif kind == "Quoted":
            if self.tokens[start].text != '"':
                return
            for end in range(start + 3, max_end + 1):
                if self.tokens[end - 1].text == '"':
                    text = " ".join(t.text for t in self.tokens[start + 1 : end - 1])
                    yield end, text, feats, 0, ()
                    return
        else:
            for span in self.spans_at.get(start, ()):
                if span.category == kind and span.end <= max_end:
                    yield span.end, EntityRef(kind, span.value), feats, 0, ()

    # -- rule application -----------------------------------------------------

    def _match_rule(self, rule: Rule, start: int, end: int):
        """Yield complete matches of the rule's RHS over exactly [start, end)."""
        matches = []

        def walk(index: int, pos: int, values: list, parts: list):
            if index == len(rule.rhs):
                if pos == end:
                    matches.append((list(values), list(parts)))
                return
            tail = len(rule.rhs) - index - 1  # later symbols need ≥ 1 token each
            for stop, value, feats, size, seq in self._symbol_matches(
                rule.rhs[index], pos, end - tail
            ):
                values.append(value)
                parts.append((feats, size, seq))
                walk(index + 1, stop, values, parts)
                values.pop()
                parts.pop()

        walk(0, start, [], [])
        return matches

    def _build_item(self, rule: Rule, values: list, parts: list) -> _Item:
        feats = Counter({f"r{rule.id}": 1})
        size = 1
        seq = [rule.id]
        for child_feats, child_size, child_seq in parts:
            if child_feats:
                feats.update(child_feats)
            size += child_size
            seq.extend(child_seq)
        value = evaluate_action(rule.action, values)
        return _Item(value, feats, score_features(feats, self.weights), size, tuple(seq))

    def _add_items(self, start: int, end: int, var: str, items: list[_Item]) -> bool:
        if not items:
            return False
        cell = self.cells.setdefault((start, end, var), [])
        seen = {(i.rule_seq, repr(i.value)) for i in cell}
        added = False
        for item in items:
            key = (item.rule_seq, repr(item.value))
            if key not in seen:
                seen.add(key)
                cell.append(item)
                added = True
        if added:
            cell.sort(key=_Item.sort_key)
            del cell[self.beam_limit :]
        return added

    def run(self) -> None:
        n = len(self.tokens)
        unary = [r for r in self.grammar.rules if len(r.rhs) == 1 and r.rhs[0].kind == VARIABLE]
        general = [r for r in self.grammar.rules if r not in unary]
        for length in range(1, n + 1):
            for start in range(0, n - length + 1):
                end = start + length
                for rule in general:
                    if not (len(rule.rhs) <= length):
                        continue
                    items = [
                        self._build_item(rule, values, parts)
                        for values, parts in self._match_rule(rule, start, end)
                    ]
                    self._add_items(start, end, rule.lhs, items)
                # unary rules may chain; iterate to a fixpoint
                changed = True
                rounds = 0
                while changed and rounds <= len(self.grammar.variables):
                    changed = False
                    rounds += 1
                    for rule in unary:
                        items = [
                            self._build_item(rule, values, parts)
                            for values, parts in self._match_rule(rule, start, end)
                        ]
                        if self._add_items(start, end, rule.lhs, items):
                            changed = True


def parse(
    tokens: list[Token],
    tag_spans: list[TagSpan],
    pos_tags: list[str],
    grammar: GrammarSpec,
    weights: dict[str, float] | None = None,
    beam_limit: int = DEFAULT_BEAM_LIMIT,
    classifier: FunctionWordClassifier | None = None,
) -> list[Derivation]:
    """All full-span derivations of the token sequence, best first."""
    weights = weights or {}
    if not tokens:
        raise ParseRejected("empty query")
    chart = _Chart(tokens, tag_spans, pos_tags, grammar, weights, beam_limit, classifier)
    chart.run()
    derivations = []
    for item in chart.cells.get((0, len(tokens), grammar.start), ()):
        if isinstance(item.value, FunctionFrame):
            frames = [item.value]
        elif isinstance(item.value, list) and item.value and all(
            isinstance(f, FunctionFrame) for f in item.value
        ):
            frames = item.value
        else:
            continue
        derivations.append(
            Derivation(frames, dict(item.features), item.score, item.size, item.rule_seq)
        )
    if not derivations:
        raise ParseRejected("the query does not match any grammar derivation")
    derivations.sort(key=lambda d: (-d.score, d.size, d.rule_seq))
    return derivations


# ---------------------------------------------------------------------------
# Ranker training


def train_ranker(
    examples: list[tuple[str, str]],
    parse_query,
    epochs: int = 50,
    learning_rate: float = 0.1,
    seed: int = 7,
) -> dict[str, float]:
    """Hinge-loss SGD over derivation candidates of each training query.

    ``parse_query`` maps a query text to its derivations (parsed with the
    shared grammar and a wide beam).  Per step the currently best-scoring
    derivation under loss-augmented inference is compared to the preferred
    one; a mismatch moves weight mass from the violator's features to the
    preferred derivation's features.
    """
    candidates: list[tuple[str, str, list[Derivation]]] = []
    for query, preferred in examples:
        try:
            derivations = parse_query(query)
        except ParseRejected as exc:
            raise TrainingDataError(f"training query does not parse: '{query}'") from exc
        if not any(d.signature() == preferred for d in derivations):
            raise TrainingDataError(
                f"no derivation of '{query}' has the preferred signature '{preferred}'"
            )
        candidates.append((query, preferred, derivations))

    weights: dict[str, float] = {}
    rng = random.Random(seed)
    order = list(range(len(candidates)))
    for _ in range(epochs):
        rng.shuffle(order)
        for index in order:
            _, preferred, derivations = candidates[index]

            def rescored(d: Derivation) -> float:
                return score_features(d.features, weights)

            gold = max(
                (d for d in derivations if d.signature() == preferred),
                key=lambda d: (rescored(d), -d.size),
            )
            violator = max(
                derivations,
                key=lambda d: (
                    rescored(d) + (0.0 if d.signature() == preferred else 1.0),
                    -d.size,
                ),
            )
            if violator.signature() != preferred:
                for name, count in gold.features.items():
                    weights[name] = weights.get(name, 0.0) + learning_rate * count
                for name, count in violator.features.items():
                    weights[name] = weights.get(name, 0.0) - learning_rate * count
    return {name: value for name, value in weights.items() if value != 0.0}


# ---------------------------------------------------------------------------
# Plain-text persistence for weights and training examples


def format_weights(weights: dict[str, float]) -> str:
    lines = [f"{name}\t{weights[name]!r}" for name in sorted(weights)]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_weights(text: str) -> dict[str, float]:
    weights = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise TrainingDataError(f"weights line {lineno}: expected 'feature<TAB>weight'")
        try:
            weights[parts[0]] = float(parts[1])
        except ValueError:
            raise TrainingDataError(f"weights line {lineno}: bad number '{parts[1]}'") from None
    return weights


def parse_training_examples(text: str) -> list[tuple[str, str]]:
    examples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise TrainingDataError(
                f"training line {lineno}: expected 'query<TAB>frame-signature'"
            )
        query, _, signature = line.partition("\t")
        examples.append((query.strip(), signature.strip()))
    return examples
