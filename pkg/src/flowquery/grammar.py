"""Context-free grammar with entity placeholders and semantic actions.

Grammar files hold one rule per line::

    # comment
    start Query
    Query := ShowVerb Columns 'in' $NodeType => set(frame(visualize), columns, %2)

Right-hand symbols are grammar variables (bare names), quoted literal words,
entity placeholders (``$Column`` ...), coarse POS classes (``@VERB`` ...),
or the wildcard ``*``.  Each rule carries a semantic action built from
``frame``/``set``/``list``/``merge`` calls, positional references ``%n`` to
the values of right-hand constituents, and bare-word/number/string constants.
"""

import re
from dataclasses import dataclass, field

from . import tagging
from .errors import GrammarError

LITERAL = "literal"
VARIABLE = "variable"
PLACEHOLDER = "placeholder"
POS_CLASS = "pos"
WILDCARD = "wildcard"

PLACEHOLDER_KINDS = ("Column", "NodeLabel", "NodeType", "DatasetName", "Number", "Quoted")

POS_CLASSES = {
    "VERB": tagging.VERB,
    "NOUN": tagging.NOUN,
    "PREP": tagging.PREPOSITION,
    "DET": tagging.DETERMINER,
    "CONJ": tagging.CONJUNCTION,
}


@dataclass(frozen=True)
class Symbol:
    kind: str
    value: str = ""

    def __str__(self):
        if self.kind == LITERAL:
            return f"'{self.value}'"
        if self.kind == PLACEHOLDER:
            return f"${self.value}"
        if self.kind == POS_CLASS:
            return f"@{self.value}"
        if self.kind == WILDCARD:
            return "*"
        return self.value


def literal(word: str) -> Symbol:
    return Symbol(LITERAL, word.lower())


def variable(name: str) -> Symbol:
    return Symbol(VARIABLE, name)


def placeholder(kind: str) -> Symbol:
    return Symbol(PLACEHOLDER, kind)


# -- semantic action expressions ---------------------------------------------


@dataclass(frozen=True)
class Ref:
    """Positional reference %n to the value of the n-th RHS constituent."""

    position: int

    def __str__(self):
        return f"%{self.position}"


@dataclass(frozen=True)
class Const:
    value: object  # str or float

    def __str__(self):
        if isinstance(self.value, str):
            return self.value if re.fullmatch(r"[\w-]+", self.value) else f"'{self.value}'"
        if isinstance(self.value, float) and self.value.is_integer():
            return str(int(self.value))
        return str(self.value)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple = ()

    def __str__(self):
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


def _max_ref(expr) -> int:
    if isinstance(expr, Ref):
        return expr.position
    if isinstance(expr, Call):
        return max((_max_ref(a) for a in expr.args), default=0)
    return 0


class _ActionParser:
    _TOKENS = re.compile(r"%\d+|[A-Za-z_][\w-]*|\d+(?:\.\d+)?|'(?:[^'\\]|\\.)*'|[(),]")

    def __init__(self, text: str, where: str):
        self.tokens = self._TOKENS.findall(text)
        if "".join(self.tokens).replace(" ", "") != re.sub(r"\s+", "", text):
            raise GrammarError(f"{where}: malformed action '{text}'")
        self.where = where
        self.pos = 0

    def _peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self) -> str:
        token = self._peek()
        if token is None:
            raise GrammarError(f"{self.where}: action ended unexpectedly")
        self.pos += 1
        return token

    def parse(self):
        expr = self._expression()
        if self._peek() is not None:
            raise GrammarError(f"{self.where}: trailing tokens in action")
        return expr

    def _expression(self):
        token = self._next()
        if token.startswith("%"):
            return Ref(int(token[1:]))
        if token.startswith("'"):
            return Const(token[1:-1].replace("\\'", "'"))
        if re.fullmatch(r"\d+(?:\.\d+)?", token):
            return Const(float(token))
        if not re.fullmatch(r"[A-Za-z_][\w-]*", token):
            raise GrammarError(f"{self.where}: unexpected '{token}' in action")
        if self._peek() == "(":
            self._next()
            args = []
            if self._peek() != ")":
                args.append(self._expression())
                while self._peek() == ",":
                    self._next()
                    args.append(self._expression())
            if self._next() != ")":
                raise GrammarError(f"{self.where}: expected ')' in action")
            return Call(token, tuple(args))
        return Const(token)


@dataclass(frozen=True)
class Rule:
    id: int
    lhs: str
    rhs: tuple[Symbol, ...]
    action: object

    def __str__(self):
        rhs = " ".join(str(s) for s in self.rhs)
        return f"{self.lhs} := {rhs} => {self.action}"


@dataclass
class GrammarSpec:
    start: str
    rules: list[Rule]
    variables: set[str] = field(default_factory=set)
    terminals: set[str] = field(default_factory=set)

    def __post_init__(self):
        self.variables = {r.lhs for r in self.rules}
        self.terminals = {
            s.value for r in self.rules for s in r.rhs if s.kind == LITERAL
        }
        self.by_lhs: dict[str, list[Rule]] = {}
        for rule in self.rules:
            self.by_lhs.setdefault(rule.lhs, []).append(rule)


_SYMBOL_PATTERN = re.compile(
    r"'(?P<lit>(?:[^'\\]|\\.)*)'|\$(?P<ph>\w+)|@(?P<pos>\w+)|(?P<wild>\*)|(?P<var>[A-Za-z_]\w*)"
)


def _parse_symbols(text: str, where: str) -> tuple[Symbol, ...]:
    symbols = []
    rest = text.strip()
    while rest:
        match = _SYMBOL_PATTERN.match(rest)
        if not match:
            raise GrammarError(f"{where}: cannot read symbol at '{rest[:20]}'")
        if match["lit"] is not None:
            symbols.append(literal(match["lit"].replace("\\'", "'")))
        elif match["ph"] is not None:
            if match["ph"] not in PLACEHOLDER_KINDS:
                raise GrammarError(f"{where}: unknown placeholder ${match['ph']}")
            symbols.append(placeholder(match["ph"]))
        elif match["pos"] is not None:
            if match["pos"] not in POS_CLASSES:
                raise GrammarError(f"{where}: unknown POS class @{match['pos']}")
            symbols.append(Symbol(POS_CLASS, match["pos"]))
        elif match["wild"] is not None:
            symbols.append(Symbol(WILDCARD))
        else:
            symbols.append(variable(match["var"]))
        rest = rest[match.end() :].lstrip()
    if not symbols:
        raise GrammarError(f"{where}: empty right-hand side")
    return tuple(symbols)


def load_grammar(text: str) -> GrammarSpec:
    start = None
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"line {lineno}"
        if line.startswith("start "):
            if start is not None:
                raise GrammarError(f"{where}: duplicate start declaration")
            start = line.split(None, 1)[1].strip()
            continue
        if ":=" not in line:
            raise GrammarError(f"{where}: expected 'LHS := ...' or 'start <Var>'")
        lhs, _, tail = line.partition(":=")
        lhs = lhs.strip()
        if not re.fullmatch(r"[A-Za-z_]\w*", lhs):
            raise GrammarError(f"{where}: bad rule name '{lhs}'")
        if "=>" not in tail:
            raise GrammarError(f"{where}: rule is missing '=> action'")
        rhs_text, _, action_text = tail.partition("=>")
        rhs = _parse_symbols(rhs_text, where)
        action = _ActionParser(action_text.strip(), where).parse()
        rules.append(Rule(len(rules), lhs, rhs, action))
    if start is None:
        raise GrammarError("grammar has no start declaration")
    spec = GrammarSpec(start, rules)
    if start not in spec.variables:
        raise GrammarError(f"start variable '{start}' has no rules")
    for rule in rules:
        for symbol in rule.rhs:
            if symbol.kind == VARIABLE and symbol.value not in spec.variables:
                raise GrammarError(
                    f"rule {rule.id} ({rule.lhs}): undefined variable '{symbol.value}'"
                )
    return spec


def validate_grammar(spec: GrammarSpec) -> list[str]:
    """Non-fatal diagnostics: unreachable variables and out-of-arity actions."""
    warnings = []
    reachable = {spec.start}
    frontier = [spec.start]
    while frontier:
        for rule in spec.by_lhs.get(frontier.pop(), []):
            for symbol in rule.rhs:
                if symbol.kind == VARIABLE and symbol.value not in reachable:
                    reachable.add(symbol.value)
                    frontier.append(symbol.value)
    for name in sorted(spec.variables - reachable):
        warnings.append(f"unreachable: {name}")
    for rule in spec.rules:
        top = _max_ref(rule.action)
        if top > len(rule.rhs):
            warnings.append(
                f"rule {rule.id} ({rule.lhs}): action references %{top} "
                f"but the rule has {len(rule.rhs)} symbols"
            )
    return warnings


def serialize_grammar(spec: GrammarSpec) -> str:
    lines = [f"start {spec.start}"]
    lines.extend(str(rule) for rule in spec.rules)
    return "\n".join(lines) + "\n"
