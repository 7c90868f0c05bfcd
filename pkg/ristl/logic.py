"""
Formula representation

Immutable AST for RiSTL/STL formulas, a recursive-descent parser for the
textual grammar, fragment classification and structural helpers.

Grammar (highest precedence first):
    atom    := 'true' | IDENT | '(' or ')'
    unary   := '!' unary | ('F' | 'G') interval unary | atom
    until   := unary ('U' interval unary)?
    and     := until ('&' until)*
    or      := and ('|' and)*
    interval:= '[' NUMBER (',' NUMBER)? ']'
"""

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, List, Mapping, Optional, Tuple, Union

from .errors import FormulaSyntaxError, UnknownPredicateError


class PredicateKind(str, Enum):
    CHANCE = "chance"
    RISK = "risk"
    STL = "stl"


@dataclass(frozen=True)
class Interval:
    """Bounded time window [a, b] in seconds."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.a <= self.b < float("inf")):
            raise ValueError(f"invalid interval [{self.a}, {self.b}]: need 0 <= a <= b < inf")


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Predicate:
    id: str
    kind: PredicateKind = PredicateKind.RISK
    threshold: Optional[float] = None  # only for STL leaves


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    interval: Interval


@dataclass(frozen=True)
class Eventually:
    child: "Formula"
    interval: Interval


@dataclass(frozen=True)
class Always:
    child: "Formula"
    interval: Interval


Formula = Union[TrueF, Predicate, Not, And, Or, Until, Eventually, Always]
TEMPORAL = (Until, Eventually, Always)


@dataclass(frozen=True)
class FragmentReport:
    is_psi_class: bool
    is_phi_class: bool
    violations: Tuple[Tuple[str, str], ...]


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[&|!()\[\],]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            offset = len(text[pos:]) - len(text[pos:].lstrip())
            raise FormulaSyntaxError(f"unexpected character {text[pos + offset]!r}", pos + offset)
        kind = match.lastgroup
        tokens.append(_Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, known: Optional[Mapping[str, PredicateKind]]) -> None:
        self.tokens = _tokenize(text)
        self.index = 0
        self.known = known

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _peek(self, offset: int = 1) -> _Token:
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def _advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def _expect(self, text: str) -> _Token:
        if self.current.text != text:
            found = self.current.text or "end of input"
            raise FormulaSyntaxError(f"expected {text!r}, found {found!r}", self.current.pos)
        return self._advance()

    def _is_temporal(self, name: str) -> bool:
        return (
            self.current.kind == "ident"
            and self.current.text == name
            and self._peek().text == "["
        )

    def parse(self) -> Formula:
        node = self._or()
        if self.current.kind != "end":
            raise FormulaSyntaxError(f"unexpected token {self.current.text!r}", self.current.pos)
        return node

    def _or(self) -> Formula:
        node = self._and()
        while self.current.text == "|":
            self._advance()
            node = Or(node, self._and())
        return node

    def _and(self) -> Formula:
        node = self._until()
        while self.current.text == "&":
            self._advance()
            node = And(node, self._until())
        return node

    def _until(self) -> Formula:
        node = self._unary()
        if self._is_temporal("U"):
            self._advance()
            interval = self._interval()
            node = Until(node, self._unary(), interval)
        return node

    def _unary(self) -> Formula:
        token = self.current
        if token.text == "!":
            self._advance()
            return Not(self._unary())
        if self._is_temporal("F"):
            self._advance()
            interval = self._interval()
            return Eventually(self._unary(), interval)
        if self._is_temporal("G"):
            self._advance()
            interval = self._interval()
            return Always(self._unary(), interval)
        return self._atom()

    def _atom(self) -> Formula:
        token = self.current
        if token.text == "(":
            self._advance()
            node = self._or()
            self._expect(")")
            return node
        if token.kind == "ident":
            self._advance()
            if token.text == "true":
                return TrueF()
            if self._is_temporal_name(token.text) and self.current.text == "[":
                raise FormulaSyntaxError(f"misplaced operator {token.text!r}", token.pos)
            return self._predicate(token)
        found = token.text or "end of input"
        raise FormulaSyntaxError(f"expected a predicate or '(' but found {found!r}", token.pos)

    @staticmethod
    def _is_temporal_name(name: str) -> bool:
        return name in ("U", "F", "G")

    def _predicate(self, token: _Token) -> Predicate:
        if self.known is None:
            return Predicate(token.text)
        if token.text not in self.known:
            raise UnknownPredicateError(
                f"unknown predicate {token.text!r} at position {token.pos}",
                predicate=token.text,
                position=token.pos,
            )
        return Predicate(token.text, PredicateKind(self.known[token.text]))

    def _number(self) -> float:
        token = self.current
        if token.kind != "num":
            raise FormulaSyntaxError(f"expected a number, found {token.text!r}", token.pos)
        self._advance()
        return float(token.text)

    def _interval(self) -> Interval:
        start = self._expect("[")
        a = self._number()
        b = a
        if self.current.text == ",":
            self._advance()
            b = self._number()
        self._expect("]")
        if a > b:
            raise FormulaSyntaxError(f"interval [{a:g},{b:g}] has a > b", start.pos)
        return Interval(a, b)


def parse_formula(text: str, known: Optional[Mapping[str, PredicateKind]] = None) -> Formula:
    """Parse formula text into an AST.

    ``known`` maps predicate ids to their interpretation; when given, any other
    id is rejected.
    """
    return _Parser(text, known).parse()


# ---------------------------------------------------------------------------
# Structure
# ---------------------------------------------------------------------------

def children(node: Formula) -> List[Tuple[str, Formula]]:
    if isinstance(node, (Not, Eventually, Always)):
        return [("child", node.child)]
    if isinstance(node, (And, Or, Until)):
        return [("left", node.left), ("right", node.right)]
    return []


def walk(f: Formula, path: str = "root") -> Iterator[Tuple[str, Formula]]:
    """Pre-order traversal yielding (path, node)."""
    yield path, f
    for name, child in children(f):
        yield from walk(child, f"{path}.{name}")


def predicates_of(f: Formula) -> List[str]:
    seen: List[str] = []
    for _, node in walk(f):
        if isinstance(node, Predicate) and node.id not in seen:
            seen.append(node.id)
    return seen


def horizon(f: Formula) -> float:
    """Nested sum of interval upper bounds."""
    if isinstance(f, (Eventually, Always)):
        return f.interval.b + horizon(f.child)
    if isinstance(f, Until):
        return f.interval.b + max(horizon(f.left), horizon(f.right))
    return max((horizon(child) for _, child in children(f)), default=0.0)


def map_predicates(f: Formula, fn: Callable[[Predicate], Formula]) -> Formula:
    """Rebuild ``f`` with every predicate leaf replaced by ``fn(leaf)``."""
    if isinstance(f, Predicate):
        return fn(f)
    if isinstance(f, TrueF):
        return f
    if isinstance(f, Not):
        return Not(map_predicates(f.child, fn))
    if isinstance(f, And):
        return And(map_predicates(f.left, fn), map_predicates(f.right, fn))
    if isinstance(f, Or):
        return Or(map_predicates(f.left, fn), map_predicates(f.right, fn))
    if isinstance(f, Until):
        return Until(map_predicates(f.left, fn), map_predicates(f.right, fn), f.interval)
    if isinstance(f, Eventually):
        return Eventually(map_predicates(f.child, fn), f.interval)
    return Always(map_predicates(f.child, fn), f.interval)


def expand(f: Formula) -> Formula:
    """Rewrite derived operators in terms of true, !, & and U."""
    if isinstance(f, (TrueF, Predicate)):
        return f
    if isinstance(f, Not):
        return Not(expand(f.child))
    if isinstance(f, And):
        return And(expand(f.left), expand(f.right))
    if isinstance(f, Or):
        return Not(And(Not(expand(f.left)), Not(expand(f.right))))
    if isinstance(f, Until):
        return Until(expand(f.left), expand(f.right), f.interval)
    if isinstance(f, Eventually):
        return Until(TrueF(), expand(f.child), f.interval)
    return Not(Until(TrueF(), Not(expand(f.child)), f.interval))


def _num(value: float) -> str:
    return f"{value:.12g}"


def _interval_text(interval: Interval) -> str:
    return f"[{_num(interval.a)},{_num(interval.b)}]"


def format_formula(f: Formula) -> str:
    """Render an AST back into parseable text."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Predicate):
        return f.id
    if isinstance(f, Not):
        return f"!{_wrap(f.child, (TrueF, Predicate, Not, Eventually, Always))}"
    if isinstance(f, And):
        unary = (TrueF, Predicate, Not, Eventually, Always, Until)
        return f"{_wrap(f.left, unary + (And,))} & {_wrap(f.right, unary)}"
    if isinstance(f, Or):
        return f"{format_formula(f.left)} | {_wrap(f.right, (TrueF, Predicate, Not, And, Eventually, Always, Until))}"
    if isinstance(f, Until):
        atoms = (TrueF, Predicate, Not, Eventually, Always)
        return f"{_wrap(f.left, atoms)} U{_interval_text(f.interval)} {_wrap(f.right, atoms)}"
    op = "F" if isinstance(f, Eventually) else "G"
    return f"{op}{_interval_text(f.interval)}({format_formula(f.child)})"


def _wrap(f: Formula, bare: tuple) -> str:
    text = format_formula(f)
    return text if isinstance(f, bare) else f"({text})"


# ---------------------------------------------------------------------------
# Fragment classification
# ---------------------------------------------------------------------------

def _is_psi(f: Formula) -> bool:
    if isinstance(f, (TrueF, Predicate)):
        return True
    if isinstance(f, And):
        return _is_psi(f.left) and _is_psi(f.right)
    return False


def validate_fragment(f: Formula) -> FragmentReport:
    """Classify ``f`` against the negation and disjunction free control fragment."""
    violations: List[Tuple[str, str]] = []

    def state_part(node: Formula, path: str) -> None:
        if isinstance(node, Not):
            violations.append((path, "negation excluded"))
        elif isinstance(node, Or):
            violations.append((path, "disjunction excluded"))
        elif isinstance(node, TEMPORAL):
            violations.append((path, "nested temporal operator"))
        for name, child in children(node):
            state_part(child, f"{path}.{name}")

    def temporal_part(node: Formula, path: str) -> None:
        if isinstance(node, And):
            temporal_part(node.left, f"{path}.left")
            temporal_part(node.right, f"{path}.right")
        elif isinstance(node, (Eventually, Always)):
            state_part(node.child, f"{path}.child")
        elif isinstance(node, Until):
            state_part(node.left, f"{path}.left")
            state_part(node.right, f"{path}.right")
        elif isinstance(node, Not):
            violations.append((path, "negation excluded"))
            temporal_part(node.child, f"{path}.child")
        elif isinstance(node, Or):
            violations.append((path, "disjunction excluded"))
            temporal_part(node.left, f"{path}.left")
            temporal_part(node.right, f"{path}.right")
        elif isinstance(node, Predicate):
            violations.append((path, "predicate outside temporal operator"))

    temporal_part(f, "root")
    return FragmentReport(
        is_psi_class=_is_psi(f),
        is_phi_class=not violations,
        violations=tuple(violations),
    )


def temporal_state_formulas(f: Formula) -> List[Tuple[str, Formula]]:
    """State formulas directly under temporal operators, with their paths."""
    found: List[Tuple[str, Formula]] = []
    for path, node in walk(f):
        if isinstance(node, (Eventually, Always)):
            found.append((f"{path}.child", node.child))
        elif isinstance(node, Until):
            found.extend([(f"{path}.left", node.left), (f"{path}.right", node.right)])
    return found


def conjuncts(f: Formula) -> List[Formula]:
    """Flatten a conjunction into its members."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]
