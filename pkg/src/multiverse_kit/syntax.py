"""Propositional modal formulas: AST, parser, printer, substitution.

Surface syntax (ASCII, with Unicode aliases)::

    formula := iff
    iff     := imp ("<->" imp)*          left associative
    imp     := or ("->" imp)?            right associative
    or      := and ("|" and)*
    and     := unary ("&" unary)*
    unary   := ("~" | "[]" | "<>") unary | atom
    atom    := "true" | "false" | ident | "(" formula ")"

Unicode aliases: ``□ ◇ ¬ ∧ ∨ → ↔ ⊤ ⊥`` (and ``⟹``/``⟺``/``⇒``/``⇔``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

__all__ = [
    "Formula", "Var", "Top", "Bot", "Not", "And", "Or", "Implies", "Iff",
    "Box", "Diamond", "AxiomScheme", "FormulaSyntaxError", "SubstitutionError",
    "parse_formula", "render_formula", "substitute", "subformulas",
    "variables", "modal_depth", "size", "generate_formulas",
]


class Formula:
    __slots__ = ()

    def children(self) -> tuple["Formula", ...]:
        return ()

    def __str__(self) -> str:
        return render_formula(self)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __rshift__(self, other: "Formula") -> "Formula":
        return Implies(self, other)


@dataclass(frozen=True, repr=False)
class Var(Formula):
    name: str

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("variable name must be a nonempty string")

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


@dataclass(frozen=True, repr=False)
class Top(Formula):
    def __repr__(self) -> str:
        return "Top()"


@dataclass(frozen=True, repr=False)
class Bot(Formula):
    def __repr__(self) -> str:
        return "Bot()"


@dataclass(frozen=True)
class _Unary(Formula):
    sub: Formula

    def children(self) -> tuple[Formula, ...]:
        return (self.sub,)


@dataclass(frozen=True)
class _Binary(Formula):
    left: Formula
    right: Formula

    def children(self) -> tuple[Formula, ...]:
        return (self.left, self.right)


class Not(_Unary):
    __slots__ = ()


class Box(_Unary):
    __slots__ = ()


class Diamond(_Unary):
    __slots__ = ()


class And(_Binary):
    __slots__ = ()


class Or(_Binary):
    __slots__ = ()


class Implies(_Binary):
    __slots__ = ()


class Iff(_Binary):
    __slots__ = ()


@dataclass(frozen=True)
class AxiomScheme:
    """A named template whose variables are metavariables."""

    name: str
    template: Formula

    @property
    def metavariables(self) -> tuple[str, ...]:
        return variables(self.template)

    def instance(self, mapping: Mapping[str, Formula]) -> Formula:
        return substitute(self, mapping)


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, text: str, position: int):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position}: {text!r}")


class SubstitutionError(KeyError):
    """A metavariable has no image in the substitution map."""


# -- printing ---------------------------------------------------------------

_UNARY_SYMBOL = {Not: "~", Box: "[]", Diamond: "<>"}
_BINARY_SYMBOL = {And: "&", Or: "|", Implies: "->", Iff: "<->"}


def render_formula(f: Formula) -> str:
    """Canonical fully parenthesized text; ``parse_formula`` inverts it."""
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, _Unary):
        return f"{_UNARY_SYMBOL[type(f)]}({render_formula(f.sub)})"
    if isinstance(f, _Binary):
        return (f"({render_formula(f.left)}) {_BINARY_SYMBOL[type(f)]} "
                f"({render_formula(f.right)})")
    raise TypeError(f"not a formula: {f!r}")


# -- parsing ----------------------------------------------------------------

_ALIASES = {
    "□": "[]", "◇": "<>", "◻": "[]", "⋄": "<>", "¬": "~", "!": "~",
    "∧": "&", "∨": "|", "→": "->", "⇒": "->", "⟹": "->",
    "↔": "<->", "⇔": "<->", "⟺": "<->", "⊤": "true", "⊥": "false",
}
_TOKEN = re.compile(
    r"\s*(?:(?P<op><->|->|\[\]|<>|[~&|()])"
    r"|(?P<alias>[□◇◻⋄¬!∧∨→⇒⟹↔⇔⟺⊤⊥])"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_']*))"
)


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(m.lastgroup)
        tok = m.group(m.lastgroup)
        if m.lastgroup == "alias":
            tok = _ALIASES[tok]
        tokens.append((tok, start))
        pos = m.end()
    tokens.append(("", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def take(self) -> tuple[str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str) -> FormulaSyntaxError:
        tok, pos = self.tokens[self.i]
        found = repr(tok) if tok else "end of input"
        return FormulaSyntaxError(f"{message}, found {found}", self.text, pos)

    def parse(self) -> Formula:
        f = self.iff()
        if self.peek() != "":
            raise self.fail("expected end of input")
        return f

    def iff(self) -> Formula:
        f = self.imp()
        while self.peek() == "<->":
            self.take()
            f = Iff(f, self.imp())
        return f

    def imp(self) -> Formula:
        f = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(f, self.imp())
        return f

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "~":
            self.take()
            return Not(self.unary())
        if tok == "[]":
            self.take()
            return Box(self.unary())
        if tok == "<>":
            self.take()
            return Diamond(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok == "(":
            self.take()
            f = self.iff()
            if self.peek() != ")":
                raise self.fail("expected ')'")
            self.take()
            return f
        if tok == "true":
            self.take()
            return Top()
        if tok == "false":
            self.take()
            return Bot()
        if tok and (tok[0].isalpha() or tok[0] == "_"):
            self.take()
            return Var(tok)
        raise self.fail("expected a formula")


def parse_formula(text: str) -> Formula:
    """Parse modal formula text; raises FormulaSyntaxError with a position."""
    return _Parser(text).parse()


# -- structural operations --------------------------------------------------

def _rebuild(f: Formula, kids: tuple[Formula, ...]) -> Formula:
    if isinstance(f, _Unary):
        return type(f)(kids[0])
    if isinstance(f, _Binary):
        return type(f)(kids[0], kids[1])
    return f


def substitute(scheme: AxiomScheme | Formula, mapping: Mapping[str, Formula]) -> Formula:
    """Simultaneously replace every variable of the template by its image."""
    template = scheme.template if isinstance(scheme, AxiomScheme) else scheme
    missing = [v for v in variables(template) if v not in mapping]
    if missing:
        raise SubstitutionError(f"no image for metavariable(s): {', '.join(missing)}")

    def go(f: Formula) -> Formula:
        if isinstance(f, Var):
            return mapping[f.name]
        kids = f.children()
        if not kids:
            return f
        return _rebuild(f, tuple(go(k) for k in kids))

    return go(template)


def _postorder(f: Formula) -> Iterator[Formula]:
    for k in f.children():
        yield from _postorder(k)
    yield f


def subformulas(f: Formula) -> tuple[Formula, ...]:
    """Distinct subtrees in post-order, keeping first occurrences."""
    seen: dict[Formula, None] = {}
    for g in _postorder(f):
        seen.setdefault(g, None)
    return tuple(seen)


def variables(f: Formula) -> tuple[str, ...]:
    """Variable names in order of first occurrence."""
    names: dict[str, None] = {}
    for g in _postorder(f):
        if isinstance(g, Var):
            names.setdefault(g.name, None)
    return tuple(names)


def modal_depth(f: Formula) -> int:
    kids = f.children()
    inner = max((modal_depth(k) for k in kids), default=0)
    return inner + 1 if isinstance(f, (Box, Diamond)) else inner


def size(f: Formula) -> int:
    """Node count of the tree."""
    return 1 + sum(size(k) for k in f.children())


def generate_formulas(names: Iterable[str], max_size: int, max_depth: int | None = None,
                      ) -> list[Formula]:
    """Every formula over ``names`` with at most ``max_size`` nodes.

    Connectives are ``~ & | -> [] <>``; ``max_depth`` bounds modal depth.
    Output is ordered by size, then by construction order.
    """
    by_size: list[list[Formula]] = [[], [Var(n) for n in names]]
    for k in range(2, max_size + 1):
        level: list[Formula] = []
        for g in by_size[k - 1]:
            level.extend(op(g) for op in (Not, Box, Diamond))
        for i in range(1, k - 1):
            for a in by_size[i]:
                for b in by_size[k - 1 - i]:
                    level.extend(op(a, b) for op in (And, Or, Implies))
        if max_depth is not None:
            level = [g for g in level if modal_depth(g) <= max_depth]
        by_size.append(level)
    return [g for level in by_size for g in level]
