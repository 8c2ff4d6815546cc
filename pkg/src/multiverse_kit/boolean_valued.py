"""Finite Boolean-valued structures, ultrafilter quotients and Boolean ultrapowers.

Elements of the Boolean algebra with ``n`` atoms are ``int`` bitmasks over
the atoms.  Every ultrafilter of a finite algebra is principal, so an
``Ultrafilter`` is named by its generating atom.

Signatures are relational.  Names are a flat finite set; a structure gives
each pair of names an equality value and each tuple a relation value, and
``boolean_value`` extends this to all first-order formulas, with ``exists``
as the join over names and ``forall`` as the meet.
"""
from __future__ import annotations

import itertools
import json
import random
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "FiniteBooleanAlgebra", "Ultrafilter", "MaximalAntichain", "BValuedStructure",
    "ClassicalStructure", "FOFormula", "Eq", "Rel", "FNot", "FAnd", "FOr", "FImplies",
    "Exists", "Forall", "parse_fo", "render_fo", "free_variables",
    "EqualityAxiomError", "UnboundVariableError", "NotDenseError", "AntichainFamilyError",
    "boolean_value", "check_equality_axioms", "is_full", "quotient_by_ultrafilter",
    "satisfies", "verify_los", "formula_family", "boolean_ultrapower", "stalk",
    "find_isomorphism", "Poset", "DenseSet", "Filter", "build_generic_filter",
    "all_maximal_antichains", "los_fixture_structures", "binary_tree_poset",
]


class EqualityAxiomError(ValueError):
    pass


class UnboundVariableError(KeyError):
    pass


class NotDenseError(ValueError):
    def __init__(self, message: str, witness):
        self.witness = witness
        super().__init__(message)


class AntichainFamilyError(ValueError):
    pass


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


# -- the algebra ------------------------------------------------------------

@dataclass(frozen=True)
class FiniteBooleanAlgebra:
    atom_count: int

    def __post_init__(self) -> None:
        if self.atom_count < 1:
            raise ValueError("a Boolean algebra needs at least one atom")

    @property
    def top(self) -> int:
        return (1 << self.atom_count) - 1

    @property
    def bottom(self) -> int:
        return 0

    @property
    def size(self) -> int:
        return 1 << self.atom_count

    def meet(self, a: int, b: int) -> int:
        return a & b

    def join(self, a: int, b: int) -> int:
        return a | b

    def complement(self, a: int) -> int:
        return self.top & ~a

    def leq(self, a: int, b: int) -> bool:
        return a & ~b == 0

    def join_all(self, xs: Iterable[int]) -> int:
        out = 0
        for x in xs:
            out |= x
        return out

    def meet_all(self, xs: Iterable[int]) -> int:
        out = self.top
        for x in xs:
            out &= x
        return out

    def elements(self) -> range:
        return range(self.size)

    def atoms(self) -> list[int]:
        return [1 << i for i in range(self.atom_count)]

    def element(self, atoms: Iterable[int]) -> int:
        out = 0
        for a in atoms:
            if not 0 <= a < self.atom_count:
                raise ValueError(f"no atom {a} in an algebra with {self.atom_count} atoms")
            out |= 1 << a
        return out

    def describe(self, x: int) -> list[int]:
        return list(_bits(x))

    def contains(self, x: int) -> bool:
        return 0 <= x <= self.top


@dataclass(frozen=True)
class Ultrafilter:
    """Principal ultrafilter generated by one atom."""

    algebra: FiniteBooleanAlgebra
    atom: int

    def __post_init__(self) -> None:
        if not 0 <= self.atom < self.algebra.atom_count:
            raise ValueError(f"no atom {self.atom}")

    def __contains__(self, x: int) -> bool:
        return bool(x >> self.atom & 1)

    def members(self) -> list[int]:
        return [x for x in self.algebra.elements() if x >> self.atom & 1]

    @classmethod
    def from_members(cls, algebra: FiniteBooleanAlgebra, members: Iterable[int]) -> "Ultrafilter":
        """Validate an explicit subset and return it as a principal ultrafilter."""
        u = set(members)
        for x in algebra.elements():
            if (x in u) == (algebra.complement(x) in u):
                raise ValueError(f"exactly one of {x} and its complement must belong")
        for x in u:
            for y in algebra.elements():
                if algebra.leq(x, y) and y not in u:
                    raise ValueError(f"not upward closed: {x} <= {y}")
            for y in u:
                if x & y not in u:
                    raise ValueError(f"not closed under meets: {x} & {y}")
        generator = algebra.meet_all(u)
        if generator == 0 or generator & (generator - 1):
            raise ValueError("meet of the members is not an atom")
        return cls(algebra, generator.bit_length() - 1)

    @classmethod
    def all(cls, algebra: FiniteBooleanAlgebra) -> list["Ultrafilter"]:
        return [cls(algebra, a) for a in range(algebra.atom_count)]


@dataclass(frozen=True)
class MaximalAntichain:
    algebra: FiniteBooleanAlgebra
    elements: frozenset

    def __post_init__(self) -> None:
        els = frozenset(self.elements)
        object.__setattr__(self, "elements", els)
        if 0 in els:
            raise ValueError("antichain members must be nonzero")
        for a, b in itertools.combinations(els, 2):
            if a & b:
                raise ValueError(f"antichain members {a} and {b} are not disjoint")
        if self.algebra.join_all(els) != self.algebra.top:
            raise ValueError("antichain is not maximal: join is not 1")

    def refines(self, other: "MaximalAntichain") -> bool:
        return all(any(a & ~b == 0 for b in other.elements) for a in self.elements)

    def block_of(self, atom: int) -> int:
        for b in self.elements:
            if b >> atom & 1:
                return b
        raise ValueError(f"atom {atom} is not covered")

    def ordered(self) -> list[int]:
        return sorted(self.elements)


def _set_partitions(items: list[int]) -> Iterator[list[list[int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def all_maximal_antichains(algebra: FiniteBooleanAlgebra) -> list[MaximalAntichain]:
    """One antichain per partition of the atoms, coarsest first."""
    out = []
    for part in _set_partitions(list(range(algebra.atom_count))):
        out.append(MaximalAntichain(algebra, frozenset(algebra.element(b) for b in part)))
    out.sort(key=lambda a: (len(a.elements), a.ordered()))
    return out


# -- first-order formulas ---------------------------------------------------

class FOFormula:
    __slots__ = ()

    def __str__(self) -> str:
        return render_fo(self)


@dataclass(frozen=True)
class Eq(FOFormula):
    left: str
    right: str


@dataclass(frozen=True)
class Rel(FOFormula):
    symbol: str
    args: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class FNot(FOFormula):
    sub: FOFormula


@dataclass(frozen=True)
class FAnd(FOFormula):
    left: FOFormula
    right: FOFormula


@dataclass(frozen=True)
class FOr(FOFormula):
    left: FOFormula
    right: FOFormula


@dataclass(frozen=True)
class FImplies(FOFormula):
    left: FOFormula
    right: FOFormula


@dataclass(frozen=True)
class Exists(FOFormula):
    var: str
    body: FOFormula


@dataclass(frozen=True)
class Forall(FOFormula):
    var: str
    body: FOFormula


def render_fo(f: FOFormula) -> str:
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, Rel):
        return f"{f.symbol}({', '.join(f.args)})"
    if isinstance(f, FNot):
        return f"~({render_fo(f.sub)})"
    if isinstance(f, (FAnd, FOr, FImplies)):
        op = {FAnd: "&", FOr: "|", FImplies: "->"}[type(f)]
        return f"({render_fo(f.left)}) {op} ({render_fo(f.right)})"
    if isinstance(f, (Exists, Forall)):
        q = "exists" if isinstance(f, Exists) else "forall"
        return f"{q} {f.var}. ({render_fo(f.body)})"
    raise TypeError(f"not a first-order formula: {f!r}")


_FO_TOKEN = re.compile(r"\s*(->|[~&|().,=]|[A-Za-z_][A-Za-z0-9_']*)")


class _FOParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _FO_TOKEN.match(text, pos)
            if m is None:
                if text[pos:].strip() == "":
                    break
                raise ValueError(f"unexpected character at position {pos}: {text!r}")
            self.tokens.append((m.group(1), m.start(1)))
            pos = m.end()
        self.tokens.append(("", len(text)))
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def take(self, want: str | None = None) -> str:
        tok, pos = self.tokens[self.i]
        if want is not None and tok != want:
            raise ValueError(f"expected {want!r} at position {pos}, found {tok or 'end'!r}")
        self.i += 1
        return tok

    def ident(self) -> str:
        tok, pos = self.tokens[self.i]
        if not tok or not (tok[0].isalpha() or tok[0] == "_") or tok in ("exists", "forall"):
            raise ValueError(f"expected an identifier at position {pos}: {self.text!r}")
        self.i += 1
        return tok

    def parse(self) -> FOFormula:
        f = self.imp()
        if self.peek() != "":
            raise ValueError(f"trailing input at position {self.tokens[self.i][1]}: {self.text!r}")
        return f

    def imp(self) -> FOFormula:
        f = self.disj()
        if self.peek() == "->":
            self.take()
            return FImplies(f, self.imp())
        return f

    def disj(self) -> FOFormula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = FOr(f, self.conj())
        return f

    def conj(self) -> FOFormula:
        f = self.unary()
        while self.peek() == "&":
            self.take()
            f = FAnd(f, self.unary())
        return f

    def unary(self) -> FOFormula:
        tok = self.peek()
        if tok == "~":
            self.take()
            return FNot(self.unary())
        if tok in ("exists", "forall"):
            self.take()
            var = self.ident()
            self.take(".")
            body = self.imp()
            return Exists(var, body) if tok == "exists" else Forall(var, body)
        if tok == "(":
            self.take()
            f = self.imp()
            self.take(")")
            return f
        name = self.ident()
        if self.peek() == "=":
            self.take()
            return Eq(name, self.ident())
        self.take("(")
        args = [self.ident()]
        while self.peek() == ",":
            self.take()
            args.append(self.ident())
        self.take(")")
        return Rel(name, tuple(args))


def parse_fo(text: str) -> FOFormula:
    """Parse ``exists x. (x = y & R(x, y))`` style first-order text."""
    return _FOParser(text).parse()


def free_variables(f: FOFormula) -> frozenset:
    if isinstance(f, Eq):
        return frozenset((f.left, f.right))
    if isinstance(f, Rel):
        return frozenset(f.args)
    if isinstance(f, FNot):
        return free_variables(f.sub)
    if isinstance(f, (FAnd, FOr, FImplies)):
        return free_variables(f.left) | free_variables(f.right)
    if isinstance(f, (Exists, Forall)):
        return free_variables(f.body) - {f.var}
    raise TypeError(f"not a first-order formula: {f!r}")


def quantifier_depth(f: FOFormula) -> int:
    if isinstance(f, (Eq, Rel)):
        return 0
    if isinstance(f, FNot):
        return quantifier_depth(f.sub)
    if isinstance(f, (FAnd, FOr, FImplies)):
        return max(quantifier_depth(f.left), quantifier_depth(f.right))
    return 1 + quantifier_depth(f.body)


# -- Boolean-valued structures ----------------------------------------------

def _key(names: Sequence[str], idx: Sequence[int]) -> str:
    return ",".join(names[i] for i in idx)


@dataclass(frozen=True, eq=False)
class BValuedStructure:
    """Names with Boolean values for equality and for each relation.

    ``eq[i][j]`` is the value of name i = name j; ``relations[R]`` is
    ``(arity, {index tuple: value})`` with absent tuples valued 0.
    """

    algebra: FiniteBooleanAlgebra
    names: tuple
    eq: tuple
    relations: Mapping[str, tuple[int, dict]]

    def __post_init__(self) -> None:
        k = len(self.names)
        if k == 0:
            raise ValueError("a structure needs at least one name")
        if len(set(self.names)) != k:
            raise ValueError("names must be distinct")
        eq = tuple(tuple(int(v) for v in row) for row in self.eq)
        if len(eq) != k or any(len(row) != k for row in eq):
            raise ValueError("equality table must be square over the names")
        object.__setattr__(self, "eq", eq)
        rels = {}
        for sym, (arity, values) in self.relations.items():
            vals = {}
            for tup, v in values.items():
                tup = tuple(tup)
                if len(tup) != arity or any(not 0 <= i < k for i in tup):
                    raise ValueError(f"bad argument tuple {tup} for {sym}/{arity}")
                if v:
                    vals[tup] = int(v)
            rels[sym] = (int(arity), vals)
        object.__setattr__(self, "relations", rels)
        for v in itertools.chain((x for row in eq for x in row),
                                 (x for _, vals in rels.values() for x in vals.values())):
            if not self.algebra.contains(v):
                raise ValueError(f"value {v} is not an element of the algebra")

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown name {name!r}") from None

    def rel_value(self, sym: str, args: Sequence[int]) -> int:
        try:
            arity, vals = self.relations[sym]
        except KeyError:
            raise KeyError(f"unknown relation {sym!r}") from None
        if len(args) != arity:
            raise ValueError(f"{sym} takes {arity} arguments, got {len(args)}")
        return vals.get(tuple(args), 0)

    @classmethod
    def from_stalks(cls, algebra: FiniteBooleanAlgebra, names: Sequence[str],
                    stalks: Sequence[tuple[Sequence[int], Mapping[str, tuple[int, set]]]],
                    ) -> "BValuedStructure":
        """Glue one classical structure per atom.

        ``stalks[a] = (cls_of, rels)`` where ``cls_of[i]`` is the element that
        name i denotes at atom a and ``rels[R] = (arity, set of element tuples)``.
        """
        if len(stalks) != algebra.atom_count:
            raise ValueError("need one stalk per atom")
        k = len(names)
        eq = [[0] * k for _ in range(k)]
        rels: dict[str, tuple[int, dict]] = {}
        for a, (cls_of, srels) in enumerate(stalks):
            for i in range(k):
                for j in range(k):
                    if cls_of[i] == cls_of[j]:
                        eq[i][j] |= 1 << a
            for sym, (arity, tuples) in srels.items():
                vals = rels.setdefault(sym, (arity, {}))[1]
                for tup in itertools.product(range(k), repeat=arity):
                    if tuple(cls_of[i] for i in tup) in tuples:
                        vals[tup] = vals.get(tup, 0) | 1 << a
        return cls(algebra, tuple(names), tuple(map(tuple, eq)), rels)

    def to_json(self) -> dict:
        names = self.names
        k = len(names)
        eq = {}
        for i in range(k):
            for j in range(k):
                v = self.eq[i][j]
                default = self.algebra.top if i == j else 0
                if v != default:
                    eq[_key(names, (i, j))] = self.algebra.describe(v)
        rels = {}
        for sym, (arity, vals) in sorted(self.relations.items()):
            rels[sym] = {"arity": arity,
                         "values": {_key(names, t): self.algebra.describe(v)
                                    for t, v in sorted(vals.items())}}
        return {"atoms": self.algebra.atom_count, "names": list(names), "eq": eq,
                "relations": rels}

    @classmethod
    def from_json(cls, data: Mapping | str) -> "BValuedStructure":
        if isinstance(data, str):
            data = json.loads(data)
        algebra = FiniteBooleanAlgebra(int(data["atoms"]))
        names = tuple(str(n) for n in data["names"])
        if any("," in n for n in names):
            raise ValueError("names may not contain commas")
        pos = {n: i for i, n in enumerate(names)}

        def parse_key(key: str) -> tuple[int, ...]:
            try:
                return tuple(pos[p.strip()] for p in key.split(","))
            except KeyError as exc:
                raise ValueError(f"unknown name {exc} in key {key!r}") from None

        def element(v) -> int:
            return v if isinstance(v, int) else algebra.element(v)

        k = len(names)
        eq = [[algebra.top if i == j else 0 for j in range(k)] for i in range(k)]
        for key, v in data.get("eq", {}).items():
            i, j = parse_key(key)
            eq[i][j] = element(v)
        rels = {}
        for sym, spec in data.get("relations", {}).items():
            arity = int(spec["arity"])
            rels[sym] = (arity, {parse_key(key): element(v)
                                 for key, v in spec.get("values", {}).items()})
        return cls(algebra, names, tuple(map(tuple, eq)), rels)


class _Valuer:
    """Memoized Boolean values; formulas must stay alive while it is in use."""

    def __init__(self, S: BValuedStructure):
        self.S = S
        self.memo: dict = {}
        self.free: dict = {}

    def _free(self, f: FOFormula) -> tuple:
        key = id(f)
        hit = self.free.get(key)
        if hit is None:
            hit = (f, tuple(sorted(free_variables(f))))
            self.free[key] = hit
        return hit[1]

    def value(self, f: FOFormula, env: Mapping[str, int]) -> int:
        fv = self._free(f)
        try:
            key = (id(f), tuple(env[v] for v in fv))
        except KeyError as exc:
            raise UnboundVariableError(f"variable {exc} is unbound") from None
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        S = self.S
        B = S.algebra
        if isinstance(f, Eq):
            r = S.eq[env[f.left]][env[f.right]]
        elif isinstance(f, Rel):
            r = S.rel_value(f.symbol, [env[a] for a in f.args])
        elif isinstance(f, FNot):
            r = B.complement(self.value(f.sub, env))
        elif isinstance(f, FAnd):
            r = self.value(f.left, env) & self.value(f.right, env)
        elif isinstance(f, FOr):
            r = self.value(f.left, env) | self.value(f.right, env)
        elif isinstance(f, FImplies):
            r = B.complement(self.value(f.left, env)) | self.value(f.right, env)
        elif isinstance(f, Exists):
            r = B.join_all(self.value(f.body, {**env, f.var: t}) for t in range(len(S.names)))
        elif isinstance(f, Forall):
            r = B.meet_all(self.value(f.body, {**env, f.var: t}) for t in range(len(S.names)))
        else:
            raise TypeError(f"not a first-order formula: {f!r}")
        self.memo[key] = r
        return r


def _env_indices(S: BValuedStructure, env: Mapping[str, str | int] | None) -> dict[str, int]:
    out = {}
    for var, name in (env or {}).items():
        out[var] = name if isinstance(name, int) else S.index(name)
    return out


def boolean_value(S: BValuedStructure, f: FOFormula | str, env: Mapping[str, str] | None = None,
                  ) -> int:
    """The Boolean value of ``f`` with free variables bound to names by ``env``."""
    if isinstance(f, str):
        f = parse_fo(f)
    return _Valuer(S).value(f, _env_indices(S, env))


@dataclass
class EqualityReport:
    violations: list[dict]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"passed": self.passed, "violations": self.violations}


def check_equality_axioms(S: BValuedStructure) -> EqualityReport:
    """Reflexivity, symmetry, transitivity and congruence, over all names."""
    B = S.algebra
    names = S.names
    k = len(names)
    eq = S.eq
    out = []
    for i in range(k):
        if eq[i][i] != B.top:
            out.append({"axiom": "reflexivity", "names": [names[i]]})
    for i in range(k):
        for j in range(k):
            if eq[i][j] != eq[j][i]:
                out.append({"axiom": "symmetry", "names": [names[i], names[j]]})
    for i, j, l in itertools.product(range(k), repeat=3):
        if not B.leq(eq[i][j] & eq[j][l], eq[i][l]):
            out.append({"axiom": "transitivity", "names": [names[i], names[j], names[l]]})
    for sym, (arity, _) in sorted(S.relations.items()):
        for tup in itertools.product(range(k), repeat=arity):
            v = S.rel_value(sym, tup)
            for pos in range(arity):
                for j in range(k):
                    moved = tup[:pos] + (j,) + tup[pos + 1:]
                    if not B.leq(eq[tup[pos]][j] & v, S.rel_value(sym, moved)):
                        out.append({"axiom": "congruence", "relation": sym,
                                    "args": [names[t] for t in tup], "position": pos,
                                    "replacement": names[j]})
    return EqualityReport(out)


@dataclass
class FullnessReport:
    results: list[dict]

    @property
    def full(self) -> bool:
        return all(r["witness"] is not None for r in self.results)

    def to_json(self) -> dict:
        return {"full": self.full, "results": self.results}


def is_full(S: BValuedStructure, formulas: Iterable[FOFormula | str],
            env: Mapping[str, str] | None = None) -> FullnessReport:
    """For each ``exists x. phi``, look for a name whose value attains the join."""
    base = _env_indices(S, env)
    valuer = _Valuer(S)
    results = []
    keep = []
    for f in formulas:
        if isinstance(f, str):
            f = parse_fo(f)
        keep.append(f)
        if not isinstance(f, Exists):
            raise ValueError(f"not an existential formula: {render_fo(f)}")
        target = valuer.value(f, base)
        witness = None
        for t in range(len(S.names)):
            if valuer.value(f.body, {**base, f.var: t}) == target:
                witness = S.names[t]
                break
        results.append({"formula": render_fo(f), "value": S.algebra.describe(target),
                        "witness": witness})
    return FullnessReport(results)


# -- classical structures ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClassicalStructure:
    """Domain ``0..k-1`` (with display labels) and relations as tuple sets."""

    labels: tuple
    relations: Mapping[str, tuple[int, frozenset]]

    def __post_init__(self) -> None:
        rels = {}
        for sym, (arity, tuples) in self.relations.items():
            ts = frozenset(tuple(t) for t in tuples)
            for t in ts:
                if len(t) != arity or any(not 0 <= x < len(self.labels) for x in t):
                    raise ValueError(f"bad tuple {t} for {sym}/{arity}")
            rels[sym] = (int(arity), ts)
        object.__setattr__(self, "relations", rels)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    def holds(self, sym: str, args: Sequence[int]) -> bool:
        return tuple(args) in self.relations[sym][1]

    def to_json(self) -> dict:
        return {"domain": [str(x) for x in self.labels],
                "relations": {sym: {"arity": ar,
                                    "tuples": [[str(self.labels[x]) for x in t]
                                               for t in sorted(ts)]}
                              for sym, (ar, ts) in sorted(self.relations.items())}}

    @classmethod
    def from_json(cls, data: Mapping | str) -> "ClassicalStructure":
        if isinstance(data, str):
            data = json.loads(data)
        labels = tuple(data["domain"])
        pos = {str(x): i for i, x in enumerate(labels)}
        if len(pos) != len(labels):
            raise ValueError("domain labels must be distinct")
        rels = {}
        for sym, spec in data.get("relations", {}).items():
            try:
                tuples = {tuple(pos[str(x)] for x in t) for t in spec.get("tuples", [])}
            except KeyError as exc:
                raise ValueError(f"unknown element {exc} in relation {sym}") from None
            rels[sym] = (int(spec["arity"]), frozenset(tuples))
        return cls(labels, rels)


def satisfies(M: ClassicalStructure, f: FOFormula | str, env: Mapping[str, int] | None = None,
              _memo: dict | None = None) -> bool:
    """Classical (two-valued) satisfaction; ``env`` maps variables to domain indices."""
    if isinstance(f, str):
        f = parse_fo(f)
    env = dict(env or {})
    memo = {} if _memo is None else _memo

    def go(g: FOFormula, e: dict) -> bool:
        key = (id(g), tuple(sorted(e.items())))
        hit = memo.get(key)
        if hit is not None:
            return hit
        try:
            if isinstance(g, Eq):
                r = e[g.left] == e[g.right]
            elif isinstance(g, Rel):
                r = M.holds(g.symbol, [e[a] for a in g.args])
            elif isinstance(g, FNot):
                r = not go(g.sub, e)
            elif isinstance(g, FAnd):
                r = go(g.left, e) and go(g.right, e)
            elif isinstance(g, FOr):
                r = go(g.left, e) or go(g.right, e)
            elif isinstance(g, FImplies):
                r = (not go(g.left, e)) or go(g.right, e)
            elif isinstance(g, Exists):
                r = any(go(g.body, {**e, g.var: d}) for d in range(M.size))
            elif isinstance(g, Forall):
                r = all(go(g.body, {**e, g.var: d}) for d in range(M.size))
            else:
                raise TypeError(f"not a first-order formula: {g!r}")
        except KeyError as exc:
            raise UnboundVariableError(f"variable {exc} is unbound") from None
        memo[key] = r
        return r

    return go(f, env)


def quotient_by_ultrafilter(S: BValuedStructure, U: Ultrafilter,
                            ) -> tuple[ClassicalStructure, dict[str, int]]:
    """Collapse names modulo ``[[s = t]] in U``; relations hold iff their value is in U."""
    if U.algebra != S.algebra:
        raise ValueError("ultrafilter lives on a different algebra")
    report = check_equality_axioms(S)
    if not report.passed:
        first = report.violations[0]
        raise EqualityAxiomError(f"equality axioms fail ({len(report.violations)} violations), "
                                 f"first: {first}")
    k = len(S.names)
    cls_of = [-1] * k
    classes: list[list[int]] = []
    for i in range(k):
        if cls_of[i] >= 0:
            continue
        members = [j for j in range(k) if S.eq[i][j] in U]
        for j in members:
            cls_of[j] = len(classes)
        classes.append(members)
    rels = {}
    for sym, (arity, _) in S.relations.items():
        tuples = set()
        seen: dict = {}
        for tup in itertools.product(range(k), repeat=arity):
            image = tuple(cls_of[i] for i in tup)
            inside = S.rel_value(sym, tup) in U
            if seen.setdefault(image, inside) != inside:
                raise EqualityAxiomError(f"{sym} is not well defined on classes {image}")
            if inside:
                tuples.add(image)
        rels[sym] = (arity, frozenset(tuples))
    labels = tuple("{" + ",".join(S.names[j] for j in c) + "}" for c in classes)
    return ClassicalStructure(labels, rels), {S.names[i]: cls_of[i] for i in range(k)}


def stalk(S: BValuedStructure, atom: int) -> tuple[ClassicalStructure, dict[str, int]]:
    """Read every atomic value at one atom: the structure living over that point."""
    k = len(S.names)
    cls_of: list[int] = []
    reps: list[int] = []
    for i in range(k):
        for c, r in enumerate(reps):
            if S.eq[r][i] >> atom & 1:
                cls_of.append(c)
                break
        else:
            cls_of.append(len(reps))
            reps.append(i)
    rels = {}
    for sym, (arity, _) in S.relations.items():
        tuples = {tuple(cls_of[i] for i in tup)
                  for tup in itertools.product(range(k), repeat=arity)
                  if S.rel_value(sym, tup) >> atom & 1}
        rels[sym] = (arity, frozenset(tuples))
    labels = tuple(S.names[r] for r in reps)
    return ClassicalStructure(labels, rels), {S.names[i]: cls_of[i] for i in range(k)}


@dataclass
class LosReport:
    checked: int
    agreed: int
    counterexamples: list[dict]

    @property
    def agreement(self) -> float:
        return 100.0 if self.checked == 0 else 100.0 * self.agreed / self.checked

    @property
    def passed(self) -> bool:
        return self.agreed == self.checked

    def merge(self, other: "LosReport") -> "LosReport":
        return LosReport(self.checked + other.checked, self.agreed + other.agreed,
                         (self.counterexamples + other.counterexamples)[:10])

    def to_json(self) -> dict:
        pct = self.agreement
        text = "100%" if self.passed else f"{pct:.4f}%"
        return {"checked": self.checked, "agreed": self.agreed, "agreement": text,
                "counterexamples": self.counterexamples, "passed": self.passed}


def verify_los(S: BValuedStructure, ultrafilters: Ultrafilter | Iterable[Ultrafilter],
               formulas: Iterable[FOFormula], envs: Iterable[Mapping[str, str]] | None = None,
               ) -> LosReport:
    """Compare truth in each quotient with membership of the Boolean value in U.

    Without ``envs``, every assignment of each formula's free variables to
    names is checked.
    """
    if isinstance(ultrafilters, Ultrafilter):
        ultrafilters = [ultrafilters]
    ultrafilters = list(ultrafilters)
    formulas = list(formulas)
    quotients = [quotient_by_ultrafilter(S, U) for U in ultrafilters]
    valuer = _Valuer(S)
    memos: list[dict] = [{} for _ in ultrafilters]
    k = len(S.names)
    fixed_envs = None if envs is None else [_env_indices(S, e) for e in envs]
    checked = agreed = 0
    bad: list[dict] = []
    for f in formulas:
        fv = sorted(free_variables(f))
        if fixed_envs is None:
            env_list = [dict(zip(fv, combo)) for combo in itertools.product(range(k), repeat=len(fv))]
        else:
            env_list = fixed_envs
        for env in env_list:
            value = valuer.value(f, env)
            for U, (Q, cls_of), memo in zip(ultrafilters, quotients, memos):
                qenv = {v: cls_of[S.names[i]] for v, i in env.items()}
                truth = satisfies(Q, f, qenv, memo)
                checked += 1
                if truth == (value in U):
                    agreed += 1
                elif len(bad) < 10:
                    bad.append({"formula": render_fo(f), "ultrafilter_atom": U.atom,
                                "env": {v: S.names[i] for v, i in env.items()},
                                "value": S.algebra.describe(value), "quotient_truth": truth})
    return LosReport(checked, agreed, bad)


def formula_family(relations: Mapping[str, int], variables: Sequence[str] = ("x", "y"),
                   quantifier_depth: int = 2) -> list[FOFormula]:
    """A fixed finite family of formulas over ``variables``.

    Level 0 holds the atoms, their negations and all binary combinations of
    two atoms.  Each further level quantifies the previous level's seeds
    over each variable both ways and also emits each result negated; the
    quantified formulas are the next level's seeds (a quantified negation
    is the negation of the dual quantifier, so this loses nothing up to
    equivalence).  Depth-1 formulas are further combined with two mixing
    atoms, one equality and one relational, so quantifiers also occur
    under connectives.
    """
    atoms: list[FOFormula] = [Eq(a, b) for a in variables for b in variables]
    for sym, arity in sorted(relations.items()):
        atoms.extend(Rel(sym, args) for args in itertools.product(variables, repeat=arity))
    mixers = [atoms[1] if len(atoms) > 1 else atoms[0]]
    if len(atoms) > len(variables) ** 2:
        mixers.append(atoms[len(variables) ** 2 + 1 if len(atoms) > len(variables) ** 2 + 1
                            else len(variables) ** 2])
    seeds: list[FOFormula] = list(atoms) + [FNot(a) for a in atoms]
    seeds += [op(a, b) for a in atoms for b in atoms for op in (FAnd, FOr, FImplies)]
    family = list(seeds)
    for level in range(quantifier_depth):
        quantified = [q(v, f) for f in seeds for v in variables for q in (Exists, Forall)]
        family.extend(quantified)
        family.extend(FNot(g) for g in quantified)
        if level == 0:
            for g in quantified:
                for a in mixers:
                    family.append(FAnd(g, a))
                    family.append(FImplies(a, g))
        seeds = quantified
    return family


# -- isomorphism and Boolean ultrapowers ------------------------------------

def find_isomorphism(A: ClassicalStructure, C: ClassicalStructure) -> dict[int, int] | None:
    """A relation-preserving bijection A -> C, or None (brute force)."""
    if A.size != C.size or set(A.relations) != set(C.relations):
        return None
    for sym in A.relations:
        if A.relations[sym][0] != C.relations[sym][0] or \
                len(A.relations[sym][1]) != len(C.relations[sym][1]):
            return None
    for perm in itertools.permutations(range(C.size)):
        if all(frozenset(tuple(perm[x] for x in t) for t in ts) == C.relations[sym][1]
               for sym, (_, ts) in A.relations.items()):
            return dict(enumerate(perm))
    return None


@dataclass
class UltrapowerResult:
    structure: ClassicalStructure
    embedding: dict[int, int]
    mode: str

    def is_isomorphism(self, V0: ClassicalStructure) -> bool:
        if len(set(self.embedding.values())) != self.structure.size or \
                len(self.embedding) != V0.size:
            return False
        for sym, (arity, ts) in V0.relations.items():
            for tup in itertools.product(range(V0.size), repeat=arity):
                image = tuple(self.embedding[x] for x in tup)
                if (tup in ts) != self.structure.holds(sym, image):
                    return False
        return True

    def to_json(self, V0: ClassicalStructure) -> dict:
        return {"mode": self.mode, "structure": self.structure.to_json(),
                "embedding": {str(V0.labels[x]): str(self.structure.labels[y])
                              for x, y in sorted(self.embedding.items())},
                "embedding_is_isomorphism": self.is_isomorphism(V0)}


def check_name_structure(V0: ClassicalStructure, algebra: FiniteBooleanAlgebra,
                         mixtures: bool = True) -> BValuedStructure:
    """Boolean-valued copy of ``V0`` over ``algebra``.

    Check names have value 1 or 0 exactly as in ``V0``.  With ``mixtures``
    the names are all functions from atoms to ``V0`` (mixtures of check names
    along the atoms), which is the full structure; check names are the
    constant functions.
    """
    k = V0.size
    n = algebra.atom_count
    if mixtures:
        funcs = list(itertools.product(range(k), repeat=n))
        funcs.sort(key=lambda f: (len(set(f)) != 1, f))
    else:
        funcs = [(x,) * n for x in range(k)]
    names = tuple(
        f"^{V0.labels[f[0]]}" if len(set(f)) == 1 else "<" + ",".join(str(V0.labels[x]) for x in f) + ">"
        for f in funcs)
    eq = tuple(tuple(sum(1 << a for a in range(n) if f[a] == g[a]) for g in funcs) for f in funcs)
    rels = {}
    for sym, (arity, ts) in V0.relations.items():
        vals = {}
        for idx in itertools.product(range(len(funcs)), repeat=arity):
            v = sum(1 << a for a in range(n) if tuple(funcs[i][a] for i in idx) in ts)
            if v:
                vals[idx] = v
        rels[sym] = (arity, vals)
    return BValuedStructure(algebra, names, eq, rels)


def _check_directed(family: Sequence[MaximalAntichain]) -> None:
    for a, b in itertools.combinations_with_replacement(range(len(family)), 2):
        if not any(c.refines(family[a]) and c.refines(family[b]) for c in family):
            raise AntichainFamilyError(
                f"antichains {family[a].ordered()} and {family[b].ordered()} "
                "have no common refinement in the family")


def boolean_ultrapower(V0: ClassicalStructure, algebra: FiniteBooleanAlgebra, U: Ultrafilter,
                       mode: str = "quotient",
                       antichains: Sequence[MaximalAntichain] | None = None) -> UltrapowerResult:
    """The Boolean ultrapower of ``V0`` by ``U`` and the map x -> [check x].

    ``quotient`` mode quotients the full check-name structure by ``U``.
    ``antichain-limit`` mode builds, for each maximal antichain A, the
    ultrapower of ``V0`` by the ultrafilter U induces on A (functions
    A -> V0 modulo agreement on U's block) and takes the direct limit along
    refinement.
    """
    if U.algebra != algebra:
        raise ValueError("ultrafilter lives on a different algebra")
    if mode == "quotient":
        S = check_name_structure(V0, algebra)
        Q, cls_of = quotient_by_ultrafilter(S, U)
        embedding = {x: cls_of[f"^{V0.labels[x]}"] for x in range(V0.size)}
        return UltrapowerResult(Q, embedding, mode)
    if mode != "antichain-limit":
        raise ValueError(f"unknown mode {mode!r}")
    family = list(antichains) if antichains is not None else all_maximal_antichains(algebra)
    if not family:
        raise AntichainFamilyError("empty antichain family")
    for A in family:
        if A.algebra != algebra:
            raise AntichainFamilyError("antichain over a different algebra")
    _check_directed(family)

    # stage elements: (stage, function as tuple over the sorted blocks)
    k = V0.size
    parent: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    stages = []
    for s, A in enumerate(family):
        blocks = A.ordered()
        u_block = blocks.index(A.block_of(U.atom))
        funcs = list(itertools.product(range(k), repeat=len(blocks)))
        # classical ultrapower by the induced ultrafilter: agree on U's block
        for f in funcs:
            parent[(s, f)] = (s, f)
        by_value: dict = {}
        for f in funcs:
            by_value.setdefault(f[u_block], []).append(f)
        for group in by_value.values():
            for f in group[1:]:
                union((s, group[0]), (s, f))
        stages.append((blocks, u_block, funcs))
    for s, (blocks, _, funcs) in enumerate(stages):
        for t, (fine, _, _) in enumerate(stages):
            if s == t or not family[t].refines(family[s]):
                continue
            up = [next(i for i, b in enumerate(blocks) if c & ~b == 0) for c in fine]
            for f in funcs:
                union((s, f), (t, tuple(f[i] for i in up)))
    roots = sorted({find(x) for x in parent})
    index = {r: i for i, r in enumerate(roots)}
    rels = {}
    for sym, (arity, ts) in V0.relations.items():
        tuples = set()
        for s, (_, u_block, funcs) in enumerate(stages):
            for combo in itertools.product(funcs, repeat=arity):
                if tuple(f[u_block] for f in combo) in ts:
                    tuples.add(tuple(index[find((s, f))] for f in combo))
        rels[sym] = (arity, frozenset(tuples))
    labels = []
    for r in roots:
        s, f = r
        labels.append(f"[{'|'.join(str(V0.labels[x]) for x in f)}]@{s}")
    limit = ClassicalStructure(tuple(labels), rels)
    embedding = {}
    for x in range(k):
        s = 0
        const = (x,) * len(stages[s][0])
        embedding[x] = index[find((s, const))]
    return UltrapowerResult(limit, embedding, mode)


# -- generic filters --------------------------------------------------------

@dataclass(frozen=True)
class Poset:
    """Forcing conditions; ``(i, j)`` in ``leq`` means condition i extends j."""

    conditions: tuple
    leq: frozenset

    def __post_init__(self) -> None:
        n = len(self.conditions)
        if n == 0:
            raise ValueError("a poset needs at least one condition")
        rel = {(i, i) for i in range(n)}
        for i, j in self.leq:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"pair ({i}, {j}) is out of range")
            rel.add((int(i), int(j)))
        changed = True
        while changed:
            changed = False
            for (a, b) in list(rel):
                for (c, d) in list(rel):
                    if b == c and (a, d) not in rel:
                        rel.add((a, d))
                        changed = True
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(self, "leq", frozenset(rel))

    def le(self, i: int, j: int) -> bool:
        return (i, j) in self.leq

    def index(self, label) -> int:
        return self.conditions.index(label)

    @classmethod
    def from_json(cls, data: Mapping | str) -> "Poset":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple(data["conditions"]), frozenset(tuple(p) for p in data.get("leq", [])))


@dataclass(frozen=True)
class DenseSet:
    name: str
    members: frozenset

    def is_dense(self, P: Poset) -> int | None:
        """None when dense, else a condition with nothing of the set below it."""
        for p in range(len(P.conditions)):
            if not any(P.le(q, p) for q in self.members):
                return p
        return None


@dataclass(frozen=True)
class Filter:
    poset: Poset
    members: frozenset
    sequence: tuple

    def is_filter(self) -> bool:
        P = self.poset
        if not self.members:
            return False
        for p in self.members:
            for q in range(len(P.conditions)):
                if P.le(p, q) and q not in self.members:
                    return False
        for p, q in itertools.combinations(self.members, 2):
            if not any(P.le(r, p) and P.le(r, q) for r in self.members):
                return False
        return True

    def meets(self, D: DenseSet) -> bool:
        return bool(self.members & D.members)

    def to_json(self) -> dict:
        c = self.poset.conditions
        return {"filter": [c[i] for i in sorted(self.members)],
                "sequence": [c[i] for i in self.sequence], "is_filter": self.is_filter()}


def build_generic_filter(P: Poset, dense: Sequence[DenseSet], start: int | None = None) -> Filter:
    """Meet each listed dense set in turn along a descending sequence.

    Starts from ``start`` (default: the least-index condition every
    condition extends, else the least-index maximal one) and at step n moves
    to the least-index member of the n-th dense set extending the current
    condition.  The filter is the upward closure of the sequence.
    """
    for D in dense:
        witness = D.is_dense(P)
        if witness is not None:
            raise NotDenseError(f"{D.name} is not dense: nothing in it extends "
                                f"{P.conditions[witness]!r}", P.conditions[witness])
    n = len(P.conditions)
    if start is None:
        tops = [p for p in range(n) if all(P.le(q, p) for q in range(n))]
        if not tops:
            tops = [p for p in range(n) if not any(P.le(p, q) and not P.le(q, p)
                                                   for q in range(n))]
        start = tops[0]
    seq = [start]
    for D in dense:
        cur = seq[-1]
        seq.append(min(q for q in D.members if P.le(q, cur)))
    last = seq[-1]
    members = frozenset(q for q in range(n) if P.le(last, q))
    G = Filter(P, members, tuple(seq))
    if not G.is_filter() or not all(G.meets(D) for D in dense):
        raise AssertionError("diagonalization produced an invalid filter")
    return G


def binary_tree_poset(height: int) -> Poset:
    """0/1 strings of length <= height; longer strings extend their prefixes."""
    conds = [""]
    for length in range(1, height + 1):
        conds += ["".join(bits) for bits in itertools.product("01", repeat=length)]
    pos = {c: i for i, c in enumerate(conds)}
    leq = frozenset((pos[c], pos[c[:-1]]) for c in conds if c)
    return Poset(tuple(conds), leq)


# -- fixtures ---------------------------------------------------------------

def los_fixture_structures(count: int = 24, atoms: int = 3, max_names: int = 3,
                           seed: int = 20100101) -> list[BValuedStructure]:
    """Deterministic structures with one binary relation ``R``, built from stalks.

    Each atom gets a classical structure: a partition of the names and a
    binary relation on its blocks; gluing stalks always satisfies the
    equality axioms.
    """
    rng = random.Random(seed)
    algebra = FiniteBooleanAlgebra(atoms)
    out = []
    for i in range(count):
        k = 2 + (i % (max_names - 1)) if max_names > 1 else 1
        names = [f"t{j + 1}" for j in range(k)]
        stalks = []
        for _ in range(atoms):
            cls_of = []
            for j in range(k):
                cls_of.append(rng.randrange(0, (max(cls_of) + 2) if cls_of else 1))
            blocks = max(cls_of) + 1
            tuples = {(a, b) for a in range(blocks) for b in range(blocks) if rng.random() < 0.45}
            stalks.append((cls_of, {"R": (2, tuples)}))
        out.append(BValuedStructure.from_stalks(algebra, names, stalks))
    return out
