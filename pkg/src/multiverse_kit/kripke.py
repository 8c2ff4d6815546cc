"""Finite Kripke frames and models.

Worlds are ``0..n-1``.  A set of worlds is an ``int`` bitmask, and a frame
keeps, for every world, the bitmask of its successors.  Frame validity is
checked bit-parallel over all valuations at once: for a frame with ``n``
worlds and ``k`` variables every valuation is an integer ``v < 2**(n*k)``
whose bit ``i*n + w`` says whether variable ``i`` holds at world ``w``, and
the truth of a formula at world ``w`` under all valuations is one big
integer with bit ``v`` set when the formula holds under valuation ``v``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Mapping

from .limits import Limits, ResourceLimitError, current_limits
from .syntax import (
    And, Bot, Box, Diamond, Formula, Iff, Implies, Not, Or, Top, Var, variables,
)

__all__ = [
    "Frame", "KripkeModel", "FrameClass", "Quotient", "NotAPreorderError",
    "UnknownVariableError", "evaluate", "extension", "valid_on_frame",
    "frame_countermodel", "classify_frame", "in_class", "quotient_poset",
    "boolean_quotient", "enumerate_frames", "canonical_mask",
    "model_to_json", "model_from_json",
]


class NotAPreorderError(ValueError):
    pass


class UnknownVariableError(KeyError):
    pass


class FrameClass(str, Enum):
    ARBITRARY = "Arbitrary"
    TRANSITIVE = "Transitive"
    PREORDER = "Preorder"
    DIRECTED_PREORDER = "DirectedPreorder"
    PRE_LATTICE = "PreLattice"
    PRE_BOOLEAN_ALGEBRA = "PreBooleanAlgebra"
    LINEAR_PREORDER = "LinearPreorder"
    PARTIAL_ORDER = "PartialOrder"
    STRICT_PARTIAL_ORDER = "StrictPartialOrder"
    UNIVERSAL = "Universal"

    def __str__(self) -> str:
        return self.value


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class Frame:
    world_count: int
    edges: frozenset

    def __post_init__(self) -> None:
        n = self.world_count
        if not isinstance(n, int) or n < 1:
            raise ValueError(f"world_count must be a positive integer, got {n!r}")
        edges = frozenset((int(a), int(b)) for a, b in self.edges)
        for a, b in edges:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) references a world outside 0..{n - 1}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_mask(cls, n: int, mask: int) -> "Frame":
        return cls(n, frozenset(divmod(i, n) for i in _bits(mask)))

    @classmethod
    def from_successors(cls, succ: Iterable[int]) -> "Frame":
        succ = list(succ)
        return cls(len(succ), frozenset((w, u) for w, s in enumerate(succ) for u in _bits(s)))

    @cached_property
    def succ(self) -> tuple[int, ...]:
        out = [0] * self.world_count
        for a, b in self.edges:
            out[a] |= 1 << b
        return tuple(out)

    @cached_property
    def pred(self) -> tuple[int, ...]:
        out = [0] * self.world_count
        for a, b in self.edges:
            out[b] |= 1 << a
        return tuple(out)

    @cached_property
    def mask(self) -> int:
        n = self.world_count
        return sum(1 << (a * n + b) for a, b in self.edges)

    @property
    def full(self) -> int:
        return (1 << self.world_count) - 1

    def accessible(self, w: int, u: int) -> bool:
        return bool(self.succ[w] >> u & 1)

    def sorted_edges(self) -> list[list[int]]:
        return [list(e) for e in sorted(self.edges)]


@dataclass(frozen=True, eq=False)
class KripkeModel:
    """A frame plus the set of worlds where each variable holds."""

    frame: Frame
    valuation: Mapping[str, frozenset]

    def __post_init__(self) -> None:
        n = self.frame.world_count
        val = {}
        for name, worlds in self.valuation.items():
            ws = frozenset(int(w) for w in worlds)
            bad = [w for w in ws if not 0 <= w < n]
            if bad:
                raise ValueError(f"valuation of {name!r} mentions worlds {bad} outside 0..{n - 1}")
            val[name] = ws
        object.__setattr__(self, "valuation", dict(sorted(val.items())))

    @classmethod
    def from_masks(cls, frame: Frame, masks: Mapping[str, int]) -> "KripkeModel":
        return cls(frame, {k: frozenset(_bits(m)) for k, m in masks.items()})

    @cached_property
    def masks(self) -> dict[str, int]:
        return {k: sum(1 << w for w in ws) for k, ws in self.valuation.items()}

    def holds(self, world: int, var: str) -> bool:
        return world in self.valuation[var]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KripkeModel):
            return NotImplemented
        return self.frame == other.frame and self.valuation == other.valuation


# -- evaluation -------------------------------------------------------------

def _box(succ: tuple[int, ...], x: int) -> int:
    out = 0
    for w, s in enumerate(succ):
        if s & ~x == 0:
            out |= 1 << w
    return out


def _diamond(succ: tuple[int, ...], x: int) -> int:
    out = 0
    for w, s in enumerate(succ):
        if s & x:
            out |= 1 << w
    return out


def extension(model: KripkeModel, f: Formula) -> int:
    """Bitmask of the worlds where ``f`` holds."""
    succ = model.frame.succ
    full = model.frame.full
    masks = model.masks
    memo: dict[Formula, int] = {}

    def go(g: Formula) -> int:
        hit = memo.get(g)
        if hit is not None:
            return hit
        if isinstance(g, Var):
            try:
                r = masks[g.name]
            except KeyError:
                raise UnknownVariableError(f"variable {g.name!r} has no valuation") from None
        elif isinstance(g, Top):
            r = full
        elif isinstance(g, Bot):
            r = 0
        elif isinstance(g, Not):
            r = full & ~go(g.sub)
        elif isinstance(g, And):
            r = go(g.left) & go(g.right)
        elif isinstance(g, Or):
            r = go(g.left) | go(g.right)
        elif isinstance(g, Implies):
            r = (full & ~go(g.left)) | go(g.right)
        elif isinstance(g, Iff):
            r = full & ~(go(g.left) ^ go(g.right))
        elif isinstance(g, Box):
            r = _box(succ, go(g.sub))
        elif isinstance(g, Diamond):
            r = _diamond(succ, go(g.sub))
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = r
        return r

    return go(f)


def evaluate(model: KripkeModel, world: int, f: Formula) -> bool:
    """Truth of ``f`` at ``world`` under the usual Kripke clauses."""
    if not 0 <= world < model.frame.world_count:
        raise ValueError(f"world {world} outside 0..{model.frame.world_count - 1}")
    return bool(extension(model, f) >> world & 1)


@lru_cache(maxsize=64)
def _atom_patterns(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    nvals = 1 << (n * k)
    full = (1 << nvals) - 1
    out = []
    for i in range(k):
        row = []
        for w in range(n):
            t = i * n + w
            half = 1 << t
            block = ((1 << half) - 1) << half
            row.append(block * (full // ((1 << (2 * half)) - 1)))
        out.append(tuple(row))
    return tuple(out)


def _parallel_extension(frame: Frame, f: Formula, names: tuple[str, ...]) -> tuple[list[int], int]:
    n = frame.world_count
    nvals = 1 << (n * len(names))
    full = (1 << nvals) - 1
    patterns = _atom_patterns(n, len(names))
    atoms = {name: list(patterns[i]) for i, name in enumerate(names)}
    succ_lists = [list(_bits(s)) for s in frame.succ]
    memo: dict[Formula, list[int]] = {}

    def go(g: Formula) -> list[int]:
        hit = memo.get(g)
        if hit is not None:
            return hit
        if isinstance(g, Var):
            r = atoms[g.name]
        elif isinstance(g, Top):
            r = [full] * n
        elif isinstance(g, Bot):
            r = [0] * n
        elif isinstance(g, Not):
            r = [full ^ a for a in go(g.sub)]
        elif isinstance(g, And):
            r = [a & b for a, b in zip(go(g.left), go(g.right))]
        elif isinstance(g, Or):
            r = [a | b for a, b in zip(go(g.left), go(g.right))]
        elif isinstance(g, Implies):
            r = [(full ^ a) | b for a, b in zip(go(g.left), go(g.right))]
        elif isinstance(g, Iff):
            r = [full ^ (a ^ b) for a, b in zip(go(g.left), go(g.right))]
        elif isinstance(g, (Box, Diamond)):
            x = go(g.sub)
            r = []
            for succ in succ_lists:
                if isinstance(g, Box):
                    acc = full
                    for u in succ:
                        acc &= x[u]
                else:
                    acc = 0
                    for u in succ:
                        acc |= x[u]
                r.append(acc)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = r
        return r

    return go(f), full


def _check_valuation_space(frame: Frame, nvars: int, limits: Limits | None) -> None:
    limits = limits or current_limits()
    limits.require("worlds x variables", frame.world_count * nvars, limits.max_valuation_bits)


def frame_countermodel(frame: Frame, f: Formula, limits: Limits | None = None,
                       ) -> tuple[KripkeModel, int] | None:
    """Least (valuation, world) refuting ``f`` on ``frame``, or None.

    Valuations are ordered by their integer code (see module docstring),
    then worlds by index.
    """
    names = variables(f)
    _check_valuation_space(frame, len(names), limits)
    ext, full = _parallel_extension(frame, f, names)
    best = None
    for w, x in enumerate(ext):
        bad = full ^ x
        if bad:
            v = (bad & -bad).bit_length() - 1
            if best is None or v < best[0]:
                best = (v, w)
    if best is None:
        return None
    v, w = best
    n = frame.world_count
    masks = {name: (v >> (i * n)) & frame.full for i, name in enumerate(names)}
    return KripkeModel.from_masks(frame, masks), w


def valid_on_frame(frame: Frame, f: Formula, limits: Limits | None = None) -> bool:
    """True iff ``f`` holds at every world under every valuation of its variables."""
    names = variables(f)
    _check_valuation_space(frame, len(names), limits)
    ext, full = _parallel_extension(frame, f, names)
    return all(x == full for x in ext)


# -- frame classes ----------------------------------------------------------

def _is_reflexive(succ) -> bool:
    return all(s >> w & 1 for w, s in enumerate(succ))


def _is_irreflexive(succ) -> bool:
    return not any(s >> w & 1 for w, s in enumerate(succ))


def _is_transitive(succ) -> bool:
    for s in succ:
        for u in _bits(s):
            if succ[u] & ~s:
                return False
    return True


def _is_convergent(succ) -> bool:
    for s in succ:
        targets = list(_bits(s))
        for i, u in enumerate(targets):
            for v in targets[i:]:
                if not succ[u] & succ[v]:
                    return False
    return True


@dataclass(frozen=True)
class Quotient:
    """Cluster quotient of a preorder.

    ``clusters`` are sorted tuples of worlds, ordered by least member;
    ``leq`` holds ``(c, d)`` when cluster ``c`` sees cluster ``d``.
    """

    clusters: tuple[tuple[int, ...], ...]
    cluster_of: tuple[int, ...]
    leq: frozenset

    @property
    def size(self) -> int:
        return len(self.clusters)

    def le(self, c: int, d: int) -> bool:
        return (c, d) in self.leq

    def up(self, c: int) -> frozenset:
        return frozenset(d for d in range(self.size) if (c, d) in self.leq)


def quotient_poset(frame: Frame) -> Quotient:
    succ = frame.succ
    if not (_is_reflexive(succ) and _is_transitive(succ)):
        raise NotAPreorderError("frame is not reflexive and transitive")
    return _quotient(succ)


def _quotient(succ) -> Quotient:
    n = len(succ)
    cluster_of = [-1] * n
    clusters = []
    for w in range(n):
        if cluster_of[w] >= 0:
            continue
        members = tuple(u for u in range(n) if succ[w] >> u & 1 and succ[u] >> w & 1)
        for u in members:
            cluster_of[u] = len(clusters)
        clusters.append(members)
    leq = frozenset(
        (c, d)
        for c, cm in enumerate(clusters)
        for d, dm in enumerate(clusters)
        if succ[cm[0]] >> dm[0] & 1
    )
    return Quotient(tuple(clusters), tuple(cluster_of), leq)


def _poset_is_lattice(q: Quotient) -> bool:
    k = q.size
    ups = [q.up(c) for c in range(k)]
    downs = [frozenset(d for d in range(k) if (d, c) in q.leq) for c in range(k)]
    for a in range(k):
        for b in range(a + 1, k):
            upper = ups[a] & ups[b]
            if not any(upper <= ups[j] for j in upper):
                return False
            lower = downs[a] & downs[b]
            if not any(lower <= downs[j] for j in lower):
                return False
    return True


def _poset_is_total(q: Quotient) -> bool:
    return all((a, b) in q.leq or (b, a) in q.leq
               for a in range(q.size) for b in range(a + 1, q.size))


def _powerset_map(q: Quotient) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """(atom clusters, cluster -> atom-set mask) when the quotient is a powerset order."""
    k = q.size
    if k & (k - 1):
        return None
    bottoms = [c for c in range(k) if all((c, d) in q.leq for d in range(k))]
    if len(bottoms) != 1:
        return None
    bottom = bottoms[0]
    above = [c for c in range(k) if c != bottom]
    atoms = tuple(c for c in above
                  if not any(d != c and (d, c) in q.leq for d in above))
    if 1 << len(atoms) != k:
        return None
    image = tuple(sum(1 << i for i, a in enumerate(atoms) if (a, c) in q.leq) for c in range(k))
    if len(set(image)) != k:
        return None
    for c in range(k):
        for d in range(k):
            if ((c, d) in q.leq) != (image[c] & ~image[d] == 0):
                return None
    return atoms, image


def boolean_quotient(frame: Frame) -> tuple[Quotient, tuple[int, ...], tuple[int, ...]] | None:
    """For a pre-Boolean-algebra frame: (quotient, atom clusters, cluster -> subset mask)."""
    succ = frame.succ
    if not (_is_reflexive(succ) and _is_transitive(succ)):
        return None
    q = _quotient(succ)
    found = _powerset_map(q)
    if found is None:
        return None
    return q, found[0], found[1]


def _classify_succ(succ) -> set[FrameClass]:
    out = {FrameClass.ARBITRARY}
    if not _is_transitive(succ):
        return out
    out.add(FrameClass.TRANSITIVE)
    if _is_irreflexive(succ):
        out.add(FrameClass.STRICT_PARTIAL_ORDER)
    if not _is_reflexive(succ):
        return out
    out.add(FrameClass.PREORDER)
    q = _quotient(succ)
    if q.size == len(succ):
        out.add(FrameClass.PARTIAL_ORDER)
    if q.size == 1:
        out.add(FrameClass.UNIVERSAL)
    if _is_convergent(succ):
        out.add(FrameClass.DIRECTED_PREORDER)
    if _poset_is_total(q):
        out.add(FrameClass.LINEAR_PREORDER)
    if _poset_is_lattice(q):
        out.add(FrameClass.PRE_LATTICE)
        if _powerset_map(q) is not None:
            out.add(FrameClass.PRE_BOOLEAN_ALGEBRA)
    return out


def classify_frame(frame: Frame) -> set[FrameClass]:
    return _classify_succ(frame.succ)


def in_class(frame: Frame, cls: FrameClass) -> bool:
    return FrameClass(cls) in _classify_succ(frame.succ)


# -- enumeration ------------------------------------------------------------

def _succ_to_mask(succ) -> int:
    n = len(succ)
    return sum(s << (w * n) for w, s in enumerate(succ))


def _mask_to_succ(n: int, mask: int) -> tuple[int, ...]:
    row = (1 << n) - 1
    return tuple((mask >> (w * n)) & row for w in range(n))


@lru_cache(maxsize=None)
def _transitive_relations(n: int) -> tuple[tuple[int, ...], ...]:
    """All transitive relations on n labeled points, as successor tuples."""
    if n == 0:
        return ((),)
    out = []
    m = n - 1
    x = 1 << m
    subsets = range(1 << m)
    for succ in _transitive_relations(m):
        pred = [0] * m
        for a, s in enumerate(succ):
            for b in _bits(s):
                pred[b] |= 1 << a
        down_closed = [p for p in subsets if all(pred[b] & ~p == 0 for b in _bits(p))]
        up_closed = [s for s in subsets if all(succ[b] & ~s == 0 for b in _bits(s))]
        for p in down_closed:
            common = (1 << m) - 1
            for a in _bits(p):
                common &= succ[a]
            for s in up_closed:
                if p and s & ~common:
                    continue
                loops = (True,) if p & s else (False, True)
                for loop in loops:
                    new = [succ[a] | (x if p >> a & 1 else 0) for a in range(m)]
                    new.append(s | (x if loop else 0))
                    out.append(tuple(new))
    return tuple(out)


@lru_cache(maxsize=None)
def _permutation_tables(n: int):
    perms = list(itertools.permutations(range(n)))
    tables = []
    for perm in perms:
        row_map = []
        for row in range(1 << n):
            row_map.append(sum(1 << perm[j] for j in _bits(row)))
        tables.append((perm, row_map))
    return tables


def canonical_mask(n: int, mask: int) -> int:
    """Least adjacency mask over all relabelings of the worlds."""
    row = (1 << n) - 1
    rows = [(mask >> (w * n)) & row for w in range(n)]
    best = None
    for perm, row_map in _permutation_tables(n):
        m = 0
        for w in range(n):
            m |= row_map[rows[w]] << (perm[w] * n)
        if best is None or m < best:
            best = m
    return best


@lru_cache(maxsize=None)
def _frames_of_size(n: int, cls: FrameClass, up_to_iso: bool) -> tuple[int, ...]:
    if cls is FrameClass.ARBITRARY:
        masks = range(1 << (n * n))
    else:
        masks = (_succ_to_mask(s) for s in _transitive_relations(n))
        masks = [m for m in masks if cls in _classify_succ(_mask_to_succ(n, m))]
    if up_to_iso:
        masks = {canonical_mask(n, m) for m in masks}
    return tuple(sorted(masks))


def enumerate_frames(max_worlds: int, cls: FrameClass = FrameClass.ARBITRARY, *,
                     up_to_iso: bool = False, min_worlds: int = 1,
                     limits: Limits | None = None) -> Iterator[Frame]:
    """Every frame with ``min_worlds..max_worlds`` worlds in ``cls``.

    Order: by world count, then by adjacency mask (bit ``i*n + j`` for the
    edge ``(i, j)``).  With ``up_to_iso`` only the least-mask member of each
    isomorphism class is produced.
    """
    cls = FrameClass(cls)
    limits = limits or current_limits()
    limits.require("max_worlds", max_worlds, limits.max_worlds)
    if cls is FrameClass.ARBITRARY and max_worlds * max_worlds > limits.max_valuation_bits:
        raise ResourceLimitError(
            f"arbitrary frames on {max_worlds} worlds means 2**{max_worlds ** 2} relations")
    for n in range(max(min_worlds, 1), max_worlds + 1):
        for mask in _frames_of_size(n, cls, up_to_iso):
            yield Frame.from_mask(n, mask)


# -- JSON -------------------------------------------------------------------

def model_to_json(model: KripkeModel) -> dict:
    return {
        "worlds": model.frame.world_count,
        "edges": model.frame.sorted_edges(),
        "valuation": {k: sorted(v) for k, v in model.valuation.items()},
    }


def model_from_json(data: Mapping | str) -> KripkeModel:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        frame = Frame(int(data["worlds"]), frozenset(tuple(e) for e in data.get("edges", [])))
    except KeyError as exc:
        raise ValueError(f"model JSON is missing {exc}") from None
    return KripkeModel(frame, {k: frozenset(v) for k, v in data.get("valuation", {}).items()})
