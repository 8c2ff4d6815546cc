"""Grounds, mantles and the generic multiverse on finite abstract graphs.

A ``MultiverseGraph`` lists worlds with finite contents and a ground
relation: the pair ``[w, v]`` says w is a ground of v.  Every world is
its own (trivial) ground, so reflexive pairs may be omitted.  The relation
must be transitive, antisymmetric and content monotone.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

__all__ = [
    "MultiverseGraph", "LabeledMultiverse", "GeologyError", "MissingRelationError",
    "WorldAnalysis", "DDGResult", "GenericMultiverse", "InnerMantleTrace", "AxiomReport",
    "analyze_world", "check_ddg", "generic_multiverse", "inner_mantles",
    "geology_report", "check_multiverse_axioms", "MULTIVERSE_AXIOMS", "PAIR_RELATIONS",
]


class GeologyError(ValueError):
    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message if witness is None else f"{message} (witness: {witness})")


class MissingRelationError(GeologyError):
    pass


def _sorted(ids: Iterable) -> list:
    return sorted(ids, key=lambda x: (isinstance(x, str), x))


@dataclass(frozen=True, eq=False)
class MultiverseGraph:
    worlds: tuple
    content: Mapping
    ground: frozenset

    def __post_init__(self) -> None:
        worlds = tuple(_sorted(self.worlds))
        if len(set(worlds)) != len(worlds):
            raise GeologyError("duplicate world id")
        if not worlds:
            raise GeologyError("a multiverse graph needs at least one world")
        content = {w: frozenset(self.content.get(w, ())) for w in worlds}
        ids = set(worlds)
        rel = set()
        for w, v in self.ground:
            if w not in ids or v not in ids:
                raise GeologyError("ground edge mentions an unknown world", [w, v])
            rel.add((w, v))
        rel |= {(w, w) for w in worlds}
        object.__setattr__(self, "worlds", worlds)
        object.__setattr__(self, "content", content)
        object.__setattr__(self, "ground", frozenset(rel))
        self._validate()

    def _validate(self) -> None:
        rel = self.ground
        for w, v in sorted(rel, key=lambda p: (_sorted(p), str(p))):
            if not self.content[w] <= self.content[v]:
                missing = _sorted(self.content[w] - self.content[v])
                raise GeologyError(f"content of ground {w!r} is not contained in {v!r}; "
                                   f"missing {missing}", [w, v])
            if w != v and (v, w) in rel:
                raise GeologyError("ground relation is not antisymmetric", [w, v])
        for (a, b), (c, d) in itertools.product(rel, rel):
            if b == c and (a, d) not in rel:
                raise GeologyError(f"ground relation is not transitive: [{a!r}, {b!r}] and "
                                   f"[{c!r}, {d!r}] but not [{a!r}, {d!r}]", [a, d])

    def is_ground(self, w, v) -> bool:
        return (w, v) in self.ground

    def grounds(self, v) -> list:
        self._check(v)
        return [w for w in self.worlds if (w, v) in self.ground]

    def extensions(self, v) -> list:
        self._check(v)
        return [u for u in self.worlds if (v, u) in self.ground]

    def _check(self, v) -> None:
        if v not in self.content:
            raise GeologyError(f"unknown world {v!r}")

    def world_id(self, raw):
        """Resolve a command-line world id (always a string) to a stored one."""
        if raw in self.content:
            return raw
        for w in self.worlds:
            if str(w) == str(raw):
                return w
        raise GeologyError(f"unknown world {raw!r}")

    def relabel(self, mapping: Mapping) -> "MultiverseGraph":
        """Rename content elements (not worlds)."""
        return MultiverseGraph(self.worlds,
                               {w: frozenset(mapping.get(x, x) for x in c)
                                for w, c in self.content.items()},
                               self.ground)

    def to_json(self) -> dict:
        return {"worlds": [{"id": w, "content": _sorted(self.content[w])} for w in self.worlds],
                "ground": [[w, v] for w, v in _sorted_pairs(self.ground) if w != v]}

    @classmethod
    def from_json(cls, data: Mapping | str) -> "MultiverseGraph":
        if isinstance(data, str):
            data = json.loads(data)
        if "worlds" not in data:
            raise GeologyError("graph JSON needs a 'worlds' list")
        worlds = []
        content = {}
        for entry in data["worlds"]:
            if "id" not in entry:
                raise GeologyError("every world needs an 'id'", entry)
            wid = entry["id"]
            worlds.append(wid)
            content[wid] = frozenset(entry.get("content", []))
        ground = frozenset(tuple(p) for p in data.get("ground", []))
        for p in ground:
            if len(p) != 2:
                raise GeologyError("ground entries must be pairs", list(p))
        return cls(tuple(worlds), content, ground)


# -- per-world geology ------------------------------------------------------

@dataclass
class WorldAnalysis:
    world: object
    grounds: list
    bedrocks: list
    ground_axiom: bool
    mantle: list

    def to_json(self) -> dict:
        return {"world": self.world, "grounds": self.grounds, "bedrocks": self.bedrocks,
                "ground_axiom": self.ground_axiom, "mantle": self.mantle}


def _mantle(g: MultiverseGraph, worlds: Iterable) -> frozenset:
    out = None
    for w in worlds:
        out = g.content[w] if out is None else out & g.content[w]
    return out if out is not None else frozenset()


def analyze_world(g: MultiverseGraph, v) -> WorldAnalysis:
    """Grounds, minimal grounds, the ground axiom flag and the mantle of ``v``."""
    grounds = g.grounds(v)
    bedrocks = [w for w in grounds if not any(u != w and g.is_ground(u, w) for u in grounds)]
    return WorldAnalysis(v, grounds, bedrocks, grounds == [v], _sorted(_mantle(g, grounds)))


@dataclass
class DDGResult:
    world: object
    ddg: bool
    strong_ddg: bool
    witness: list | None
    note: str = ("on a finite graph every family of grounds is finite, so strong "
                 "directedness coincides with pairwise directedness")

    def to_json(self) -> dict:
        return {"world": self.world, "ddg": self.ddg, "strong_ddg": self.strong_ddg,
                "witness": self.witness, "note": self.note}


def _common_ground(g: MultiverseGraph, worlds: Sequence) -> object | None:
    for t in g.worlds:
        if all(g.is_ground(t, w) for w in worlds):
            return t
    return None


def check_ddg(g: MultiverseGraph, v) -> DDGResult:
    """Whether every two grounds of ``v`` share a ground; a failing pair is the witness."""
    grounds = g.grounds(v)
    for r, s in itertools.combinations(grounds, 2):
        if _common_ground(g, (r, s)) is None:
            return DDGResult(v, False, False, [r, s])
    # pairwise directedness over finitely many grounds yields a lower bound
    # for the whole family, checked directly rather than assumed
    strong = _common_ground(g, grounds) is not None
    return DDGResult(v, True, strong, None)


@dataclass
class GenericMultiverse:
    world: object
    worlds: list
    generic_mantle: list
    two_step: bool
    two_step_witness: list | None

    def to_json(self) -> dict:
        return {"world": self.world, "worlds": self.worlds, "generic_mantle": self.generic_mantle,
                "two_step": self.two_step, "two_step_witness": self.two_step_witness}


def generic_multiverse(g: MultiverseGraph, v) -> GenericMultiverse:
    """Closure of ``v`` under grounds and extensions, with its generic mantle.

    The generic mantle intersects the contents of every ground of every
    extension of ``v``.  ``two_step`` asks that any two worlds of the
    closure have a common ground.
    """
    g._check(v)
    seen = {v}
    frontier = [v]
    while frontier:
        nxt = []
        for w in frontier:
            for u in g.worlds:
                if u not in seen and (g.is_ground(u, w) or g.is_ground(w, u)):
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    closure = _sorted(seen)
    reach = {w for u in g.extensions(v) for w in g.grounds(u)}
    witness = None
    for a, b in itertools.combinations(closure, 2):
        if _common_ground(g, (a, b)) is None:
            witness = [a, b]
            break
    return GenericMultiverse(v, closure, _sorted(_mantle(g, reach)), witness is None, witness)


@dataclass
class InnerMantleTrace:
    world: object
    trace: list
    status: str
    outer_core: object | None = None
    unrealized_mantle: list | None = None

    def to_json(self) -> dict:
        out = {"world": self.world, "trace": self.trace, "status": self.status,
               "outer_core": self.outer_core}
        if self.unrealized_mantle is not None:
            out["unrealized_mantle"] = self.unrealized_mantle
        return out


def inner_mantles(g: MultiverseGraph, v, max_iter: int = 32) -> InnerMantleTrace:
    """Iterate 'move to the world whose content is the current mantle'.

    Stops at a ground-axiom world (the outer core), when no world has the
    mantle as its content, when a world repeats, or after ``max_iter`` moves.
    Among several matching worlds the least id is taken.
    """
    g._check(v)
    trace = [v]
    cur = v
    for _ in range(max_iter):
        info = analyze_world(g, cur)
        if info.ground_axiom:
            return InnerMantleTrace(v, trace, "outer core", cur)
        mantle = frozenset(info.mantle)
        matches = [w for w in g.worlds if g.content[w] == mantle]
        if not matches:
            return InnerMantleTrace(v, trace, "mantle not realized in graph", None, info.mantle)
        nxt = matches[0]
        if nxt in trace:
            return InnerMantleTrace(v, trace + [nxt], "cycle")
        trace.append(nxt)
        cur = nxt
    if analyze_world(g, cur).ground_axiom:
        return InnerMantleTrace(v, trace, "outer core", cur)
    return InnerMantleTrace(v, trace, "max_iter")


def geology_report(g: MultiverseGraph, v, max_iter: int = 32) -> dict:
    info = analyze_world(g, v)
    ddg = check_ddg(g, v)
    gm = generic_multiverse(g, v)
    inner = inner_mantles(g, v, max_iter)
    notes = []
    if len(info.bedrocks) > 1:
        notes.append("several bedrocks: permitted in finite graphs, which settles nothing "
                     "about models of set theory")
    return {"world": v, "grounds": info.grounds, "bedrocks": info.bedrocks,
            "ground_axiom": info.ground_axiom, "mantle": info.mantle,
            "ddg": ddg.ddg, "strong_ddg": ddg.strong_ddg, "ddg_witness": ddg.witness,
            "generic_multiverse": gm.worlds, "generic_mantle": gm.generic_mantle,
            "two_step": gm.two_step, "inner_mantles": inner.to_json(), "notes": notes}


# -- multiverse axioms on labeled graphs -------------------------------------

PAIR_RELATIONS = ("inner_model", "forcing_ext", "reflects", "countable_in",
                  "illfounded_in", "absorbed_L")

# axiom -> (relation, successor must differ from the world)
MULTIVERSE_AXIOMS: dict[str, tuple[str, bool]] = {
    "realizability": ("inner_model", False),
    "forcing-extension": ("forcing_ext", False),
    "reflection": ("reflects", True),
    "countability": ("countable_in", True),
    "mirage": ("illfounded_in", True),
    "reverse-embedding": ("embeds", False),
    "absorption": ("absorbed_L", True),
}


@dataclass(frozen=True)
class EmbeddingEdge:
    id: str
    source: object
    target: object
    iterate: str | None


@dataclass(frozen=True, eq=False)
class LabeledMultiverse:
    """A graph plus labeled pair relations and tagged embeddings.

    ``forcing_ext`` pair ``[v, w]`` says w is a forcing extension of v, so it
    must also be a ground edge; ``inner_model`` pair ``[w, v]`` says w is an
    inner model of v.  Other pairs ``[v, w]`` point from v to a witness w.
    Embedding edge ``h`` with ``iterate: j``
    says the embedding j is an iterate of h.
    """

    graph: MultiverseGraph
    relations: Mapping[str, frozenset]
    embeds: tuple = ()
    # labels present in the input, even if empty
    declared: frozenset = frozenset()

    def __post_init__(self) -> None:
        g = self.graph
        for name, pairs in self.relations.items():
            if name not in PAIR_RELATIONS:
                raise GeologyError(f"unknown label {name!r}")
            for a, b in pairs:
                # inner_model [w, v] names w as an inner model of v; realizability
                # is the check that w is a world, so it may dangle here
                if b not in g.content or (a not in g.content and name != "inner_model"):
                    raise GeologyError(f"{name} edge mentions an unknown world", [a, b])
        for v, w in self.relations.get("forcing_ext", ()):
            if not g.is_ground(v, w):
                raise GeologyError("forcing extension edge is not a ground edge", [v, w])
        ids = [e.id for e in self.embeds]
        if len(set(ids)) != len(ids):
            raise GeologyError("duplicate embedding id")
        for e in self.embeds:
            if e.source not in g.content or e.target not in g.content:
                raise GeologyError("embedding mentions an unknown world", e.id)
            if e.iterate is not None and e.iterate not in ids:
                raise GeologyError("iterate tag names an unknown embedding", e.id)

    @classmethod
    def from_json(cls, data: Mapping | str) -> "LabeledMultiverse":
        if isinstance(data, str):
            data = json.loads(data)
        graph = MultiverseGraph.from_json(data)
        labels = dict(data.get("labels", {}))
        embeds = tuple(EmbeddingEdge(str(e["id"]), e["from"], e["to"],
                                     None if e.get("iterate") is None else str(e["iterate"]))
                       for e in labels.pop("embeds", []))
        rels = {name: frozenset(tuple(p) for p in pairs) for name, pairs in labels.items()}
        return cls(graph, rels, embeds, frozenset(data.get("labels", {})))

    def has(self, relation: str) -> bool:
        if relation == "embeds":
            return bool(self.embeds) or "embeds" in self.declared
        return relation in self.relations


@dataclass
class AxiomReport:
    results: dict
    notes: list

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.results.values())

    def to_json(self) -> dict:
        return {"passed": self.passed, "axioms": self.results, "notes": self.notes}


def _has_cycle(pairs: Iterable[tuple]) -> bool:
    succ: dict = {}
    for a, b in pairs:
        if a != b:
            succ.setdefault(a, set()).add(b)
    state: dict = {}

    def visit(x) -> bool:
        state[x] = 1
        for y in succ.get(x, ()):
            if state.get(y) == 1 or (y not in state and visit(y)):
                return True
        state[x] = 2
        return False

    return any(x not in state and visit(x) for x in list(succ))


def check_multiverse_axioms(lm: LabeledMultiverse, axioms: Sequence[str] | None = None,
                            ) -> AxiomReport:
    """Read each axiom as a for-all/exists condition on the supplied edges."""
    chosen = list(MULTIVERSE_AXIOMS) if axioms is None else list(axioms)
    g = lm.graph
    results = {}
    notes = []
    for name in chosen:
        if name not in MULTIVERSE_AXIOMS:
            raise GeologyError(f"unknown axiom {name!r}; expected one of "
                               f"{', '.join(MULTIVERSE_AXIOMS)}")
        rel, other = MULTIVERSE_AXIOMS[name]
        if not lm.has(rel):
            raise MissingRelationError(f"axiom {name} needs the {rel} relation")
        failures = []
        if name == "realizability":
            for w, v in _sorted_pairs(lm.relations[rel]):
                if w not in g.content:
                    failures.append({"edge": [w, v], "reason": "inner model is not a world"})
        elif name == "reverse-embedding":
            for e in sorted(lm.embeds, key=lambda e: e.id):
                if not any(h.iterate == e.id and h.id != e.id for h in lm.embeds):
                    failures.append({"embedding": e.id,
                                     "reason": "no other embedding has it as an iterate"})
            edges = [(h.id, h.iterate) for h in lm.embeds if h.iterate is not None]
            if _has_cycle(edges):
                notes.append(f"{name}: the iterate tags form a cycle, which is permitted "
                             "at toy scale")
        else:
            pairs = lm.relations[rel]
            for v in g.worlds:
                succ = [w for a, w in pairs if a == v and (w != v or not other)]
                if not succ:
                    failures.append({"world": v, "reason": f"no {rel} successor"
                                     + (" other than itself" if other else "")})
            if _has_cycle(pairs):
                notes.append(f"{name}: {rel} edges form a cycle, which is permitted at toy scale")
        results[name] = {"relation": rel, "passed": not failures, "failures": failures}
    return AxiomReport(results, notes)


def _sorted_pairs(pairs: Iterable[tuple]) -> list:
    return sorted(pairs, key=lambda p: (str(p[0]), str(p[1])))
