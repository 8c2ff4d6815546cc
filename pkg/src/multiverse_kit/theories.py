"""Named modal axioms, the theories built from them, and semantic decision.

Decision is by exhaustive frame search: a formula is refuted in a theory
when some finite frame of the theory's class carries a valuation falsifying
it.  A search up to ``bound`` worlds is only a proof of validity when the
bound reaches the filtration bound ``2**|subformulas(f)|``; verdicts carry a
``complete`` flag saying whether it did.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Union

from .kripke import (
    Frame, FrameClass, KripkeModel, evaluate, enumerate_frames,
    frame_countermodel, in_class, model_to_json, valid_on_frame,
)
from .limits import Limits
from .syntax import AxiomScheme, Formula, parse_formula, render_formula, subformulas

__all__ = [
    "NamedAxiom", "ModalTheory", "Valid", "Refuted", "Unknown", "Verdict",
    "AXIOM_SOURCES", "THEORY_AXIOMS", "DIAGRAM_EDGES", "axiom_catalog", "axiom",
    "theory", "theory_names", "decide", "find_countermodel",
    "verify_frame_inclusions", "InclusionReport", "EdgeResult",
]

# Templates with metavariables p (for phi) and q (for psi).
AXIOM_SOURCES: dict[str, str] = {
    "K": "[](p -> q) -> ([]p -> []q)",
    "Dual": "[]~p <-> ~<>p",
    "S": "[]p -> p",
    "4": "[]p -> [][]p",
    ".2": "<>[]p -> []<>p",
    "5": "<>[]p -> p",
    "M": "[]<>p -> <>[]p",
    "W5": "<>[]p -> (p -> []p)",
    ".3": "<>p & <>q -> (<>(p & <>q) | <>(p & q) | <>(q & <>p))",
    "Dm": "[]([](p -> []p) -> p) -> (<>[]p -> p)",
    "Grz": "[]([](p -> []p) -> p) -> p",
    "Löb": "[]([]p -> p) -> []p",
    "H": "p -> [](<>p -> p)",
}

_ALIASES = {"Lob": "Löb", "Loeb": "Löb", "L": "Löb", "T": "S", "2": ".2", "3": ".3"}

# Composition as printed in the theory table, flattened to axiom sets.
THEORY_AXIOMS: dict[str, tuple[str, ...]] = {
    "K": ("K", "Dual"),
    "K4": ("K", "Dual", "4"),
    "S4": ("K", "Dual", "4", "S"),
    "S4.1": ("K", "Dual", "4", "S", "M"),
    "S4.2": ("K", "Dual", "4", "S", ".2"),
    "S4.2.1": ("K", "Dual", "4", "S", ".2", "M"),
    "S4.3": ("K", "Dual", "4", "S", ".3"),
    "S4W5": ("K", "Dual", "4", "S", "W5"),
    "S5": ("K", "Dual", "4", "S", "5"),
    "Dm": ("K", "Dual", "4", "S", "Dm"),
    "Dm.2": ("K", "Dual", "4", "S", ".2", "Dm"),
    "Grz": ("K", "Dual", "Grz"),
    "GL": ("K", "Dual", "4", "Löb"),
    "K4H": ("K", "Dual", "4", "H"),
}

# Finite frame classes.  Theories whose class is not one of the named ones
# search the base class and keep only frames validating the listed axioms.
_THEORY_CLASSES: dict[str, tuple[FrameClass, tuple[str, ...]]] = {
    "K": (FrameClass.ARBITRARY, ()),
    "K4": (FrameClass.TRANSITIVE, ()),
    "S4": (FrameClass.PREORDER, ()),
    "S4.1": (FrameClass.PREORDER, ("M",)),
    "S4.2": (FrameClass.DIRECTED_PREORDER, ()),
    "S4.2.1": (FrameClass.DIRECTED_PREORDER, ("M",)),
    "S4.3": (FrameClass.LINEAR_PREORDER, ()),
    "S4W5": (FrameClass.PREORDER, ("W5",)),
    "S5": (FrameClass.UNIVERSAL, ()),
    "Dm": (FrameClass.PREORDER, ("Dm",)),
    "Dm.2": (FrameClass.DIRECTED_PREORDER, ("Dm",)),
    "Grz": (FrameClass.PARTIAL_ORDER, ()),
    "GL": (FrameClass.STRICT_PARTIAL_ORDER, ()),
    "K4H": (FrameClass.TRANSITIVE, ("H",)),
}

# Strength diagram, stronger theory first.
DIAGRAM_EDGES: tuple[tuple[str, str], ...] = (
    ("S5", "S4W5"),
    ("S4W5", "S4.3"),
    ("S4W5", "Dm.2"),
    ("S4.2.1", "S4.1"),
    ("S4.2.1", "S4.2"),
    ("S4.3", "S4.2"),
    ("Dm.2", "S4.2"),
    ("Dm.2", "Dm"),
    ("Grz", "Dm"),
    ("S4.1", "S4"),
    ("S4.2", "S4"),
    ("Dm", "S4"),
    ("GL", "K4"),
    ("K4H", "K4"),
    ("S4", "K4"),
    ("K4", "K"),
)


@dataclass(frozen=True)
class NamedAxiom:
    name: str
    scheme: AxiomScheme

    @property
    def template(self) -> Formula:
        return self.scheme.template


@lru_cache(maxsize=None)
def _catalog() -> tuple[NamedAxiom, ...]:
    return tuple(NamedAxiom(name, AxiomScheme(name, parse_formula(src)))
                 for name, src in AXIOM_SOURCES.items())


def axiom_catalog() -> list[NamedAxiom]:
    """All thirteen named axioms, in table order."""
    return list(_catalog())


def axiom(name: str) -> NamedAxiom:
    name = _ALIASES.get(name, name)
    for ax in _catalog():
        if ax.name == name:
            return ax
    raise KeyError(f"unknown axiom {name!r}")


@dataclass(frozen=True)
class ModalTheory:
    name: str
    axioms: tuple[NamedAxiom, ...]
    frame_class: FrameClass
    frame_axioms: tuple[NamedAxiom, ...] = ()

    def admits(self, frame: Frame, limits: Limits | None = None) -> bool:
        """Frame belongs to this theory's finite frame class."""
        return in_class(frame, self.frame_class) and all(
            valid_on_frame(frame, ax.template, limits) for ax in self.frame_axioms)

    def frames(self, max_worlds: int, limits: Limits | None = None, **kw) -> Iterable[Frame]:
        for fr in enumerate_frames(max_worlds, self.frame_class, limits=limits, **kw):
            if all(valid_on_frame(fr, ax.template, limits) for ax in self.frame_axioms):
                yield fr


def theory_names() -> list[str]:
    return list(THEORY_AXIOMS)


@lru_cache(maxsize=None)
def theory(name: str) -> ModalTheory:
    if name not in THEORY_AXIOMS:
        raise KeyError(f"unknown theory {name!r}; expected one of {', '.join(THEORY_AXIOMS)}")
    cls, extra = _THEORY_CLASSES[name]
    return ModalTheory(name, tuple(axiom(a) for a in THEORY_AXIOMS[name]), cls,
                       tuple(axiom(a) for a in extra))


# -- verdicts ---------------------------------------------------------------

@dataclass(frozen=True)
class Valid:
    searched_bound: int
    complete: bool
    filtration_bound: int

    def to_json(self) -> dict:
        return {"verdict": "valid", "searched_bound": self.searched_bound,
                "complete": self.complete, "filtration_bound": self.filtration_bound}


@dataclass(frozen=True)
class Refuted:
    model: KripkeModel
    world: int

    def to_json(self) -> dict:
        return {"verdict": "refuted", "world": self.world, "countermodel": model_to_json(self.model)}


@dataclass(frozen=True)
class Unknown:
    bound_exhausted: int
    filtration_bound: int

    def to_json(self) -> dict:
        return {"verdict": "unknown", "bound_exhausted": self.bound_exhausted,
                "filtration_bound": self.filtration_bound}


Verdict = Union[Valid, Refuted, Unknown]


def filtration_bound(f: Formula) -> int:
    return 2 ** len(subformulas(f))


def decide(th: ModalTheory | str, f: Formula | str, bound: int, *,
           incomplete: str = "valid", limits: Limits | None = None) -> Verdict:
    """Search the theory's frames up to ``bound`` worlds for a countermodel.

    ``incomplete`` chooses what an unsuccessful search below the filtration
    bound reports: ``"valid"`` (with ``complete=False``) or ``"unknown"``.
    """
    if isinstance(th, str):
        th = theory(th)
    if isinstance(f, str):
        f = parse_formula(f)
    if incomplete not in ("valid", "unknown"):
        raise ValueError("incomplete must be 'valid' or 'unknown'")
    fb = filtration_bound(f)
    for fr in th.frames(bound, limits):
        hit = frame_countermodel(fr, f, limits)
        if hit is not None:
            model, world = hit
            _reverify(model, world, f)
            return Refuted(model, world)
    complete = bound >= fb
    if not complete and incomplete == "unknown":
        return Unknown(bound, fb)
    return Valid(bound, complete, fb)


def _reverify(model: KripkeModel, world: int, f: Formula) -> None:
    if evaluate(model, world, f):
        raise AssertionError(
            f"stale countermodel for {render_formula(f)} at world {world}")


def find_countermodel(cls: FrameClass | str, f: Formula | str, max_worlds: int, *,
                      limits: Limits | None = None) -> tuple[KripkeModel, int] | None:
    """Least refuting (model, world) on frames of ``cls``, smallest frames first."""
    cls = FrameClass(cls)
    if isinstance(f, str):
        f = parse_formula(f)
    for fr in enumerate_frames(max_worlds, cls, limits=limits):
        hit = frame_countermodel(fr, f, limits)
        if hit is not None:
            _reverify(*hit, f)
            return hit
    return None


# -- the strength diagram ---------------------------------------------------

@dataclass
class EdgeResult:
    stronger: str
    weaker: str
    inclusion: bool
    inclusion_failures: list = field(default_factory=list)
    strict: bool = False
    witness: Frame | None = None
    witness_axiom: str | None = None

    @property
    def passed(self) -> bool:
        return self.inclusion and self.strict

    def to_json(self) -> dict:
        out = {"edge": f"{self.stronger} -> {self.weaker}", "inclusion": self.inclusion,
               "strict": self.strict, "passed": self.passed}
        if self.inclusion_failures:
            out["inclusion_failures"] = [
                {"worlds": fr.world_count, "edges": fr.sorted_edges()}
                for fr in self.inclusion_failures[:3]]
        if self.witness is not None:
            out["strictness_witness"] = {
                "worlds": self.witness.world_count, "edges": self.witness.sorted_edges(),
                "failing_axiom": self.witness_axiom}
        return out


@dataclass
class InclusionReport:
    max_worlds: int
    frames_checked: int
    edges: list[EdgeResult]
    class_checks: list[dict]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.edges) and all(c["passed"] for c in self.class_checks)

    def to_json(self) -> dict:
        return {"max_worlds": self.max_worlds, "frames_checked": self.frames_checked,
                "edges": [e.to_json() for e in self.edges],
                "class_checks": self.class_checks, "passed": self.passed}


# Frame-class containments that mirror diagram edges directly.
_CLASS_INCLUSIONS = (
    (FrameClass.LINEAR_PREORDER, FrameClass.DIRECTED_PREORDER),
    (FrameClass.PRE_BOOLEAN_ALGEBRA, FrameClass.PRE_LATTICE),
    (FrameClass.PRE_LATTICE, FrameClass.DIRECTED_PREORDER),
    (FrameClass.DIRECTED_PREORDER, FrameClass.PREORDER),
    (FrameClass.UNIVERSAL, FrameClass.LINEAR_PREORDER),
    (FrameClass.PARTIAL_ORDER, FrameClass.PREORDER),
    (FrameClass.PREORDER, FrameClass.TRANSITIVE),
    (FrameClass.STRICT_PARTIAL_ORDER, FrameClass.TRANSITIVE),
)


def verify_frame_inclusions(max_worlds: int = 4, limits: Limits | None = None) -> InclusionReport:
    """Check every diagram edge on all frames up to ``max_worlds`` worlds.

    For an edge ``A -> B`` the frames validating all axioms of ``A`` must
    validate all axioms of ``B``; strictness asks for a frame validating
    ``B`` on which some axiom of ``A`` fails.  Frames are taken up to
    isomorphism, which changes neither check.
    """
    frames = list(enumerate_frames(max_worlds, FrameClass.ARBITRARY, up_to_iso=True,
                                   limits=limits))
    names = list(AXIOM_SOURCES)
    profiles = [frozenset(a for a in names if valid_on_frame(fr, axiom(a).template, limits))
                for fr in frames]

    def models_of(th: str) -> list[int]:
        need = set(THEORY_AXIOMS[th])
        return [i for i, prof in enumerate(profiles) if need <= prof]

    edges = []
    for strong, weak in DIAGRAM_EDGES:
        strong_frames = models_of(strong)
        weak_frames = set(models_of(weak))
        failures = [frames[i] for i in strong_frames if i not in weak_frames]
        res = EdgeResult(strong, weak, inclusion=not failures, inclusion_failures=failures)
        extra = [a for a in THEORY_AXIOMS[strong] if a not in THEORY_AXIOMS[weak]]
        for i in sorted(weak_frames):
            missing = [a for a in THEORY_AXIOMS[strong] if a not in profiles[i]]
            if missing:
                res.strict = True
                res.witness = frames[i]
                res.witness_axiom = next((a for a in extra if a in missing), missing[0])
                break
        edges.append(res)

    class_checks = []
    for small, big in _CLASS_INCLUSIONS:
        bad = [fr for fr in frames if in_class(fr, small) and not in_class(fr, big)]
        strict = any(in_class(fr, big) and not in_class(fr, small) for fr in frames)
        class_checks.append({"inclusion": f"{small} <= {big}", "passed": not bad,
                             "strict": strict})
    # soundness of each theory for its own finite frame class
    for name in THEORY_AXIOMS:
        th = theory(name)
        need = set(THEORY_AXIOMS[name])
        bad = [fr for fr, prof in zip(frames, profiles)
               if th.admits(fr, limits) and not need <= prof]
        class_checks.append({"inclusion": f"frames of {th.frame_class}"
                             + (" + " + ", ".join(a.name for a in th.frame_axioms)
                                if th.frame_axioms else "")
                             + f" validate {name}", "passed": not bad, "strict": None})
    return InclusionReport(max_worlds, len(frames), edges, class_checks)
