"""The buttons-and-switches toy multiverse.

A state is a pair (set of pushed buttons, switch assignment), packed into
one integer: bits ``0..b-1`` are the pushed buttons and bits ``b..b+s-1``
the switch positions.  State ``(B, sigma)`` reaches ``(B2, sigma2)`` exactly
when ``B`` is a subset of ``B2``, so pushing is permanent and switches move
freely.  A statement is any set of states, held as a bitmask over states.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .kripke import Frame, KripkeModel, _bits, boolean_quotient, extension
from .limits import Limits, ResourceLimitError, current_limits
from .syntax import And, Bot, Formula, Not, Or, Top, Var, substitute

__all__ = [
    "ToyMultiverse", "Statement", "Classification", "Translation",
    "TrichotomyReport", "IndependenceReport", "MaximalityReport", "SimulationReport",
    "FrameNotPreBooleanError", "ClusterTooLargeError",
    "make_multiverse", "classify_statement", "check_trichotomy", "independence_report",
    "check_independence", "check_maximality", "simulate_kripke_model",
    "check_translation_formulas", "pre_boolean_frame", "SWITCH", "BUTTON", "NEGATED_BUTTON",
]

SWITCH = "Switch"
BUTTON = "Button"
NEGATED_BUTTON = "NegatedButton"


class FrameNotPreBooleanError(ValueError):
    pass


class ClusterTooLargeError(ValueError):
    pass


def button_atom(i: int) -> str:
    return f"button_{i}"


def switch_atom(j: int) -> str:
    return f"switch_{j}"


@dataclass(frozen=True)
class ToyMultiverse:
    buttons: int
    switches: int

    @property
    def state_count(self) -> int:
        return 1 << (self.buttons + self.switches)

    @property
    def root(self) -> int:
        return 0

    @property
    def full(self) -> int:
        return (1 << self.state_count) - 1

    def state(self, pushed: Iterable[int] = (), switches_on: Iterable[int] = ()) -> int:
        st = 0
        for i in pushed:
            if not 0 <= i < self.buttons:
                raise ValueError(f"no button {i}")
            st |= 1 << i
        for j in switches_on:
            if not 0 <= j < self.switches:
                raise ValueError(f"no switch {j}")
            st |= 1 << (self.buttons + j)
        return st

    def pushed(self, state: int) -> int:
        return state & ((1 << self.buttons) - 1)

    def switch_pattern(self, state: int) -> int:
        return state >> self.buttons

    @property
    def top_states(self) -> list[int]:
        """States with every button pushed (the final cluster)."""
        allb = (1 << self.buttons) - 1
        return [allb | (sig << self.buttons) for sig in range(1 << self.switches)]

    @property
    def atom_names(self) -> tuple[list[str], list[str]]:
        return ([button_atom(i) for i in range(self.buttons)],
                [switch_atom(j) for j in range(self.switches)])

    @cached_property
    def frame(self) -> Frame:
        n = self.state_count
        succ = []
        for st in range(n):
            b = self.pushed(st)
            succ.append(sum(1 << t for t in range(n) if self.pushed(t) & b == b))
        return Frame.from_successors(succ)

    @cached_property
    def model(self) -> KripkeModel:
        masks = {}
        for i in range(self.buttons):
            masks[button_atom(i)] = sum(1 << t for t in range(self.state_count) if t >> i & 1)
        for j in range(self.switches):
            bit = self.buttons + j
            masks[switch_atom(j)] = sum(1 << t for t in range(self.state_count) if t >> bit & 1)
        return KripkeModel.from_masks(self.frame, masks)

    def describe(self, state: int) -> dict:
        return {"state": state,
                "pushed": [i for i in range(self.buttons) if state >> i & 1],
                "switches_on": [j for j in range(self.switches)
                                if state >> (self.buttons + j) & 1]}


def make_multiverse(buttons: int, switches: int, limits: Limits | None = None) -> ToyMultiverse:
    limits = limits or current_limits()
    if buttons < 0 or switches < 0:
        raise ValueError("button and switch counts must be nonnegative")
    limits.require("buttons", buttons, limits.max_generators)
    limits.require("switches", switches, limits.max_generators)
    limits.require("states", 1 << (buttons + switches), limits.max_states)
    return ToyMultiverse(buttons, switches)


@dataclass(frozen=True)
class Statement:
    """A set of states, optionally with a defining formula over the atoms."""

    mask: int
    formula: Formula | None = None

    @classmethod
    def from_formula(cls, model: KripkeModel, f: Formula) -> "Statement":
        return cls(extension(model, f), f)

    @classmethod
    def from_states(cls, states: Iterable[int]) -> "Statement":
        return cls(sum(1 << s for s in set(states)))

    def states(self) -> list[int]:
        return list(_bits(self.mask))


StatementLike = Union[Statement, Formula, int]


def _model_of(target: ToyMultiverse | KripkeModel) -> KripkeModel:
    return target.model if isinstance(target, ToyMultiverse) else target


def _as_mask(model: KripkeModel, st: StatementLike) -> int:
    if isinstance(st, Statement):
        if st.formula is not None and extension(model, st.formula) != st.mask:
            raise ValueError("statement formula and state set disagree")
        return st.mask
    if isinstance(st, Formula):
        return extension(model, st)
    return int(st)


# -- modal operators on state sets ------------------------------------------

def _box(succ: Sequence[int], x: int) -> int:
    return sum(1 << w for w, s in enumerate(succ) if s & ~x == 0)


def _dia(succ: Sequence[int], x: int) -> int:
    return sum(1 << w for w, s in enumerate(succ) if s & x)


@dataclass(frozen=True)
class Classification:
    labels: frozenset
    pushed: bool | None = None

    def to_json(self) -> dict:
        out = {"labels": sorted(self.labels)}
        if self.pushed is not None:
            out["pushed"] = self.pushed
        return out


def classify_statement(target: ToyMultiverse | KripkeModel, st: StatementLike,
                       world: int = 0) -> Classification:
    """Switch / Button / NegatedButton labels of a statement at ``world``.

    Switch: box(dia st & dia ~st).  Button: box dia box st.  Negated button:
    ``~st`` is a button.  ``pushed`` is reported for buttons: box st.
    """
    model = _model_of(target)
    succ = model.frame.succ
    full = model.frame.full
    x = _as_mask(model, st)
    nx = full ^ x
    labels = set()
    if _box(succ, _dia(succ, x) & _dia(succ, nx)) >> world & 1:
        labels.add(SWITCH)
    is_button = bool(_box(succ, _dia(succ, _box(succ, x))) >> world & 1)
    if is_button:
        labels.add(BUTTON)
    if _box(succ, _dia(succ, _box(succ, nx))) >> world & 1:
        labels.add(NEGATED_BUTTON)
    pushed = bool(_box(succ, x) >> world & 1) if is_button else None
    return Classification(frozenset(labels), pushed)


# -- vectorized statement sweeps --------------------------------------------

def _all_statements(model: KripkeModel, limits: Limits | None) -> np.ndarray:
    limits = limits or current_limits()
    n = model.frame.world_count
    if n > 62:
        raise ResourceLimitError(f"{n} states is too many for a statement sweep")
    limits.require("statements", 1 << n, limits.max_statements)
    return np.arange(1 << n, dtype=np.uint64)


def _vbox(succ: Sequence[int], x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for w, s in enumerate(succ):
        s = np.uint64(s)
        out |= ((x & s) == s).astype(np.uint64) << np.uint64(w)
    return out


def _vdia(succ: Sequence[int], x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for w, s in enumerate(succ):
        out |= ((x & np.uint64(s)) != 0).astype(np.uint64) << np.uint64(w)
    return out


def _bit(x: np.ndarray, w: int) -> np.ndarray:
    return ((x >> np.uint64(w)) & np.uint64(1)).astype(bool)


@dataclass
class TrichotomyReport:
    world: int
    statements: int
    switch: int
    button: int
    negated_button: int
    pushed_button: int
    multiply_labeled: int
    unlabeled: int
    unlabeled_examples: list[int] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.unlabeled == 0

    def to_json(self) -> dict:
        return {"world": self.world, "statements": self.statements,
                "counts": {SWITCH: self.switch, BUTTON: self.button,
                           NEGATED_BUTTON: self.negated_button,
                           "pushed_button": self.pushed_button,
                           "multiply_labeled": self.multiply_labeled},
                "unlabeled": self.unlabeled, "unlabeled_examples": self.unlabeled_examples,
                "holds": self.holds}


def check_trichotomy(target: ToyMultiverse | KripkeModel, world: int = 0,
                     limits: Limits | None = None) -> TrichotomyReport:
    """Classify every subset of the state space at ``world``."""
    model = _model_of(target)
    succ = model.frame.succ
    x = _all_statements(model, limits)
    nx = np.uint64(model.frame.full) ^ x
    switch = _bit(_vbox(succ, _vdia(succ, x) & _vdia(succ, nx)), world)
    button = _bit(_vbox(succ, _vdia(succ, _vbox(succ, x))), world)
    negated = _bit(_vbox(succ, _vdia(succ, _vbox(succ, nx))), world)
    pushed = button & _bit(_vbox(succ, x), world)
    nlabels = switch.astype(int) + button.astype(int) + negated.astype(int)
    unlabeled = np.flatnonzero(nlabels == 0)
    return TrichotomyReport(
        world=world, statements=int(x.size), switch=int(switch.sum()),
        button=int(button.sum()), negated_button=int(negated.sum()),
        pushed_button=int(pushed.sum()), multiply_labeled=int((nlabels > 1).sum()),
        unlabeled=int(unlabeled.size), unlabeled_examples=[int(u) for u in unlabeled[:8]])


@dataclass
class IndependenceReport:
    world: int
    holds: bool
    failures: list[str]

    def __bool__(self) -> bool:
        return self.holds

    def to_json(self) -> dict:
        return {"world": self.world, "independent": self.holds, "failures": self.failures}


def independence_report(target: ToyMultiverse | KripkeModel, world: int = 0,
                        buttons: Sequence[str] | None = None,
                        switches: Sequence[str] | None = None) -> IndependenceReport:
    """Check that the named buttons and switches form an independent family at ``world``.

    Required: no button holds at ``world``; and at every state accessible
    from ``world``, pushed buttons stay pushed, each unpushed button can be
    pushed alone and each switch flipped alone (some successor differs from
    the state in exactly that atom).
    """
    model = _model_of(target)
    if buttons is None or switches is None:
        if not isinstance(target, ToyMultiverse):
            raise ValueError("atom names are required for a plain Kripke model")
        default_b, default_s = target.atom_names
        buttons = default_b if buttons is None else buttons
        switches = default_s if switches is None else switches
    names = list(buttons) + list(switches)
    missing = [a for a in names if a not in model.valuation]
    if missing:
        raise KeyError(f"model has no atoms {missing}")
    succ = model.frame.succ

    def profile(st: int) -> tuple[bool, ...]:
        return tuple(model.holds(st, a) for a in names)

    failures = []
    for a in buttons:
        if model.holds(world, a):
            failures.append(f"{a} is already pushed at {world}")
    for u in _bits(succ[world]):
        pu = profile(u)
        nexts = [(v, profile(v)) for v in _bits(succ[u])]
        for i, a in enumerate(names):
            is_button = i < len(buttons)
            if is_button and pu[i]:
                bad = [v for v, pv in nexts if not pv[i]]
                if bad:
                    failures.append(f"{a} is unpushed again from {u} at {bad[0]}")
                continue
            want = pu[:i] + (not pu[i],) + pu[i + 1:]
            if not any(pv == want for _, pv in nexts):
                verb = "pushed" if is_button else "toggled"
                failures.append(f"{a} cannot be {verb} alone from {u}")
    return IndependenceReport(world, not failures, failures)


def check_independence(target: ToyMultiverse | KripkeModel, world: int = 0,
                       buttons: Sequence[str] | None = None,
                       switches: Sequence[str] | None = None) -> bool:
    return independence_report(target, world, buttons, switches).holds


@dataclass
class MaximalityReport:
    world: int
    checked: int
    failed: int
    failures: list[int]

    @property
    def holds(self) -> bool:
        return self.failed == 0

    def to_json(self) -> dict:
        return {"world": self.world, "checked": self.checked, "failed": self.failed,
                "failing_statements": self.failures, "mp_holds": self.holds}


def check_maximality(target: ToyMultiverse | KripkeModel, world: int = 0,
                     statements: Iterable[StatementLike] | None = None,
                     limits: Limits | None = None) -> MaximalityReport:
    """Check dia box st -> box st at ``world`` for each statement.

    With ``statements=None`` every subset of the state space is checked.
    Failing statements are reported as state masks (first 16).
    """
    model = _model_of(target)
    succ = model.frame.succ
    if statements is None:
        x = _all_statements(model, limits)
        bx = _vbox(succ, x)
        ok = ~_bit(_vdia(succ, bx), world) | _bit(bx, world)
        bad = np.flatnonzero(~ok)
        return MaximalityReport(world, int(x.size), int(bad.size), [int(b) for b in bad[:16]])
    checked = 0
    bad_list = []
    for st in statements:
        x = _as_mask(model, st)
        bx = _box(succ, x)
        checked += 1
        if _dia(succ, bx) >> world & 1 and not bx >> world & 1:
            bad_list.append(x)
    return MaximalityReport(world, checked, len(bad_list), bad_list[:16])


# -- simulating a Kripke model ----------------------------------------------

@dataclass(frozen=True)
class Translation:
    """Variables of a Kripke model mapped to statements about a toy multiverse."""

    mapping: dict
    source: KripkeModel
    world: int
    target: ToyMultiverse
    target_state: int
    fold: tuple[int, ...]

    def formula_for(self, var: str) -> Formula:
        return self.mapping[var].formula

    def translate(self, f: Formula) -> Formula:
        return substitute(f, {v: st.formula for v, st in self.mapping.items()})

    def mapped_state(self, world: int) -> int:
        return _mapped_states(self.source.frame, self.target.switches)[world]

    def to_json(self) -> dict:
        return {"buttons": self.target.buttons, "switches": self.target.switches,
                "world": self.world, "target_state": self.target.describe(self.target_state),
                "psi": {v: {"states": st.states(), "formula": str(st.formula)}
                        for v, st in self.mapping.items()},
                "fold": list(self.fold)}


@dataclass
class SimulationReport:
    depth: int
    states_checked: int
    statements_agree: bool
    fold_is_bisimulation: bool
    discrepancies: list[dict]
    formulas_checked: int = 0
    formula_discrepancies: list[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return (self.statements_agree and self.fold_is_bisimulation
                and not self.discrepancies and not self.formula_discrepancies)

    def to_json(self) -> dict:
        return {"depth": self.depth, "states_checked": self.states_checked,
                "statements_agree": self.statements_agree,
                "fold_is_bisimulation": self.fold_is_bisimulation,
                "discrepancies": self.discrepancies,
                "formulas_checked": self.formulas_checked,
                "formula_discrepancies": self.formula_discrepancies,
                "holds": self.holds}


@dataclass(frozen=True)
class _Skeleton:
    clusters: tuple[tuple[int, ...], ...]
    cluster_of: tuple[int, ...]
    pattern: tuple[int, ...]
    buttons: int
    switches: int
    fold: tuple[int, ...]
    mapped: tuple[int, ...]


def _needed_switches(max_cluster: int) -> int:
    return (max_cluster - 1).bit_length()


@lru_cache(maxsize=256)
def _skeleton(frame: Frame, switches: int | None) -> _Skeleton:
    found = boolean_quotient(frame)
    if found is None:
        raise FrameNotPreBooleanError(
            "frame is not a pre-Boolean algebra: its cluster quotient is not a powerset order")
    q, atoms, pattern = found
    nb = len(atoms)
    largest = max(len(c) for c in q.clusters)
    need = _needed_switches(largest)
    ns = need if switches is None else switches
    if ns < need:
        raise ClusterTooLargeError(
            f"a cluster of {largest} worlds needs at least {need} switches, got {ns}")
    by_pattern = {pat: c for c, pat in enumerate(pattern)}
    fold = []
    for st in range(1 << (nb + ns)):
        members = q.clusters[by_pattern[st & ((1 << nb) - 1)]]
        fold.append(members[(st >> nb) % len(members)])
    mapped = []
    for w in range(frame.world_count):
        c = q.cluster_of[w]
        mapped.append(pattern[c] | (q.clusters[c].index(w) << nb))
    return _Skeleton(q.clusters, q.cluster_of, tuple(pattern), nb, ns, tuple(fold), tuple(mapped))


def _mapped_states(frame: Frame, switches: int) -> tuple[int, ...]:
    return _skeleton(frame, switches).mapped


def _state_formula(mv: ToyMultiverse, mask: int) -> Formula:
    """A Boolean combination of buttons and switches true exactly on ``mask``."""
    if mask == 0:
        return Bot()
    if mask == mv.full:
        return Top()
    bnames, snames = mv.atom_names
    names = bnames + snames
    disjuncts = []
    for st in _bits(mask):
        lits = [Var(a) if st >> k & 1 else Not(Var(a)) for k, a in enumerate(names)]
        conj = lits[0]
        for lit in lits[1:]:
            conj = And(conj, lit)
        disjuncts.append(conj)
    out = disjuncts[0]
    for d in disjuncts[1:]:
        out = Or(out, d)
    return out


def _depth_types(succ: Sequence[int], atoms: Sequence[tuple], depth: int) -> list[int]:
    table: dict = {}
    types = [table.setdefault(a, len(table)) for a in atoms]
    for _ in range(depth):
        table = {}
        types = [table.setdefault((types[x], frozenset(types[y] for y in _bits(s))), len(table))
                 for x, s in enumerate(succ)]
    return types


def simulate_kripke_model(m: KripkeModel, world: int, depth: int, *,
                          switches: int | None = None,
                          formulas: Iterable[Formula] | None = None,
                          limits: Limits | None = None) -> tuple[Translation, SimulationReport]:
    """Translate a model on a pre-Boolean-algebra frame into a toy multiverse.

    Buttons index the atoms of the cluster quotient and switch patterns index
    worlds inside a cluster (patterns beyond the cluster size fold back by
    index modulo cluster size).  Each variable becomes the statement true at
    the states folding onto worlds where it holds.

    The report compares depth-``depth`` modal types of every state with those
    of the world it folds onto, computed on the disjoint union of the two
    models.  Equal types at depth d means agreement on every modal formula of
    depth at most d, however large its Boolean structure.  Optional
    ``formulas`` are additionally checked by literal substitution.
    """
    if not 0 <= world < m.frame.world_count:
        raise ValueError(f"world {world} outside the model")
    sk = _skeleton(m.frame, switches)
    mv = make_multiverse(sk.buttons, sk.switches, limits)
    names = list(m.valuation)
    mapping = {}
    for v in names:
        mask = sum(1 << st for st, w in enumerate(sk.fold) if m.holds(w, v))
        mapping[v] = Statement(mask, _state_formula(mv, mask))
    translation = Translation(mapping, m, world, mv, sk.mapped[world], sk.fold)

    target = mv.model
    statements_agree = all(extension(target, st.formula) == st.mask for st in mapping.values())

    # fold: atoms agree, forth and back
    msucc, tsucc = m.frame.succ, target.frame.succ
    bisim = True
    for st, w in enumerate(sk.fold):
        if any((mapping[v].mask >> st & 1) != (m.masks[v] >> w & 1) for v in names):
            bisim = False
            break
        images = 0
        for t in _bits(tsucc[st]):
            images |= 1 << sk.fold[t]
        if images != msucc[w]:
            bisim = False
            break

    n = m.frame.world_count
    union_succ = list(msucc) + [s << n for s in tsucc]
    atoms = ([tuple(m.masks[v] >> w & 1 for v in names) for w in range(n)]
             + [tuple(mapping[v].mask >> st & 1 for v in names) for st in range(mv.state_count)])
    types = _depth_types(union_succ, atoms, depth)
    discrepancies = [{"state": st, "world": w} for st, w in enumerate(sk.fold)
                     if types[n + st] != types[w]]
    report = SimulationReport(depth, mv.state_count, statements_agree, bisim, discrepancies)
    if formulas is not None:
        checked, bad = check_translation_formulas(translation, formulas)
        report.formulas_checked = checked
        report.formula_discrepancies = bad
    return translation, report


def check_translation_formulas(translation: Translation, formulas: Iterable[Formula],
                               ) -> tuple[int, list[str]]:
    """Compare (M, w) |= phi with the multiverse at w's image |= phi[psi], all worlds w."""
    m = translation.source
    target = translation.target.model
    mapped = [translation.mapped_state(w) for w in range(m.frame.world_count)]
    checked = 0
    bad = []
    for f in formulas:
        src = extension(m, f)
        dst = extension(target, translation.translate(f))
        checked += 1
        for w, st in enumerate(mapped):
            if (src >> w & 1) != (dst >> st & 1):
                bad.append(f"{f} at world {w}")
                break
    return checked, bad


def pre_boolean_frame(cluster_sizes: Sequence[int]) -> Frame:
    """Pre-Boolean-algebra frame over the powerset of ``log2(len(cluster_sizes))``.

    Cluster ``i`` sits at subset ``i`` (as a bitmask) and has
    ``cluster_sizes[i]`` worlds, numbered consecutively.
    """
    k = len(cluster_sizes)
    if k == 0 or k & (k - 1):
        raise ValueError("number of clusters must be a power of two")
    starts = []
    total = 0
    for size in cluster_sizes:
        if size < 1:
            raise ValueError("clusters must be nonempty")
        starts.append(total)
        total += size
    edges = set()
    for a in range(k):
        for b in range(k):
            if a & ~b == 0:
                for u in range(starts[a], starts[a] + cluster_sizes[a]):
                    for v in range(starts[b], starts[b] + cluster_sizes[b]):
                        edges.add((u, v))
    return Frame(total, frozenset(edges))

