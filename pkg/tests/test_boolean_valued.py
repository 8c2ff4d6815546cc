import itertools
import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from multiverse_kit.boolean_valued import (
    AntichainFamilyError, BValuedStructure, ClassicalStructure, DenseSet, EqualityAxiomError,
    Eq, Exists, FAnd, FImplies, FNot, FOr, FiniteBooleanAlgebra, MaximalAntichain,
    NotDenseError, Poset, Rel, UnboundVariableError, Ultrafilter, all_maximal_antichains,
    binary_tree_poset, boolean_ultrapower, boolean_value, build_generic_filter,
    check_equality_axioms, check_name_structure, find_isomorphism, formula_family,
    free_variables, is_full, los_fixture_structures, parse_fo, quantifier_depth,
    quotient_by_ultrafilter, render_fo, satisfies, stalk, verify_los,
)

import oracles

FIXTURES = Path(__file__).parent / "fixtures" / "los_structures.json"
B2 = FiniteBooleanAlgebra(2)


def two_name(eq12, atoms=2, rels=None):
    B = FiniteBooleanAlgebra(atoms)
    return BValuedStructure(B, ("t1", "t2"), ((B.top, eq12), (eq12, B.top)), rels or {})


def fixtures():
    return [BValuedStructure.from_json(d) for d in json.loads(FIXTURES.read_text())]


SMALL_FAMILY = formula_family({"R": 2}, quantifier_depth=1)


# -- algebra ----------------------------------------------------------------

@given(st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.just(n), *[st.integers(0, (1 << n) - 1)] * 3)))
@settings(max_examples=200, deadline=None)
def test_boolean_algebra_laws(data):
    n, a, b, c = data
    B = FiniteBooleanAlgebra(n)
    assert B.meet(a, B.join(b, c)) == B.join(B.meet(a, b), B.meet(a, c))
    assert B.join(a, B.meet(b, c)) == B.meet(B.join(a, b), B.join(a, c))
    assert B.complement(B.meet(a, b)) == B.join(B.complement(a), B.complement(b))
    assert B.join(a, B.complement(a)) == B.top and B.meet(a, B.complement(a)) == B.bottom
    assert B.leq(B.meet(a, b), a) and B.leq(a, B.join(a, b))
    assert B.join_all([a, b, c]) == a | b | c and B.meet_all([]) == B.top


def test_ultrafilters_are_principal():
    B = FiniteBooleanAlgebra(3)
    us = Ultrafilter.all(B)
    assert [u.atom for u in us] == [0, 1, 2]
    for u in us:
        members = set(u.members())
        assert len(members) == 4
        for x in B.elements():
            assert (x in members) != (B.complement(x) in members)
        assert Ultrafilter.from_members(B, members) == u
    with pytest.raises(ValueError):
        Ultrafilter.from_members(B, [0b011, 0b111])


def test_maximal_antichains():
    B = FiniteBooleanAlgebra(3)
    # partitions of a 3-element set: Bell number 5
    family = all_maximal_antichains(B)
    assert len(family) == 5
    for A in family:
        assert B.join_all(A.elements) == B.top
        assert all(x & y == 0 for x, y in itertools.combinations(A.elements, 2))
    with pytest.raises(ValueError):
        MaximalAntichain(B, frozenset({0b011, 0b110}))
    with pytest.raises(ValueError):
        MaximalAntichain(B, frozenset({0b001, 0b010}))
    fine = MaximalAntichain(B, frozenset({1, 2, 4}))
    assert all(fine.refines(A) for A in family)


# -- first-order syntax -----------------------------------------------------

def test_parse_fo_examples():
    f = parse_fo("exists x. (x = y & R(x, y))")
    assert f == Exists("x", FAnd(Eq("x", "y"), Rel("R", ("x", "y"))))
    assert free_variables(f) == {"y"}
    assert quantifier_depth(parse_fo("forall x. exists y. R(x, y)")) == 2
    assert parse_fo("~x = y | R(x) -> x = x") == FImplies(
        FOr(FNot(Eq("x", "y")), Rel("R", ("x",))), Eq("x", "x"))


@pytest.mark.parametrize("text", ["", "x =", "exists . x = x", "R(x,", "x = y)"])
def test_parse_fo_rejects_malformed(text):
    with pytest.raises(ValueError):
        parse_fo(text)


@given(st.sampled_from(SMALL_FAMILY))
@settings(max_examples=200, deadline=None)
def test_render_parse_round_trip(f):
    assert parse_fo(render_fo(f)) == f


# -- Boolean values ---------------------------------------------------------

def test_boolean_value_examples():
    S = two_name(0b01)
    assert boolean_value(S, "x = x", {"x": "t2"}) == B2.top
    assert boolean_value(S, "exists x. x = y", {"y": "t1"}) == B2.top
    assert boolean_value(S, "exists x. (x = y & x = z)", {"y": "t1", "z": "t2"}) == 0b01
    assert boolean_value(S, "forall x. x = y", {"y": "t1"}) == 0b01


def test_unbound_variable():
    with pytest.raises(UnboundVariableError):
        boolean_value(two_name(0b01), "x = y", {"x": "t1"})


def _hand_join(S, y, z):
    # join over names t of [[t = y]] & [[t = z]], spelled out
    return (S.eq[0][y] & S.eq[0][z]) | (S.eq[1][y] & S.eq[1][z])


def test_existential_join_matches_hand_oracle():
    for eq12 in range(4):
        S = two_name(eq12)
        assert boolean_value(S, "exists x. (x = y & x = z)", {"y": "t1", "z": "t2"}) == \
            _hand_join(S, 0, 1) == eq12


@given(st.integers(0, 23), st.sampled_from(SMALL_FAMILY), st.data())
@settings(max_examples=300, deadline=None)
def test_boolean_value_matches_atomwise_oracle(i, f, data):
    S = fixtures()[i]
    env = {v: data.draw(st.sampled_from(S.names)) for v in sorted(free_variables(f))}
    ienv = {v: S.index(n) for v, n in env.items()}
    assert boolean_value(S, f, env) == oracles.boolean_value_by_atoms(S, f, ienv)


@given(st.integers(0, 23), st.sampled_from(SMALL_FAMILY), st.data())
@settings(max_examples=200, deadline=None)
def test_boolean_laws_through_recursion(i, f, data):
    S = fixtures()[i]
    env = {v: data.draw(st.sampled_from(S.names)) for v in sorted(free_variables(f))}
    top = S.algebra.top
    assert boolean_value(S, FNot(FNot(f)), env) == boolean_value(S, f, env)
    assert boolean_value(S, FOr(f, FNot(f)), env) == top
    assert boolean_value(S, FAnd(f, FNot(f)), env) == 0


def _skeleton_entails(phi, psi, leaves):
    """Truth-table entailment, treating each leaf formula as a propositional atom."""
    def ev(g, val):
        if g in leaves:
            return val[leaves.index(g)]
        if isinstance(g, FNot):
            return not ev(g.sub, val)
        a, b = ev(g.left, val), ev(g.right, val)
        return {FAnd: a and b, FOr: a or b, FImplies: (not a) or b}[type(g)]
    return all(ev(psi, val) for val in itertools.product((False, True), repeat=len(leaves))
               if ev(phi, val))


def _random_combo(rng, leaves, depth):
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(leaves)
    op = rng.choice([FNot, FAnd, FOr, FImplies])
    if op is FNot:
        return FNot(_random_combo(rng, leaves, depth - 1))
    return op(_random_combo(rng, leaves, depth - 1), _random_combo(rng, leaves, depth - 1))


def test_monotone_deduction():
    rng = random.Random(11)
    leaves = [parse_fo("x = y"), parse_fo("R(x, y)"), parse_fo("exists y. R(y, x)")]
    entailed = 0
    for S in fixtures()[:8]:
        for _ in range(150):
            phi = _random_combo(rng, leaves, 3)
            psi = _random_combo(rng, leaves, 3)
            if not _skeleton_entails(phi, psi, leaves):
                continue
            entailed += 1
            for x, y in itertools.product(S.names, repeat=2):
                env = {"x": x, "y": y}
                assert S.algebra.leq(boolean_value(S, phi, env), boolean_value(S, psi, env))
    assert entailed > 100


# -- equality axioms and fullness -------------------------------------------

def test_equality_axioms_diagonal_passes():
    B = FiniteBooleanAlgebra(2)
    S = BValuedStructure(B, ("a", "b", "c"), tuple(
        tuple(B.top if i == j else 0 for j in range(3)) for i in range(3)), {})
    assert check_equality_axioms(S).passed


def test_symmetry_defect_reported():
    B = FiniteBooleanAlgebra(2)
    S = BValuedStructure(B, ("t1", "t2"), ((3, 1), (2, 3)), {})
    rep = check_equality_axioms(S)
    assert {"axiom": "symmetry", "names": ["t1", "t2"]} in rep.violations


def _naive_transitivity_defects(S):
    k = len(S.names)
    return {(S.names[i], S.names[j], S.names[l])
            for i in range(k) for j in range(k) for l in range(k)
            if S.eq[i][j] & S.eq[j][l] & ~S.eq[i][l]}


def test_transitivity_defect_with_triple():
    rng = random.Random(3)
    B = FiniteBooleanAlgebra(3)
    found = 0
    for _ in range(200):
        e12, e13, e23 = (rng.randrange(8) for _ in range(3))
        eq = ((7, e12, e13), (e12, 7, e23), (e13, e23, 7))
        S = BValuedStructure(B, ("t1", "t2", "t3"), eq, {})
        rep = check_equality_axioms(S)
        got = {tuple(v["names"]) for v in rep.violations if v["axiom"] == "transitivity"}
        assert got == _naive_transitivity_defects(S)
        found += bool(got)
    assert found > 50


def test_congruence_defect_reported():
    S = two_name(0b11, rels={"P": (1, {(0,): 0b01})})
    rep = check_equality_axioms(S)
    assert any(v["axiom"] == "congruence" and v["args"] == ["t1"] for v in rep.violations)


def test_fixture_file_is_reproducible_and_lawful():
    assert [s.to_json() for s in los_fixture_structures()] == json.loads(FIXTURES.read_text())
    fs = fixtures()
    assert len(fs) >= 20
    assert all(len(S.names) <= 3 and S.algebra.atom_count == 3 for S in fs)
    assert all(check_equality_axioms(S).passed for S in fs)


def test_is_full_examples():
    S = two_name(0b01)
    rep = is_full(S, ["exists x. x = y"], {"y": "t1"})
    assert rep.full and rep.results[0]["witness"] == "t1"
    split = two_name(0, rels={"P": (1, {(0,): 0b01, (1,): 0b10})})
    assert boolean_value(split, "exists x. P(x)") == 0b11
    rep = is_full(split, ["exists x. P(x)"])
    assert not rep.full and rep.results[0]["witness"] is None
    zero = two_name(0, rels={"P": (1, {})})
    rep = is_full(zero, ["exists x. P(x)"])
    assert rep.full and rep.results[0]["value"] == [] and rep.results[0]["witness"] == "t1"
    with pytest.raises(ValueError):
        is_full(S, ["forall x. x = x"])


# -- quotients, stalks, Los -------------------------------------------------

def test_quotient_examples():
    S = two_name(0b01)
    Q, cls = quotient_by_ultrafilter(S, Ultrafilter(S.algebra, 0))
    assert Q.labels == ("{t1,t2}",) and cls == {"t1": 0, "t2": 0}
    Q, cls = quotient_by_ultrafilter(S, Ultrafilter(S.algebra, 1))
    assert Q.labels == ("{t1}", "{t2}") and cls == {"t1": 0, "t2": 1}
    Q, _ = quotient_by_ultrafilter(two_name(0), Ultrafilter(S.algebra, 0))
    assert Q.size == 2


def test_quotient_rejects_broken_equality():
    B = FiniteBooleanAlgebra(2)
    S = BValuedStructure(B, ("t1", "t2"), ((3, 1), (2, 3)), {})
    with pytest.raises(EqualityAxiomError):
        quotient_by_ultrafilter(S, Ultrafilter(B, 0))


def test_stalk_lemma_on_fixtures():
    for S in fixtures():
        for U in Ultrafilter.all(S.algebra):
            Q, qcls = quotient_by_ultrafilter(S, U)
            T, tcls = stalk(S, U.atom)
            assert Q.size == T.size
            for x, y in itertools.product(S.names, repeat=2):
                assert (qcls[x] == qcls[y]) == (tcls[x] == tcls[y])
                assert Q.holds("R", (qcls[x], qcls[y])) == T.holds("R", (tcls[x], tcls[y]))
                assert Q.holds("R", (qcls[x], qcls[y])) == bool(
                    S.rel_value("R", (S.index(x), S.index(y))) >> U.atom & 1)


def test_los_atomic_and_depth_one_on_fixtures():
    family = formula_family({"R": 2}, quantifier_depth=1)
    for S in fixtures()[:6]:
        rep = verify_los(S, Ultrafilter.all(S.algebra), family)
        assert rep.passed and rep.to_json()["agreement"] == "100%"
        assert rep.checked > len(family)


def test_los_detects_a_wrong_quotient():
    # classical truth disagrees with a value that is not in U: sanity of the comparison
    S = fixtures()[0]
    U = Ultrafilter(S.algebra, 0)
    Q, cls = quotient_by_ultrafilter(S, U)
    f = parse_fo("R(x, y)")
    for x, y in itertools.product(S.names, repeat=2):
        value = boolean_value(S, f, {"x": x, "y": y})
        assert satisfies(Q, f, {"x": cls[x], "y": cls[y]}) == (value in U)


def test_formula_family_shape():
    fam = formula_family({"R": 2})
    assert len(fam) == 11856
    assert max(quantifier_depth(f) for f in fam) == 2
    assert all(free_variables(f) <= {"x", "y"} for f in fam)
    assert len(formula_family({"R": 2}, quantifier_depth=0)) == 208


def test_structure_json_round_trip():
    for S in fixtures()[:5]:
        again = BValuedStructure.from_json(json.dumps(S.to_json()))
        assert again.eq == S.eq and again.relations == S.relations and again.names == S.names
    with pytest.raises(ValueError):
        BValuedStructure.from_json({"atoms": 1, "names": ["a"], "eq": {"a,b": [0]}})


# -- Boolean ultrapowers ----------------------------------------------------

GRAPH3 = ClassicalStructure(("u", "v", "w"), {"E": (2, {(0, 1), (1, 2), (2, 2)})})


@pytest.mark.parametrize("mode", ["quotient", "antichain-limit"])
def test_ultrapower_of_three_element_graph(mode):
    U = Ultrafilter(B2, 0)
    res = boolean_ultrapower(GRAPH3, B2, U, mode=mode)
    assert res.structure.size == 3
    assert res.is_isomorphism(GRAPH3)
    assert find_isomorphism(GRAPH3, res.structure) is not None


def test_ultrapower_modes_agree():
    for atoms in (1, 2, 3):
        B = FiniteBooleanAlgebra(atoms)
        for U in Ultrafilter.all(B):
            a = boolean_ultrapower(GRAPH3, B, U, "quotient").structure
            b = boolean_ultrapower(GRAPH3, B, U, "antichain-limit").structure
            assert find_isomorphism(a, b) is not None


def test_trivial_algebra_gives_identity():
    B = FiniteBooleanAlgebra(1)
    res = boolean_ultrapower(GRAPH3, B, Ultrafilter(B, 0))
    assert res.embedding == {0: 0, 1: 1, 2: 2}
    assert res.structure.relations == GRAPH3.relations


def test_check_names_are_two_valued():
    S = check_name_structure(GRAPH3, B2, mixtures=False)
    assert S.names == ("^u", "^v", "^w")
    assert all(v in (0, B2.top) for row in S.eq for v in row)
    assert check_equality_axioms(check_name_structure(GRAPH3, B2)).passed


def test_non_directed_antichain_family_rejected():
    B = FiniteBooleanAlgebra(3)
    family = [MaximalAntichain(B, frozenset({1, 6})), MaximalAntichain(B, frozenset({2, 5}))]
    with pytest.raises(AntichainFamilyError):
        boolean_ultrapower(GRAPH3, B, Ultrafilter(B, 0), "antichain-limit", family)


# -- generic filters --------------------------------------------------------

def level_sets(P, height):
    return [DenseSet(f"length>={k}", frozenset(i for i, c in enumerate(P.conditions)
                                                  if len(c) >= k))
            for k in range(1, height + 1)]


def test_generic_filter_on_binary_tree():
    P = binary_tree_poset(3)
    G = build_generic_filter(P, level_sets(P, 3))
    assert G.to_json() == {"filter": ["", "0", "00", "000"],
                           "sequence": ["", "0", "00", "000"], "is_filter": True}


def test_empty_dense_list_gives_root_filter():
    P = binary_tree_poset(2)
    G = build_generic_filter(P, [])
    assert G.to_json()["filter"] == [""]


def test_non_dense_set_rejected_with_witness():
    P = binary_tree_poset(2)
    D = DenseSet("left", frozenset({P.index("0"), P.index("00")}))
    with pytest.raises(NotDenseError) as info:
        build_generic_filter(P, [D])
    assert info.value.witness == "1"


def test_poset_from_json_closes_transitively():
    P = Poset.from_json({"conditions": ["a", "b", "c"], "leq": [[2, 1], [1, 0]]})
    assert P.le(2, 0) and not P.le(0, 2)


@given(st.integers(1, 4), st.data())
@settings(max_examples=100, deadline=None)
def test_generic_filter_invariants(height, data):
    P = binary_tree_poset(height)
    n = len(P.conditions)
    leaves = [i for i, c in enumerate(P.conditions) if len(c) == height]
    dense = []
    for k in range(data.draw(st.integers(0, 3))):
        extra = data.draw(st.sets(st.integers(0, n - 1)))
        dense.append(DenseSet(f"D{k}", frozenset(leaves) | frozenset(extra)))
    G = build_generic_filter(P, dense)
    assert G.is_filter()
    assert all(G.meets(D) for D in dense)
    seq = G.sequence
    assert all(P.le(b, a) for a, b in zip(seq, seq[1:]))
