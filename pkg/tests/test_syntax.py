import pytest
from hypothesis import given, settings, strategies as st

from multiverse_kit.syntax import (
    And, AxiomScheme, Bot, Box, Diamond, FormulaSyntaxError, Iff, Implies, Not, Or,
    SubstitutionError, Top, Var, generate_formulas, modal_depth, parse_formula,
    render_formula, size, subformulas, substitute, variables,
)

p, q, r = Var("p"), Var("q"), Var("r")


def formulas(names=("p", "q", "r")):
    leaves = st.one_of(st.sampled_from([Var(n) for n in names]), st.just(Top()), st.just(Bot()))

    def extend(children):
        unary = st.builds(lambda op, a: op(a), st.sampled_from([Not, Box, Diamond]), children)
        binary = st.builds(lambda op, a, b: op(a, b),
                           st.sampled_from([And, Or, Implies, Iff]), children, children)
        return st.one_of(unary, binary)

    return st.recursive(leaves, extend, max_leaves=12)


def test_parse_box_diamond():
    assert parse_formula("[]<>p") == Box(Diamond(p))
    assert render_formula(Box(Diamond(p))) == "[](<>(p))"


def test_parse_dot_two_instance():
    f = parse_formula("<>[]p -> []<>p")
    assert f == Implies(Diamond(Box(p)), Box(Diamond(p)))
    assert render_formula(f) == "(<>([](p))) -> ([](<>(p)))"


def test_unicode_aliases():
    assert parse_formula("◇□p → □◇p") == parse_formula("<>[]p -> []<>p")
    assert parse_formula("¬p ∧ ⊤ ∨ ⊥ ↔ q") == parse_formula("~p & true | false <-> q")


def test_precedence_and_associativity():
    assert parse_formula("p -> q -> r") == Implies(p, Implies(q, r))
    assert parse_formula("p <-> q <-> r") == Iff(Iff(p, q), r)
    assert parse_formula("~p & q | r") == Or(And(Not(p), q), r)
    assert parse_formula("[]p & q") == And(Box(p), q)


def test_unbalanced_paren_reports_position():
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("[](p")
    assert info.value.position == 4


@pytest.mark.parametrize("text", ["", "p &", "-> p", "p q", "(p))", "p # q"])
def test_malformed_input_rejected(text):
    with pytest.raises(FormulaSyntaxError):
        parse_formula(text)


def test_substitute_dot_two_scheme():
    scheme = AxiomScheme(".2", parse_formula("<>[]p -> []<>p"))
    inst = substitute(scheme, {"p": parse_formula("q & r")})
    assert inst == parse_formula("<>[](q & r) -> []<>(q & r)")
    assert scheme.metavariables == ("p",)


def test_substitute_is_simultaneous():
    f = parse_formula("p -> q")
    assert substitute(f, {"p": q, "q": p}) == parse_formula("q -> p")


def test_substitute_missing_metavariable():
    with pytest.raises(SubstitutionError):
        substitute(parse_formula("p -> q"), {"p": r})


def test_subformula_count_of_dot_two():
    # hand count: p, []p, <>[]p, <>p, []<>p and the whole implication
    subs = subformulas(parse_formula("<>[]p -> []<>p"))
    assert len(subs) == 6
    assert set(map(render_formula, subs)) == {
        "p", "[](p)", "<>([](p))", "<>(p)", "[](<>(p))", "(<>([](p))) -> ([](<>(p)))"}


def test_subformulas_of_atom_and_postorder():
    assert subformulas(p) == (p,)
    subs = subformulas(parse_formula("[]p & p"))
    assert subs == (p, Box(p), And(Box(p), p))


def test_measures():
    f = parse_formula("[](p -> <>q) | r")
    assert variables(f) == ("p", "q", "r")
    assert modal_depth(f) == 2
    assert size(f) == 7


def test_generate_formulas_counts():
    # size 1: 2 atoms; size 2: 3 unary ops on 2 atoms = 6, total 8;
    # size 3: 3 unary on 6 + 3 binary on 2*2 pairs = 18 + 12 = 30, total 38
    counts = [len(generate_formulas(["p", "q"], k)) for k in (1, 2, 3)]
    assert counts == [2, 8, 38]
    fs = generate_formulas(["p"], 4, max_depth=1)
    assert all(modal_depth(f) <= 1 for f in fs)
    assert len(set(fs)) == len(fs)


@given(formulas())
@settings(max_examples=300, deadline=None)
def test_render_parse_round_trip(f):
    assert parse_formula(render_formula(f)) == f


@given(formulas(), formulas(), formulas())
@settings(max_examples=200, deadline=None)
def test_substitution_is_homomorphic(f, a, b):
    sigma = {"p": a, "q": b, "r": r}
    for op in (And, Or, Implies, Iff):
        assert substitute(op(f, p), sigma) == op(substitute(f, sigma), a)
    for op in (Not, Box, Diamond):
        assert substitute(op(f), sigma) == op(substitute(f, sigma))


@given(formulas())
@settings(max_examples=200, deadline=None)
def test_subformulas_closed_and_distinct(f):
    subs = subformulas(f)
    assert len(set(subs)) == len(subs)
    assert subs[-1] == f
    for g in subs:
        for k in g.children():
            assert k in subs
