import itertools
import random

import pytest

from multiverse_kit.forcing import (
    BUTTON, NEGATED_BUTTON, SWITCH, ClusterTooLargeError, FrameNotPreBooleanError, Statement,
    check_independence, check_maximality, check_trichotomy, classify_statement,
    independence_report, make_multiverse, pre_boolean_frame, simulate_kripke_model,
)
from multiverse_kit.kripke import (
    Frame, FrameClass, KripkeModel, boolean_quotient, classify_frame, extension,
)
from multiverse_kit.limits import ResourceLimitError
from multiverse_kit.syntax import Bot, Top, Var, generate_formulas, parse_formula, substitute
from multiverse_kit.theories import axiom

import oracles


def naive_labels(buttons, switches, x_states, world_state):
    """Labels of a statement given as a set of naive states, from the definitions."""
    states, reach = oracles.naive_multiverse(buttons, switches)
    x = set(x_states)
    nx = set(states) - x

    def box(s, pred):
        return all(pred(t) for t in reach[s])

    def dia(s, pred):
        return any(pred(t) for t in reach[s])

    labels = set()
    if box(world_state, lambda u: dia(u, lambda t: t in x) and dia(u, lambda t: t in nx)):
        labels.add(SWITCH)
    if box(world_state, lambda u: dia(u, lambda v: box(v, lambda t: t in x))):
        labels.add(BUTTON)
    if box(world_state, lambda u: dia(u, lambda v: box(v, lambda t: t in nx))):
        labels.add(NEGATED_BUTTON)
    return labels


def packed(buttons, state):
    pushed, sig = state
    return sum(1 << i for i in pushed) | sum(bit << (buttons + j) for j, bit in enumerate(sig))


def test_make_multiverse_examples():
    mv = make_multiverse(0, 0)
    assert mv.frame == Frame(1, frozenset({(0, 0)}))
    assert make_multiverse(1, 0).frame == Frame(2, frozenset({(0, 0), (0, 1), (1, 1)}))
    mv = make_multiverse(2, 1)
    assert mv.state_count == 8
    assert FrameClass.PRE_BOOLEAN_ALGEBRA in classify_frame(mv.frame)
    q, atoms, _ = boolean_quotient(mv.frame)
    assert q.size == 4 and len(atoms) == 2
    assert all(len(c) == 2 for c in q.clusters)


def test_make_multiverse_caps():
    with pytest.raises(ResourceLimitError):
        make_multiverse(5, 0)
    with pytest.raises(ResourceLimitError):
        check_trichotomy(make_multiverse(3, 2))  # 2**32 statements


@pytest.mark.parametrize("b,s", [(b, s) for b in range(4) for s in range(4) if b + s <= 6])
def test_multiverse_is_pre_boolean(b, s):
    mv = make_multiverse(b, s)
    assert FrameClass.PRE_BOOLEAN_ALGEBRA in classify_frame(mv.frame)
    assert FrameClass.DIRECTED_PREORDER in classify_frame(mv.frame)


def test_classify_examples():
    mv = make_multiverse(2, 2)
    c = classify_statement(mv, Var("button_0"))
    assert c.labels == {BUTTON} and c.pushed is False
    assert classify_statement(mv, Var("switch_0")).labels == {SWITCH}
    top = classify_statement(mv, Top())
    assert top.labels == {BUTTON} and top.pushed is True
    assert classify_statement(mv, Bot()).labels == {NEGATED_BUTTON}


def test_statement_representations_agree():
    mv = make_multiverse(1, 1)
    f = parse_formula("button_0 & ~switch_0")
    st = Statement.from_formula(mv.model, f)
    assert st.states() == [1]
    with pytest.raises(ValueError):
        classify_statement(mv, Statement(4, f))


@pytest.mark.parametrize("b,s", [(0, 1), (1, 1), (1, 2), (2, 1)])
def test_classification_matches_naive_oracle(b, s):
    mv = make_multiverse(b, s)
    states, _ = oracles.naive_multiverse(b, s)
    root = next(t for t in states if not t[0] and not any(t[1]))
    for bits in itertools.product((0, 1), repeat=len(states)):
        x = [t for t, bit in zip(states, bits) if bit]
        mask = sum(1 << packed(b, t) for t in x)
        assert classify_statement(mv, mask).labels == naive_labels(b, s, x, root)


def test_trichotomy_small_cases():
    r = check_trichotomy(make_multiverse(1, 1))
    assert (r.statements, r.unlabeled) == (16, 0)
    r = check_trichotomy(make_multiverse(0, 1))
    assert (r.statements, r.unlabeled) == (4, 0)
    assert (r.switch, r.button, r.negated_button) == (2, 1, 1)


def test_trichotomy_counts_two_by_two():
    # At the root every state reaches the top cluster T (4 states), so a
    # statement x is a button iff T <= x (2**12 of them), a negated button iff
    # T and x are disjoint (2**12), and a switch otherwise (14 * 2**12).
    r = check_trichotomy(make_multiverse(2, 2))
    assert r.statements == 65536
    assert (r.button, r.negated_button, r.switch) == (4096, 4096, 57344)
    assert r.pushed_button == 1 and r.multiply_labeled == 0 and r.unlabeled == 0


def test_independence_examples():
    for b, s in [(1, 1), (2, 2), (3, 1)]:
        assert check_independence(make_multiverse(b, s), 0)
    mv = make_multiverse(2, 1)
    assert not check_independence(mv, mv.state(pushed=[0]))
    # pushing button_0 also flips switch_0
    fr = Frame(3, frozenset({(0, 0), (1, 1), (2, 2), (0, 2), (1, 2), (0, 1), (1, 0)}))
    m = KripkeModel(fr, {"button_0": {2}, "switch_0": {1, 2}})
    rep = independence_report(m, 0, ["button_0"], ["switch_0"])
    assert not rep.holds
    assert any("button_0 cannot be pushed alone" in f for f in rep.failures)


def test_maximality_examples():
    mv = make_multiverse(1, 1)
    r = check_maximality(mv, 0)
    b0 = extension(mv.model, Var("button_0"))
    assert b0 in r.failures and not r.holds
    for t in mv.top_states:
        assert check_maximality(mv, t).holds
    assert check_maximality(mv, 0, [Top()]).holds


def test_maximality_two_by_two_root_failures():
    # fails exactly when T <= x (so dia box x) but x is not everything
    r = check_maximality(make_multiverse(2, 2), 0)
    assert (r.checked, r.failed) == (65536, 4095)


def test_button_persistence_and_switch_freedom():
    for b, s in [(1, 1), (2, 1), (2, 2)]:
        mv = make_multiverse(b, s)
        full = mv.model.frame.full
        for i in range(b):
            f = parse_formula(f"button_{i} -> []button_{i}")
            assert extension(mv.model, f) == full
        for j in range(s):
            f = parse_formula(f"[](<>switch_{j} & <>~switch_{j})")
            assert extension(mv.model, f) == full


def test_s42_instances_true_throughout_multiverse():
    mv = make_multiverse(2, 2)
    atoms = [Var(a) for group in mv.atom_names for a in group]
    images = atoms + [parse_formula(f"~{a.name}") for a in atoms] + [
        parse_formula("button_0 & switch_1"), parse_formula("button_1 | ~switch_0")]
    for name in ["K", "Dual", "S", "4", ".2"]:
        for x, y in itertools.product(images, repeat=2):
            f = substitute(axiom(name).template, {"p": x, "q": y})
            assert extension(mv.model, f) == mv.model.frame.full, name


def test_axiom_five_fails_at_root_and_holds_on_top():
    five = axiom("5").template
    for b, s in [(1, 0), (1, 1), (2, 1)]:
        mv = make_multiverse(b, s)
        f = substitute(five, {"p": Var("button_0")})
        assert not extension(mv.model, f) >> 0 & 1
        for x in range(1 << mv.state_count):
            m = KripkeModel.from_masks(mv.frame, {"p": x})
            ext = extension(m, five)
            assert all(ext >> t & 1 for t in mv.top_states)


def _check_fold_directly(translation):
    m = translation.source
    target = translation.target.model
    fold = translation.fold
    for st, w in enumerate(fold):
        for v, s in translation.mapping.items():
            assert bool(s.mask >> st & 1) == m.holds(w, v)
        images = {fold[t] for t in range(len(fold)) if target.frame.accessible(st, t)}
        assert images == {u for u in range(m.frame.world_count) if m.frame.accessible(w, u)}


def test_simulation_examples():
    cluster = pre_boolean_frame([2])
    tr, rep = simulate_kripke_model(KripkeModel(cluster, {"p": {0}}), 0, 3)
    assert (tr.target.buttons, tr.target.switches) == (0, 1)
    assert rep.holds
    chain = pre_boolean_frame([1, 1])
    tr, rep = simulate_kripke_model(KripkeModel(chain, {"p": {1}}), 0, 3)
    assert (tr.target.buttons, tr.target.switches) == (1, 0)
    assert rep.holds
    tr, rep = simulate_kripke_model(KripkeModel(chain, {"p": {0, 1}}), 0, 3)
    assert tr.mapping["p"].mask == tr.target.model.frame.full
    assert tr.mapping["p"].formula == Top()


def test_simulation_biconditional_against_naive_evaluation():
    rng = random.Random(7)
    formulas = generate_formulas(["p", "q"], 5, max_depth=3)
    for sizes in ([2], [1, 1], [2, 1], [1, 2, 2, 1], [2, 2, 2, 2]):
        fr = pre_boolean_frame(sizes)
        n = fr.world_count
        val = {v: {w for w in range(n) if rng.random() < 0.5} for v in ("p", "q")}
        m = KripkeModel(fr, val)
        tr, rep = simulate_kripke_model(m, 0, 3, formulas=formulas[:300])
        assert rep.holds and rep.formulas_checked == 300
        _check_fold_directly(tr)
        tgt = tr.target.model
        for f in rng.sample(formulas, 40):
            g = tr.translate(f)
            for w in range(n):
                st = tr.mapped_state(w)
                lhs = oracles.naive_eval(n, fr.edges, m.valuation, w, f)
                rhs = oracles.naive_eval(tgt.frame.world_count, tgt.frame.edges,
                                         tgt.valuation, st, g)
                assert lhs == rhs


def test_simulation_errors():
    fork = Frame(3, frozenset({(0, 0), (1, 1), (2, 2), (0, 1), (0, 2)}))
    with pytest.raises(FrameNotPreBooleanError):
        simulate_kripke_model(KripkeModel(fork, {"p": {1}}), 0, 2)
    with pytest.raises(ClusterTooLargeError):
        simulate_kripke_model(KripkeModel(pre_boolean_frame([3]), {"p": {1}}), 0, 2, switches=1)
