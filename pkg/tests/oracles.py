"""Slow reference implementations used as test oracles.

Nothing here imports the package's semantic code: formulas are walked by
class name, frames are edge sets and valuations are Python sets, so an
agreement between these and the fast bitmask code is real evidence.
"""
from __future__ import annotations

import itertools


# -- modal semantics --------------------------------------------------------

def naive_eval(n, edges, val, w, f):
    """Truth of f at w; edges is a set of pairs, val maps names to world sets."""
    kind = type(f).__name__
    succ = [u for (a, u) in edges if a == w]
    if kind == "Var":
        return w in val[f.name]
    if kind == "Top":
        return True
    if kind == "Bot":
        return False
    if kind == "Not":
        return not naive_eval(n, edges, val, w, f.sub)
    if kind == "Box":
        return all(naive_eval(n, edges, val, u, f.sub) for u in succ)
    if kind == "Diamond":
        return any(naive_eval(n, edges, val, u, f.sub) for u in succ)
    a = naive_eval(n, edges, val, w, f.left)
    b = naive_eval(n, edges, val, w, f.right)
    return {"And": a and b, "Or": a or b, "Implies": (not a) or b, "Iff": a == b}[kind]


def formula_vars(f):
    if type(f).__name__ == "Var":
        return {f.name}
    out = set()
    for k in f.children():
        out |= formula_vars(k)
    return out


def all_valuations(n, names):
    subsets = [frozenset(s) for r in range(n + 1) for s in itertools.combinations(range(n), r)]
    for combo in itertools.product(subsets, repeat=len(names)):
        yield dict(zip(names, combo))


def naive_valid(n, edges, f):
    names = sorted(formula_vars(f))
    return all(naive_eval(n, edges, val, w, f)
               for val in all_valuations(n, names) for w in range(n))


# -- frames -----------------------------------------------------------------

def all_relations(n):
    pairs = [(a, b) for a in range(n) for b in range(n)]
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        yield frozenset(p for p, bit in zip(pairs, bits) if bit)


def is_reflexive(n, r):
    return all((w, w) in r for w in range(n))


def is_transitive(n, r):
    return all((a, d) in r for (a, b) in r for (c, d) in r if b == c)


def is_preorder(n, r):
    return is_reflexive(n, r) and is_transitive(n, r)


def is_convergent(n, r):
    for w in range(n):
        succ = [u for (a, u) in r if a == w]
        for u, v in itertools.product(succ, succ):
            if not any((u, z) in r and (v, z) in r for z in range(n)):
                return False
    return True


def is_directed_preorder(n, r):
    return is_preorder(n, r) and is_convergent(n, r)


def canonical(n, r):
    return min(tuple(sorted((p[a], p[b]) for a, b in r))
               for p in itertools.permutations(range(n)))


def count_up_to_iso(n, pred):
    return len({canonical(n, r) for r in all_relations(n) if pred(n, r)})


# -- toy multiverse ---------------------------------------------------------

def naive_multiverse(buttons, switches):
    """States as (pushed set, switch tuple); s reaches t iff pushed(s) <= pushed(t)."""
    states = [(frozenset(p), sig)
              for r in range(buttons + 1) for p in itertools.combinations(range(buttons), r)
              for sig in itertools.product((0, 1), repeat=switches)]
    reach = {s: [t for t in states if s[0] <= t[0]] for s in states}
    return states, reach


# -- Boolean-valued structures ----------------------------------------------

def fo_at_atom(S, atom, f, env):
    """Classical truth at one atom, quantifying over names; equality read at the atom."""
    kind = type(f).__name__
    if kind == "Eq":
        return bool(S.eq[env[f.left]][env[f.right]] >> atom & 1)
    if kind == "Rel":
        return bool(S.rel_value(f.symbol, [env[a] for a in f.args]) >> atom & 1)
    if kind == "FNot":
        return not fo_at_atom(S, atom, f.sub, env)
    if kind in ("FAnd", "FOr", "FImplies"):
        a = fo_at_atom(S, atom, f.left, env)
        b = fo_at_atom(S, atom, f.right, env)
        return {"FAnd": a and b, "FOr": a or b, "FImplies": (not a) or b}[kind]
    inner = (fo_at_atom(S, atom, f.body, {**env, f.var: t}) for t in range(len(S.names)))
    return any(inner) if kind == "Exists" else all(inner)


def boolean_value_by_atoms(S, f, env):
    return sum(1 << a for a in range(S.algebra.atom_count) if fo_at_atom(S, a, f, env))
