"""Command-line interface.

Usage: ``multiverse-kit GROUP COMMAND [flags]`` with groups ``modal``,
``kripke``, ``mv``, ``bvm`` and ``geo``.  Reports go to standard output as
JSON (default) or as indented text.  Exit status: 0 success, 1 a check
failed or ``--expect`` did not match, 2 bad usage or bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import boolean_valued as bv
from . import forcing, geology, kripke, syntax, theories
from .limits import ResourceLimitError


class CheckFailed(Exception):
    """Carries a report whose check did not pass (exit status 1)."""

    def __init__(self, report: dict):
        self.report = report
        super().__init__("check failed")


class InputError(Exception):
    pass


# -- helpers ----------------------------------------------------------------

def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _formula(text: str) -> syntax.Formula:
    return syntax.parse_formula(text)


def _check(report: dict, passed: bool) -> dict:
    if not passed:
        raise CheckFailed(report)
    return report


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated integers, got {text!r}") from None


def _pairs(items: Sequence[str] | None, what: str) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise InputError(f"{what} must look like NAME=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def render_text(obj, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for key in sorted(obj):
            value = obj[key]
            if isinstance(value, (dict, list)) and value and not _flat_list(value):
                lines.append(f"{pad}{key}:")
                lines.extend(render_text(value, indent + 1))
            else:
                lines.append(f"{pad}{key}: {_scalar(value)}")
    elif isinstance(obj, list):
        for item in obj:
            if isinstance(item, (dict, list)) and item and not _flat_list(item):
                lines.append(f"{pad}-")
                lines.extend(render_text(item, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar(item)}")
    else:
        lines.append(f"{pad}{_scalar(obj)}")
    return lines


def _flat_list(value) -> bool:
    return isinstance(value, list) and all(not isinstance(v, (dict, list)) or
                                           (isinstance(v, list) and _flat_list(v))
                                           for v in value)


def _scalar(value) -> str:
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, ensure_ascii=False)
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    return str(value)


# -- modal ------------------------------------------------------------------

def modal_parse(a) -> dict:
    f = _formula(a.formula)
    return {"formula": syntax.render_formula(f), "variables": list(syntax.variables(f)),
            "subformulas": len(syntax.subformulas(f)), "modal_depth": syntax.modal_depth(f),
            "size": syntax.size(f)}


def modal_axioms(a) -> dict:
    names = theories.THEORY_AXIOMS[a.theory] if a.theory else list(theories.AXIOM_SOURCES)
    return {"theory": a.theory,
            "axioms": [{"name": n, "template": syntax.render_formula(theories.axiom(n).template)}
                       for n in names]}


def modal_substitute(a) -> dict:
    mapping = {k: _formula(v) for k, v in _pairs(a.map, "--map").items()}
    if a.axiom:
        scheme = theories.axiom(a.axiom).scheme
    else:
        scheme = syntax.AxiomScheme("template", _formula(a.template))
    return {"axiom": scheme.name, "instance": syntax.render_formula(
        syntax.substitute(scheme, mapping))}


def modal_decide(a) -> dict:
    verdict = theories.decide(a.theory, _formula(a.formula), a.bound, incomplete=a.incomplete)
    out = {"theory": a.theory, "formula": syntax.render_formula(_formula(a.formula)),
           **verdict.to_json()}
    if a.expect and out["verdict"] != a.expect:
        raise CheckFailed(out)
    return out


def modal_countermodel(a) -> dict:
    f = _formula(a.formula)
    hit = theories.find_countermodel(a.frame_class, f, a.max_worlds)
    out = {"frame_class": a.frame_class, "formula": syntax.render_formula(f),
           "max_worlds": a.max_worlds, "found": hit is not None}
    if hit is not None:
        out["countermodel"] = kripke.model_to_json(hit[0])
        out["world"] = hit[1]
    if a.expect and (a.expect == "found") != out["found"]:
        raise CheckFailed(out)
    return out


def modal_inclusions(a) -> dict:
    report = theories.verify_frame_inclusions(a.max_worlds)
    return _check(report.to_json(), report.passed)


# -- kripke -----------------------------------------------------------------

def _model(path: str) -> kripke.KripkeModel:
    return kripke.model_from_json(_load_json(path))


def kripke_eval(a) -> dict:
    m = _model(a.model)
    f = _formula(a.formula)
    worlds = sorted(kripke._bits(kripke.extension(m, f)))
    out = {"formula": syntax.render_formula(f), "true_at": worlds}
    if a.world is not None:
        if not 0 <= a.world < m.frame.world_count:
            raise InputError(f"world {a.world} outside the model")
        out["world"] = a.world
        out["holds"] = a.world in worlds
    return out


def kripke_valid(a) -> dict:
    fr = _model(a.frame).frame
    f = _formula(a.formula)
    hit = kripke.frame_countermodel(fr, f)
    out = {"formula": syntax.render_formula(f), "valid": hit is None}
    if hit is not None:
        out["countermodel"] = kripke.model_to_json(hit[0])
        out["world"] = hit[1]
    return out


def kripke_classify(a) -> dict:
    fr = _model(a.frame).frame
    return {"worlds": fr.world_count,
            "classes": sorted(str(c) for c in kripke.classify_frame(fr))}


def kripke_quotient(a) -> dict:
    fr = _model(a.frame).frame
    q = kripke.quotient_poset(fr)
    return {"clusters": [list(c) for c in q.clusters],
            "order": sorted([c, d] for c, d in q.leq),
            "boolean": kripke.boolean_quotient(fr) is not None}


def kripke_enumerate(a) -> dict:
    frames = list(kripke.enumerate_frames(a.max_worlds, a.frame_class, up_to_iso=a.up_to_iso,
                                          min_worlds=a.min_worlds))
    out = {"frame_class": a.frame_class, "max_worlds": a.max_worlds,
           "up_to_iso": a.up_to_iso, "count": len(frames)}
    if a.list:
        out["frames"] = [{"worlds": fr.world_count, "edges": fr.sorted_edges()} for fr in frames]
    return out


# -- toy multiverse ---------------------------------------------------------

def _multiverse(a) -> forcing.ToyMultiverse:
    return forcing.make_multiverse(a.buttons, a.switches)


def _statement(a, mv: forcing.ToyMultiverse):
    if a.formula is not None and a.states is not None:
        raise InputError("give either --formula or --states, not both")
    if a.formula is not None:
        return forcing.Statement.from_formula(mv.model, _formula(a.formula))
    if a.states is not None:
        states = _int_list(a.states)
        bad = [s for s in states if not 0 <= s < mv.state_count]
        if bad:
            raise InputError(f"states {bad} outside 0..{mv.state_count - 1}")
        return forcing.Statement.from_states(states)
    return None


def mv_build(a) -> dict:
    mv = _multiverse(a)
    buttons, switches = mv.atom_names
    return {"buttons": mv.buttons, "switches": mv.switches, "states": mv.state_count,
            "root": mv.describe(mv.root), "top_states": mv.top_states,
            "atoms": {"buttons": buttons, "switches": switches},
            "frame_classes": sorted(str(c) for c in kripke.classify_frame(mv.frame))}


def mv_classify(a) -> dict:
    mv = _multiverse(a)
    st = _statement(a, mv)
    if st is None:
        raise InputError("mv classify needs --formula or --states")
    return {"world": a.world, "states": st.states(),
            **forcing.classify_statement(mv, st, a.world).to_json()}


def mv_trichotomy(a) -> dict:
    report = forcing.check_trichotomy(_multiverse(a), a.world)
    return _check(report.to_json(), report.holds)


def mv_independence(a) -> dict:
    report = forcing.independence_report(_multiverse(a), a.world)
    return _check(report.to_json(), report.holds)


def mv_maximality(a) -> dict:
    mv = _multiverse(a)
    st = _statement(a, mv)
    report = forcing.check_maximality(mv, a.world, None if st is None else [st])
    return _check(report.to_json(), report.holds)


def mv_simulate(a) -> dict:
    m = _model(a.model)
    translation, report = forcing.simulate_kripke_model(m, a.world, a.depth,
                                                        switches=a.switches)
    out = {"translation": translation.to_json(), "report": report.to_json()}
    return _check(out, report.holds)


# -- Boolean-valued models --------------------------------------------------

def _structure(path: str) -> bv.BValuedStructure:
    return bv.BValuedStructure.from_json(_load_json(path))


def bvm_value(a) -> dict:
    S = _structure(a.structure)
    f = bv.parse_fo(a.formula)
    value = bv.boolean_value(S, f, _pairs(a.env, "--env"))
    return {"formula": bv.render_fo(f), "value": S.algebra.describe(value),
            "is_top": value == S.algebra.top, "is_bottom": value == 0}


def bvm_equality(a) -> dict:
    report = bv.check_equality_axioms(_structure(a.structure))
    return _check(report.to_json(), report.passed)


def bvm_full(a) -> dict:
    S = _structure(a.structure)
    report = bv.is_full(S, [bv.parse_fo(t) for t in a.formula], _pairs(a.env, "--env"))
    return _check(report.to_json(), report.full)


def _ultrafilter(algebra: bv.FiniteBooleanAlgebra, atom: int) -> bv.Ultrafilter:
    if not 0 <= atom < algebra.atom_count:
        raise InputError(f"no atom {atom}; the algebra has {algebra.atom_count}")
    return bv.Ultrafilter(algebra, atom)


def bvm_quotient(a) -> dict:
    S = _structure(a.structure)
    Q, cls_of = bv.quotient_by_ultrafilter(S, _ultrafilter(S.algebra, a.ultrafilter))
    return {"ultrafilter_atom": a.ultrafilter, "quotient": Q.to_json(),
            "class_of": {n: Q.labels[c] for n, c in cls_of.items()}}


def bvm_los(a) -> dict:
    if a.structure:
        structures = [_structure(a.structure)]
    else:
        structures = bv.los_fixture_structures()
    total = bv.LosReport(0, 0, [])
    for S in structures:
        fams = bv.formula_family({r: ar for r, (ar, _) in S.relations.items()},
                                 quantifier_depth=a.depth)
        ufs = (bv.Ultrafilter.all(S.algebra) if a.ultrafilter is None
               else [_ultrafilter(S.algebra, a.ultrafilter)])
        total = total.merge(bv.verify_los(S, ufs, fams))
    out = {"structures": len(structures), "quantifier_depth": a.depth, **total.to_json()}
    return _check(out, total.passed)


def bvm_ultrapower(a) -> dict:
    V0 = bv.ClassicalStructure.from_json(_load_json(a.structure))
    B = bv.FiniteBooleanAlgebra(a.atoms)
    U = _ultrafilter(B, a.ultrafilter)
    modes = ["quotient", "antichain-limit"] if a.mode == "both" else [a.mode]
    results = [bv.boolean_ultrapower(V0, B, U, m) for m in modes]
    out = {"atoms": a.atoms, "ultrafilter_atom": a.ultrafilter,
           "results": [r.to_json(V0) for r in results]}
    ok = all(r.is_isomorphism(V0) for r in results)
    if len(results) == 2:
        out["modes_agree"] = bv.find_isomorphism(results[0].structure,
                                                 results[1].structure) is not None
        ok = ok and out["modes_agree"]
    return _check(out, ok)


def bvm_generic(a) -> dict:
    if (a.poset is None) == (a.tree_height is None):
        raise InputError("give exactly one of --poset or --tree-height")
    if a.poset is not None:
        data = _load_json(a.poset)
        P = bv.Poset.from_json(data)
        dense_specs = data.get("dense", [])
        try:
            dense = [bv.DenseSet(d["name"], frozenset(P.index(c) for c in d["members"]))
                     for d in dense_specs]
        except ValueError as exc:
            raise InputError(f"dense set mentions an unknown condition: {exc}") from None
    else:
        P = bv.binary_tree_poset(a.tree_height)
        dense = [bv.DenseSet(f"length>={k}", frozenset(i for i, c in enumerate(P.conditions)
                                                       if len(c) >= k))
                 for k in range(1, a.tree_height + 1)]
    G = bv.build_generic_filter(P, dense)
    return {"dense_sets": [d.name for d in dense], **G.to_json(),
            "meets_all": all(G.meets(d) for d in dense)}


# -- geology ----------------------------------------------------------------

def _graph(a) -> tuple[geology.MultiverseGraph, object]:
    g = geology.MultiverseGraph.from_json(_load_json(a.graph))
    return g, g.world_id(a.world)


def geo_analyze(a) -> dict:
    g, v = _graph(a)
    return geology.analyze_world(g, v).to_json()


def geo_ddg(a) -> dict:
    g, v = _graph(a)
    return geology.check_ddg(g, v).to_json()


def geo_multiverse(a) -> dict:
    g, v = _graph(a)
    return geology.generic_multiverse(g, v).to_json()


def geo_inner_mantles(a) -> dict:
    g, v = _graph(a)
    return geology.inner_mantles(g, v, a.max_iter).to_json()


def geo_report(a) -> dict:
    g, v = _graph(a)
    return geology.geology_report(g, v, a.max_iter)


def geo_axioms(a) -> dict:
    lm = geology.LabeledMultiverse.from_json(_load_json(a.graph))
    report = geology.check_multiverse_axioms(lm, a.axiom or None)
    return _check(report.to_json(), report.passed)


# -- parser -----------------------------------------------------------------

# (group, command) -> (handler, library operation it exposes)
DISPATCH: dict[tuple[str, str], tuple[Callable, str]] = {
    ("modal", "parse"): (modal_parse, "syntax.parse_formula"),
    ("modal", "axioms"): (modal_axioms, "theories.axiom_catalog"),
    ("modal", "substitute"): (modal_substitute, "syntax.substitute"),
    ("modal", "decide"): (modal_decide, "theories.decide"),
    ("modal", "countermodel"): (modal_countermodel, "theories.find_countermodel"),
    ("modal", "inclusions"): (modal_inclusions, "theories.verify_frame_inclusions"),
    ("kripke", "eval"): (kripke_eval, "kripke.evaluate"),
    ("kripke", "valid"): (kripke_valid, "kripke.valid_on_frame"),
    ("kripke", "classify"): (kripke_classify, "kripke.classify_frame"),
    ("kripke", "quotient"): (kripke_quotient, "kripke.quotient_poset"),
    ("kripke", "enumerate"): (kripke_enumerate, "kripke.enumerate_frames"),
    ("mv", "build"): (mv_build, "forcing.make_multiverse"),
    ("mv", "classify"): (mv_classify, "forcing.classify_statement"),
    ("mv", "trichotomy"): (mv_trichotomy, "forcing.check_trichotomy"),
    ("mv", "independence"): (mv_independence, "forcing.check_independence"),
    ("mv", "maximality"): (mv_maximality, "forcing.check_maximality"),
    ("mv", "simulate"): (mv_simulate, "forcing.simulate_kripke_model"),
    ("bvm", "value"): (bvm_value, "boolean_valued.boolean_value"),
    ("bvm", "equality"): (bvm_equality, "boolean_valued.check_equality_axioms"),
    ("bvm", "full"): (bvm_full, "boolean_valued.is_full"),
    ("bvm", "quotient"): (bvm_quotient, "boolean_valued.quotient_by_ultrafilter"),
    ("bvm", "los"): (bvm_los, "boolean_valued.verify_los"),
    ("bvm", "ultrapower"): (bvm_ultrapower, "boolean_valued.boolean_ultrapower"),
    ("bvm", "generic"): (bvm_generic, "boolean_valued.build_generic_filter"),
    ("geo", "analyze"): (geo_analyze, "geology.analyze_world"),
    ("geo", "ddg"): (geo_ddg, "geology.check_ddg"),
    ("geo", "multiverse"): (geo_multiverse, "geology.generic_multiverse"),
    ("geo", "inner-mantles"): (geo_inner_mantles, "geology.inner_mantles"),
    ("geo", "report"): (geo_report, "geology.geology_report"),
    ("geo", "axioms"): (geo_axioms, "geology.check_multiverse_axioms"),
}

_GROUP_HELP = {
    "modal": "formulas, axioms, theories and decision",
    "kripke": "frames and models",
    "mv": "the buttons-and-switches toy multiverse",
    "bvm": "Boolean-valued structures, ultrapowers and generic filters",
    "geo": "grounds, mantles and multiverse axioms on graphs",
}

_FRAME_CLASSES = [c.value for c in kripke.FrameClass]


def _add_arguments(group: str, name: str, p: argparse.ArgumentParser) -> None:
    key = (group, name)
    if group == "modal":
        if name in ("parse", "decide", "countermodel"):
            p.add_argument("--formula", required=True, help="modal formula text")
        if name == "decide":
            p.add_argument("--theory", required=True, choices=theories.theory_names())
            p.add_argument("--bound", type=int, default=4, help="largest frame size searched")
            p.add_argument("--incomplete", choices=["valid", "unknown"], default="valid",
                           help="verdict when the search stops below the filtration bound")
            p.add_argument("--expect", choices=["valid", "refuted", "unknown"])
        if name == "countermodel":
            p.add_argument("--class", dest="frame_class", required=True, choices=_FRAME_CLASSES)
            p.add_argument("--max-worlds", type=int, default=4)
            p.add_argument("--expect", choices=["found", "none"])
        if name == "inclusions":
            p.add_argument("--max-worlds", type=int, default=4)
        if name == "axioms":
            p.add_argument("--theory", choices=theories.theory_names())
        if name == "substitute":
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("--axiom", choices=list(theories.AXIOM_SOURCES))
            src.add_argument("--template", help="formula whose variables are replaced")
            p.add_argument("--map", action="append", metavar="VAR=FORMULA",
                           help="image of one variable (repeatable)")
    elif group == "kripke":
        if name == "eval":
            p.add_argument("--model", required=True, help="model JSON file")
            p.add_argument("--formula", required=True)
            p.add_argument("--world", type=int)
        elif name == "enumerate":
            p.add_argument("--max-worlds", type=int, required=True)
            p.add_argument("--min-worlds", type=int, default=1)
            p.add_argument("--class", dest="frame_class", default="Arbitrary",
                           choices=_FRAME_CLASSES)
            p.add_argument("--up-to-iso", action="store_true")
            p.add_argument("--list", action="store_true", help="include the frames themselves")
        else:
            p.add_argument("--frame", required=True,
                           help="frame JSON file ({\"worlds\", \"edges\"}; a model also works)")
            if name == "valid":
                p.add_argument("--formula", required=True)
    elif group == "mv":
        if name == "simulate":
            p.add_argument("--model", required=True, help="model JSON on a pre-Boolean frame")
            p.add_argument("--world", type=int, default=0)
            p.add_argument("--depth", type=int, default=3)
            p.add_argument("--switches", type=int, help="override the switch count")
            return
        p.add_argument("--buttons", type=int, default=2)
        p.add_argument("--switches", type=int, default=2)
        if name != "build":
            p.add_argument("--world", type=int, default=0, help="state to check at")
        if name in ("classify", "maximality"):
            p.add_argument("--formula", help="statement as a formula over button_i, switch_j")
            p.add_argument("--states", help="statement as comma-separated state numbers")
    elif group == "bvm":
        if name == "los":
            p.add_argument("--structure", help="structure JSON (default: built-in fixtures)")
            p.add_argument("--depth", type=int, default=2, help="quantifier depth of the family")
            p.add_argument("--ultrafilter", type=int, help="atom (default: every atom)")
        elif name == "ultrapower":
            p.add_argument("--structure", required=True, help="classical structure JSON")
            p.add_argument("--atoms", type=int, required=True)
            p.add_argument("--ultrafilter", type=int, default=0, help="generating atom")
            p.add_argument("--mode", choices=["quotient", "antichain-limit", "both"],
                           default="both")
        elif name == "generic":
            p.add_argument("--poset", help="poset JSON, with optional dense sets")
            p.add_argument("--tree-height", type=int,
                           help="binary tree of this height with its level sets")
        else:
            p.add_argument("--structure", required=True, help="Boolean-valued structure JSON")
        if name in ("value", "full"):
            p.add_argument("--formula", required=True, action="append" if name == "full" else None)
            p.add_argument("--env", action="append", metavar="VAR=NAME")
        if name == "quotient":
            p.add_argument("--ultrafilter", type=int, required=True, help="generating atom")
    elif group == "geo":
        p.add_argument("--graph", required=True, help="multiverse graph JSON")
        if name == "axioms":
            p.add_argument("--axiom", action="append", choices=list(geology.MULTIVERSE_AXIOMS))
        else:
            p.add_argument("--world", required=True)
        if name in ("inner-mantles", "report"):
            p.add_argument("--max-iter", type=int, default=32)
    else:  # pragma: no cover
        raise AssertionError(key)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "text"], default="json")
    common.add_argument("--output", help="write the report here instead of standard output")
    parser = argparse.ArgumentParser(prog="multiverse-kit",
                                     description="Finite models of the modal logic of forcing.")
    groups = parser.add_subparsers(dest="group", required=True, metavar="GROUP")
    subs: dict[str, argparse._SubParsersAction] = {}
    for group, name in DISPATCH:
        if group not in subs:
            gp = groups.add_parser(group, help=_GROUP_HELP[group])
            subs[group] = gp.add_subparsers(dest="command", required=True, metavar="COMMAND")
        handler = DISPATCH[(group, name)][0]
        doc = (handler.__doc__ or "").strip() or DISPATCH[(group, name)][1]
        p = subs[group].add_parser(name, parents=[common], help=doc, description=doc)
        _add_arguments(group, name, p)
    return parser


def _emit(report: dict, args) -> None:
    if args.format == "json":
        text = json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False)
    else:
        text = "\n".join(render_text(report))
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = DISPATCH[(args.group, args.command)][0]
    try:
        report = handler(args)
    except CheckFailed as exc:
        _emit(exc.report, args)
        return 1
    except (InputError, ResourceLimitError, syntax.FormulaSyntaxError, kripke.NotAPreorderError,
            forcing.FrameNotPreBooleanError, forcing.ClusterTooLargeError,
            geology.GeologyError, bv.EqualityAxiomError, bv.NotDenseError,
            bv.AntichainFamilyError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"multiverse-kit: error: {msg}", file=sys.stderr)
        return 2
    _emit(report, args)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
