"""Finite, exhaustively checkable models of the modal logic of forcing.

Submodules: ``syntax`` (modal formulas), ``kripke`` (frames and models),
``theories`` (axioms, theories, decision), ``forcing`` (the toy
multiverse), ``boolean_valued`` (Boolean-valued structures) and
``geology`` (grounds and mantles on graphs).
"""
from .boolean_valued import (
    BValuedStructure, ClassicalStructure, FiniteBooleanAlgebra, Ultrafilter,
    boolean_ultrapower, boolean_value, build_generic_filter, check_equality_axioms,
    is_full, quotient_by_ultrafilter, verify_los,
)
from .forcing import (
    check_independence, check_maximality, check_trichotomy, classify_statement,
    make_multiverse, simulate_kripke_model,
)
from .geology import (
    MultiverseGraph, analyze_world, check_ddg, check_multiverse_axioms,
    generic_multiverse, inner_mantles,
)
from .kripke import (
    Frame, FrameClass, KripkeModel, classify_frame, enumerate_frames, evaluate,
    valid_on_frame,
)
from .limits import Limits, ResourceLimitError
from .syntax import parse_formula, render_formula, substitute, subformulas
from .theories import decide, find_countermodel, theory, verify_frame_inclusions

__version__ = "0.1.0"

__all__ = [
    "BValuedStructure", "ClassicalStructure", "FiniteBooleanAlgebra", "Ultrafilter",
    "boolean_ultrapower", "boolean_value", "build_generic_filter", "check_equality_axioms",
    "is_full", "quotient_by_ultrafilter", "verify_los",
    "check_independence", "check_maximality", "check_trichotomy", "classify_statement",
    "make_multiverse", "simulate_kripke_model",
    "MultiverseGraph", "analyze_world", "check_ddg", "check_multiverse_axioms",
    "generic_multiverse", "inner_mantles",
    "Frame", "FrameClass", "KripkeModel", "classify_frame", "enumerate_frames", "evaluate",
    "valid_on_frame", "Limits", "ResourceLimitError",
    "parse_formula", "render_formula", "substitute", "subformulas",
    "decide", "find_countermodel", "theory", "verify_frame_inclusions",
]
