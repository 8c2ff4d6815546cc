"""Loading of the hand-computed geology golden files."""
import json
from pathlib import Path

from multiverse_kit.geology import (
    MultiverseGraph, analyze_world, check_ddg, generic_multiverse, inner_mantles,
)

GOLDEN = Path(__file__).parent / "golden" / "geology"
NAMES = ["diamond", "fork", "chain", "ground_axiom", "cube"]


def load(name):
    data = json.loads((GOLDEN / f"{name}.json").read_text())
    return MultiverseGraph.from_json(data["graph"]), data["expected"]


def observed(g, v):
    """The fields a golden file pins down, as the library computes them."""
    info = analyze_world(g, v)
    ddg = check_ddg(g, v)
    gm = generic_multiverse(g, v)
    inner = inner_mantles(g, v).to_json()
    out = {"grounds": info.grounds, "bedrocks": info.bedrocks, "ground_axiom": info.ground_axiom,
           "mantle": info.mantle, "ddg": ddg.ddg, "strong_ddg": ddg.strong_ddg,
           "ddg_witness": ddg.witness, "generic_multiverse": gm.worlds,
           "generic_mantle": gm.generic_mantle, "two_step": gm.two_step,
           "trace": inner["trace"], "status": inner["status"], "outer_core": inner["outer_core"]}
    if "unrealized_mantle" in inner:
        out["unrealized_mantle"] = inner["unrealized_mantle"]
    return out


def ddg_implication(g, v):
    """ddg at every extension of v implies two_step and mantle = generic mantle.

    Returns None when the hypothesis fails (vacuous) else the conclusion.
    """
    if not all(check_ddg(g, u).ddg for u in g.extensions(v)):
        return None
    gm = generic_multiverse(g, v)
    return gm.two_step and analyze_world(g, v).mantle == gm.generic_mantle
