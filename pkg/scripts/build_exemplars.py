"""Write the bundled few-shot exemplar library (src/olplan/data/exemplars.json)."""
from __future__ import annotations

import argparse
from pathlib import Path

from olplan.foon import ObjectLevelPlan, make_unit
from olplan.llm.retrieval import Exemplar, ExemplarLibrary
from olplan.llm.synthetic import stack_units
from olplan.pddl import OBJECT, Atom, Literal, Problem, builtin_blockworld_domain, print_domain, print_problem

OUT = Path(__file__).resolve().parents[1] / "src" / "olplan" / "data" / "exemplars.json"
DOMAIN_TEXT = print_domain(builtin_blockworld_domain())


def table_init(blocks):
    atoms = {Atom("in", ("hand", "air")), Atom("on", ("table", "air"))}
    for b in blocks:
        atoms |= {Atom("on", ("table", b)), Atom("under", (b, "table")), Atom("on", (b, "air"))}
    return frozenset(atoms)


def stacked_init(bottom_to_top):
    atoms = {Atom("in", ("hand", "air")), Atom("on", ("table", "air"))}
    below = "table"
    for b in bottom_to_top:
        atoms |= {Atom("on", (below, b)), Atom("under", (b, below))}
        below = b
    atoms.add(Atom("on", (below, "air")))
    return frozenset(atoms)


def on(lower, upper):
    return [Atom("on", (lower, upper)), Atom("under", (upper, lower))]


def problem_text(name, blocks, init, goal_atoms):
    p = Problem(name, "blockworld", tuple((b, OBJECT) for b in [*blocks, "table"]), init,
                tuple(Literal(a) for a in goal_atoms))
    return print_problem(p)


def subgoal_text(groups):
    return "\n".join(f"{i}. " + " ".join(str(a) for a in g) for i, g in enumerate(groups, 1))


def build() -> list[Exemplar]:
    out = []

    # the two-block tower used as the worked example of the plan format
    fig = ObjectLevelPlan((make_unit(1, "pick and place", {
        "first block": (["under nothing", "on table"], ["under second block", "on table"]),
        "second block": (["under nothing", "on table"], ["on first block", "under nothing"]),
    }, "Pick and place second block from table on first block."),), "Build a tower of two blocks")
    out.append(Exemplar("tower_two", fig,
                        problem_text("tower_two", ["block_1", "block_2"], table_init(["block_1", "block_2"]),
                                     on("block_1", "block_2")),
                        DOMAIN_TEXT, subgoal_text([on("block_1", "block_2")])))

    names = ["first block", "second block", "third block"]
    ids = ["block_1", "block_2", "block_3"]
    out.append(Exemplar("tower_three", ObjectLevelPlan(tuple(stack_units(names)), "Build a tower of three blocks"),
                        problem_text("tower_three", ids, table_init(ids), on(ids[0], ids[1]) + on(ids[1], ids[2])),
                        DOMAIN_TEXT, subgoal_text([on(ids[0], ids[1]), on(ids[1], ids[2])])))

    # spelling reads top to bottom, so the last letter is the base
    names = ["block T", "block A", "block C"]
    ids = ["block_T", "block_A", "block_C"]
    out.append(Exemplar("spell_cat", ObjectLevelPlan(
        tuple(stack_units(names)), "Stack the lettered blocks so they spell the word CAT from top to bottom"),
        problem_text("spell_cat", ids, table_init(ids), on(ids[0], ids[1]) + on(ids[1], ids[2])),
        DOMAIN_TEXT, subgoal_text([on(ids[0], ids[1]), on(ids[1], ids[2])])))

    units = stack_units(["first red block", "second red block"]) + \
        stack_units(["first blue block", "second blue block"], start=2)
    ids = ["red_block_1", "red_block_2", "blue_block_1", "blue_block_2"]
    out.append(Exemplar("sort_colours", ObjectLevelPlan(
        tuple(units), "Sort the red and blue blocks into one pile for each colour"),
        problem_text("sort_colours", ids, table_init(ids), on(ids[0], ids[1]) + on(ids[2], ids[3])),
        DOMAIN_TEXT, subgoal_text([on(ids[0], ids[1]), on(ids[2], ids[3])])))

    unstack = []
    for step, (upper, lower) in enumerate([("third block", "second block"), ("second block", "first block")], 1):
        unstack.append(make_unit(step, "pick and place", {
            upper: (["on " + lower, "under nothing"], ["on table", "under nothing"]),
            lower: (["under " + upper], ["under nothing"]),
        }, f"Pick and place {upper} from {lower} on table."))
    ids = ["block_1", "block_2", "block_3"]
    out.append(Exemplar("unstack_three", ObjectLevelPlan(tuple(unstack), "Take apart a tower of three blocks"),
                        problem_text("unstack_three", ids, stacked_init(ids),
                                     on("table", "block_3") + on("table", "block_2")),
                        DOMAIN_TEXT, subgoal_text([on("table", "block_3"), on("table", "block_2")])))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    ExemplarLibrary(build()).save(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
