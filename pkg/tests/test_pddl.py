import pytest

from olplan.grounding import TABLE_CLEAR
from olplan.llm.providers import load_fixtures
from olplan.pddl import (OBJECT, Atom, Literal, ParseError, PddlError, Problem, UndeclaredSymbol,
                         UnsupportedRequirement, bits, builtin_blockworld_domain, ground, parse_domain, parse_problem,
                         print_domain, print_problem)
from conftest import FIXTURES, GOLDEN


def atom(text):
    pred, *args = text.strip("()").split()
    return Atom(pred, tuple(args))


def lit(text):
    if text.startswith("(not "):
        return Literal(atom(text[5:-1]), False)
    return Literal(atom(text))


@pytest.fixture(scope="module")
def domain():
    return builtin_blockworld_domain()


THREE_BLOCKS = """
(define (problem three)
  (:domain blockworld)
  (:objects b1 b2 b3 table - object)
  (:init (on table b1) (under b1 table) (on table b2) (under b2 table) (on b2 b3) (under b3 b2)
         (on b1 air) (on b3 air) (in hand air) (on table air))
  (:goal (and (on b1 b2) (under b2 b1) (not (on b1 air)))))
"""


def test_pick_preconditions(domain):
    pick = domain.action("pick")
    assert set(pick.pre) == {lit("(in hand air)"), lit("(on ?obj air)"), lit("(on ?surface ?obj)"),
                             lit("(under ?obj ?surface)")}


def test_place_effects(domain):
    eff = set(domain.action("place").eff)
    assert lit("(on ?surface ?obj)") in eff
    assert lit("(not (on ?surface air))") in eff


def test_domain_round_trip(domain):
    assert parse_domain(print_domain(domain)) == domain


def test_golden_text_parses_to_two_actions():
    parsed = parse_domain((GOLDEN / "fig5_domain.pddl").read_text())
    assert [a.name for a in parsed.actions] == ["pick", "place"]


def test_undeclared_goal_object(domain):
    text = THREE_BLOCKS.replace("(on b1 b2) (under b2 b1)", "(on table ghost_block)")
    with pytest.raises(UndeclaredSymbol):
        parse_problem(text, domain)


def test_problem_round_trip_and_determinism(domain):
    problem = parse_problem(THREE_BLOCKS, domain)
    assert problem.object_names == ("b1", "b2", "b3", "table")
    assert parse_problem(print_problem(problem), domain) == problem
    assert print_problem(problem) == print_problem(problem)


def test_syntax_errors(domain):
    with pytest.raises(ParseError) as exc:
        parse_problem(THREE_BLOCKS.rstrip()[:-1], domain)
    assert exc.value.line > 0
    with pytest.raises(UnsupportedRequirement):
        parse_domain(print_domain(domain).replace(":typing", ":typing :fluents"))
    with pytest.raises(PddlError):
        parse_problem(THREE_BLOCKS.replace("(on b1 b2)", "(on b1)"), domain)


def test_recorded_problem_replies_parse_or_fail_cleanly(domain):
    replies = [e["reply"] for e in load_fixtures(FIXTURES).values() if "(define (problem" in e["reply"]]
    assert replies
    outcomes = set()
    for text in replies:
        start = text.index("(define")
        try:
            parse_problem(text[start:].replace("```", ""), domain)
            outcomes.add("parsed")
        except PddlError:
            outcomes.add("syntax")
    assert "parsed" in outcomes


def two_block_task(domain, goal="(on b1 b2)"):
    objects = (("b1", OBJECT), ("b2", OBJECT), ("table", OBJECT))
    init = frozenset(atom(t) for t in ("(on table b1)", "(under b1 table)", "(on table b2)", "(under b2 table)",
                                       "(on b1 air)", "(on b2 air)", "(in hand air)", "(on table air)"))
    return Problem("two", domain.name, objects, init, (lit(goal),))


def test_pick_groundings(domain):
    task = ground(domain, two_block_task(domain), undeletable=[TABLE_CLEAR])
    picks = sorted(a.args for a in task.actions if a.name == "pick")
    assert picks == [("b1", "b2"), ("b1", "table"), ("b2", "b1"), ("b2", "table")]


def test_goal_already_true(domain):
    task = ground(domain, two_block_task(domain, "(on table b1)"))
    assert task.goal & task.init == task.goal


def test_grounded_pick_effects(domain):
    task = ground(domain, two_block_task(domain))
    pick = next(a for a in task.actions if a.name == "pick" and a.args == ("b1", "table"))
    add = task.atoms(pick.add)
    delete = task.atoms(pick.delete)
    assert add == {atom("(in hand b1)"), atom("(on b1 hand)"), atom("(under b1 air)"), atom("(on table air)")}
    assert delete == {atom("(in hand air)"), atom("(on b1 air)"), atom("(on table b1)"), atom("(under b1 table)")}


def test_table_clear_is_undeletable(domain):
    task = ground(domain, two_block_task(domain), undeletable=[TABLE_CLEAR])
    i = task.index[TABLE_CLEAR]
    assert all(i not in bits(a.delete) for a in task.actions)
