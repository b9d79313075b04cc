"""A small PDDL toolkit: AST, parser, canonical printer and STRIPS grounding.

Only the STRIPS subset with typing and negative preconditions is accepted.
Anything more expressive (disjunction, quantifiers, conditional effects,
numeric fluents) is rejected with :class:`UnsupportedRequirement` so that
generated files which rely on it fail fast.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

SUPPORTED_REQUIREMENTS = (":strips", ":typing", ":negative-preconditions")
_UNSUPPORTED_FORMULAS = {"or", "forall", "exists", "imply", "when", "=", "increase", "decrease", "assign"}

OBJECT = "object"


class PddlError(ValueError):
    pass


class ParseError(PddlError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


class UnsupportedRequirement(PddlError):
    def __init__(self, name: str, line: int = 0, col: int = 0):
        msg = f"unsupported PDDL feature {name}"
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.name = name


class UndeclaredSymbol(PddlError):
    def __init__(self, symbol: str, message: str = ""):
        super().__init__(message or f"undeclared symbol {symbol!r}")
        self.symbol = symbol


class Atom(NamedTuple):
    predicate: str
    args: tuple[str, ...]

    def __str__(self):
        return f"({' '.join((self.predicate, *self.args))})"

    @classmethod
    def of(cls, predicate: str, *args: str) -> "Atom":
        return cls(predicate, tuple(args))


class Literal(NamedTuple):
    atom: Atom
    positive: bool = True

    def __str__(self):
        return str(self.atom) if self.positive else f"(not {self.atom})"


@dataclass(frozen=True)
class LiteralGroup:
    """A run of literals inside an ``(and ...)``, optionally headed by a comment."""
    literals: tuple[Literal, ...]
    comment: str | None = None


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[tuple[str, str], ...]
    precondition: tuple[LiteralGroup, ...]
    effect: tuple[LiteralGroup, ...]

    @property
    def pre(self) -> tuple[Literal, ...]:
        return tuple(lit for g in self.precondition for lit in g.literals)

    @property
    def eff(self) -> tuple[Literal, ...]:
        return tuple(lit for g in self.effect for lit in g.literals)


@dataclass(frozen=True)
class Domain:
    name: str
    requirements: tuple[str, ...] = (":strips", ":typing")
    types: tuple[tuple[str, str], ...] = ()
    constants: tuple[tuple[str, str], ...] = ()
    predicates: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = ()
    actions: tuple[ActionSchema, ...] = ()

    def __post_init__(self):
        names = [a.name for a in self.actions]
        if len(set(names)) != len(names):
            raise PddlError("action names must be unique")

    @property
    def arities(self) -> dict[str, int]:
        return {name: len(params) for name, params in self.predicates}

    @property
    def constant_names(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.constants)

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def type_parents(self) -> dict[str, str]:
        parents = {OBJECT: ""}
        parents.update(dict(self.types))
        return parents


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]
    init: frozenset[Atom]
    goal: tuple[Literal, ...]

    @property
    def object_names(self) -> tuple[str, ...]:
        return tuple(o for o, _ in self.objects)


# -- tokenizer / s-expressions ---------------------------------------------------

class _Tok(NamedTuple):
    kind: str  # '(', ')', 'sym', 'comment'
    text: str
    line: int
    col: int


class _Comment(NamedTuple):
    text: str
    line: int
    col: int


@dataclass
class _List:
    items: list
    line: int
    col: int

    def values(self) -> list:
        return [x for x in self.items if not isinstance(x, _Comment)]


_TOKEN_RE = re.compile(r"\s*(?:(;[^\n]*)|(\()|(\))|([^\s();]+))")


def _tokenize(text: str) -> Iterator[_Tok]:
    line_starts = [0] + [m.end() for m in re.finditer(r"\n", text)]

    def where(pos):
        import bisect
        ln = bisect.bisect_right(line_starts, pos)
        return ln, pos - line_starts[ln - 1] + 1

    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if not rest.strip():
                return
            ln, col = where(pos)
            raise ParseError(f"unexpected character {rest.strip()[0]!r}", ln, col)
        pos = m.end()
        for kind, idx in (("comment", 1), ("(", 2), (")", 3), ("sym", 4)):
            if m.group(idx) is not None:
                ln, col = where(m.start(idx))
                yield _Tok(kind, m.group(idx), ln, col)
                break


def _read_sexpr(text: str) -> _List:
    stack: list[_List] = []
    root: _List | None = None
    for tok in _tokenize(text):
        if tok.kind == "(":
            node = _List([], tok.line, tok.col)
            if stack:
                stack[-1].items.append(node)
            elif root is not None:
                raise ParseError("unexpected content after top-level expression", tok.line, tok.col)
            else:
                root = node
            stack.append(node)
        elif tok.kind == ")":
            if not stack:
                raise ParseError("unbalanced ')'", tok.line, tok.col)
            stack.pop()
        elif tok.kind == "comment":
            if stack:
                stack[-1].items.append(_Comment(tok.text[1:].strip(), tok.line, tok.col))
        else:
            if not stack:
                raise ParseError(f"symbol {tok.text!r} outside of expression", tok.line, tok.col)
            stack[-1].items.append(tok)
    if stack:
        raise ParseError("missing ')' for expression opened here", stack[-1].line, stack[-1].col)
    if root is None:
        raise ParseError("empty input")
    return root


def _sym(node, what: str) -> str:
    if not isinstance(node, _Tok):
        line, col = (node.line, node.col) if isinstance(node, _List) else (0, 0)
        raise ParseError(f"expected {what}", line, col)
    return node.text.lower()


def _typed_list(items: list, line: int, col: int) -> list[tuple[str, str]]:
    """Parse ``a b - t c - u d`` into [(a, t), (b, t), (c, u), (d, object)]."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    it = iter(items)
    for node in it:
        name = _sym(node, "name")
        if name == "-":
            try:
                typ = _sym(next(it), "type name")
            except StopIteration:
                raise ParseError("dangling '-' in typed list", line, col) from None
            if not pending:
                raise ParseError("type without names", line, col)
            out.extend((p, typ) for p in pending)
            pending = []
        else:
            pending.append(name)
    out.extend((p, OBJECT) for p in pending)
    return out


def _head(node: _List) -> str:
    vals = node.values()
    if not vals:
        raise ParseError("empty expression", node.line, node.col)
    return _sym(vals[0], "keyword")


# -- formula parsing -----------------------------------------------------------

def _parse_atom(node: _List) -> Atom:
    vals = node.values()
    pred = _sym(vals[0], "predicate name")
    return Atom(pred, tuple(_sym(v, "argument") for v in vals[1:]))


def _parse_literal(node, allow_negation: bool = True) -> Literal:
    if not isinstance(node, _List):
        raise ParseError("expected literal", getattr(node, "line", 0), getattr(node, "col", 0))
    head = _head(node)
    if head in _UNSUPPORTED_FORMULAS:
        raise UnsupportedRequirement(f"'{head}' formula", node.line, node.col)
    if head == "and":
        raise ParseError("nested 'and' is not supported", node.line, node.col)
    if head == "not":
        vals = node.values()
        if len(vals) != 2 or not isinstance(vals[1], _List):
            raise ParseError("'not' takes exactly one atom", node.line, node.col)
        inner = _head(vals[1])
        if inner in _UNSUPPORTED_FORMULAS or inner in ("and", "not"):
            raise UnsupportedRequirement(f"negated '{inner}' formula", node.line, node.col)
        return Literal(_parse_atom(vals[1]), False)
    return Literal(_parse_atom(node))


def _parse_conjunction(node) -> tuple[LiteralGroup, ...]:
    if not isinstance(node, _List):
        raise ParseError("expected formula", getattr(node, "line", 0), getattr(node, "col", 0))
    if not node.values():
        return ()
    if _head(node) != "and":
        return (LiteralGroup((_parse_literal(node),)),)
    groups: list[LiteralGroup] = []
    comment: str | None = None
    current: list[Literal] = []
    for item in node.items[1:]:
        if isinstance(item, _Comment):
            if current or comment is not None:
                groups.append(LiteralGroup(tuple(current), comment))
            comment, current = item.text, []
        else:
            current.append(_parse_literal(item))
    if current or comment is not None:
        groups.append(LiteralGroup(tuple(current), comment))
    return tuple(groups)


# -- domain ----------------------------------------------------------------------

def _split_sections(root: _List, kind: str) -> tuple[str, list[_List]]:
    vals = root.values()
    if not vals or _sym(vals[0], "'define'") != "define":
        raise ParseError("expected (define ...)", root.line, root.col)
    if len(vals) < 2 or not isinstance(vals[1], _List):
        raise ParseError(f"expected ({kind} <name>)", root.line, root.col)
    header = vals[1].values()
    if len(header) != 2 or _sym(header[0], kind) != kind:
        raise ParseError(f"expected ({kind} <name>)", vals[1].line, vals[1].col)
    name = _sym(header[1], f"{kind} name")
    sections = []
    for v in vals[2:]:
        if not isinstance(v, _List):
            raise ParseError("expected section", v.line, v.col)
        sections.append(v)
    return name, sections


def _check_requirements(section: _List) -> tuple[str, ...]:
    reqs = []
    for v in section.values()[1:]:
        req = _sym(v, "requirement")
        if req not in SUPPORTED_REQUIREMENTS:
            raise UnsupportedRequirement(req, v.line, v.col)
        reqs.append(req)
    return tuple(reqs)


def _check_literal(lit: Literal, arities: dict[str, int], symbols: set[str], where: str):
    pred = lit.atom.predicate
    if pred not in arities:
        raise UndeclaredSymbol(pred, f"{where}: undeclared predicate {pred!r}")
    if len(lit.atom.args) != arities[pred]:
        raise UndeclaredSymbol(pred, f"{where}: {pred!r} expects {arities[pred]} arguments, got {len(lit.atom.args)}")
    for arg in lit.atom.args:
        if arg not in symbols:
            raise UndeclaredSymbol(arg, f"{where}: undeclared symbol {arg!r} in {lit}")


def parse_domain(text: str) -> Domain:
    root = _read_sexpr(text)
    name, sections = _split_sections(root, "domain")
    requirements: tuple[str, ...] = ()
    types: list[tuple[str, str]] = []
    constants: list[tuple[str, str]] = []
    predicates: list[tuple[str, tuple[tuple[str, str], ...]]] = []
    raw_actions: list[_List] = []
    for sec in sections:
        head = _head(sec)
        rest = sec.values()[1:]
        if head == ":requirements":
            requirements = _check_requirements(sec)
        elif head == ":types":
            types = [(t, p) for t, p in _typed_list(rest, sec.line, sec.col) if t != OBJECT]
        elif head == ":constants":
            constants = _typed_list(rest, sec.line, sec.col)
        elif head == ":predicates":
            for p in rest:
                if not isinstance(p, _List):
                    raise ParseError("expected predicate declaration", p.line, p.col)
                pv = p.values()
                predicates.append((_sym(pv[0], "predicate name"), tuple(_typed_list(pv[1:], p.line, p.col))))
        elif head == ":action":
            raw_actions.append(sec)
        elif head in (":functions", ":durative-action", ":derived", ":process", ":event"):
            raise UnsupportedRequirement(head, sec.line, sec.col)
        else:
            raise ParseError(f"unknown domain section {head}", sec.line, sec.col)

    declared_types = {OBJECT} | {t for t, _ in types}
    for t, parent in types:
        if parent not in declared_types:
            raise UndeclaredSymbol(parent, f"undeclared parent type {parent!r}")
    for c, t in constants:
        if t not in declared_types:
            raise UndeclaredSymbol(t, f"undeclared type {t!r} for constant {c!r}")
    arities = {p: len(args) for p, args in predicates}
    const_names = {c for c, _ in constants}

    actions = []
    for sec in raw_actions:
        vals = sec.values()
        if len(vals) < 2:
            raise ParseError("action without a name", sec.line, sec.col)
        aname = _sym(vals[1], "action name")
        params: list[tuple[str, str]] = []
        pre_groups: tuple[LiteralGroup, ...] = ()
        eff_groups: tuple[LiteralGroup, ...] = ()
        i = 2
        while i < len(vals):
            key = _sym(vals[i], "action keyword")
            if i + 1 >= len(vals):
                raise ParseError(f"missing value for {key}", sec.line, sec.col)
            body = vals[i + 1]
            if key == ":parameters":
                if not isinstance(body, _List):
                    raise ParseError("expected parameter list", sec.line, sec.col)
                params = _typed_list(body.values(), body.line, body.col)
            elif key == ":precondition":
                pre_groups = _parse_conjunction(body)
            elif key == ":effect":
                eff_groups = _parse_conjunction(body)
            else:
                raise ParseError(f"unknown action keyword {key}", sec.line, sec.col)
            i += 2
        for _, t in params:
            if t not in declared_types:
                raise UndeclaredSymbol(t, f"action {aname}: undeclared type {t!r}")
        symbols = {p for p, _ in params} | const_names
        for g in (*pre_groups, *eff_groups):
            for lit in g.literals:
                _check_literal(lit, arities, symbols, f"action {aname}")
        actions.append(ActionSchema(aname, tuple(params), pre_groups, eff_groups))

    return Domain(name, requirements, tuple(types), tuple(constants), tuple(predicates), tuple(actions))


def parse_problem(text: str, domain: Domain) -> Problem:
    root = _read_sexpr(text)
    name, sections = _split_sections(root, "problem")
    domain_name = ""
    objects: list[tuple[str, str]] = []
    init_nodes: list = []
    goal_node = None
    for sec in sections:
        head = _head(sec)
        rest = sec.values()[1:]
        if head == ":domain":
            if len(rest) != 1:
                raise ParseError("expected (:domain <name>)", sec.line, sec.col)
            domain_name = _sym(rest[0], "domain name")
        elif head == ":requirements":
            _check_requirements(sec)
        elif head == ":objects":
            objects = _typed_list(rest, sec.line, sec.col)
        elif head == ":init":
            init_nodes = rest
        elif head == ":goal":
            if len(rest) != 1:
                raise ParseError("expected a single goal formula", sec.line, sec.col)
            goal_node = rest[0]
        elif head in (":metric", ":constraints"):
            raise UnsupportedRequirement(head, sec.line, sec.col)
        else:
            raise ParseError(f"unknown problem section {head}", sec.line, sec.col)
    if not domain_name:
        raise ParseError("problem has no (:domain ...) section", root.line, root.col)
    if goal_node is None:
        raise ParseError("problem has no (:goal ...) section", root.line, root.col)

    declared_types = {OBJECT} | {t for t, _ in domain.types}
    seen: dict[str, str] = {}
    constants = set(domain.constant_names)
    for o, t in objects:
        if t not in declared_types:
            raise UndeclaredSymbol(t, f"undeclared type {t!r} for object {o!r}")
        if o in seen:
            raise PddlError(f"object {o!r} declared twice")
        seen[o] = t
    # constants re-declared as objects are tolerated and dropped
    objects = [(o, t) for o, t in objects if o not in constants]
    symbols = {o for o, _ in objects} | constants
    arities = domain.arities

    init = set()
    for node in init_nodes:
        lit = _parse_literal(node)
        if not lit.positive:
            raise ParseError("negative literal in :init", node.line, node.col)
        _check_literal(lit, arities, symbols, ":init")
        init.add(lit.atom)
    goal = tuple(lit for g in _parse_conjunction(goal_node) for lit in g.literals)
    for lit in goal:
        _check_literal(lit, arities, symbols, ":goal")
    return Problem(name, domain_name, tuple(objects), frozenset(init), goal)


# -- printing ----------------------------------------------------------------------

def _typed(pairs: Iterable[tuple[str, str]]) -> list[str]:
    """Group consecutive names of equal type: ``a b - object``."""
    out = []
    for typ, grp in itertools.groupby(pairs, key=lambda p: p[1]):
        out.append(f"{' '.join(n for n, _ in grp)} - {typ}")
    return out


def _print_groups(groups: tuple[LiteralGroup, ...], indent: str) -> str:
    lines = ["(and"]
    for g in groups:
        if g.comment is not None:
            lines.append(f"{indent}; {g.comment}")
        lines.extend(f"{indent}{lit}" for lit in g.literals)
    return "\n".join(lines) + ")"


def print_domain(domain: Domain) -> str:
    out = [f"(define (domain {domain.name})"]
    if domain.requirements:
        out.append(f"  (:requirements {' '.join(domain.requirements)})")
    if domain.types:
        out.append(f"  (:types {' '.join(_typed(domain.types))})")
    if domain.constants:
        out.append(f"  (:constants {' '.join(_typed(domain.constants))})")
    if domain.predicates:
        out.append("  (:predicates")
        decls = [f"    ({' '.join([p, *_typed(args)])})" for p, args in domain.predicates]
        out.append("\n".join(decls) + ")")
    for a in domain.actions:
        out.append("")
        out.append(f"  (:action {a.name}")
        if a.parameters:
            params = "\n".join(f"      {p}" for p in _typed_params(a.parameters))
            out.append(f"    :parameters (\n{params})")
        else:
            out.append("    :parameters ()")
        out.append(f"    :precondition {_print_groups(a.precondition, '      ')}")
        out.append(f"    :effect {_print_groups(a.effect, '      ')})")
    return "\n".join(out) + ")\n"


def _typed_params(params):
    return [f"{n} - {t}" for n, t in params]


def print_problem(problem: Problem) -> str:
    out = [f"(define (problem {problem.name})", f"  (:domain {problem.domain_name})"]
    if problem.objects:
        out.append("  (:objects")
        out.append("\n".join(f"    {line}" for line in _typed(problem.objects)) + ")")
    out.append("  (:init")
    out.append("\n".join(f"    {a}" for a in sorted(problem.init)) + ")")
    goal = "\n".join(f"    {lit}" for lit in problem.goal)
    out.append(f"  (:goal (and\n{goal})))" if goal else "  (:goal (and)))")
    return "\n".join(out) + "\n"


# -- the built-in pick/place domain ------------------------------------------------

def _lits(*specs: str) -> tuple[Literal, ...]:
    out = []
    for spec in specs:
        positive = not spec.startswith("not ")
        parts = spec.removeprefix("not ").split()
        out.append(Literal(Atom(parts[0], tuple(parts[1:])), positive))
    return tuple(out)


def builtin_blockworld_domain() -> Domain:
    """Pick and place over object-centered ``in``/``on``/``under`` relations.

    ``(on A B)`` reads "B rests on A"; ``air`` is the virtual free-space
    object and ``hand`` the robot's gripper.
    """
    rel = (("?obj_1", OBJECT), ("?obj_2", OBJECT))
    params = (("?obj", OBJECT), ("?surface", OBJECT))
    pick = ActionSchema(
        "pick", params,
        precondition=(
            LiteralGroup(_lits("in hand air", "on ?obj air"), "collision-free constraints:"),
            LiteralGroup(_lits("on ?surface ?obj", "under ?obj ?surface"), "object is on a surface:"),
        ),
        effect=(
            LiteralGroup(_lits("in hand ?obj", "not in hand air"), "hand contains target object:"),
            LiteralGroup(_lits("on ?obj hand", "under ?obj air", "not on ?obj air"), "object has been grasped:"),
            LiteralGroup(_lits("not on ?surface ?obj", "not under ?obj ?surface", "on ?surface air"),
                         "nothing is on surface:"),
        ),
    )
    place = ActionSchema(
        "place", params,
        precondition=(
            LiteralGroup(_lits("on ?surface air", "under ?obj air"), "collision-free constraints:"),
            LiteralGroup(_lits("in hand ?obj", "on ?obj hand"), "hand contains object:"),
        ),
        effect=(
            LiteralGroup(_lits("in hand air", "not in hand ?obj"), "hand no longer contains object:"),
            LiteralGroup(_lits("on ?surface ?obj", "not on ?surface air", "under ?obj ?surface",
                               "not under ?obj air"), "object is on surface:"),
            LiteralGroup(_lits("not on ?obj hand", "on ?obj air"), "nothing is on object:"),
        ),
    )
    return Domain(
        name="blockworld",
        requirements=(":strips", ":typing"),
        constants=(("hand", OBJECT), ("air", OBJECT)),
        predicates=(("in", rel), ("on", rel), ("under", rel)),
        actions=(pick, place),
    )


# -- grounding -----------------------------------------------------------------------

class Action(NamedTuple):
    """An action by name and arguments, independent of any grounded task."""
    name: str
    args: tuple[str, ...]

    def __str__(self):
        return f"({' '.join((self.name, *self.args))})"

    @classmethod
    def parse(cls, text: str) -> "Action":
        parts = text.strip().strip("()").split()
        if not parts:
            raise ValueError(f"empty action {text!r}")
        return cls(parts[0].lower(), tuple(parts[1:]))


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre: int
    add: int
    delete: int
    pre_neg: int = 0
    cost: int = 1

    @property
    def action(self) -> Action:
        return Action(self.name, self.args)

    def __str__(self):
        return str(self.action)


def bits(mask: int) -> frozenset[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


@dataclass(frozen=True)
class StripsTask:
    facts: tuple[Atom, ...]
    init: int
    goal: int
    actions: tuple[GroundAction, ...]
    goal_neg: int = 0
    index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.index:
            object.__setattr__(self, "index", {a: i for i, a in enumerate(self.facts)})
        for a in self.actions:
            if a.add & a.delete:
                raise PddlError(f"{a}: add and delete effects overlap")

    def mask(self, atoms: Iterable[Atom]) -> int:
        m = 0
        for a in atoms:
            m |= 1 << self.index[a]
        return m

    def atoms(self, state: int) -> frozenset[Atom]:
        return frozenset(self.facts[i] for i in bits(state))

    def is_goal(self, state: int) -> bool:
        return state & self.goal == self.goal and not state & self.goal_neg

    @staticmethod
    def applicable(state: int, a: GroundAction) -> bool:
        return state & a.pre == a.pre and not state & a.pre_neg

    @staticmethod
    def apply(state: int, a: GroundAction) -> int:
        return (state & ~a.delete) | a.add

    def with_init(self, atoms: Iterable[Atom]) -> "StripsTask":
        return StripsTask(self.facts, self.mask(atoms), self.goal, self.actions, self.goal_neg, self.index)


def _subtypes(domain: Domain) -> dict[str, set[str]]:
    parents = domain.type_parents()
    out: dict[str, set[str]] = {t: {t} for t in parents}
    for t in parents:
        p = parents.get(t, "")
        seen = set()
        while p and p not in seen:
            seen.add(p)
            out.setdefault(p, {p}).add(t)
            p = parents.get(p, "")
    return out


def ground(domain: Domain, problem: Problem, *, undeletable: Iterable[Atom] = (),
           init: Iterable[Atom] | None = None) -> StripsTask:
    """Instantiate the domain's actions over the problem's objects.

    Parameters of one action must bind pairwise-distinct objects. Only actions
    that are reachable under the delete relaxation from the initial state are
    kept, so the fact table is closed under the surviving actions.
    ``undeletable`` atoms are never removed by any action. ``init`` overrides
    the problem's initial state.
    """
    init_atoms = frozenset(problem.init if init is None else init)
    keep = frozenset(undeletable)
    subtypes = _subtypes(domain)
    universe = list(domain.constants) + [o for o in problem.objects if o[0] not in domain.constant_names]

    candidates: list[tuple[str, tuple[str, ...], frozenset, frozenset, frozenset, frozenset]] = []
    for schema in domain.actions:
        pools = []
        for _, typ in schema.parameters:
            allowed = subtypes.get(typ, {typ})
            pools.append([o for o, t in universe if t in allowed])
        var_names = [p for p, _ in schema.parameters]
        for combo in itertools.product(*pools):
            if len(set(combo)) != len(combo):
                continue
            sub = dict(zip(var_names, combo))

            def inst(lit: Literal) -> Atom:
                return Atom(lit.atom.predicate, tuple(sub.get(a, a) for a in lit.atom.args))

            pre = frozenset(inst(l) for l in schema.pre if l.positive)
            pre_neg = frozenset(inst(l) for l in schema.pre if not l.positive)
            add = frozenset(inst(l) for l in schema.eff if l.positive)
            delete = frozenset(inst(l) for l in schema.eff if not l.positive) - add - keep
            candidates.append((schema.name, combo, pre, pre_neg, add, delete))

    reached = set(init_atoms)
    live = [False] * len(candidates)
    changed = True
    while changed:
        changed = False
        for i, (_, _, pre, _, add, _) in enumerate(candidates):
            if not live[i] and pre <= reached:
                live[i] = True
                if not add <= reached:
                    reached |= add
                changed = True

    goal_pos = [l.atom for l in problem.goal if l.positive]
    goal_neg = [l.atom for l in problem.goal if not l.positive]
    extra = set(goal_pos) | set(goal_neg)
    for i, c in enumerate(candidates):
        if live[i]:
            extra |= c[3]
    facts = tuple(sorted(reached | extra))
    index = {a: i for i, a in enumerate(facts)}

    def m(atoms):
        out = 0
        for a in atoms:
            if a in index:
                out |= 1 << index[a]
        return out

    actions = tuple(
        GroundAction(name, combo, m(pre), m(add), m(delete), m(pre_neg))
        for (name, combo, pre, pre_neg, add, delete), ok in zip(candidates, live) if ok
    )
    return StripsTask(facts, m(init_atoms), m(goal_pos), actions, m(goal_neg), index)
