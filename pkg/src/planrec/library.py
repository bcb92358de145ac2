"""Hierarchical plan libraries: an AND/OR task graph with partial orders.

A library is a flat collection of named tasks.  Goals are OR nodes (the agent
picks exactly one method), methods are AND nodes (every step must happen,
subject to the method's precedence pairs), primitives are the observable
actions.  Tasks flagged intendable carry an adoption prior, optionally
conditioned on boolean context variables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

GOAL = "goal"
METHOD = "method"
PRIMITIVE = "primitive"

PROB_TOL = 1e-9

# role tags in the parents index
STEP_OF = "step"        # child appears in a method's step list
METHOD_OF = "method"    # child appears in a goal's method list


class LibraryError(ValueError):
    """A library document that cannot be turned into a usable PlanLibrary."""


@dataclass(frozen=True)
class ContextVariable:
    """A boolean fact about the episode start, with a prior of being true."""

    name: str
    prior: float


@dataclass(frozen=True)
class MethodChoice:
    name: str
    prob: float


@dataclass(frozen=True)
class AdoptionTable:
    """Adoption probability conditioned on an assignment of context variables.

    ``rows`` holds one entry per full assignment of ``variables``, as a
    (values-tuple, probability) pair with values in variable order.
    """

    variables: tuple[str, ...]
    rows: tuple[tuple[tuple[bool, ...], float], ...]

    def prob(self, context: Mapping[str, bool]) -> float:
        key = tuple(bool(context[v]) for v in self.variables)
        for assignment, p in self.rows:
            if assignment == key:
                return p
        raise KeyError(f"adoption table has no row for assignment {key!r}")


@dataclass(frozen=True)
class TaskNode:
    """One node of the AND/OR graph.

    ``methods`` is populated for goals, ``steps``/``precedence`` for methods;
    primitives carry neither.  ``adoption`` is present exactly when the task
    is intendable: either a plain prior or an AdoptionTable.
    """

    name: str
    kind: str
    intendable: bool = False
    adoption: float | AdoptionTable | None = None
    methods: tuple[MethodChoice, ...] = ()
    steps: tuple[str, ...] = ()
    precedence: frozenset[tuple[str, str]] = frozenset()

    def adoption_prob(self, context: Mapping[str, bool]) -> float:
        if self.adoption is None:
            raise LibraryError(f"task '{self.name}' has no adoption prior")
        if isinstance(self.adoption, AdoptionTable):
            return self.adoption.prob(context)
        return self.adoption


@dataclass(frozen=True)
class PlanLibrary:
    """Validated task graph plus the derived indices the engine consults.

    ``tasks`` preserves declaration order; ``leaves`` lists the primitives and
    ``parents`` maps each task to its (parent, role) pairs, the exact inverse
    of the goal->method and method->step edges.
    """

    tasks: dict[str, TaskNode]
    context: tuple[ContextVariable, ...]
    leaves: tuple[str, ...] = field(default=())
    parents: dict[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # derived indices are name-sorted so that equal task sets compare
        # equal regardless of declaration order
        leaves = tuple(sorted(n for n, t in self.tasks.items() if t.kind == PRIMITIVE))
        parents: dict[str, set[tuple[str, str]]] = {n: set() for n in self.tasks}
        for name, node in self.tasks.items():
            if node.kind == GOAL:
                for choice in node.methods:
                    # setdefault keeps dangling references representable so
                    # validate_library can report them instead of crashing here
                    parents.setdefault(choice.name, set()).add((name, METHOD_OF))
            elif node.kind == METHOD:
                for step in node.steps:
                    parents.setdefault(step, set()).add((name, STEP_OF))
        object.__setattr__(self, "leaves", leaves)
        object.__setattr__(
            self, "parents", {n: tuple(sorted(ps)) for n, ps in parents.items()}
        )

    @property
    def intendables(self) -> tuple[str, ...]:
        return tuple(n for n, t in self.tasks.items() if t.intendable)

    def task(self, name: str) -> TaskNode:
        try:
            return self.tasks[name]
        except KeyError:
            raise LibraryError(f"unknown task '{name}'") from None

    def context_var(self, name: str) -> ContextVariable:
        for var in self.context:
            if var.name == name:
                return var
        raise LibraryError(f"unknown context variable '{name}'")


@dataclass(frozen=True)
class ValidationReport:
    """Every violated library invariant; empty report means usable."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self) -> Iterator[str]:
        return iter(self.violations)


# ---------------------------------------------------------------------------
# parsing

def _require_keys(record: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(record) - allowed
    if unknown:
        raise LibraryError(f"{where}: unknown key(s) {sorted(unknown)}")


def _as_prob(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise LibraryError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _parse_adoption(value: Any, where: str) -> float | AdoptionTable:
    if isinstance(value, Mapping):
        _require_keys(value, {"vars", "table"}, where)
        variables = value.get("vars")
        table = value.get("table")
        if not isinstance(variables, list) or not all(isinstance(v, str) for v in variables):
            raise LibraryError(f"{where}: 'vars' must be a list of variable names")
        if not isinstance(table, list):
            raise LibraryError(f"{where}: 'table' must be a list of rows")
        rows = []
        for i, row in enumerate(table):
            if not isinstance(row, Mapping):
                raise LibraryError(f"{where}: table row {i} must be an object")
            _require_keys(row, {"when", "prob"}, f"{where} table row {i}")
            when = row.get("when")
            if not isinstance(when, Mapping):
                raise LibraryError(f"{where}: table row {i} needs a 'when' object")
            if set(when) != set(variables):
                raise LibraryError(
                    f"{where}: table row {i} must assign exactly {variables}"
                )
            if not all(isinstance(v, bool) for v in when.values()):
                raise LibraryError(f"{where}: table row {i} values must be booleans")
            assignment = tuple(bool(when[v]) for v in variables)
            rows.append((assignment, _as_prob(row.get("prob"), f"{where} row {i}")))
        rows.sort(key=lambda row: row[0])  # normalized row order
        return AdoptionTable(tuple(variables), tuple(rows))
    return _as_prob(value, where)


def _parse_task(record: Any, index: int) -> TaskNode:
    where = f"tasks[{index}]"
    if not isinstance(record, Mapping):
        raise LibraryError(f"{where}: task record must be an object")
    name = record.get("name")
    if not isinstance(name, str) or not name:
        raise LibraryError(f"{where}: missing task name")
    where = f"task '{name}'"
    kind = record.get("kind")
    if kind not in (GOAL, METHOD, PRIMITIVE):
        raise LibraryError(f"{where}: kind must be goal, method or primitive")
    _require_keys(
        record,
        {"name", "kind", "intendable", "adoption", "methods", "steps", "precedence"},
        where,
    )
    intendable = record.get("intendable", False)
    if not isinstance(intendable, bool):
        raise LibraryError(f"{where}: 'intendable' must be a boolean")
    adoption = None
    if "adoption" in record:
        adoption = _parse_adoption(record["adoption"], f"{where} adoption")

    methods: tuple[MethodChoice, ...] = ()
    steps: tuple[str, ...] = ()
    precedence: frozenset[tuple[str, str]] = frozenset()

    if kind == GOAL:
        if "methods" in record and "steps" in record:
            raise LibraryError(f"{where}: give either 'methods' or inline 'steps'")
        if "methods" in record:
            methods = _parse_methods(record["methods"], where)
        elif "steps" not in record:
            raise LibraryError(f"{where}: a goal needs 'methods' or inline 'steps'")
        # inline steps become an implicit single method, handled by the caller
    elif kind == METHOD:
        if "methods" in record:
            raise LibraryError(f"{where}: a method cannot list 'methods'")
        steps, precedence = _parse_steps(record, where)
    else:
        for key in ("methods", "steps", "precedence"):
            if key in record:
                raise LibraryError(f"{where}: a primitive cannot carry '{key}'")

    return TaskNode(name, kind, intendable, adoption, methods, steps, precedence)


def _parse_methods(value: Any, where: str) -> tuple[MethodChoice, ...]:
    if not isinstance(value, list) or not value:
        raise LibraryError(f"{where}: 'methods' must be a non-empty list")
    plain = all(isinstance(m, str) for m in value)
    weighted = all(isinstance(m, Mapping) for m in value)
    if plain:
        # unspecified selection becomes explicit uniform probabilities
        return tuple(MethodChoice(m, 1.0 / len(value)) for m in value)
    if not weighted:
        raise LibraryError(f"{where}: mix of plain and weighted method entries")
    choices = []
    for m in value:
        _require_keys(m, {"name", "prob"}, f"{where} method entry")
        if not isinstance(m.get("name"), str):
            raise LibraryError(f"{where}: method entry needs a string 'name'")
        choices.append(MethodChoice(m["name"], _as_prob(m.get("prob"), where)))
    return tuple(choices)


def _parse_steps(record: Mapping[str, Any], where: str):
    steps = record.get("steps")
    if not isinstance(steps, list) or not all(isinstance(s, str) for s in steps):
        raise LibraryError(f"{where}: 'steps' must be a list of task names")
    pairs = record.get("precedence", [])
    if not isinstance(pairs, list):
        raise LibraryError(f"{where}: 'precedence' must be a list of pairs")
    precedence = set()
    for pair in pairs:
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or not all(isinstance(x, str) for x in pair)
        ):
            raise LibraryError(f"{where}: precedence entries are [before, after] pairs")
        precedence.add((pair[0], pair[1]))
    return tuple(steps), frozenset(precedence)


def parse_library(document: str | Mapping[str, Any]) -> PlanLibrary:
    """Parse a library document (JSON text or an already-decoded mapping).

    Parsing is structural: it reports syntax errors with their position,
    duplicate task names, and dangling references.  Semantic invariants
    (probability sums, precedence DAGs, adoption tables) are the job of
    validate_library.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise LibraryError(
                f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    if not isinstance(document, Mapping):
        raise LibraryError("library document must be a JSON object")
    _require_keys(document, {"context", "tasks"}, "library")

    context: list[ContextVariable] = []
    seen_vars: set[str] = set()
    for i, record in enumerate(document.get("context", [])):
        if not isinstance(record, Mapping):
            raise LibraryError(f"context[{i}]: must be an object")
        _require_keys(record, {"name", "prior"}, f"context[{i}]")
        name = record.get("name")
        if not isinstance(name, str) or not name:
            raise LibraryError(f"context[{i}]: missing variable name")
        if name in seen_vars:
            raise LibraryError(f"duplicate context variable '{name}'")
        seen_vars.add(name)
        context.append(ContextVariable(name, _as_prob(record.get("prior"), f"context '{name}'")))

    records = document.get("tasks")
    if not isinstance(records, list):
        raise LibraryError("library needs a 'tasks' list")

    tasks: dict[str, TaskNode] = {}

    def _add(node: TaskNode) -> None:
        if node.name in tasks:
            raise LibraryError(f"duplicate task name '{node.name}'")
        tasks[node.name] = node

    for i, record in enumerate(records):
        node = _parse_task(record, i)
        if node.kind == GOAL and not node.methods and "steps" in record:
            # single-method goal written without a method node: materialize
            # the method layer so the traversal rules stay uniform.
            steps, precedence = _parse_steps(record, f"task '{node.name}'")
            implicit = TaskNode(f"{node.name}/only", METHOD, steps=steps, precedence=precedence)
            node = TaskNode(
                node.name,
                GOAL,
                node.intendable,
                node.adoption,
                (MethodChoice(implicit.name, 1.0),),
            )
            _add(node)
            _add(implicit)
        else:
            _add(node)

    if not any(t.intendable for t in tasks.values()):
        raise LibraryError("library must contain at least one intendable task")

    for node in tasks.values():
        for choice in node.methods:
            if choice.name not in tasks:
                raise LibraryError(
                    f"goal '{node.name}' references unknown method '{choice.name}'"
                )
        for step in node.steps:
            if step not in tasks:
                raise LibraryError(
                    f"method '{node.name}' references unknown step '{step}'"
                )
        for before, after in node.precedence:
            for end in (before, after):
                if end not in tasks:
                    raise LibraryError(
                        f"method '{node.name}' precedence references unknown task '{end}'"
                    )
        if isinstance(node.adoption, AdoptionTable):
            for var in node.adoption.variables:
                if var not in seen_vars:
                    raise LibraryError(
                        f"task '{node.name}' adoption references unknown context variable '{var}'"
                    )

    return PlanLibrary(tasks, tuple(context))


# ---------------------------------------------------------------------------
# validation

def _precedence_is_dag(steps: tuple[str, ...], pairs: frozenset[tuple[str, str]]) -> bool:
    succs: dict[str, set[str]] = {s: set() for s in steps}
    indeg = {s: 0 for s in steps}
    for before, after in pairs:
        if before in succs and after in indeg and after not in succs[before]:
            succs[before].add(after)
            indeg[after] += 1
    ready = [s for s in steps if indeg[s] == 0]
    seen = 0
    while ready:
        s = ready.pop()
        seen += 1
        for nxt in succs[s]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    return seen == len(steps)


def _task_graph_cycle(lib: PlanLibrary) -> str | None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in lib.tasks}

    def children(name: str) -> tuple[str, ...]:
        node = lib.tasks[name]
        if node.kind == GOAL:
            return tuple(c.name for c in node.methods)
        return node.steps

    def visit(name: str) -> str | None:
        color[name] = GREY
        for child in children(name):
            if color[child] == GREY:
                return child
            if color[child] == WHITE:
                hit = visit(child)
                if hit is not None:
                    return hit
        color[name] = BLACK
        return None

    for name in lib.tasks:
        if color[name] == WHITE:
            hit = visit(name)
            if hit is not None:
                return hit
    return None


def validate_library(lib: PlanLibrary) -> ValidationReport:
    """Check every semantic invariant; returns the full list of violations."""
    bad: list[str] = []

    for var in lib.context:
        if not 0.0 <= var.prior <= 1.0:
            bad.append(f"context variable '{var.name}' prior {var.prior} outside [0,1]")

    declared_vars = {v.name for v in lib.context}

    dangling = False
    for name, node in lib.tasks.items():
        for ref in [c.name for c in node.methods] + list(node.steps):
            if ref not in lib.tasks:
                bad.append(f"task '{name}' references undeclared task '{ref}'")
                dangling = True
    if dangling:
        return ValidationReport(tuple(bad))

    for name, node in lib.tasks.items():
        if node.kind == GOAL:
            if not node.methods:
                bad.append(f"goal '{name}' declares no methods")
            total = sum(c.prob for c in node.methods)
            if node.methods and abs(total - 1.0) > PROB_TOL:
                bad.append(f"method probabilities sum != 1 for goal '{name}' (got {total})")
            for choice in node.methods:
                if not 0.0 <= choice.prob <= 1.0:
                    bad.append(f"goal '{name}' method '{choice.name}' prob outside [0,1]")
                if lib.tasks[choice.name].kind != METHOD:
                    bad.append(f"goal '{name}' lists non-method task '{choice.name}' as a method")
        elif node.kind == METHOD:
            if not node.steps:
                bad.append(f"method '{name}' has no steps")
            step_set = set(node.steps)
            for before, after in sorted(node.precedence):
                if before not in step_set or after not in step_set:
                    bad.append(
                        f"precedence pair ({before}, {after}) in method '{name}' "
                        "references a non-step"
                    )
            if not _precedence_is_dag(node.steps, node.precedence):
                bad.append(f"precedence not a DAG in method '{name}'")

        if node.intendable and node.adoption is None:
            bad.append(f"intendable task '{name}' has no adoption prior")
        if not node.intendable and node.adoption is not None:
            bad.append(f"non-intendable task '{name}' carries an adoption entry")
        if isinstance(node.adoption, AdoptionTable):
            for var in node.adoption.variables:
                if var not in declared_vars:
                    bad.append(f"task '{name}' adoption references undeclared variable '{var}'")
            expected = 2 ** len(node.adoption.variables)
            assignments = [row[0] for row in node.adoption.rows]
            if len(set(assignments)) != len(assignments) or len(assignments) != expected:
                bad.append(f"adoption table of '{name}' does not cover every assignment exactly once")
            for assignment, p in node.adoption.rows:
                if not 0.0 <= p <= 1.0:
                    bad.append(f"adoption table of '{name}' has probability {p} outside [0,1]")
        elif node.adoption is not None and not 0.0 <= node.adoption <= 1.0:
            bad.append(f"adoption prior of '{name}' outside [0,1]")

    hit = _task_graph_cycle(lib)
    if hit is not None:
        bad.append(f"task graph cycle involving '{hit}'")
    else:
        reachable: set[str] = set()
        frontier = [n for n in lib.tasks if lib.tasks[n].intendable]
        reachable.update(frontier)
        while frontier:
            node = lib.tasks[frontier.pop()]
            kids = (
                tuple(c.name for c in node.methods) if node.kind == GOAL else node.steps
            )
            for child in kids:
                if child not in reachable:
                    reachable.add(child)
                    frontier.append(child)
        for leaf in lib.leaves:
            if leaf not in reachable:
                bad.append(
                    f"primitive '{leaf}' is unreachable from every intendable task "
                    "and not intendable itself"
                )

    return ValidationReport(tuple(bad))


def predecessors(lib: PlanLibrary, child: str, method: str) -> frozenset[str]:
    """Immediate predecessors of ``child`` within ``method``'s step order.

    These are exactly the steps that must be prev_done before ``child``
    becomes enabled through this method.
    """
    node = lib.tasks.get(method)
    if node is None or node.kind != METHOD or child not in node.steps:
        raise LibraryError(f"unknown child/method pairing ({child}, {method})")
    return frozenset(before for before, after in node.precedence if after == child)


# ---------------------------------------------------------------------------
# serialization

def serialize_library(lib: PlanLibrary) -> dict[str, Any]:
    """Emit the normalized document form; parse(serialize(lib)) == lib."""

    def adoption_doc(adoption: float | AdoptionTable) -> Any:
        if isinstance(adoption, AdoptionTable):
            rows = sorted(adoption.rows, key=lambda row: row[0])
            return {
                "vars": list(adoption.variables),
                "table": [
                    {"when": dict(zip(adoption.variables, values)), "prob": p}
                    for values, p in rows
                ],
            }
        return adoption

    tasks = []
    for name, node in lib.tasks.items():
        record: dict[str, Any] = {"name": name, "kind": node.kind, "intendable": node.intendable}
        if node.adoption is not None:
            record["adoption"] = adoption_doc(node.adoption)
        if node.kind == GOAL:
            record["methods"] = [{"name": c.name, "prob": c.prob} for c in node.methods]
        elif node.kind == METHOD:
            record["steps"] = list(node.steps)
            record["precedence"] = [list(p) for p in sorted(node.precedence)]
        tasks.append(record)

    return {
        "context": [{"name": v.name, "prior": v.prior} for v in lib.context],
        "tasks": tasks,
    }


def load_library(path: str) -> PlanLibrary:
    """Read, parse and validate a library file; raises LibraryError if unusable."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    lib = parse_library(text)
    report = validate_library(lib)
    if not report.ok:
        raise LibraryError("; ".join(report.violations))
    return lib
