"""Generative pending-set semantics over a plan library.

A World is one complete hypothesis about the agent: a context assignment, the
set of tasks adopted for their own sake at episode start, and one chosen
method per active goal.  Given a world, execution is deterministic in the
event history: the pending set holds every primitive that is enabled and not
yet done, and each agent step picks one pending action.  Interventions are
clamped: they carry no pick likelihood but have full causal effect on the
pending set.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .library import METHOD, PRIMITIVE, LibraryError, PlanLibrary, predecessors

AGENT = "agent"
INTERVENE = "intervene"
NONE = "none"


@dataclass(frozen=True)
class World:
    """One enumerated hypothesis, weighted by its prior.

    ``expansion`` maps exactly the active goals (intended ones plus goals
    reached through chosen methods) to their single chosen method.
    """

    context: Mapping[str, bool]
    intended: frozenset[str]
    expansion: Mapping[str, str]
    prior: float

    def key(self) -> tuple:
        """Hashable identity used for grouping and comparison."""
        return (
            tuple(sorted(self.context.items())),
            tuple(sorted(self.intended)),
            tuple(sorted(self.expansion.items())),
        )


@dataclass(frozen=True)
class ExecutionState:
    """Deterministic per-world state: clock, completions, pending actions."""

    time: int
    done: Mapping[str, int]
    pending: frozenset[str]


@dataclass(frozen=True)
class Event:
    """One timeline entry; ``none`` marks an idle step of an exhausted world."""

    kind: str
    action: str | None
    time: int


def format_event(event: Event) -> str:
    return f"t={event.time} {event.kind} {event.action or '-'}"


def format_trace(events: Iterable[Event]) -> str:
    return "\n".join(format_event(e) for e in events)


# ---------------------------------------------------------------------------
# enabling semantics

def enabled(
    lib: PlanLibrary,
    world: World,
    done: Mapping[str, int],
    task: str,
) -> bool:
    """Whether ``task`` may currently be pursued in this world.

    A task is enabled when it is intended for its own sake, when it is a step
    of an enabled method whose predecessors are all prev_done, or when it is
    the chosen method of an enabled goal.
    """
    lib.task(task)
    return _enabled(lib, world, done, task, set())


def prev_done(
    lib: PlanLibrary,
    world: World,
    done: Mapping[str, int],
    task: str,
) -> bool:
    """Completion: primitives once they happened, methods once every step is
    prev_done, goals once enabled with their chosen expansion prev_done."""
    lib.task(task)
    return _prev_done(lib, world, done, task, set())


# The enabled/prev_done rules are positive and mutually recursive, and a
# sub-goal shared between two methods can make their atom dependencies cyclic
# even though the task graph is a DAG (completing one parent's predecessor may
# entail completing the shared sub-goal itself).  Searching only well-founded
# derivations — an atom already on the evaluation path counts as false —
# computes the least fixpoint and always terminates.

def _enabled(lib, world, done, task, stack) -> bool:
    if task in world.intended:
        return True
    key = ("enabled", task)
    if key in stack:
        return False
    stack.add(key)
    try:
        for parent, role in lib.parents.get(task, ()):
            if role == "step":
                if _enabled(lib, world, done, parent, stack) and all(
                    _prev_done(lib, world, done, pre, stack)
                    for pre in predecessors(lib, task, parent)
                ):
                    return True
            else:  # task is one of a goal's methods
                if world.expansion.get(parent) == task and _enabled(
                    lib, world, done, parent, stack
                ):
                    return True
        return False
    finally:
        stack.discard(key)


def _prev_done(lib, world, done, task, stack) -> bool:
    node = lib.tasks[task]
    if node.kind == PRIMITIVE:
        return task in done
    key = ("prev_done", task)
    if key in stack:
        return False
    stack.add(key)
    try:
        if node.kind == METHOD:
            return all(_prev_done(lib, world, done, step, stack) for step in node.steps)
        chosen = world.expansion.get(task)
        if chosen is None:
            return False
        return _enabled(lib, world, done, task, stack) and _prev_done(
            lib, world, done, chosen, stack
        )
    finally:
        stack.discard(key)


def initial_pending(lib: PlanLibrary, world: World) -> frozenset[str]:
    """The leaves enabled before anything has happened; may be empty."""
    return frozenset(a for a in lib.leaves if enabled(lib, world, {}, a))


def initial_state(lib: PlanLibrary, world: World) -> ExecutionState:
    return ExecutionState(0, {}, initial_pending(lib, world))


def progress(
    lib: PlanLibrary,
    world: World,
    state: ExecutionState,
    event: Event,
) -> ExecutionState:
    """Advance the pending set by one event.

    The executed action is removed, other pending actions persist, and
    primitives that are now enabled and not yet done are added.  Intervened
    actions land in the done set exactly like agent actions.
    """
    if event.time != state.time + 1:
        raise ValueError(f"event time {event.time} does not follow state time {state.time}")
    if event.kind not in (AGENT, INTERVENE) or event.action is None:
        raise ValueError(f"progress needs an action event, got {event.kind!r}")
    done = dict(state.done)
    done.setdefault(event.action, event.time)
    pending = set(state.pending)
    pending.discard(event.action)
    for action in lib.leaves:
        if action in done or action in pending:
            continue
        if enabled(lib, world, done, action):
            pending.add(action)
    return ExecutionState(event.time, done, frozenset(pending))


# ---------------------------------------------------------------------------
# probabilities

def pick_distribution(
    pending: frozenset[str] | Sequence[str],
    pick_weights: Mapping[str, float] | None = None,
) -> list[tuple[str, float]]:
    """Pick probabilities over a pending set, sorted by action name.

    Uniform by default; ``pick_weights`` assigns relative weights (missing
    actions weigh 1).
    """
    actions = sorted(pending)
    if not actions:
        return []
    if pick_weights is None:
        share = 1.0 / len(actions)
        return [(a, share) for a in actions]
    weights = [float(pick_weights.get(a, 1.0)) for a in actions]
    total = sum(weights)
    if total <= 0:
        raise ValueError("pick weights over a pending set must have positive total")
    return [(a, w / total) for a, w in zip(actions, weights)]


def step_likelihood(
    world: World,
    state: ExecutionState,
    event: Event,
    pick_weights: Mapping[str, float] | None = None,
) -> float:
    """Likelihood of one event in this world.

    Agent actions must be picked from the pending set; an intervention is
    exactly 1 in every world — it says nothing about intent.
    """
    if event.kind == INTERVENE:
        return 1.0
    if event.kind != AGENT:
        raise ValueError(f"no likelihood for event kind {event.kind!r}")
    if not state.pending or event.action not in state.pending:
        return 0.0
    for action, prob in pick_distribution(state.pending, pick_weights):
        if action == event.action:
            return prob
    return 0.0


def world_prior(lib: PlanLibrary, world: World) -> float:
    """Product of context, adoption and method-selection probabilities."""
    prior = 1.0
    for var in lib.context:
        prior *= var.prior if world.context[var.name] else 1.0 - var.prior
    for name in lib.intendables:
        p = lib.tasks[name].adoption_prob(world.context)
        prior *= p if name in world.intended else 1.0 - p
    for goal, method in world.expansion.items():
        for choice in lib.tasks[goal].methods:
            if choice.name == method:
                prior *= choice.prob
                break
        else:
            raise LibraryError(f"world chooses '{method}' which is not a method of '{goal}'")
    return prior


# ---------------------------------------------------------------------------
# world enumeration

def _expansion_choices(
    lib: PlanLibrary,
    frontier: tuple[str, ...],
    expansion: dict[str, str],
    weight: float,
):
    """DFS over method choices for every goal activated from ``frontier``."""
    if not frontier:
        yield dict(expansion), weight
        return
    name, rest = frontier[0], frontier[1:]
    node = lib.tasks[name]
    if node.kind == PRIMITIVE:
        yield from _expansion_choices(lib, rest, expansion, weight)
    elif node.kind == METHOD:
        yield from _expansion_choices(lib, node.steps + rest, expansion, weight)
    else:
        if name in expansion:
            yield from _expansion_choices(lib, rest, expansion, weight)
            return
        for choice in node.methods:
            if choice.prob <= 0.0:
                continue
            expansion[name] = choice.name
            yield from _expansion_choices(
                lib, (choice.name,) + rest, expansion, weight * choice.prob
            )
            del expansion[name]


def enumerate_worlds(
    lib: PlanLibrary,
    pinned_context: Mapping[str, bool] | None = None,
) -> list[World]:
    """Every positive-prior world consistent with the pinned context facts.

    Over the full enumeration (no pinning) the priors sum to one.
    """
    if pinned_context:
        declared = {v.name for v in lib.context}
        for name in pinned_context:
            if name not in declared:
                raise LibraryError(f"unknown context variable '{name}'")

    def context_assignments(i: int, assign: dict[str, bool], weight: float):
        if i == len(lib.context):
            yield dict(assign), weight
            return
        var = lib.context[i]
        pin = None if pinned_context is None else pinned_context.get(var.name)
        for value, p in ((True, var.prior), (False, 1.0 - var.prior)):
            if pin is not None and value != pin:
                continue
            if p <= 0.0:
                continue
            assign[var.name] = value
            yield from context_assignments(i + 1, assign, weight * p)
            del assign[var.name]

    intendables = lib.intendables

    def intent_subsets(context, i: int, chosen: list[str], weight: float):
        if i == len(intendables):
            yield frozenset(chosen), weight
            return
        name = intendables[i]
        p = lib.tasks[name].adoption_prob(context)
        if p > 0.0:
            chosen.append(name)
            yield from intent_subsets(context, i + 1, chosen, weight * p)
            chosen.pop()
        if 1.0 - p > 0.0:
            yield from intent_subsets(context, i + 1, chosen, weight * (1.0 - p))

    worlds: list[World] = []
    for context, cw in context_assignments(0, {}, 1.0):
        for intended, iw in intent_subsets(context, 0, [], cw):
            frontier = tuple(n for n in lib.tasks if n in intended)
            for expansion, weight in _expansion_choices(lib, frontier, {}, iw):
                worlds.append(World(context, intended, expansion, weight))
    return worlds


# ---------------------------------------------------------------------------
# forward sampling

def sample_world(lib: PlanLibrary, rng: np.random.Generator) -> World:
    """Draw one world from the prior: context, intentions, then expansions."""
    context = {v.name: bool(rng.random() < v.prior) for v in lib.context}
    intended = frozenset(
        name
        for name in lib.intendables
        if rng.random() < lib.tasks[name].adoption_prob(context)
    )
    expansion: dict[str, str] = {}
    frontier = [n for n in reversed(lib.tasks) if n in intended]
    while frontier:
        name = frontier.pop()
        node = lib.tasks[name]
        if node.kind == PRIMITIVE:
            continue
        if node.kind == METHOD:
            frontier.extend(reversed(node.steps))
            continue
        if name in expansion:
            continue
        viable = [c for c in node.methods if c.prob > 0.0]
        r = rng.random()
        acc = 0.0
        chosen = viable[-1].name
        for choice in viable:
            acc += choice.prob
            if r < acc:
                chosen = choice.name
                break
        expansion[name] = chosen
        frontier.append(chosen)
    world = World(context, intended, expansion, 0.0)
    return replace(world, prior=world_prior(lib, world))


def sample_trace(
    lib: PlanLibrary,
    horizon: int,
    interventions: Iterable[tuple[str, int]] = (),
    seed: int | np.random.Generator = 0,
    pick_weights: Mapping[str, float] | None = None,
) -> tuple[World, list[Event]]:
    """Sample a world and roll the execution model forward ``horizon`` steps.

    Injected interventions are applied at their times; an empty pending set
    yields a ``none`` marker.  Deterministic for a fixed seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    injected = dict((int(t), a) for a, t in interventions)
    world = sample_world(lib, rng)
    state = initial_state(lib, world)
    events: list[Event] = []
    for t in range(1, horizon + 1):
        if t in injected:
            event = Event(INTERVENE, injected[t], t)
            state = progress(lib, world, state, event)
        elif not state.pending:
            event = Event(NONE, None, t)
            state = replace(state, time=t)
        else:
            dist = pick_distribution(state.pending, pick_weights)
            cum = np.cumsum([p for _, p in dist])
            idx = int(bisect.bisect_right(cum, rng.random()))
            idx = min(idx, len(dist) - 1)
            event = Event(AGENT, dist[idx][0], t)
            state = progress(lib, world, state, event)
        events.append(event)
    return world, events
