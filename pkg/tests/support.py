"""Independent batch oracle and trace property checkers for the test suite.

The brute-force functions here deliberately avoid the package's execution and
engine machinery: worlds are enumerated with itertools, enabling is decided by
scanning the raw task records, and posteriors come from summing over every
complete pick sequence consistent with the observations.  Agreement with the
incremental filter is therefore a genuine dual-route check.
"""

from __future__ import annotations

import itertools

from planrec.engine import CONTEXT
from planrec.execution import AGENT, INTERVENE
from planrec.library import GOAL, METHOD, PRIMITIVE, PlanLibrary


def world_key(ctx: dict, intended, expansion: dict) -> tuple:
    return (
        tuple(sorted(ctx.items())),
        tuple(sorted(intended)),
        tuple(sorted(expansion.items())),
    )


def active_tasks(lib: PlanLibrary, intended, expansion: dict) -> set[str]:
    active: set[str] = set()
    frontier = list(intended)
    while frontier:
        name = frontier.pop()
        if name in active:
            continue
        active.add(name)
        node = lib.tasks[name]
        if node.kind == METHOD:
            frontier.extend(node.steps)
        elif node.kind == GOAL and name in expansion:
            frontier.append(expansion[name])
    return active


def bf_worlds(lib: PlanLibrary):
    """Yield every positive-prior (context, intended, expansion, prior)."""
    var_names = [v.name for v in lib.context]
    intendables = [n for n, t in lib.tasks.items() if t.intendable]
    for values in itertools.product((True, False), repeat=len(var_names)):
        ctx = dict(zip(var_names, values))
        weight = 1.0
        for var, val in zip(lib.context, values):
            weight *= var.prior if val else 1.0 - var.prior
        if weight == 0.0:
            continue
        for mask in itertools.product((True, False), repeat=len(intendables)):
            iw = weight
            intended = frozenset(n for n, on in zip(intendables, mask) if on)
            for name, on in zip(intendables, mask):
                p = lib.tasks[name].adoption_prob(ctx)
                iw *= p if on else 1.0 - p
            if iw == 0.0:
                continue
            yield from _assign_expansions(lib, ctx, intended, {}, iw)


def _assign_expansions(lib, ctx, intended, expansion, weight):
    active = active_tasks(lib, intended, expansion)
    unchosen = [
        n
        for n in lib.tasks
        if n in active and lib.tasks[n].kind == GOAL and n not in expansion
    ]
    if not unchosen:
        yield ctx, intended, dict(expansion), weight
        return
    goal = unchosen[0]
    for choice in lib.tasks[goal].methods:
        if choice.prob <= 0.0:
            continue
        nxt = dict(expansion)
        nxt[goal] = choice.name
        yield from _assign_expansions(lib, ctx, intended, nxt, weight * choice.prob)


# Shared sub-goals can make the positive enabled/prev_done rules mutually
# recursive through distinct atoms; only well-founded derivations count, so an
# atom already under evaluation is treated as false (least-fixpoint search).

def bf_enabled(lib, intended, expansion, done, task, seen=frozenset()) -> bool:
    if task in intended:
        return True
    key = ("enabled", task)
    if key in seen:
        return False
    seen = seen | {key}
    for name, node in lib.tasks.items():
        if node.kind == METHOD and task in node.steps:
            preds = {b for (b, a) in node.precedence if a == task}
            if bf_enabled(lib, intended, expansion, done, name, seen) and all(
                bf_prev_done(lib, intended, expansion, done, p, seen) for p in preds
            ):
                return True
        if node.kind == GOAL and expansion.get(name) == task:
            if bf_enabled(lib, intended, expansion, done, name, seen):
                return True
    return False


def bf_prev_done(lib, intended, expansion, done, task, seen=frozenset()) -> bool:
    node = lib.tasks[task]
    if node.kind == PRIMITIVE:
        return task in done
    key = ("prev_done", task)
    if key in seen:
        return False
    seen = seen | {key}
    if node.kind == METHOD:
        return all(bf_prev_done(lib, intended, expansion, done, s, seen) for s in node.steps)
    chosen = expansion.get(task)
    if chosen is None:
        return False
    return bf_enabled(lib, intended, expansion, done, task, seen) and bf_prev_done(
        lib, intended, expansion, done, chosen, seen
    )


def bf_pending(lib, intended, expansion, done) -> list[str]:
    return sorted(
        name
        for name, node in lib.tasks.items()
        if node.kind == PRIMITIVE
        and name not in done
        and bf_enabled(lib, intended, expansion, done, name)
    )


def split_timeline(observations):
    pinned: dict[str, bool] = {}
    events: list[tuple[str, str]] = []
    for obs in observations:
        if obs.kind == CONTEXT:
            assert not events, "context facts must lead the timeline"
            pinned[obs.variable] = obs.value
        else:
            events.append((obs.kind, obs.action))
    return pinned, events


def bf_world_weights(lib: PlanLibrary, observations) -> dict[tuple, float]:
    """Normalized posterior weight per world, by full trace-space summation.

    Every pick sequence of the observed length is enumerated per world; a
    sequence contributes iff its agent actions equal the observations
    position by position (interventions are injected, an exhausted world
    matches nothing).
    """
    pinned, events = split_timeline(observations)
    weights: dict[tuple, float] = {}
    for ctx, intended, expansion, prior in bf_worlds(lib):
        if any(ctx.get(v) != val for v, val in pinned.items()):
            continue
        total = 0.0

        def walk(i, done, acc):
            nonlocal total
            if i == len(events):
                total += acc
                return
            kind, action = events[i]
            if kind == INTERVENE:
                walk(i + 1, done | {action}, acc)
                return
            assert kind == AGENT
            pending = bf_pending(lib, intended, expansion, done)
            if not pending:
                return
            share = 1.0 / len(pending)
            for pick in pending:
                if pick == action:
                    walk(i + 1, done | {pick}, acc * share)

        walk(0, frozenset(), prior)
        if total > 0.0:
            key = world_key(ctx, intended, expansion)
            weights[key] = weights.get(key, 0.0) + total
    norm = sum(weights.values())
    return {k: w / norm for k, w in weights.items()}


def bf_posterior_intend(lib, observations, task) -> float:
    weights = bf_world_weights(lib, observations)
    return sum(w for key, w in weights.items() if task in key[1])


def bf_predict_next(lib, observations) -> dict:
    """Next-event distribution: the accepted done set per world is fixed, so
    extend each surviving world one pick."""
    weights = bf_world_weights(lib, observations)
    _, events = split_timeline(observations)
    done = frozenset(action for _, action in events)
    dist: dict = {None: 0.0}
    for key, w in weights.items():
        ctx, intended, expansion = dict(key[0]), frozenset(key[1]), dict(key[2])
        pending = bf_pending(lib, intended, expansion, done)
        if not pending:
            dist[None] += w
            continue
        share = w / len(pending)
        for action in pending:
            dist[action] = dist.get(action, 0.0) + share
    return dist


# ---------------------------------------------------------------------------
# sampled-trace property checks

def check_trace_properties(lib: PlanLibrary, world, events) -> None:
    """Single occurrence and precedence safety for one sampled trace."""
    times: dict[str, int] = {}
    for event in events:
        if event.action is None:
            continue
        assert event.action not in times, f"action '{event.action}' occurred twice"
        times[event.action] = event.time
    active = active_tasks(lib, world.intended, world.expansion)
    for name in active:
        node = lib.tasks[name]
        if node.kind != METHOD:
            continue
        for before, after in node.precedence:
            if lib.tasks[after].kind != PRIMITIVE or lib.tasks[before].kind != PRIMITIVE:
                continue
            if after in times:
                assert before in times and times[before] < times[after], (
                    f"step '{after}' of method '{name}' ran before "
                    f"its predecessor '{before}'"
                )
