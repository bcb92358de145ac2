"""Rejection-sampling oracle used to cross-check the exact engine.

Traces are sampled from the generative model with the observed interventions
injected at their times; a sample is accepted when its agent actions match
the observed ones position by position.  The estimate is the accepted-sample
frequency of the query, with a binomial standard error.

Picks are simulated by inverse-CDF lookup of one uniform draw per agent
position, which lets the whole batch run as numpy array operations; the
estimator is distributed identically to a literal step-by-step sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .engine import CONTEXT, Observation
from .execution import (
    AGENT,
    INTERVENE,
    Event,
    enumerate_worlds,
    initial_state,
    pick_distribution,
    progress,
)
from .library import PRIMITIVE, PlanLibrary

IntendQuery = tuple[str, str]
NextQuery = tuple[str, str | None]


@dataclass(frozen=True)
class McResult:
    """``estimate`` is None when no sample was accepted (never 0/0)."""

    estimate: float | None
    stderr: float | None
    accepted: int
    total: int

    def agrees_with(self, value: float, sigmas: float = 3.0) -> bool:
        if self.estimate is None or self.stderr is None:
            return False
        return abs(value - self.estimate) <= sigmas * self.stderr


def _split_timeline(observations: Sequence[Observation]):
    pinned: dict[str, bool] = {}
    events: list[tuple[str, str]] = []
    for obs in observations:
        if obs.kind == CONTEXT:
            if events:
                raise ValueError("context facts must precede every action observation")
            if obs.variable is None or obs.value is None:
                raise ValueError("context observation needs a variable and a value")
            pinned[obs.variable] = obs.value
        elif obs.kind in (AGENT, INTERVENE):
            if obs.action is None:
                raise ValueError("action observation without an action")
            events.append((obs.kind, obs.action))
        else:
            raise ValueError(f"unknown observation kind {obs.kind!r}")
    return pinned, events


def mc_estimate(
    lib: PlanLibrary,
    observations: Sequence[Observation],
    query: IntendQuery | NextQuery,
    n_samples: int,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    pick_weights: Mapping[str, float] | None = None,
) -> McResult:
    """Estimate an intention or next-action probability given a timeline.

    ``query`` is ("intend", task) or ("next", action); ("next", None) asks
    for the no-action outcome.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    qkind, qarg = query
    if qkind == "intend":
        if not lib.task(qarg).intendable:
            raise ValueError(f"task '{qarg}' is not intendable")
    elif qkind == "next":
        if qarg is not None and lib.task(qarg).kind != PRIMITIVE:
            raise ValueError(f"'{qarg}' is not a primitive action")
    else:
        raise ValueError(f"unknown query kind {qkind!r}")

    pinned, events = _split_timeline(observations)
    need_next = qkind == "next"
    agent_count = sum(1 for kind, _ in events if kind == AGENT)
    ncols = agent_count + (1 if need_next else 0)

    worlds = enumerate_worlds(lib)
    n_worlds = len(worlds)
    priors = np.array([w.prior for w in worlds], dtype=float)
    priors /= priors.sum()

    # Per world: the accepting path is deterministic, so each agent position
    # reduces to one uniform landing in that action's pick interval.
    lo = np.zeros((n_worlds, max(ncols, 1)))
    hi = np.ones((n_worlds, max(ncols, 1)))
    possible = np.ones(n_worlds, dtype=bool)
    flag = np.zeros(n_worlds, dtype=bool)   # intend membership / empty final pending
    next_lo = np.zeros(n_worlds)
    next_hi = np.zeros(n_worlds)

    for wi, world in enumerate(worlds):
        if any(world.context.get(var) != val for var, val in pinned.items()):
            possible[wi] = False
            continue
        state = initial_state(lib, world)
        col = 0
        for kind, action in events:
            t = state.time + 1
            if kind == INTERVENE:
                state = progress(lib, world, state, Event(INTERVENE, action, t))
                continue
            interval = None
            acc = 0.0
            for candidate, prob in pick_distribution(state.pending, pick_weights):
                if candidate == action:
                    interval = (acc, acc + prob)
                    break
                acc += prob
            if interval is None:   # not pending, or the world had gone idle
                possible[wi] = False
                break
            lo[wi, col], hi[wi, col] = interval
            col += 1
            state = progress(lib, world, state, Event(AGENT, action, t))
        if not possible[wi]:
            continue
        if qkind == "intend":
            flag[wi] = qarg in world.intended
        elif qarg is None:
            flag[wi] = not state.pending
        else:
            acc = 0.0
            for candidate, prob in pick_distribution(state.pending, pick_weights):
                if candidate == qarg:
                    next_lo[wi], next_hi[wi] = acc, acc + prob
                    break
                acc += prob

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.choice(n_worlds, size=n_samples, p=priors)
    uniforms = rng.random((n_samples, ncols)) if ncols else np.zeros((n_samples, 0))

    accept = possible[idx]
    if agent_count:
        picks = uniforms[:, :agent_count]
        rows_lo = lo[idx, :agent_count]
        rows_hi = hi[idx, :agent_count]
        accept = accept & ((picks >= rows_lo) & (picks < rows_hi)).all(axis=1)

    if qkind == "intend" or qarg is None:
        hits = accept & flag[idx]
    else:
        u = uniforms[:, agent_count]
        hits = accept & (u >= next_lo[idx]) & (u < next_hi[idx])

    accepted = int(accept.sum())
    if accepted == 0:
        return McResult(None, None, 0, n_samples)
    estimate = float(hits.sum()) / accepted
    stderr = math.sqrt(estimate * (1.0 - estimate) / accepted)
    return McResult(estimate, stderr, accepted, n_samples)
