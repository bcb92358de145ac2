"""Exact abductive plan recognition: a Bayesian filter over enumerated worlds.

The belief state is exhaustive — one weighted particle per world consistent
with the pinned context — so every posterior is exact.  Observing an agent
action multiplies each particle's weight by the pick likelihood and advances
its execution state; observing an intervention advances the states while
leaving the weight vector untouched (the causal clamp).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .execution import (
    AGENT,
    INTERVENE,
    Event,
    ExecutionState,
    World,
    enumerate_worlds,
    initial_state,
    pick_distribution,
    progress,
    step_likelihood,
)
from .library import GOAL, PRIMITIVE, PlanLibrary

CONTEXT = "context"


class EmptyBeliefError(RuntimeError):
    """Context facts excluded every world; there is nothing to filter over."""


class InexplicableObservationError(RuntimeError):
    """An observed agent action had zero likelihood in every surviving world."""

    def __init__(self, action: str, time: int, detail: str):
        super().__init__(
            f"inexplicable observation '{action}' at step {time}: {detail}"
        )
        self.action = action
        self.time = time


@dataclass(frozen=True)
class Observation:
    """One timeline entry: an agent action, an intervention, or a context fact.

    Context facts are episode-start conditions and are only legal before the
    first action or intervention.
    """

    kind: str
    action: str | None = None
    variable: str | None = None
    value: bool | None = None


def agent(action: str) -> Observation:
    return Observation(AGENT, action=action)


def intervention(action: str) -> Observation:
    return Observation(INTERVENE, action=action)


def context_fact(variable: str, value: bool) -> Observation:
    return Observation(CONTEXT, variable=variable, value=value)


@dataclass(frozen=True)
class Particle:
    world: World
    state: ExecutionState
    weight: float


@dataclass(frozen=True)
class Explanation:
    """One hypothesis class: an intended set plus its expansion choices."""

    intended: tuple[str, ...]
    expansion: tuple[tuple[str, str], ...]
    posterior: float


@dataclass(frozen=True)
class BeliefState:
    """Immutable filter state; observe() returns the successor belief.

    ``evidence`` accumulates the unnormalized likelihood of the observed
    agent actions so far (interventions contribute factor one).
    """

    library: PlanLibrary
    particles: tuple[Particle, ...]
    evidence: float = 1.0

    @property
    def time(self) -> int:
        return self.particles[0].state.time if self.particles else 0

    # -- updates ----------------------------------------------------------

    def observe(
        self,
        observation: Observation,
        pick_weights: Mapping[str, float] | None = None,
    ) -> "BeliefState":
        if observation.kind == CONTEXT:
            return self._observe_context(observation)
        if observation.kind not in (AGENT, INTERVENE):
            raise ValueError(f"unknown observation kind {observation.kind!r}")
        action = observation.action
        if action is None:
            raise ValueError("action observation without an action")
        if self.library.task(action).kind != PRIMITIVE:
            raise ValueError(f"observed task '{action}' is not a primitive action")

        t = self.time + 1
        event = Event(observation.kind, action, t)
        if observation.kind == INTERVENE:
            # the clamp: every likelihood is exactly 1, so the weight vector
            # is carried over untouched while the states advance
            advanced = tuple(
                Particle(p.world, progress(self.library, p.world, p.state, event), p.weight)
                for p in self.particles
            )
            return BeliefState(self.library, advanced, self.evidence)

        survivors: list[Particle] = []
        for p in self.particles:
            like = step_likelihood(p.world, p.state, event, pick_weights)
            if like > 0.0:
                state = progress(self.library, p.world, p.state, event)
                survivors.append(Particle(p.world, state, p.weight * like))
        if not survivors:
            pendings = sorted({a for p in self.particles for a in p.state.pending})
            raise InexplicableObservationError(
                action,
                t,
                f"{len(self.particles)} worlds were alive and none had it pending "
                f"(pending actions across worlds: {pendings or 'none'})",
            )
        norm = sum(p.weight for p in survivors)
        rescaled = tuple(
            Particle(p.world, p.state, p.weight / norm) for p in survivors
        )
        return BeliefState(self.library, rescaled, self.evidence * norm)

    def _observe_context(self, observation: Observation) -> "BeliefState":
        if self.time > 0:
            raise ValueError(
                "context facts are episode-start conditions; none may follow an action"
            )
        var, value = observation.variable, observation.value
        if var is None or value is None:
            raise ValueError("context observation needs a variable and a value")
        self.library.context_var(var)
        keep = [p for p in self.particles if p.world.context[var] == value]
        if not keep:
            raise EmptyBeliefError(f"context fact {var}={value} excludes every world")
        norm = sum(p.weight for p in keep)
        rescaled = tuple(Particle(p.world, p.state, p.weight / norm) for p in keep)
        return BeliefState(self.library, rescaled, self.evidence)

    # -- queries ----------------------------------------------------------

    def posterior_intend(self, task: str) -> float:
        node = self.library.task(task)
        if not node.intendable:
            raise ValueError(f"task '{task}' is not intendable")
        return sum(p.weight for p in self.particles if task in p.world.intended)

    def predict_next(
        self, pick_weights: Mapping[str, float] | None = None
    ) -> dict[str | None, float]:
        """Distribution of the next event over actions plus the None outcome
        (a world whose pending set is empty produces nothing)."""
        dist: dict[str | None, float] = {}
        none_mass = 0.0
        for p in self.particles:
            if not p.state.pending:
                none_mass += p.weight
                continue
            for action, prob in pick_distribution(p.state.pending, pick_weights):
                dist[action] = dist.get(action, 0.0) + p.weight * prob
        dist = {a: v for a, v in dist.items() if v > 0.0}
        dist[None] = none_mass
        return dist

    def posterior_expansion(self, goal: str) -> dict[str | None, float]:
        """Mass per method of ``goal`` plus (under None) the inactive mass."""
        node = self.library.task(goal)
        if node.kind != GOAL:
            raise ValueError(f"task '{goal}' is not a goal")
        dist: dict[str | None, float] = {c.name: 0.0 for c in node.methods}
        dist[None] = 0.0
        for p in self.particles:
            chosen = p.world.expansion.get(goal)
            dist[chosen] = dist.get(chosen, 0.0) + p.weight
        return dist

    def explanations(self, top_k: int) -> list[Explanation]:
        """Hypotheses ranked by posterior; ties break lexicographically on
        the intended-set names so the output is deterministic."""
        if top_k < 1:
            raise ValueError("top_k must be at least 1")
        grouped: dict[tuple, float] = {}
        for p in self.particles:
            key = (tuple(sorted(p.world.intended)), tuple(sorted(p.world.expansion.items())))
            grouped[key] = grouped.get(key, 0.0) + p.weight
        ranked = sorted(grouped.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
        return [
            Explanation(intended, expansion, weight)
            for (intended, expansion), weight in ranked[:top_k]
        ]


def init_belief(
    lib: PlanLibrary,
    context_facts: Mapping[str, bool] | None = None,
) -> BeliefState:
    """One particle per world consistent with the pinned context facts."""
    worlds = enumerate_worlds(lib, context_facts)
    if not worlds:
        raise EmptyBeliefError("the pinned context facts exclude every world")
    total = sum(w.prior for w in worlds)
    particles = tuple(
        Particle(w, initial_state(lib, w), w.prior / total) for w in worlds
    )
    return BeliefState(lib, particles)


def observe(
    belief: BeliefState,
    observation: Observation,
    pick_weights: Mapping[str, float] | None = None,
) -> BeliefState:
    return belief.observe(observation, pick_weights)


def replay(
    lib: PlanLibrary,
    observations: Iterable[Observation],
    pick_weights: Mapping[str, float] | None = None,
) -> BeliefState:
    """Fold a full timeline (context facts first) into a belief state."""
    facts: dict[str, bool] = {}
    events: list[Observation] = []
    for obs in observations:
        if obs.kind == CONTEXT:
            if events:
                raise ValueError("context facts must precede every action observation")
            if obs.variable is None or obs.value is None:
                raise ValueError("context observation needs a variable and a value")
            facts[obs.variable] = obs.value
        else:
            events.append(obs)
    belief = init_belief(lib, facts or None)
    for obs in events:
        belief = belief.observe(obs, pick_weights)
    return belief


def prior_predict(
    lib: PlanLibrary,
    context_facts: Mapping[str, bool] | None,
    action: str,
) -> float:
    """Probability that the episode's first event is ``action``.

    Unnormalized over actions: worlds that intend nothing produce no first
    action at all, so the action probabilities sum to less than one.
    """
    if lib.task(action).kind != PRIMITIVE:
        raise ValueError(f"'{action}' is not a primitive action")
    return init_belief(lib, context_facts).predict_next().get(action, 0.0)
