"""Exact probabilistic plan recognition over pending-set execution models.

The package has four layers: plan libraries (AND/OR task graphs with partial
orders and context-conditional adoption priors), the generative execution
model (worlds, pending sets, likelihoods, a forward sampler), the exact
recognition engine (a Bayesian filter over enumerated worlds), and a CLI.
A rejection-sampling oracle cross-checks every exact number.
"""

from .engine import (
    BeliefState,
    EmptyBeliefError,
    Explanation,
    InexplicableObservationError,
    Observation,
    Particle,
    agent,
    context_fact,
    init_belief,
    intervention,
    observe,
    prior_predict,
    replay,
)
from .execution import (
    AGENT,
    INTERVENE,
    NONE,
    Event,
    ExecutionState,
    World,
    enabled,
    enumerate_worlds,
    format_trace,
    initial_pending,
    initial_state,
    prev_done,
    progress,
    sample_trace,
    sample_world,
    step_likelihood,
    world_prior,
)
from .library import (
    AdoptionTable,
    ContextVariable,
    LibraryError,
    MethodChoice,
    PlanLibrary,
    TaskNode,
    ValidationReport,
    load_library,
    parse_library,
    predecessors,
    serialize_library,
    validate_library,
)
from .oracle import McResult, mc_estimate

__version__ = "0.1.0"

__all__ = [
    "AGENT",
    "AdoptionTable",
    "BeliefState",
    "ContextVariable",
    "EmptyBeliefError",
    "Event",
    "ExecutionState",
    "Explanation",
    "INTERVENE",
    "InexplicableObservationError",
    "LibraryError",
    "McResult",
    "MethodChoice",
    "NONE",
    "Observation",
    "Particle",
    "PlanLibrary",
    "TaskNode",
    "ValidationReport",
    "World",
    "agent",
    "context_fact",
    "enabled",
    "enumerate_worlds",
    "format_trace",
    "init_belief",
    "initial_pending",
    "initial_state",
    "intervention",
    "load_library",
    "mc_estimate",
    "observe",
    "parse_library",
    "predecessors",
    "prev_done",
    "prior_predict",
    "progress",
    "replay",
    "sample_trace",
    "sample_world",
    "serialize_library",
    "step_likelihood",
    "validate_library",
    "world_prior",
    "__version__",
]
