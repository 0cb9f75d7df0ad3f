"""Simulation core: substep registry, step loop, aggregate extraction.

Substeps decompose one step into observation -> policy -> transition stages,
each resolved from a registry by name so pipelines are declarative. Execution
is vectorized over agents; per-agent randomness comes from counter-based
streams keyed by (seed, agent, step, substep name), so results do not depend
on agent processing order.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ConfigError, ValidationError
from .state import AgentStateTable, EnvState, ThetaVector, Trajectory

OBSERVATIONS: dict = {}
POLICIES: dict = {}
TRANSITIONS: dict = {}
PREDICATES: dict = {}


def _register(registry, name):
    def deco(fn):
        registry[name] = fn
        return fn

    return deco


def observation(name):
    return _register(OBSERVATIONS, name)


def policy(name):
    return _register(POLICIES, name)


def transition(name):
    return _register(TRANSITIONS, name)


def predicate(name):
    return _register(PREDICATES, name)


@dataclass(frozen=True)
class SubstepSpec:
    name: str
    observation_fn: str
    policy_fn: str
    transition_fn: str
    active_predicate: str | None = None
    layer: str | None = None

    def resolve(self):
        missing = [
            ident
            for registry, ident in (
                (OBSERVATIONS, self.observation_fn),
                (POLICIES, self.policy_fn),
                (TRANSITIONS, self.transition_fn),
            )
            if ident not in registry
        ]
        if self.active_predicate is not None and self.active_predicate not in PREDICATES:
            missing.append(self.active_predicate)
        if missing:
            raise ConfigError(
                f"substep {self.name!r} references unregistered functions: {missing}"
            )


class ExecutionCounter:
    """Counts full simulation executions; the zero-shot sensitivity guarantee
    and the calibration sample-efficiency property are asserted against it."""

    def __init__(self):
        self.value = 0

    def bump(self):
        self.value += 1


simulation_executions = ExecutionCounter()


@dataclass
class RunPlan:
    """Everything a run needs besides state: pipeline, network, parameters."""

    substeps: list
    graph: object
    params: object
    temperature: float = 0.5
    mode: str = "hard"  # hard | soft


class SubstepContext:
    """Mutable bag passed through one substep's observation/policy/transition."""

    def __init__(self, state, env, graph, theta, params, seed, mode, temperature,
                 tape=None, soft=None):
        self.state = state
        self.env = env
        self.graph = graph
        self.theta = theta  # name -> float (hard) or tape Var (soft)
        self.params = params
        self.seed = seed
        self.mode = mode
        self.temperature = temperature
        self.tape = tape
        self.soft = soft
        self.spec: SubstepSpec | None = None
        self.accum: dict = {}

    @property
    def step(self):
        return self.env.step_index

    @property
    def num_agents(self):
        return self.state.num_agents

    def uniform(self, draw=0, ids=None, open_interval=False):
        """Keyed uniforms for this substep; defaults to one draw per agent."""
        if ids is None:
            ids = np.arange(self.num_agents, dtype=np.uint64)
        salt = rng.stream_salt(self.spec.name)
        fn = rng.uniform_open if open_interval else rng.uniform
        return fn(self.seed, ids, self.step, salt, draw)

    def theta_or_param(self, name):
        """Theta entry when calibratable, otherwise the fixed parameter value."""
        if name in self.theta:
            return self.theta[name]
        return getattr(self.params, name)


def apply_substep(state, env, substep: SubstepSpec, theta, ctx: SubstepContext):
    """Run one substep in place; only active agents' dynamic columns change."""
    substep.resolve()
    ctx.state, ctx.env, ctx.spec = state, env, substep
    if substep.active_predicate is not None:
        mask = PREDICATES[substep.active_predicate](ctx)
    else:
        mask = np.ones(state.num_agents, dtype=bool)
    obs = OBSERVATIONS[substep.observation_fn](ctx, mask)
    act = POLICIES[substep.policy_fn](ctx, obs, mask)
    TRANSITIONS[substep.transition_fn](ctx, obs, act, mask)
    return state, env


def compute_aggregates(state: AgentStateTable) -> dict:
    """Compartment counts plus the daily new-infection count (hard mode)."""
    codes = state.values("disease_state")
    counts = np.bincount(codes, minlength=5)
    new = float(state.values("newly_exposed").sum()) if "newly_exposed" in state.dynamic_props else 0.0
    return {
        "S": float(counts[0]),
        "E": float(counts[1]),
        "I": float(counts[2]),
        "R": float(counts[3]),
        "M": float(counts[4]),
        "new_infections": new,
    }


def run_simulation(plan: RunPlan, theta: ThetaVector, state0: AgentStateTable,
                   env0: EnvState, steps: int, seed: int,
                   tape=None, theta_vars=None, retain_tape=False):
    """Execute the substep pipeline for ``steps`` steps.

    Returns a Trajectory; in soft mode the trajectory entries are tape nodes
    reachable from every theta input that influenced them. When
    ``retain_tape`` (or an external ``tape``) is given the tape survives the
    call for post-hoc analysis; otherwise it is dropped with the locals.
    """
    from .disease import SoftDiseaseState  # local import to avoid a cycle

    if steps < 1:
        raise ValidationError("steps must be >= 1")
    for sub in plan.substeps:
        sub.resolve()
        if sub.layer is not None and sub.layer not in plan.graph.layers:
            raise ConfigError(f"substep {sub.name!r} uses unknown layer {sub.layer!r}")
    if plan.graph.num_agents != state0.num_agents:
        raise ValidationError(
            f"graph is for {plan.graph.num_agents} agents, state for {state0.num_agents}"
        )

    state = state0.copy()
    env = env0.copy()
    soft = None
    if plan.mode == "soft":
        if tape is None:
            from .tape import Tape

            tape = Tape()
        if theta_vars is None:
            theta_vars = {
                e.name: tape.input(f"theta:{e.name}", e.value) for e in theta.entries
            }
        theta_map = dict(theta_vars)
        soft = SoftDiseaseState.from_table(state, plan.params, tape)
    else:
        theta_map = {e.name: e.value for e in theta.entries}

    ctx = SubstepContext(
        state, env, plan.graph, theta_map, plan.params, seed, plan.mode,
        plan.temperature, tape=tape, soft=soft,
    )

    trajectory = Trajectory()
    for _ in range(steps):
        if "newly_exposed" in state.dynamic_props:
            state.dynamic_props["newly_exposed"].values.fill(0)
        ctx.accum = {}
        for sub in plan.substeps:
            apply_substep(state, env, sub, theta, ctx)
        if plan.mode == "soft":
            record = soft.aggregates(ctx)
        else:
            record = compute_aggregates(state)
        trajectory.append(record)
        env.advance()
        if soft is not None:
            soft.end_step()

    simulation_executions.bump()
    trajectory.tape = tape if (retain_tape or plan.mode == "soft") else None
    trajectory.theta_inputs = theta_vars if plan.mode == "soft" else None
    return trajectory
