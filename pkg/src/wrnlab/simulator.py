"""Deterministic scheduler driving step-machine protocols over shared objects.

Processes are inversion-of-control step machines: given a process's input
and its local view (the sequence of request/response pairs it has seen so
far) the protocol returns the next action, either an object invocation or a
decision.  The scheduler owns all interleaving, so exhaustive exploration
needs no threads.

Scheduling granularity is one shared-object operation.  A decision is a
purely local action that becomes enabled only by the process's own
preceding step, so the engine applies pending decisions eagerly as part of
that step (and when building the initial configuration).  Decisions still
count toward the per-process step bound.  Between consecutive
configurations exactly one object changes, by exactly one request.

Crashes are modeled by omission: a schedule that stops scheduling a process
leaves it undecided.  Scheduling a decided process, or naming an invalid
nondeterministic branch, is a schedule-validity error and is reported by
raising ``ScheduleError`` rather than silently repaired.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

from .objects import (
    ContractViolation,
    ObjectState,
    OpRequest,
    Value,
    WrnState,
    apply_request,
    value_to_json,
)

RUNNING = "running"
DECIDED = "decided"
# crashes exist only at the granularity of whole executions (a schedule
# stopped scheduling the process); see Execution.crashed
CRASHED = "crashed"

DEFAULT_NODE_BUDGET = 2_000_000


class ScheduleError(ValueError):
    """A schedule named a process or branch that is not enabled."""


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Invoke:
    request: OpRequest


@dataclass(frozen=True)
class Decide:
    value: Value


Action = Invoke | Decide
# A view is a read-only sequence of (OpRequest, Value) pairs.  The
# exploring engine passes tuples; the lean random runner passes its working
# list without copying, so step functions must never mutate or hash it.
View = tuple
StepFn = Callable[[int, Value, View], Action]


# ---------------------------------------------------------------------------
# Protocol description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolSpec:
    """Immutable description of an algorithm under test.

    ``step`` maps (pid, input, view) to the process's next action.  The
    step bound is the wait-freedom surrogate: a process that has not
    decided within ``step_bound`` of its own steps gets the run flagged.
    ``agreement_bound`` is the protocol's promised ceiling on distinct
    decision values when inputs are pairwise distinct (None = no promise).
    """

    name: str
    pids: tuple
    inputs: Mapping
    objects: Mapping
    step: StepFn
    step_bound: int
    agreement_bound: int | None = None
    k: int | None = None

    def __post_init__(self):
        if len(set(self.pids)) != len(self.pids):
            raise ContractViolation("duplicate process ids")
        missing = [p for p in self.pids if p not in self.inputs]
        if missing:
            raise ContractViolation(f"no input for pids {missing}")

    def input_of(self, pid) -> Value:
        return self.inputs[pid]


@dataclass(frozen=True)
class ProcessState:
    """Snapshot of one process: identity, input, history, status."""

    pid: int
    input: Value
    view: View = ()
    status: str = RUNNING
    decision: Value | None = None

    @property
    def own_steps(self) -> int:
        # every invocation appends one view entry; a decision is one more step
        return len(self.view) + (1 if self.status == DECIDED else 0)


@dataclass(frozen=True)
class Configuration:
    """Snapshot of all process states plus all object states."""

    processes: tuple  # ProcessState, ordered by the protocol's pid order
    objects: tuple  # (object id, ObjectState) sorted by id

    def process(self, pid) -> ProcessState:
        for proc in self.processes:
            if proc.pid == pid:
                return proc
        raise ScheduleError(f"unknown pid {pid!r}")

    def object_state(self, obj: str) -> ObjectState:
        for oid, state in self.objects:
            if oid == obj:
                return state
        raise ContractViolation(f"request names unknown object {obj!r}")

    def running_pids(self) -> tuple:
        return tuple(p.pid for p in self.processes if p.status == RUNNING)

    def all_decided(self) -> bool:
        return all(p.status == DECIDED for p in self.processes)

    def decisions(self) -> dict:
        return {
            p.pid: p.decision for p in self.processes if p.status == DECIDED
        }

    def _replace_process(self, proc: ProcessState) -> "Configuration":
        procs = tuple(
            proc if p.pid == proc.pid else p for p in self.processes
        )
        return Configuration(procs, self.objects)

    def _replace_object(self, obj: str, state: ObjectState) -> "Configuration":
        objs = tuple(
            (oid, state if oid == obj else old) for oid, old in self.objects
        )
        return Configuration(self.processes, objs)


@dataclass(frozen=True)
class StepEvent:
    """One applied object operation, with the branch that selected it."""

    pid: int
    request: OpRequest
    response: Value
    branch: int = 0

    def to_json(self) -> dict:
        return {
            "pid": self.pid,
            "obj": self.request.obj,
            "req": self.request.to_json(),
            "resp": value_to_json(self.response),
        }


@dataclass
class Execution:
    """An alternating sequence of configurations and steps, plus outcomes."""

    protocol: ProtocolSpec
    schedule: tuple
    configurations: tuple
    events: tuple
    decisions: dict
    violations: tuple = ()

    @property
    def final(self) -> Configuration:
        return self.configurations[-1]

    @property
    def crashed(self) -> tuple:
        """Processes the schedule abandoned before they decided."""
        return tuple(
            p.pid for p in self.final.processes if p.status != DECIDED
        )

    def status_of(self, pid) -> str:
        proc = self.final.process(pid)
        if proc.status == DECIDED:
            return DECIDED
        return CRASHED

    def distinct_decisions(self) -> int:
        return len(set(self.decisions.values()))


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


def normalize_schedule(schedule: Iterable) -> tuple:
    """Accept [pid, ...] or [(pid, branch), ...]; return (pid, branch) pairs."""
    out = []
    for entry in schedule:
        if isinstance(entry, (tuple, list)):
            pid, branch = entry
        else:
            pid, branch = entry, 0
        out.append((pid, int(branch)))
    return tuple(out)


def _settle(protocol: ProtocolSpec, config: Configuration, pids=None) -> Configuration:
    """Apply any enabled decide actions (local steps) for the given pids."""
    for pid in pids if pids is not None else [p.pid for p in config.processes]:
        proc = config.process(pid)
        if proc.status != RUNNING:
            continue
        action = protocol.step(pid, proc.input, proc.view)
        if isinstance(action, Decide):
            config = config._replace_process(
                replace(proc, status=DECIDED, decision=action.value)
            )
    return config


def initial_configuration(protocol: ProtocolSpec) -> Configuration:
    """Build the initial configuration, with instant decisions applied."""
    procs = tuple(
        ProcessState(pid=pid, input=protocol.input_of(pid))
        for pid in protocol.pids
    )
    objs = tuple(sorted(protocol.objects.items()))
    return _settle(protocol, Configuration(procs, objs))


def pending_action(protocol: ProtocolSpec, config: Configuration, pid) -> Invoke:
    """The next (invocation) action of a running process in a settled config."""
    proc = config.process(pid)
    if proc.status != RUNNING:
        raise ScheduleError(f"process {pid!r} is {proc.status}, not running")
    action = protocol.step(pid, proc.input, proc.view)
    if not isinstance(action, Invoke):
        raise ContractViolation(
            f"settled process {pid!r} produced a non-invoke action"
        )
    return action


def step(
    protocol: ProtocolSpec, config: Configuration, pid, branch: int = 0
) -> tuple[Configuration, StepEvent]:
    """Apply one atomic step of ``pid``, selecting nondeterministic outcome
    ``branch``, then apply the process's own decision if one follows."""
    action = pending_action(protocol, config, pid)
    request = action.request
    outcomes = apply_request(config.object_state(request.obj), request)
    if not 0 <= branch < len(outcomes):
        raise ScheduleError(
            f"branch {branch} invalid for {len(outcomes)} outcome(s) of "
            f"{request.kind} on {request.obj!r}"
        )
    new_state, response = outcomes[branch]
    proc = config.process(pid)
    new_proc = replace(proc, view=proc.view + ((request, response),))
    config = config._replace_process(new_proc)._replace_object(
        request.obj, new_state
    )
    config = _settle(protocol, config, pids=(pid,))
    return config, StepEvent(pid, request, response, branch)


def _waitfree_flags(protocol: ProtocolSpec, config: Configuration) -> list[str]:
    flags = []
    for proc in config.processes:
        over = proc.own_steps > protocol.step_bound
        stuck = proc.status == RUNNING and proc.own_steps >= protocol.step_bound
        if over or stuck:
            flags.append(
                f"wait-freedom: pid {proc.pid} did not decide within "
                f"{protocol.step_bound} own steps"
            )
    return flags


def run(protocol: ProtocolSpec, schedule: Iterable) -> Execution:
    """Run a schedule to completion; pure in (protocol, schedule)."""
    entries = normalize_schedule(schedule)
    config = initial_configuration(protocol)
    configurations = [config]
    events = []
    violations: list[str] = []
    for pid, branch in entries:
        config, event = step(protocol, config, pid, branch)
        configurations.append(config)
        events.append(event)
        for flag in _waitfree_flags(protocol, config):
            if flag not in violations:
                violations.append(flag)
    return Execution(
        protocol=protocol,
        schedule=entries,
        configurations=tuple(configurations),
        events=tuple(events),
        decisions=config.decisions(),
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# Exhaustive exploration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeafSummary:
    """One maximal execution: its decisions and a witness schedule."""

    decisions: tuple  # (pid, value) sorted by pid order
    schedule: tuple  # (pid, branch) witness reaching this leaf

    def decision_map(self) -> dict:
        return dict(self.decisions)

    def distinct_decisions(self) -> int:
        return len({v for _, v in self.decisions})


@dataclass
class ExplorationReport:
    """Result of exhausting the configuration graph (or hitting the budget)."""

    protocol_name: str
    executions: list
    nodes: int
    complete: bool
    violations: list

    def max_distinct_decisions(self) -> int:
        return max((s.distinct_decisions() for s in self.executions), default=0)


def explore_all(
    protocol: ProtocolSpec, node_budget: int = DEFAULT_NODE_BUDGET
) -> ExplorationReport:
    """Depth-first enumeration of every reachable configuration.

    Visited configurations are deduplicated (local views are part of the
    key, since decisions depend on them), so each maximal execution --
    a configuration with every process decided -- is reported exactly once,
    with the first schedule that reached it as a replayable witness.
    Exceeding the node budget yields a report flagged incomplete, never a
    silent truncation.
    """
    init = initial_configuration(protocol)
    visited = {init}
    stack = [(init, ())]
    leaves: list[LeafSummary] = []
    violations: list[str] = []
    nodes = 0
    complete = True
    while stack:
        config, path = stack.pop()
        nodes += 1
        if nodes > node_budget:
            complete = False
            violations.append(f"node budget {node_budget} exhausted")
            break
        flags = _waitfree_flags(protocol, config)
        if flags:
            for flag in flags:
                msg = f"{flag} (schedule {list(path)})"
                violations.append(msg)
            continue
        if config.all_decided():
            leaves.append(
                LeafSummary(
                    decisions=tuple(
                        (p.pid, p.decision)
                        for p in config.processes
                        if p.status == DECIDED
                    ),
                    schedule=path,
                )
            )
            continue
        for pid in config.running_pids():
            action = pending_action(protocol, config, pid)
            outcomes = apply_request(
                config.object_state(action.request.obj), action.request
            )
            for branch in range(len(outcomes)):
                child, _ = step(protocol, config, pid, branch)
                if child not in visited:
                    visited.add(child)
                    stack.append((child, path + ((pid, branch),)))
    return ExplorationReport(
        protocol_name=protocol.name,
        executions=leaves,
        nodes=nodes,
        complete=complete,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# Seeded random exploration
# ---------------------------------------------------------------------------


@dataclass
class RandomRunReport:
    """Aggregate over seeded random schedules."""

    protocol_name: str
    seed: int
    trials: int
    decision_profiles: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    max_distinct: int = 0


def run_random(
    protocol: ProtocolSpec,
    seed: int,
    trials: int,
    extra_checks: Callable[[dict], list[str]] | None = None,
) -> RandomRunReport:
    """Run ``trials`` uniformly random maximal schedules, reproducibly.

    Each step picks uniformly among running processes, then uniformly among
    that operation's nondeterministic outcomes.  The inner loop avoids
    configuration snapshots for speed; the recorded schedules replay
    identically through :func:`run` (the engines share the step functions
    and object semantics).
    """
    if trials < 1:
        raise ContractViolation(f"trials must be >= 1, got {trials}")
    rng = random.Random(seed)
    report = RandomRunReport(protocol.name, seed, trials)
    pid_order = list(protocol.pids)
    bound = protocol.step_bound
    step_fn = protocol.step
    inputs = protocol.inputs
    randrange = rng.randrange
    # protocol-generated WRN requests are in-contract by construction, so
    # cell arrays can be mutated in place instead of snapshotted
    wrn_cells = {
        oid: state.cells
        for oid, state in protocol.objects.items()
        if isinstance(state, WrnState)
    }
    for trial in range(trials):
        cells = {oid: list(init) for oid, init in wrn_cells.items()}
        others = {
            oid: state
            for oid, state in protocol.objects.items()
            if oid not in cells
        }
        views: dict = {pid: [] for pid in pid_order}
        decisions: dict = {}
        steps_taken: dict = {pid: 0 for pid in pid_order}
        schedule = []
        flags: list[str] = []
        running = list(pid_order)
        # settle instant decisions
        for pid in list(running):
            action = step_fn(pid, inputs[pid], ())
            if isinstance(action, Decide):
                decisions[pid] = action.value
                steps_taken[pid] += 1
                running.remove(pid)
        while running:
            pid = running[randrange(len(running))] if len(running) > 1 else running[0]
            view = views[pid]
            action = step_fn(pid, inputs[pid], view)
            request = action.request
            array = cells.get(request.obj)
            if array is not None:
                index = request.index
                branch = 0
                response = array[(index + 1) % len(array)]
                array[index] = request.value
            else:
                outcomes = apply_request(others[request.obj], request)
                branch = randrange(len(outcomes)) if len(outcomes) > 1 else 0
                new_state, response = outcomes[branch]
                others[request.obj] = new_state
            view.append((request, response))
            steps_taken[pid] += 1
            schedule.append((pid, branch))
            follow_up = step_fn(pid, inputs[pid], view)
            if isinstance(follow_up, Decide):
                decisions[pid] = follow_up.value
                steps_taken[pid] += 1
                running.remove(pid)
            elif steps_taken[pid] >= bound:
                flags.append(
                    f"wait-freedom: pid {pid} did not decide within {bound} own steps"
                )
                running.remove(pid)
        if extra_checks is not None:
            flags.extend(extra_checks(decisions))
        distinct = len(set(decisions.values()))
        report.max_distinct = max(report.max_distinct, distinct)
        profile = tuple(sorted((str(v) for v in decisions.values())))
        report.decision_profiles[profile] = (
            report.decision_profiles.get(profile, 0) + 1
        )
        if flags:
            report.violations.append(
                {"trial": trial, "schedule": schedule, "flags": flags}
            )
    return report
