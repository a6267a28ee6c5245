"""Mechanized impossibility evidence for two-process consensus.

Three instruments:

* **Valence classification.**  The reachable configuration graph of a
  two-process binary protocol is labeled by backward induction: a leaf
  carries the values actually decided there, an inner node the union over
  its children.  A configuration is bivalent when both binary values remain
  reachable, univalent when only one does, and critical when it is bivalent
  yet every one-step successor is univalent.

* **Object-level case checks.**  Two algebraic facts about k-cell
  write-and-read-next objects drive the impossibility argument.  When two
  operations hit the *same* index, the second write absorbs the first: the
  final object state and the second writer's response are exactly as if the
  first write never happened.  When they hit *different* indices the final
  state is order-independent, and a writer's response is order-independent
  precisely when the other index is not its read cell, i.e. when
  ``i_other != (i_mine + 1) mod k`` (given pre-state cells disjoint from the
  written values).  For k >= 3 at least one of the two writers always
  satisfies that condition; for k = 2 with indices 0 and 1 neither does,
  which is exactly why a 2-cell object can solve two-process consensus.

* **Bounded solvability search.**  For a fixed arity, depth and object
  count, every pattern -- a per-process sequence of (object, index)
  invocations -- is tested for whether ANY decision rule turns it into
  binary consensus.  Written values carry (input, step) tags so views are
  maximally informative.  All interleavings over all four input
  assignments, including every crash prefix where at least one process
  finishes, induce equality constraints (co-deciders must agree) and value
  domains (validity); union-find plus domain intersection then decides
  solvability and recovers a witness decision map when one exists.
  Patterns range over the k-cell objects only: register operations would
  add read-only noise without write interference, a deliberate narrowing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterable, Sequence

from .objects import (
    BOTTOM,
    ContractViolation,
    Value,
    WrnState,
    apply_request,
    value_to_json,
    wrn_apply,
    wrn_request,
)
from .simulator import (
    Configuration,
    Decide,
    Invoke,
    ProtocolSpec,
    explore_all,
    initial_configuration,
    pending_action,
    step,
)

ZERO_VALENT = "zero-valent"
ONE_VALENT = "one-valent"
BIVALENT = "bivalent"
UNREACHABLE = "undecided-unreachable"


# ---------------------------------------------------------------------------
# Valence classification
# ---------------------------------------------------------------------------


@dataclass
class ValenceAnalysis:
    """Reachable-configuration graph of a two-process protocol, labeled."""

    protocol: ProtocolSpec
    initial: Configuration
    nodes: list  # configurations in discovery order
    edges: dict  # config -> list of (pid, branch, child config)
    reachable: dict  # config -> frozenset of decided values
    complete: bool

    def valence(self, config: Configuration) -> str:
        return _tag(self.reachable[config])

    def valences(self) -> dict:
        return {config: self.valence(config) for config in self.nodes}

    def initial_valence(self) -> str:
        return self.valence(self.initial)

    def bivalent_configs(self) -> list:
        return [c for c in self.nodes if self.valence(c) == BIVALENT]


def _tag(values: frozenset) -> str:
    if values == frozenset({0}):
        return ZERO_VALENT
    if values == frozenset({1}):
        return ONE_VALENT
    if len(values) >= 2:
        return BIVALENT
    return UNREACHABLE


def classify_valences(
    protocol: ProtocolSpec, node_budget: int = 1_000_000
) -> ValenceAnalysis:
    """Label every reachable configuration of a 2-process binary protocol."""
    if len(protocol.pids) != 2:
        raise ContractViolation("valence analysis needs exactly 2 processes")
    if not set(protocol.inputs.values()) <= {0, 1}:
        raise ContractViolation("valence analysis needs binary inputs")
    initial = initial_configuration(protocol)
    nodes = [initial]
    edges: dict = {}
    seen = {initial}
    complete = True
    frontier = [initial]
    while frontier:
        config = frontier.pop()
        if len(nodes) > node_budget:
            complete = False
            break
        children = []
        for pid in config.running_pids():
            action = pending_action(protocol, config, pid)
            outcomes = apply_request(
                config.object_state(action.request.obj), action.request
            )
            for branch in range(len(outcomes)):
                child, _ = step(protocol, config, pid, branch)
                children.append((pid, branch, child))
                if child not in seen:
                    seen.add(child)
                    nodes.append(child)
                    frontier.append(child)
        edges[config] = children
    # backward induction over the acyclic graph, iterative to spare the stack
    reachable: dict = {}
    order: list = []
    state = {initial: 0}
    stack = [initial]
    while stack:
        config = stack.pop()
        if state.get(config) == 2:
            continue
        if state.get(config) == 1:
            state[config] = 2
            order.append(config)
            continue
        state[config] = 1
        stack.append(config)
        for _, _, child in edges.get(config, ()):
            if state.get(child, 0) == 0:
                stack.append(child)
    for config in order:
        children = edges.get(config, ())
        if not children:
            reachable[config] = frozenset(config.decisions().values())
        else:
            values: set = set()
            for _, _, child in children:
                values |= reachable[child]
            reachable[config] = frozenset(values)
    return ValenceAnalysis(
        protocol=protocol,
        initial=initial,
        nodes=nodes,
        edges=edges,
        reachable=reachable,
        complete=complete,
    )


def find_critical(analysis: ValenceAnalysis) -> list:
    """Bivalent configurations all of whose successors are univalent."""
    critical = []
    for config in analysis.nodes:
        if analysis.valence(config) != BIVALENT:
            continue
        children = analysis.edges.get(config, ())
        if children and all(
            analysis.valence(child) in (ZERO_VALENT, ONE_VALENT)
            for _, _, child in children
        ):
            critical.append(config)
    return critical


# ---------------------------------------------------------------------------
# Object-level case checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AbsorptionReport:
    """Same-index case: second write must erase all trace of the first."""

    k: int
    index: int
    state_match: bool
    response_match: bool

    @property
    def ok(self) -> bool:
        return self.state_match and self.response_match


def check_absorption(
    k: int, cells: Sequence[Value], index: int, v_p: Value, v_q: Value
) -> AbsorptionReport:
    """Compare a solo (index, v_p) against (index, v_q) then (index, v_p)."""
    start = WrnState(k, tuple(cells))
    solo_state, solo_resp = wrn_apply(start, index, v_p)
    mid, _ = wrn_apply(start, index, v_q)
    both_state, both_resp = wrn_apply(mid, index, v_p)
    return AbsorptionReport(
        k=k,
        index=index,
        state_match=solo_state == both_state,
        response_match=solo_resp == both_resp,
    )


@dataclass(frozen=True)
class CommutationReport:
    """Distinct-index case: state always commutes; a writer's response is
    order-independent exactly when the other write misses its read cell."""

    k: int
    i_p: int
    i_q: int
    state_match: bool
    p_response_match: bool
    q_response_match: bool

    def p_match_expected(self) -> bool:
        return self.i_q != (self.i_p + 1) % self.k

    def q_match_expected(self) -> bool:
        return self.i_p != (self.i_q + 1) % self.k

    @property
    def ok(self) -> bool:
        return (
            self.state_match
            and self.p_response_match == self.p_match_expected()
            and self.q_response_match == self.q_match_expected()
        )


def check_commutation(
    k: int,
    cells: Sequence[Value],
    i_p: int,
    v_p: Value,
    i_q: int,
    v_q: Value,
) -> CommutationReport:
    """Compare both orders of (i_p, v_p) and (i_q, v_q) from one pre-state.

    The expected response pattern assumes the freshness guard: pre-state
    cells disjoint from {v_p, v_q}, so an overwritten read cell is always
    distinguishable.
    """
    if i_p == i_q:
        raise ContractViolation("commutation check needs distinct indices")
    start = WrnState(k, tuple(cells))
    s1, p_first = wrn_apply(start, i_p, v_p)
    s1, q_second = wrn_apply(s1, i_q, v_q)
    s2, q_first = wrn_apply(start, i_q, v_q)
    s2, p_second = wrn_apply(s2, i_p, v_p)
    return CommutationReport(
        k=k,
        i_p=i_p,
        i_q=i_q,
        state_match=s1 == s2,
        p_response_match=p_first == p_second,
        q_response_match=q_first == q_second,
    )


@dataclass
class CaseCheckReport:
    """Exhaustive sweep of both case checks over a range of arities."""

    k_values: tuple
    absorption_checked: int = 0
    commutation_checked: int = 0
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def sweep_case_checks(
    k_values: Iterable[int] = range(3, 9),
    cell_alphabet: Sequence[Value] = (BOTTOM, "s0"),
    write_values: Sequence[Value] = ("p", "q"),
) -> CaseCheckReport:
    """Run both case checks for every arity, index pair, pre-state over the
    cell alphabet, and ordered pair of written values.

    The cell alphabet must be disjoint from the written values (the
    freshness guard); bottom should be included to cover unwritten cells.
    """
    overlap = set(cell_alphabet) & set(write_values)
    if overlap:
        raise ContractViolation(f"alphabet overlaps written values: {overlap}")
    report = CaseCheckReport(k_values=tuple(k_values))
    for k in report.k_values:
        for cells in product(cell_alphabet, repeat=k):
            for v_p, v_q in product(write_values, repeat=2):
                for i in range(k):
                    absorption = check_absorption(k, cells, i, v_p, v_q)
                    report.absorption_checked += 1
                    if not absorption.ok:
                        report.counterexamples.append(("absorption", absorption))
                for i_p, i_q in product(range(k), repeat=2):
                    if i_p == i_q:
                        continue
                    commutation = check_commutation(k, cells, i_p, v_p, i_q, v_q)
                    report.commutation_checked += 1
                    if not commutation.ok:
                        report.counterexamples.append(("commutation", commutation))
    return report


# ---------------------------------------------------------------------------
# Bounded solvability search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatternSpec:
    """A fixed invocation plan: per process, a sequence of (object, index)."""

    k: int
    steps_p: tuple  # ((object id, index), ...) for process 0
    steps_q: tuple  # ((object id, index), ...) for process 1

    def to_json(self) -> list:
        return [
            [[obj, index] for obj, index in self.steps_p],
            [[obj, index] for obj, index in self.steps_q],
        ]


@dataclass
class PatternVerdict:
    pattern: PatternSpec
    solvable: bool
    decision_map: dict | None  # view -> decided value, when solvable
    executions: int

    @property
    def verdict(self) -> str:
        return "SOLVABLE" if self.solvable else "UNSOLVABLE"

    def to_json(self) -> dict:
        doc = {
            "pattern": self.pattern.to_json(),
            "verdict": self.verdict,
            "decision_map": None,
            "executions": self.executions,
        }
        if self.decision_map is not None:
            doc["decision_map"] = {
                _view_label(view): value_to_json(value)
                for view, value in sorted(
                    self.decision_map.items(), key=lambda kv: _view_label(kv[0])
                )
            }
        return doc


def _view_label(view: tuple) -> str:
    pid, inp, responses = view
    rendered = ",".join(
        "_" if r is BOTTOM else f"{r[0]}@{r[1]}" for r in responses
    )
    return f"P{pid}|in={inp}|[{rendered}]"


@dataclass
class SearchReport:
    k: int
    depth: int
    objects: int
    verdicts: list
    complete: bool = True

    def solvable(self) -> list:
        return [v for v in self.verdicts if v.solvable]

    def unsolvable(self) -> list:
        return [v for v in self.verdicts if not v.solvable]


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


class ViewConstraintGraph:
    """Decision constraints over final views.

    Nodes are distinct final views (pid, input, responses).  Each node
    carries a domain: the intersection over containing executions of that
    execution's input set.  Views that co-decide in some execution are
    merged, since agreement forces them to equal decisions.  A consistent
    decision map exists exactly when every merged class keeps a nonempty
    domain.
    """

    def __init__(self):
        self._uf = _UnionFind()
        self.domains: dict = {}

    def observe(self, view, input_set: set) -> None:
        self._uf.add(view)
        if view in self.domains:
            self.domains[view] &= input_set
        else:
            self.domains[view] = set(input_set)

    def merge(self, view_a, view_b) -> None:
        self._uf.union(view_a, view_b)

    def class_domains(self) -> dict:
        out: dict = {}
        for view, domain in self.domains.items():
            root = self._uf.find(view)
            if root in out:
                out[root] &= domain
            else:
                out[root] = set(domain)
        return out

    def solvable(self) -> bool:
        return all(self.class_domains().values())

    def decision_map(self) -> dict | None:
        class_domains = self.class_domains()
        if not all(class_domains.values()):
            return None
        return {
            view: min(class_domains[self._uf.find(view)])
            for view in self.domains
        }


def enumerate_patterns(
    k: int, depth: int, n_objects: int = 1
) -> list[PatternSpec]:
    """All patterns with per-process plan lengths from 1 up to ``depth``."""
    if depth < 1:
        raise ContractViolation(f"depth must be >= 1, got {depth}")
    if n_objects < 1:
        raise ContractViolation("need at least one object")
    objects = [f"O{i + 1}" for i in range(n_objects)]
    slots = [(obj, index) for obj in objects for index in range(k)]
    plans = []
    for length in range(1, depth + 1):
        plans.extend(product(slots, repeat=length))
    return [
        PatternSpec(k, tuple(plan_p), tuple(plan_q))
        for plan_p in plans
        for plan_q in plans
    ]


def _pattern_executions(pattern: PatternSpec):
    """Yield (assignment, completed final views) over every interleaving of
    every stopping profile in which at least one process finishes.

    Written values are (input, step) tags; a process's final view is
    (pid, input, response tuple).
    """
    len_p, len_q = len(pattern.steps_p), len(pattern.steps_q)
    steps = (pattern.steps_p, pattern.steps_q)
    for x_p, x_q in product((0, 1), repeat=2):
        inputs = (x_p, x_q)
        for s_p in range(len_p + 1):
            for s_q in range(len_q + 1):
                if s_p != len_p and s_q != len_q:
                    continue
                counts = (s_p, s_q)
                for order in _interleavings(s_p, s_q):
                    responses: tuple[list, list] = ([], [])
                    cells: dict = {}
                    position = [0, 0]
                    for who in order:
                        obj, index = steps[who][position[who]]
                        tag = (inputs[who], position[who] + 1)
                        read = (obj, (index + 1) % pattern.k)
                        responses[who].append(cells.get(read, BOTTOM))
                        cells[(obj, index)] = tag
                        position[who] += 1
                    finished = [
                        (who, (who, inputs[who], tuple(responses[who])))
                        for who in (0, 1)
                        if counts[who] == len(steps[who])
                    ]
                    yield inputs, [view for _, view in finished]


def _interleavings(n_p: int, n_q: int):
    """All merge orders of n_p zeros and n_q ones."""
    if n_p == 0:
        yield (1,) * n_q
        return
    if n_q == 0:
        yield (0,) * n_p
        return
    total = n_p + n_q
    for positions in combinations(range(total), n_p):
        order = [1] * total
        for pos in positions:
            order[pos] = 0
        yield tuple(order)


def solve_pattern(pattern: PatternSpec) -> PatternVerdict:
    """Decide whether any decision rule turns the pattern into consensus.

    Every execution contributes validity domains for its completed views,
    and an agreement merge when both processes complete; the pattern is
    solvable exactly when the resulting constraint graph stays consistent.
    """
    graph = ViewConstraintGraph()
    executions = 0
    for inputs, finished_views in _pattern_executions(pattern):
        executions += 1
        input_set = set(inputs)
        for view in finished_views:
            graph.observe(view, input_set)
        if len(finished_views) == 2:
            graph.merge(finished_views[0], finished_views[1])
    decision_map = graph.decision_map()
    if decision_map is None:
        return PatternVerdict(pattern, False, None, executions)
    return PatternVerdict(pattern, True, decision_map, executions)


def solvability_search(
    k: int,
    depth: int,
    n_objects: int = 1,
    pattern_budget: int = 1_000_000,
) -> SearchReport:
    """Test every pattern of the bounded family; flag truncation loudly."""
    if k < 2:
        raise ContractViolation(f"arity must be >= 2, got {k}")
    patterns = enumerate_patterns(k, depth, n_objects)
    report = SearchReport(k=k, depth=depth, objects=n_objects, verdicts=[])
    for count, pattern in enumerate(patterns):
        if count >= pattern_budget:
            report.complete = False
            break
        report.verdicts.append(solve_pattern(pattern))
    return report


# ---------------------------------------------------------------------------
# Replaying a recovered decision map
# ---------------------------------------------------------------------------


def pattern_protocol(
    pattern: PatternSpec, decision_map: dict, inputs: tuple
) -> ProtocolSpec:
    """Wrap a pattern plus decision map as a runnable two-process protocol."""
    steps = {0: pattern.steps_p, 1: pattern.steps_q}
    used = sorted({obj for plan in steps.values() for obj, _ in plan})
    objects = {obj: WrnState.fresh(pattern.k) for obj in used}

    def step_fn(pid, value, view):
        done = len(view)
        plan = steps[pid]
        if done < len(plan):
            obj, index = plan[done]
            return Invoke(wrn_request(obj, index, (value, done + 1)))
        final_view = (pid, value, tuple(resp for _, resp in view))
        if final_view not in decision_map:
            raise ContractViolation(f"decision map lacks view {final_view}")
        return Decide(decision_map[final_view])

    return ProtocolSpec(
        name="pattern",
        pids=(0, 1),
        inputs={0: inputs[0], 1: inputs[1]},
        objects=objects,
        step=step_fn,
        step_bound=max(len(p) for p in steps.values()) + 1,
        agreement_bound=1,
        k=pattern.k,
    )


def replay_matches_consensus(pattern: PatternSpec, decision_map: dict) -> bool:
    """Check a recovered map yields agreement + validity on every execution
    for every binary input assignment."""
    for assignment in product((0, 1), repeat=2):
        protocol = pattern_protocol(pattern, decision_map, assignment)
        report = explore_all(protocol)
        if not report.complete or report.violations:
            return False
        for leaf in report.executions:
            values = {v for _, v in leaf.decisions}
            if len(values) != 1 or not values <= set(assignment):
                return False
    return True
