"""Protocols built from write-and-read-next objects.

Four constructions, all expressed as :class:`~wrnlab.simulator.ProtocolSpec`
step machines:

* ``alg2_protocol``: k processes with ids 0..k-1 share one k-cell object;
  process i performs one WRN(i, v_i) and decides the response if it is
  non-bottom, otherwise its own input.  With pairwise distinct inputs at
  most k-1 values get decided.
* ``alg4_protocol``: the k = 2 instance solves two-process consensus; the
  first process to reach the object wins and both decide its input.
* ``alg3_protocol``: up to k participants whose names are drawn from
  {0..2k-2} iterate over an ordered family of index maps, one k-cell
  object per map, deciding on the first non-bottom response, or their own
  input after exhausting the family.
* ``group_combinator``: n processes split by ascending pid into groups of
  at most k; each group runs the one-shot protocol on its own object.
  At most (k-1) * ceil(n/k) distinct values get decided overall.

Renaming for the iterated protocol is a pluggable injective map into
{0..2k-2}; the default is pass-through and requires names already in range.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from math import comb
from typing import Callable, Mapping, Sequence

from .objects import (
    BOTTOM,
    ContractViolation,
    Value,
    WrnState,
    ensure_value,
    wrn_request,
)
from .simulator import Decide, Invoke, ProtocolSpec

FAMILY_COVERING = "covering"
FAMILY_FULL = "full"


# ---------------------------------------------------------------------------
# One-shot protocols
# ---------------------------------------------------------------------------


def _one_shot_step(slot_of: Mapping, inputs: Mapping):
    """Step machine for protocols that perform one WRN and decide.

    ``slot_of`` fixes each pid's (object, index); the request objects are
    built once up front.
    """
    first = {
        pid: Invoke(wrn_request(obj, index, inputs[pid]))
        for pid, (obj, index) in slot_of.items()
    }

    def step_fn(pid, value, view):
        if not view:
            return first[pid]
        _, response = view[0]
        return Decide(value if response is BOTTOM else response)

    return step_fn


def alg2_protocol(k: int, inputs: Sequence[Value]) -> ProtocolSpec:
    """k processes, one k-cell object, one WRN each; (k-1)-set consensus."""
    if k < 2:
        raise ContractViolation(f"single-shot protocol needs k >= 2, got {k}")
    if len(inputs) != k:
        raise ContractViolation(f"expected {k} inputs, got {len(inputs)}")
    pids = tuple(range(k))
    input_map = dict(zip(pids, (ensure_value(v) for v in inputs)))
    return ProtocolSpec(
        name="alg2",
        pids=pids,
        inputs=input_map,
        objects={"O": WrnState.fresh(k)},
        step=_one_shot_step({i: ("O", i) for i in pids}, input_map),
        step_bound=2,
        agreement_bound=k - 1,
        k=k,
    )


def alg4_protocol(x: Value, y: Value) -> ProtocolSpec:
    """Two-process consensus from a 2-cell object; the first mover wins."""
    spec = alg2_protocol(2, (x, y))
    return ProtocolSpec(
        name="alg4",
        pids=spec.pids,
        inputs=spec.inputs,
        objects=spec.objects,
        step=spec.step,
        step_bound=2,
        agreement_bound=1,
        k=2,
    )


# ---------------------------------------------------------------------------
# Index-map families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionFamily:
    """Ordered list of total maps {0..2k-2} -> {0..k-1}.

    ``covering`` mode holds one map per k-subset of the name range, built so
    that the subset's members land bijectively on {0..k-1} (everything else
    maps to 0).  ``full`` mode enumerates all k**(2k-1) maps in lexicographic
    order of their value vectors; it trivially contains the covering maps.
    """

    k: int
    mode: str
    maps: tuple  # each map is a tuple of length 2k-1

    def __len__(self) -> int:
        return len(self.maps)

    @property
    def name_range(self) -> int:
        return 2 * self.k - 1

    def apply(self, index: int, name: int) -> int:
        return self.maps[index][name]


def build_family(k: int, mode: str = FAMILY_COVERING) -> FunctionFamily:
    if k < 3:
        raise ContractViolation(f"family needs k >= 3, got {k}")
    names = 2 * k - 1
    if mode == FAMILY_COVERING:
        maps = []
        for subset in combinations(range(names), k):
            rank = {name: position for position, name in enumerate(subset)}
            maps.append(tuple(rank.get(j, 0) for j in range(names)))
        assert len(maps) == comb(names, k)
        return FunctionFamily(k, mode, tuple(maps))
    if mode == FAMILY_FULL:
        maps = tuple(product(range(k), repeat=names))
        return FunctionFamily(k, mode, maps)
    raise ContractViolation(f"unknown family mode {mode!r}")


def covering_counterexamples(family: FunctionFamily) -> list:
    """Enumerate every k-subset of the name range and report those that no
    family member maps bijectively onto {0..k-1}."""
    bad = []
    full_image = frozenset(range(family.k))
    for subset in combinations(range(family.name_range), family.k):
        if not any(
            frozenset(m[j] for j in subset) == full_image for m in family.maps
        ):
            bad.append(subset)
    return bad


# ---------------------------------------------------------------------------
# Iterated protocol for sparsely named participants
# ---------------------------------------------------------------------------

Renamer = Callable[[int], int]


def alg3_protocol(
    k: int,
    family: FunctionFamily,
    participants: Mapping,
    rename: Renamer | None = None,
) -> ProtocolSpec:
    """Iterated set consensus for at most k participants named in {0..2k-2}.

    ``participants`` maps external process names to inputs.  ``rename``
    converts external names to internal ones; the default pass-through
    requires names already inside {0..2k-2}.  At iteration l (in family
    order, identical for everyone) a participant with internal name j
    invokes WRN(f_l(j), v) on the l-th object and decides the first
    non-bottom response; a participant that sees bottom everywhere decides
    its own input.
    """
    if family.k != k:
        raise ContractViolation("family arity does not match k")
    if len(participants) > k:
        raise ContractViolation(
            f"at most {k} participants allowed, got {len(participants)}"
        )
    if not participants:
        raise ContractViolation("at least one participant required")
    renamer = rename if rename is not None else (lambda name: name)
    internal = {}
    for name in participants:
        j = renamer(name)
        if not 0 <= j < family.name_range:
            raise ContractViolation(
                f"internal name {j} outside 0..{family.name_range - 1}"
            )
        internal[name] = j
    if len(set(internal.values())) != len(internal):
        raise ContractViolation(f"rename collision: {internal}")

    total = len(family)
    obj_ids = [_obj_id(position, total) for position in range(total)]
    objects = {oid: WrnState.fresh(k) for oid in obj_ids}
    # the whole invocation plan is fixed per participant; build it once
    plans = {}
    for name, j in internal.items():
        value = ensure_value(participants[name])
        plans[name] = tuple(
            Invoke(wrn_request(obj_ids[pos], family.apply(pos, j), value))
            for pos in range(total)
        )

    def step_fn(pid, value, view):
        if view:
            response = view[-1][1]
            if response is not BOTTOM:
                return Decide(response)
        done = len(view)
        if done == total:
            return Decide(value)
        return plans[pid][done]

    pids = tuple(sorted(participants))
    return ProtocolSpec(
        name="alg3",
        pids=pids,
        inputs=dict(participants),
        objects=objects,
        step=step_fn,
        step_bound=total + 2,
        agreement_bound=k - 1,
        k=k,
    )


def _obj_id(position: int, total: int) -> str:
    return f"O{position + 1:0{len(str(total))}d}"


# ---------------------------------------------------------------------------
# Grouping combinator
# ---------------------------------------------------------------------------


def group_combinator(k: int, inputs: Sequence[Value]) -> ProtocolSpec:
    """Partition n processes into ceil(n/k) groups of at most k by ascending
    pid; each group runs the single-shot protocol on a private k-cell
    object.  Distinct decisions stay within sum over groups of
    min(group size, k-1)."""
    if k < 2:
        raise ContractViolation(f"grouping needs k >= 2, got {k}")
    n = len(inputs)
    if n < 1:
        raise ContractViolation("at least one process required")
    pids = tuple(range(n))
    groups = [pids[g : g + k] for g in range(0, n, k)]
    objects = {f"G{g}": WrnState.fresh(k) for g in range(len(groups))}
    bound = sum(min(len(group), k - 1) for group in groups)
    input_map = dict(zip(pids, (ensure_value(v) for v in inputs)))
    return ProtocolSpec(
        name="grouped",
        pids=pids,
        inputs=input_map,
        objects=objects,
        step=_one_shot_step(
            {pid: (f"G{pid // k}", pid % k) for pid in pids}, input_map
        ),
        step_bound=2,
        agreement_bound=bound,
        k=k,
    )


# ---------------------------------------------------------------------------
# Protocol-level property checks
# ---------------------------------------------------------------------------


def decision_violations(protocol: ProtocolSpec, decisions: Mapping) -> list[str]:
    """Check validity and, for pairwise distinct inputs, the distinct-
    decision ceiling.  Returns human-readable violation strings."""
    violations = []
    legal = set(protocol.inputs.values())
    for pid, value in decisions.items():
        if value not in legal:
            violations.append(
                f"validity: pid {pid} decided {value!r}, not any input"
            )
    inputs_distinct = len(legal) == len(protocol.inputs)
    if inputs_distinct and protocol.agreement_bound is not None:
        distinct = len(set(decisions.values()))
        if distinct > protocol.agreement_bound:
            violations.append(
                f"agreement: {distinct} distinct decisions exceed bound "
                f"{protocol.agreement_bound}"
            )
    return violations


def default_inputs(n: int) -> tuple:
    return tuple(f"v{i}" for i in range(n))
