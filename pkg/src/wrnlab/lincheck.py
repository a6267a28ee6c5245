"""Linearizability checking of recorded concurrent histories.

A history is a totally ordered log of invocation/response events produced
by real threads hammering a shared implementation.  The checker searches
for a sequential order of the operations that (a) respects real-time
precedence -- an operation that completed before another began must come
first -- and (b) replays correctly through the sequential object
semantics.  Uncompleted operations may be included (their responses are
unconstrained) or dropped.

The search is a depth-first walk over "which operation linearizes next",
memoized on (set of already-linearized operations, object state); that
pruning keeps 24-operation histories from a handful of threads tractable
because per-thread operations are totally ordered.  Accepted verdicts
carry a witness order whose replay reproduces every recorded response;
rejections carry the shortest event prefix that is already unexplainable.

Two harness implementations exist: ``reference-atomic`` applies the whole
operation under a mutex (one linearization point, histories always
accepted) and ``buggy-split`` performs the write and the read as two
separately interleavable accesses with a deliberate scheduling window
between them, a negative control that the checker must catch.
"""

from __future__ import annotations

import itertools
import random
import threading
import time
from dataclasses import dataclass

from .objects import (
    BOTTOM,
    ContractViolation,
    OpRequest,
    Value,
    WrnState,
    apply_request,
    value_to_json,
    wrn_apply,
    wrn_request,
)

IMPL_REFERENCE = "reference-atomic"
IMPL_BUGGY = "buggy-split"
IMPLEMENTATIONS = (IMPL_REFERENCE, IMPL_BUGGY)

DEFAULT_MAX_OPS = 24

PENDING = object()  # response marker for operations that never completed


# ---------------------------------------------------------------------------
# Histories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvEvent:
    op: int
    pid: int
    request: OpRequest

    def to_json(self) -> dict:
        return {
            "ev": "inv",
            "op": self.op,
            "pid": self.pid,
            "req": {"obj": self.request.obj, **self.request.to_json()},
        }


@dataclass(frozen=True)
class ResEvent:
    op: int
    pid: int
    value: Value

    def to_json(self) -> dict:
        return {"ev": "res", "op": self.op, "pid": self.pid,
                "val": value_to_json(self.value)}


Event = InvEvent | ResEvent
History = list


@dataclass
class Operation:
    op: int
    pid: int
    request: OpRequest
    response: Value  # PENDING when the response never arrived
    inv_pos: int
    res_pos: int | None

    @property
    def completed(self) -> bool:
        return self.response is not PENDING


def collect_operations(history: History) -> list[Operation]:
    """Pair invocations with responses; enforce per-process alternation."""
    ops: dict[int, Operation] = {}
    open_by_pid: dict[int, int] = {}
    for pos, event in enumerate(history):
        if isinstance(event, InvEvent):
            if event.op in ops:
                raise ContractViolation(f"duplicate invocation of op {event.op}")
            if event.pid in open_by_pid:
                raise ContractViolation(
                    f"pid {event.pid} invoked op {event.op} while op "
                    f"{open_by_pid[event.pid]} is still open"
                )
            ops[event.op] = Operation(
                event.op, event.pid, event.request, PENDING, pos, None
            )
            open_by_pid[event.pid] = event.op
        elif isinstance(event, ResEvent):
            record = ops.get(event.op)
            if record is None or record.completed:
                raise ContractViolation(f"response without open op {event.op}")
            if record.pid != event.pid:
                raise ContractViolation(f"response pid mismatch on op {event.op}")
            record.response = event.value
            record.res_pos = pos
            del open_by_pid[event.pid]
        else:
            raise ContractViolation(f"unknown event {event!r}")
    return sorted(ops.values(), key=lambda op: op.inv_pos)


# ---------------------------------------------------------------------------
# Sequential specification adapter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WrnSequentialSpec:
    """Single k-cell object as the sequential baseline for replay."""

    k: int

    @property
    def initial(self):
        return WrnState.fresh(self.k)

    def apply(self, state, request: OpRequest):
        outcomes = apply_request(state, request)
        if len(outcomes) != 1:
            raise ContractViolation("sequential replay needs determinism")
        return outcomes[0]


# ---------------------------------------------------------------------------
# Checker
# ---------------------------------------------------------------------------


@dataclass
class LinVerdict:
    accepted: bool
    witness: tuple | None = None  # op ids in linearization order
    violating_prefix: int | None = None  # event count of minimal bad prefix

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "witness": list(self.witness) if self.witness else None,
            "violating_prefix": self.violating_prefix,
        }


def check_linearizable(
    history: History, spec: WrnSequentialSpec, max_ops: int = DEFAULT_MAX_OPS
) -> LinVerdict:
    """Search precedence-respecting orders for one that replays correctly."""
    operations = collect_operations(history)
    if len(operations) > max_ops:
        raise ContractViolation(
            f"history has {len(operations)} ops, cap is {max_ops}"
        )
    witness = _search_order(operations, spec)
    if witness is not None:
        return LinVerdict(accepted=True, witness=witness)
    return LinVerdict(
        accepted=False,
        violating_prefix=_minimal_violating_prefix(history, spec),
    )


def _search_order(operations: list[Operation], spec) -> tuple | None:
    if not operations:
        return ()
    completed_ids = frozenset(op.op for op in operations if op.completed)
    # op X must wait for every op that completed before X was invoked
    blockers = {
        op.op: frozenset(
            other.op
            for other in operations
            if other.completed and other.res_pos < op.inv_pos
        )
        for op in operations
    }
    failed: set = set()

    def dfs(done: frozenset, state, order: tuple):
        if completed_ids <= done:
            return order
        key = (done, state)
        if key in failed:
            return None
        for op in operations:
            if op.op in done or not blockers[op.op] <= done:
                continue
            new_state, response = spec.apply(state, op.request)
            if op.completed and response != op.response:
                continue
            result = dfs(done | {op.op}, new_state, order + (op.op,))
            if result is not None:
                return result
        failed.add(key)
        return None

    return dfs(frozenset(), spec.initial, ())


def _minimal_violating_prefix(history: History, spec) -> int:
    for length in range(1, len(history) + 1):
        if _search_order(collect_operations(history[:length]), spec) is None:
            return length
    return len(history)


def brute_force_linearizable(
    history: History, spec, max_ops: int = 8
) -> bool:
    """Independent confirmation: enumerate every permutation of the
    completed operations plus every subset of the uncompleted ones, filter
    by real-time precedence, and replay.  Exponential; small histories only.
    """
    operations = collect_operations(history)
    if len(operations) > max_ops:
        raise ContractViolation(
            f"brute force capped at {max_ops} ops, got {len(operations)}"
        )
    completed = [op for op in operations if op.completed]
    pending = [op for op in operations if not op.completed]
    for take in range(len(pending) + 1):
        for included in itertools.combinations(pending, take):
            candidates = completed + list(included)
            for order in itertools.permutations(candidates):
                if _respects_precedence(order) and _replays(order, spec):
                    return True
    return False


def _respects_precedence(order) -> bool:
    for earlier_pos, earlier in enumerate(order):
        for later in order[earlier_pos + 1 :]:
            if (
                later.completed
                and later.res_pos is not None
                and earlier.inv_pos > later.res_pos
            ):
                return False
    return True


def _replays(order, spec) -> bool:
    state = spec.initial
    for op in order:
        state, response = spec.apply(state, op.request)
        if op.completed and response != op.response:
            return False
    return True


def replay_witness(history: History, witness, spec) -> bool:
    """Certify an accepted verdict: the witness order must reproduce every
    recorded response through the sequential semantics."""
    by_id = {op.op: op for op in collect_operations(history)}
    state = spec.initial
    for op_id in witness:
        op = by_id[op_id]
        state, response = spec.apply(state, op.request)
        if op.completed and response != op.response:
            return False
    completed = {op.op for op in by_id.values() if op.completed}
    return completed <= set(witness)


# ---------------------------------------------------------------------------
# Threaded stress harness
# ---------------------------------------------------------------------------


class _EventLog:
    """Append-only totally ordered log shared by all worker threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._events: list = []
        self._next_op = 0

    def invoke(self, pid: int, request: OpRequest) -> int:
        with self._lock:
            op = self._next_op
            self._next_op += 1
            self._events.append(InvEvent(op, pid, request))
            return op

    def respond(self, op: int, pid: int, value: Value) -> None:
        with self._lock:
            self._events.append(ResEvent(op, pid, value))

    def events(self) -> History:
        with self._lock:
            return list(self._events)


class ReferenceAtomicWrn:
    """Write+read under one mutex: a single linearization point."""

    def __init__(self, k: int):
        self._lock = threading.Lock()
        self._state = WrnState.fresh(k)
        self.k = k

    def wrn(self, index: int, value: Value) -> Value:
        with self._lock:
            self._state, response = wrn_apply(self._state, index, value)
            return response


class BuggySplitWrn:
    """Write and read as two separately interleavable accesses.

    The pause between them widens the race window so the non-linearizable
    interleavings actually occur at desk scale.
    """

    def __init__(self, k: int, pause: float = 0.0005):
        self._cells = [BOTTOM] * k
        self._pause = pause
        self.k = k

    def wrn(self, index: int, value: Value) -> Value:
        self._cells[index] = value
        time.sleep(self._pause)
        return self._cells[(index + 1) % self.k]


def make_implementation(name: str, k: int):
    if name == IMPL_REFERENCE:
        return ReferenceAtomicWrn(k)
    if name == IMPL_BUGGY:
        return BuggySplitWrn(k)
    raise ContractViolation(f"unknown implementation {name!r}")


def stress_harness(
    implementation: str,
    k: int,
    threads: int,
    ops_per_thread: int,
    seed: int,
) -> History:
    """Run real threads issuing seeded random WRN requests and record the
    interleaved history.  Request sequences are reproducible from the seed;
    the interleaving itself is whatever the OS scheduler produced."""
    if threads < 1:
        raise ContractViolation("need at least one thread")
    impl = make_implementation(implementation, k)
    log = _EventLog()
    master = random.Random(seed)
    plans = [
        [
            (master.randrange(k), f"p{pid}#{n}")
            for n in range(ops_per_thread)
        ]
        for pid in range(threads)
    ]
    barrier = threading.Barrier(threads)

    def worker(pid: int):
        barrier.wait()
        for index, value in plans[pid]:
            op = log.invoke(pid, wrn_request("O", index, value))
            response = impl.wrn(index, value)
            log.respond(op, pid, response)

    workers = [
        threading.Thread(target=worker, args=(pid,), name=f"harness-{pid}")
        for pid in range(threads)
    ]
    for thread in workers:
        thread.start()
    for thread in workers:
        thread.join()
    return log.events()


def history_to_json_lines(history: History) -> list[dict]:
    return [event.to_json() for event in history]
