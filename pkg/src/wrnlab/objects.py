"""Sequential (linearization-point) semantics of the shared objects.

Three object kinds live here:

* ``WrnState`` -- a k-cell write-and-read-next object.  Its single
  operation ``WRN(i, v)`` stores ``v`` in cell ``i`` and returns the value
  most recently stored in cell ``(i + 1) mod k``, or bottom if that cell
  was never written.  For ``k == 1`` this degenerates to a swap: the
  operation returns the previously stored value, not the one just written.
* ``RegisterState`` -- a plain read/write register.
* ``SetConsensusState`` -- a nondeterministic (n, k)-set-consensus object
  whose ``propose`` returns *all* legal outcomes, so a scheduler can branch
  over them.

All states are immutable; operations return fresh snapshots.  That makes
them safe to share between explorations without copying and lets
configurations be used directly as hash keys.

Bottom is the reserved "no value" token ``BOTTOM``.  It is never a legal
operation input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union


class ContractViolation(ValueError):
    """An operation was invoked outside its precondition."""


class _BottomType:
    """Singleton reserved token; compares equal only to itself."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "⊥"

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self


BOTTOM = _BottomType()

# Anything hashable and comparable may serve as a value; BOTTOM is reserved.
Value = Any
ObjectState = Union["WrnState", "RegisterState", "SetConsensusState"]

KIND_WRN = "WRN"
KIND_READ = "READ"
KIND_WRITE = "WRITE"
KIND_PROPOSE = "PROPOSE"


def is_bottom(v: Value) -> bool:
    return v is BOTTOM


def ensure_value(v: Value) -> Value:
    """Reject bottom (and None, which is reserved for its wire encoding)."""
    if v is BOTTOM or v is None:
        raise ContractViolation("bottom is not a legal operation input")
    return v


def value_key(v: Value):
    """Deterministic total order over mixed-type values, for stable output."""
    return (v.__class__.__name__, repr(v))


# ---------------------------------------------------------------------------
# Object states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WrnState:
    """State of a k-cell write-and-read-next object."""

    k: int
    cells: tuple

    def __post_init__(self):
        if self.k < 1:
            raise ContractViolation(f"arity must be >= 1, got {self.k}")
        if len(self.cells) != self.k:
            raise ContractViolation(
                f"expected {self.k} cells, got {len(self.cells)}"
            )

    @classmethod
    def fresh(cls, k: int) -> "WrnState":
        return cls(k, (BOTTOM,) * k)


@dataclass(frozen=True)
class RegisterState:
    """State of a single read/write register."""

    cell: Value = BOTTOM

    @classmethod
    def fresh(cls) -> "RegisterState":
        return cls(BOTTOM)


@dataclass(frozen=True)
class SetConsensusState:
    """State of a nondeterministic (n, k)-set-consensus object.

    ``chosen`` holds at most k proposed values; ``count`` is the number of
    proposals applied so far, saturating at n.
    """

    n: int
    k: int
    chosen: frozenset = frozenset()
    count: int = 0

    def __post_init__(self):
        if not 0 < self.k < self.n:
            raise ContractViolation(f"need 0 < k < n, got k={self.k} n={self.n}")
        if len(self.chosen) > self.k:
            raise ContractViolation("chosen set exceeds k")
        if bool(self.chosen) != (self.count > 0):
            raise ContractViolation("chosen must be empty exactly when count is 0")
        if self.count > self.n:
            raise ContractViolation("count exceeds n")

    @classmethod
    def fresh(cls, n: int, k: int) -> "SetConsensusState":
        return cls(n, k)


# ---------------------------------------------------------------------------
# Requests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpRequest:
    """A single operation request addressed to a shared object."""

    obj: str
    kind: str
    index: int | None = None
    value: Value | None = None

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.index is not None:
            doc["index"] = self.index
        if self.value is not None:
            doc["value"] = value_to_json(self.value)
        return doc


def wrn_request(obj: str, index: int, value: Value) -> OpRequest:
    return OpRequest(obj, KIND_WRN, index=index, value=value)


def read_request(obj: str) -> OpRequest:
    return OpRequest(obj, KIND_READ)


def write_request(obj: str, value: Value) -> OpRequest:
    return OpRequest(obj, KIND_WRITE, value=value)


def propose_request(obj: str, value: Value) -> OpRequest:
    return OpRequest(obj, KIND_PROPOSE, value=value)


def value_to_json(v: Value):
    """Encode a value for traces; BOTTOM becomes null."""
    if v is BOTTOM:
        return None
    if isinstance(v, tuple):
        return [value_to_json(x) for x in v]
    return v


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def wrn_apply(state: WrnState, index: int, value: Value) -> tuple[WrnState, Value]:
    """Write ``value`` to cell ``index`` and return the previous value of
    cell ``(index + 1) mod k``.

    The response is always taken from the pre-write snapshot.  For k >= 2
    the written cell and the read cell differ, so this coincides with
    writing first and reading second; for k == 1 it yields swap semantics
    (the previously stored value comes back, never the value just written).
    """
    if not 0 <= index < state.k:
        raise ContractViolation(
            f"index {index} out of range for arity {state.k}"
        )
    ensure_value(value)
    response = state.cells[(index + 1) % state.k]
    cells = state.cells[:index] + (value,) + state.cells[index + 1 :]
    return WrnState(state.k, cells), response


def register_read(state: RegisterState) -> Value:
    return state.cell


def register_write(state: RegisterState, value: Value) -> RegisterState:
    ensure_value(value)
    return RegisterState(value)


def setcons_propose(
    state: SetConsensusState, value: Value
) -> tuple[tuple[SetConsensusState, Value], ...]:
    """Return every legal outcome of proposing ``value``.

    The first proposal deterministically enters the set and is returned.
    While fewer than n proposals have been applied, a later proposal may or
    may not join the set (only if the set is not full), and any member of
    the resulting set may be returned.  Once n proposals have been applied,
    further proposals return bottom and leave the state untouched.

    Outcomes are deduplicated and sorted so branch indices are stable.
    """
    ensure_value(value)
    if state.count >= state.n:
        return ((state, BOTTOM),)
    count = state.count + 1
    if state.count == 0:
        chosen = frozenset((value,))
        return ((SetConsensusState(state.n, state.k, chosen, count), value),)
    branches = [state.chosen]
    if len(state.chosen) < state.k:
        branches.append(state.chosen | {value})
    outcomes = {
        (SetConsensusState(state.n, state.k, chosen, count), returned)
        for chosen in branches
        for returned in chosen
    }
    return tuple(
        sorted(
            outcomes,
            key=lambda out: (
                sorted(value_key(v) for v in out[0].chosen),
                value_key(out[1]),
            ),
        )
    )


def apply_request(
    state: ObjectState, request: OpRequest
) -> tuple[tuple[ObjectState, Value], ...]:
    """Apply a request to an object state, returning all legal outcomes.

    Deterministic objects yield exactly one outcome; the set-consensus
    object may yield several.  Mis-typed requests are contract violations.
    """
    if request.kind == KIND_WRN:
        if not isinstance(state, WrnState):
            raise ContractViolation(f"WRN applied to {type(state).__name__}")
        return (wrn_apply(state, request.index, request.value),)
    if request.kind == KIND_READ:
        if not isinstance(state, RegisterState):
            raise ContractViolation(f"READ applied to {type(state).__name__}")
        return ((state, register_read(state)),)
    if request.kind == KIND_WRITE:
        if not isinstance(state, RegisterState):
            raise ContractViolation(f"WRITE applied to {type(state).__name__}")
        return ((register_write(state, request.value), BOTTOM),)
    if request.kind == KIND_PROPOSE:
        if not isinstance(state, SetConsensusState):
            raise ContractViolation(f"PROPOSE applied to {type(state).__name__}")
        return setcons_propose(state, request.value)
    raise ContractViolation(f"unknown request kind {request.kind!r}")
