"""Concurrency lab for write-and-read-next shared objects.

The package simulates and verifies wait-free protocols over a family of
k-cell write-and-read-next objects: exhaustive and randomized interleaving
exploration, valency analysis with critical-configuration detection, a
bounded search for two-process consensus decision rules, and a
linearizability checker fed by a real threaded harness.
"""

from .objects import (
    BOTTOM,
    ContractViolation,
    OpRequest,
    RegisterState,
    SetConsensusState,
    WrnState,
    apply_request,
    register_read,
    register_write,
    setcons_propose,
    wrn_apply,
    wrn_request,
)
from .protocols import (
    FunctionFamily,
    alg2_protocol,
    alg3_protocol,
    alg4_protocol,
    build_family,
    covering_counterexamples,
    group_combinator,
)
from .simulator import (
    Configuration,
    Decide,
    Execution,
    Invoke,
    ProcessState,
    ProtocolSpec,
    ScheduleError,
    explore_all,
    initial_configuration,
    run,
    run_random,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "BOTTOM",
    "Configuration",
    "ContractViolation",
    "Decide",
    "Execution",
    "FunctionFamily",
    "Invoke",
    "OpRequest",
    "ProcessState",
    "ProtocolSpec",
    "RegisterState",
    "ScheduleError",
    "SetConsensusState",
    "WrnState",
    "alg2_protocol",
    "alg3_protocol",
    "alg4_protocol",
    "apply_request",
    "build_family",
    "covering_counterexamples",
    "explore_all",
    "group_combinator",
    "initial_configuration",
    "register_read",
    "register_write",
    "run",
    "run_random",
    "setcons_propose",
    "step",
    "wrn_apply",
    "wrn_request",
]
