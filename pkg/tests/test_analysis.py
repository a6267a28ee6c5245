"""Valency classification, object case checks, bounded solvability search."""

import itertools

import pytest

from wrnlab.analysis import (
    BIVALENT,
    ONE_VALENT,
    ZERO_VALENT,
    PatternSpec,
    check_absorption,
    check_commutation,
    classify_valences,
    enumerate_patterns,
    find_critical,
    pattern_protocol,
    replay_matches_consensus,
    solvability_search,
    solve_pattern,
    sweep_case_checks,
)
from wrnlab.objects import BOTTOM, ContractViolation
from wrnlab.protocols import alg4_protocol
from wrnlab.simulator import run


# ---------------------------------------------------------------------------
# Valences and critical configurations
# ---------------------------------------------------------------------------


def test_alg4_initial_bivalent():
    analysis = classify_valences(alg4_protocol(0, 1))
    assert analysis.complete
    assert analysis.initial_valence() == BIVALENT


def test_alg4_children_univalent():
    protocol = alg4_protocol(0, 1)
    analysis = classify_valences(protocol)
    children = analysis.edges[analysis.initial]
    assert len(children) == 2
    tags = {pid: analysis.valence(child) for pid, _, child in children}
    assert tags == {0: ZERO_VALENT, 1: ONE_VALENT}


def test_alg4_same_inputs_univalent():
    analysis = classify_valences(alg4_protocol(0, 0))
    assert analysis.initial_valence() == ZERO_VALENT
    analysis = classify_valences(alg4_protocol(1, 1))
    assert analysis.initial_valence() == ONE_VALENT


def test_alg4_critical_is_exactly_initial():
    analysis = classify_valences(alg4_protocol(0, 1))
    assert find_critical(analysis) == [analysis.initial]


def test_alg4_no_critical_with_equal_inputs():
    analysis = classify_valences(alg4_protocol(1, 1))
    assert find_critical(analysis) == []


def test_critical_successor_property():
    analysis = classify_valences(alg4_protocol(0, 1))
    for config in find_critical(analysis):
        tags = {
            analysis.valence(child) for _, _, child in analysis.edges[config]
        }
        assert BIVALENT not in tags
        assert tags == {ZERO_VALENT, ONE_VALENT}


def test_valence_soundness_by_replay():
    protocol = alg4_protocol(0, 1)
    analysis = classify_valences(protocol)
    # every maximal execution's decided value must lie inside the label of
    # every configuration along its path
    for schedule in ([0, 1], [1, 0]):
        execution = run(protocol, schedule)
        decided = set(execution.decisions.values())
        for config in execution.configurations:
            assert decided <= analysis.reachable[config]


def test_valence_requires_two_processes():
    from wrnlab.protocols import alg2_protocol

    with pytest.raises(ContractViolation):
        classify_valences(alg2_protocol(3, (0, 1, 1)))


def test_valence_requires_binary_inputs():
    with pytest.raises(ContractViolation):
        classify_valences(alg4_protocol("x", "y"))


# ---------------------------------------------------------------------------
# Case checks
# ---------------------------------------------------------------------------


def test_absorption_fresh_state():
    report = check_absorption(3, (BOTTOM, BOTTOM, BOTTOM), 1, "p", "q")
    assert report.ok


def test_absorption_populated_state():
    report = check_absorption(3, ("a", BOTTOM, "c"), 1, "p", "q")
    assert report.ok
    # the response both ways is the pre-state's next cell
    from wrnlab.objects import WrnState, wrn_apply

    _, solo = wrn_apply(WrnState(3, ("a", BOTTOM, "c")), 1, "p")
    assert solo == "c"


def test_absorption_fails_for_swap():
    # k = 1 swap semantics leak the overwritten value, so absorption breaks
    report = check_absorption(1, ("s0",), 0, "p", "q")
    assert not report.response_match


def test_commutation_fresh_far_indices():
    report = check_commutation(3, (BOTTOM,) * 3, 0, "p", 2, "q")
    assert report.state_match
    assert report.p_response_match  # q wrote cell 2, p reads cell 1
    assert not report.q_response_match  # p wrote cell 0, q reads cell 0
    assert report.ok


def test_commutation_fresh_adjacent_indices():
    report = check_commutation(3, (BOTTOM,) * 3, 0, "p", 1, "q")
    assert report.state_match
    assert not report.p_response_match  # q wrote the cell p reads
    assert report.q_response_match
    assert report.ok


def test_commutation_k2_both_order_dependent():
    report = check_commutation(2, (BOTTOM, BOTTOM), 0, "p", 1, "q")
    assert report.state_match
    assert not report.p_response_match
    assert not report.q_response_match
    assert report.ok  # matches the predicted pattern: neither is exempt


def test_commutation_rejects_equal_indices():
    with pytest.raises(ContractViolation):
        check_commutation(3, (BOTTOM,) * 3, 1, "p", 1, "q")


def test_sweep_case_checks_zero_counterexamples():
    report = sweep_case_checks(k_values=range(3, 7))
    assert report.ok
    assert report.absorption_checked > 0
    assert report.commutation_checked > 0


def test_sweep_rejects_overlapping_alphabet():
    with pytest.raises(ContractViolation):
        sweep_case_checks(cell_alphabet=(BOTTOM, "p"), write_values=("p", "q"))


def test_case_checks_one_exempt_side_for_k3_plus():
    for k in range(3, 9):
        for i_p, i_q in itertools.permutations(range(k), 2):
            report = check_commutation(k, (BOTTOM,) * k, i_p, "p", i_q, "q")
            assert report.p_match_expected() or report.q_match_expected()


# ---------------------------------------------------------------------------
# Solvability search
# ---------------------------------------------------------------------------


def test_enumerate_patterns_counts():
    assert len(enumerate_patterns(3, 1)) == 9
    assert len(enumerate_patterns(2, 1)) == 4
    assert len(enumerate_patterns(3, 2)) == 144
    assert len(enumerate_patterns(3, 1, n_objects=2)) == 36


def test_k2_depth1_recovers_two_consensus():
    pattern = PatternSpec(2, ((("O1"), 0),), ((("O1"), 1),))
    verdict = solve_pattern(pattern)
    assert verdict.solvable
    assert replay_matches_consensus(pattern, verdict.decision_map)
    # the recovered map behaves exactly like the 2-cell consensus protocol
    for x, y in itertools.product((0, 1), repeat=2):
        recovered = pattern_protocol(pattern, verdict.decision_map, (x, y))
        reference = alg4_protocol(x, y)
        for schedule in ([0, 1], [1, 0]):
            assert (
                run(recovered, schedule).decisions
                == run(reference, schedule).decisions
            )


def test_k2_depth1_search_summary():
    report = solvability_search(2, 1)
    assert report.complete
    verdicts = {
        (v.pattern.steps_p, v.pattern.steps_q): v.solvable
        for v in report.verdicts
    }
    # the two asymmetric index assignments solve consensus; same-index do not
    assert verdicts[((("O1", 0),), (("O1", 1),))]
    assert verdicts[((("O1", 1),), (("O1", 0),))]
    assert not verdicts[((("O1", 0),), (("O1", 0),))]
    assert not verdicts[((("O1", 1),), (("O1", 1),))]


def test_k3_depth1_all_unsolvable():
    report = solvability_search(3, 1)
    assert report.complete
    assert len(report.verdicts) == 9
    assert all(not v.solvable for v in report.verdicts)


def test_k3_depth2_all_unsolvable():
    report = solvability_search(3, 2)
    assert report.complete
    assert len(report.verdicts) == 144
    assert all(not v.solvable for v in report.verdicts)


def test_solvable_witnesses_replay():
    report = solvability_search(2, 2)
    assert report.complete
    for verdict in report.solvable():
        assert replay_matches_consensus(
            verdict.pattern, verdict.decision_map
        ), verdict.pattern


def test_search_budget_flagged():
    report = solvability_search(3, 1, pattern_budget=4)
    assert not report.complete
    assert len(report.verdicts) == 4


def test_search_rejects_bad_depth():
    with pytest.raises(ContractViolation):
        solvability_search(3, 0)


def test_verdict_json_shape():
    report = solvability_search(2, 1)
    doc = report.verdicts[0].to_json()
    assert set(doc) == {"pattern", "verdict", "decision_map", "executions"}
    assert doc["verdict"] in ("SOLVABLE", "UNSOLVABLE")
    assert doc["executions"] > 0
