import numpy as np
import pytest

import probkb
from probkb import (
    DefaultPolicy,
    ForcedEarlyMarginPolicy,
    RandomPolicy,
    parse_kb,
    parse_query,
    replay_trace,
    run_query,
)
from probkb.search import AmbiguityError, QueryUnanswerableError

from helpers import enumerate_terminal_answers


def test_run_query_matches_oracle_on_cancer(cancer_kb, cancer_query):
    result = run_query(cancer_kb, cancer_query)
    want = probkb.exact_posterior(
        probkb.ground_network(cancer_kb, cancer_query), cancer_query
    )
    assert result.answer["YES"] == pytest.approx(want["YES"], abs=1e-9)
    assert not result.partial


def test_budget_zero_returns_default_score_of_initial_state(cancer_kb, cancer_query):
    result = run_query(cancer_kb, cancer_query, budget=0)
    assert result.partial and result.answer is None
    assert result.partial_score is None  # hypothesis not yet in the graph
    assert result.steps == 0


def test_budget_one_partial_score_is_prior(cancer_kb, cancer_query):
    result = run_query(cancer_kb, cancer_query, budget=1)
    assert result.partial
    assert result.partial_score == {"YES": pytest.approx(0.2, abs=1e-12),
                                    "NO": pytest.approx(0.8, abs=1e-12)}


def test_large_budget_equals_unbounded(cancer_kb, cancer_query):
    free = run_query(cancer_kb, cancer_query)
    capped = run_query(cancer_kb, cancer_query, budget=10_000)
    assert capped.answer == free.answer
    assert capped.trace.records() == free.trace.records()


def test_two_runs_identical_traces(cancer_kb, cancer_query):
    a = run_query(cancer_kb, cancer_query, score_mode="default")
    b = run_query(cancer_kb, cancer_query, score_mode="default")
    assert a.trace.records() == b.trace.records()
    assert a.answer == b.answer


def test_replay_reproduces_final_factors(cancer_kb, cancer_query):
    result = run_query(cancer_kb, cancer_query)
    final = replay_trace(cancer_kb, cancer_query, result.trace.records())
    (orig,) = result.final_state.graph.nodes.values()
    (rep,) = final.graph.nodes.values()
    assert orig.factor.dims == rep.factor.dims
    assert np.array_equal(orig.factor.values, rep.factor.values)  # bit-for-bit


def test_replay_covers_backtracking_runs(early_margin_kb, early_margin_query):
    with pytest.raises(QueryUnanswerableError) as err:
        run_query(early_margin_kb, early_margin_query,
                  policy=ForcedEarlyMarginPolicy())
    records = err.value.trace.records()
    assert any(r["action"] == "detect_marg_error" for r in records)
    # the constructive prefix replays cleanly even though the run failed
    final = replay_trace(early_margin_kb, early_margin_query, records)
    assert final.marginalized  # the premature margin is part of the replay


def test_forced_early_margin_fails_detector(early_margin_kb, early_margin_query):
    with pytest.raises(QueryUnanswerableError) as err:
        run_query(early_margin_kb, early_margin_query,
                  policy=ForcedEarlyMarginPolicy())
    assert "detect_marg_error" in err.value.trace.actions()


def test_gated_policy_never_fails_on_fixtures(
    cancer_kb, cancer_query, early_margin_kb, early_margin_query
):
    for kb, q in ((cancer_kb, cancer_query), (early_margin_kb, early_margin_query)):
        result = run_query(kb, q)
        assert "detect_marg_error" not in result.trace.actions()
        assert "dead_end" not in result.trace.actions()
        # forcing early margins with the gate back on is also safe
        gated_eager = DefaultPolicy(use_margin_gate=True, newest_first=True)
        result2 = run_query(kb, q, policy=gated_eager)
        assert "detect_marg_error" not in result2.trace.actions()
        assert result2.answer["YES" if "YES" in result2.answer else "ON"] == \
            pytest.approx(result.answer["YES" if "YES" in result.answer else "ON"], abs=1e-9)


def test_random_policies_agree_with_oracle(early_margin_kb, early_margin_query):
    want = probkb.exact_posterior(
        probkb.ground_network(early_margin_kb, early_margin_query),
        early_margin_query,
    )
    for seed in range(12):
        result = run_query(
            early_margin_kb, early_margin_query, policy=RandomPolicy(seed=seed)
        )
        assert result.answer["ON"] == pytest.approx(want["ON"], abs=1e-9)


def test_exhaustive_policy_enumeration_tiny_chain():
    kb = parse_kb(
        "prob a({T,F},?x) = { (T):0.3; (F):0.7 }.\n"
        "prob b({T,F},?x) <- a({T,F},?x) = "
        "{ (T|T):0.9; (F|T):0.1; (T|F):0.2; (F|F):0.8 }.\n"
    )
    q = parse_query("b(?v,C) | a(T,C)", kb)
    answers = enumerate_terminal_answers(kb, q)
    assert answers, "no terminal state found"
    want = probkb.exact_posterior(probkb.ground_network(kb, q), q)
    for ans in answers:
        assert ans["T"] == pytest.approx(want["T"], abs=1e-9)


def test_exhaustive_policy_enumeration_two_children():
    kb = parse_kb(
        "prob a({T,F},?x) = { (T):0.4; (F):0.6 }.\n"
        "prob b({T,F},?x) <- a({T,F},?x) = "
        "{ (T|T):0.9; (F|T):0.1; (T|F):0.2; (F|F):0.8 }.\n"
        "prob c({T,F},?x) <- a({T,F},?x) = "
        "{ (T|T):0.7; (F|T):0.3; (T|F):0.1; (F|F):0.9 }.\n"
    )
    q = parse_query("b(?v,C) | c(T,C)", kb)
    answers = enumerate_terminal_answers(kb, q)
    assert len(answers) >= 2  # several evaluation orders reach distinct terminals
    want = probkb.exact_posterior(probkb.ground_network(kb, q), q)
    for ans in answers:
        assert ans["T"] == pytest.approx(want["T"], abs=1e-9)


def test_strict_mode_rejects_ambiguous_statements():
    kb = parse_kb(
        "prob a({T,F},?x) = { (T):0.3; (F):0.7 }.\n"
        "prob a({T,F},C) = { (T):0.5; (F):0.5 }.\n"
    )
    q = parse_query("a(?v,C)", kb)
    with pytest.raises(AmbiguityError):
        run_query(kb, q, strict=True)
    # without strict mode the first statement wins, deterministically
    result = run_query(kb, q)
    assert result.answer["T"] == pytest.approx(0.3, abs=1e-12)


def test_unanswerable_when_hypothesis_has_no_statement():
    kb = parse_kb(
        "prob b({T,F},?x) <- a({T,F},?x) = "
        "{ (T|T):0.9; (F|T):0.1; (T|F):0.2; (F|F):0.8 }.\n",
        validate=False,  # `a` is declared only through b's conditioning atom
    )
    q = parse_query("a(?v,C)", kb)
    with pytest.raises(QueryUnanswerableError):
        run_query(kb, q)


def test_inconsistent_evidence_raises():
    kb = parse_kb(
        "prob a({T,F},?x) = { (T):1.0; (F):0.0 }.\n"
        "prob b({T,F},?x) <- a({T,F},?x) = "
        "{ (T|T):0.9; (F|T):0.1; (T|F):0.2; (F|F):0.8 }.\n"
    )
    q = parse_query("b(?v,C) | a(F,C)", kb)
    with pytest.raises(probkb.InconsistentEvidenceError):
        run_query(kb, q)


def test_guarded_kb_run_uses_deduction(guarded_kb):
    q = parse_query("level(?l,S1) | reading(POS,S1)", guarded_kb)
    result = run_query(guarded_kb, q)
    assert "prove_goal" in result.trace.actions()
    want = probkb.exact_posterior(probkb.ground_network(guarded_kb, q), q)
    assert result.answer["HI"] == pytest.approx(want["HI"], abs=1e-9)


def test_trace_records_have_fixed_schema(cancer_kb, cancer_query):
    result = run_query(cancer_kb, cancer_query, score_mode="correct")
    for rec in result.trace.records():
        assert list(rec.keys()) == ["step", "action", "args", "subgoals", "nodes", "score"]
        assert isinstance(rec["args"], list) and isinstance(rec["args"][0], int)


def test_disconnected_evidence_reduces_to_prior():
    kb = parse_kb(
        "prob a({T,F},?x) = { (T):0.3; (F):0.7 }.\n"
        "prob z({T,F},?x) = { (T):0.5; (F):0.5 }.\n"
    )
    q = parse_query("a(?v,C) | z(T,C)", kb)
    result = run_query(kb, q)
    assert result.answer["T"] == pytest.approx(0.3, abs=1e-12)
