import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

import probkb
from probkb import Atom, Constant, Variable, parse_kb
from probkb.deduce import EMPTY, Substitution, prove, unify

from helpers import forward_chain

A, B, C = Constant("A"), Constant("B"), Constant("C")
X, Y, Z = Variable("x"), Variable("y"), Variable("z")


def atom(*args):
    return Atom("p", tuple(args))


def test_unify_direct_match():
    th = unify(
        Atom("cancer", (Variable("a"), Constant("SAM"))),
        Atom("cancer", (Constant("YES"), Variable("y"))),
        EMPTY,
    )
    assert th.walk(Variable("a")) == Constant("YES")
    assert th.walk(Variable("y")) == Constant("SAM")


def test_unify_repeated_variable_fails():
    assert unify(atom(X, X), atom(A, B), EMPTY) is None


def test_unify_variable_aliasing():
    th = unify(X, Y, EMPTY)
    assert th.bindings == {X: Y}


def test_unify_respects_existing_bindings():
    th = EMPTY.extend(X, A)
    assert unify(X, B, th) is None
    assert unify(X, A, th) is th


def test_substitution_apply_is_idempotent():
    th = EMPTY.extend(X, Y).extend(Y, A)
    once = th.apply(atom(X, Y, Z))
    assert once == atom(A, A, Z)
    assert th.apply(once) == once


# -- MGU property: every unifier factors through the returned one --------

terms = st.sampled_from([A, B, C, X, Y, Z])
atoms = st.builds(lambda args: atom(*args), st.lists(terms, min_size=0, max_size=4))


@settings(max_examples=300, deadline=None)
@given(a=atoms, b=atoms)
def test_mgu_against_brute_force(a, b):
    th = unify(a, b, EMPTY)
    variables = sorted({*a.variables(), *b.variables()}, key=lambda v: v.name)
    consts = [A, B, C]
    ground_unifiers = []
    for combo in itertools.product(consts, repeat=len(variables)):
        sigma = Substitution(dict(zip(variables, combo)))
        if sigma.apply(a) == sigma.apply(b):
            ground_unifiers.append(sigma)
    if th is None:
        assert not ground_unifiers
        return
    # soundness: th makes the atoms equal
    assert th.apply(a) == th.apply(b)
    # universality: each ground unifier factors through th
    for sigma in ground_unifiers:
        for v in variables:
            assert sigma.walk(sigma.walk(th.walk(v))) == sigma.walk(v)


# -- prove ----------------------------------------------------------------


def test_prove_fact_binding():
    kb = parse_kb("patient(SAM).")
    result = prove(Atom("patient", (X,)), EMPTY, kb)
    assert [th.walk(X) for th in result.answers] == [Constant("SAM")]
    assert not result.depth_exceeded


def test_prove_one_step_chain():
    kb = parse_kb("mortal(?x) :- man(?x).\nman(SOCRATES).")
    result = prove(Atom("mortal", (Constant("SOCRATES"),)), EMPTY, kb)
    assert len(result.answers) == 1
    assert result.answers[0].bindings == {}


def test_prove_no_proof():
    kb = parse_kb("patient(SAM).")
    result = prove(Atom("patient", (Constant("BOB"),)), EMPTY, kb)
    assert result.answers == []


def test_prove_answers_follow_clause_order():
    kb = parse_kb("p(B).\np(A).\np(C).")
    result = prove(atom(X), EMPTY, kb)
    assert [th.walk(X).name for th in result.answers] == ["B", "A", "C"]


def test_prove_deduplicates_equal_ground_answers():
    kb = parse_kb("q(?x) :- r(?x).\nq(?x) :- s(?x).\nr(A).\ns(A).")
    result = prove(Atom("q", (X,)), EMPTY, kb)
    assert [th.walk(X) for th in result.answers] == [A]


def test_prove_depth_bound_flags_truncation():
    kb = parse_kb("loop(?x) :- loop(?x).\nloop(A).")
    result = prove(Atom("loop", (X,)), EMPTY, kb, depth=8)
    assert result.depth_exceeded
    assert Constant("A") in [th.walk(X) for th in result.answers]


def test_prove_recursive_reachability():
    kb = parse_kb(
        "edge(A,B).\nedge(B,C).\n"
        "path(?x,?y) :- edge(?x,?y).\n"
        "path(?x,?z) :- edge(?x,?y), path(?y,?z).\n"
    )
    result = prove(Atom("path", (A, Z)), EMPTY, kb)
    assert {th.walk(Z).name for th in result.answers} == {"B", "C"}


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_prove_sound_against_forward_chaining(data):
    predicates = ["e", "f"]
    consts = ["A", "B", "C"]
    n_facts = data.draw(st.integers(1, 4))
    facts = [
        f"{data.draw(st.sampled_from(predicates))}("
        f"{data.draw(st.sampled_from(consts))},{data.draw(st.sampled_from(consts))})."
        for _ in range(n_facts)
    ]
    rules = [
        "g(?x,?y) :- e(?x,?y).",
        "g(?x,?z) :- e(?x,?y), g(?y,?z).",
        "h(?x) :- g(?x,?x).",
    ]
    kb = parse_kb("\n".join(dict.fromkeys(facts)) + "\n" + "\n".join(rules))
    closure = forward_chain(kb)
    for goal in (Atom("g", (X, Y)), Atom("h", (X,))):
        result = prove(goal, EMPTY, kb, depth=32)
        for th in result.answers:
            g = th.apply(goal)
            if g.variables():
                continue  # non-ground answer: universally true, skip
            key = (g.predicate, tuple(a.name for a in g.args))
            assert key in closure
