"""Shared test machinery: exhaustive search-space walks, a ground
forward-chaining oracle for deduction soundness, and factor builders."""

from __future__ import annotations

import itertools

import probkb
from probkb.factor import Factor, GroundRV, condition
from probkb.search import SearchOps, SearchState, cpt_factor


def all_successors(ops: SearchOps, state: SearchState) -> list[SearchState]:
    """Every state any policy could reach in one action (margin gate off),
    with failure-detected successors dropped the way the engine drops
    them."""
    out: list[SearchState] = []
    for i, sg in enumerate(state.subgoals):
        out.extend(ops.op_find_in_graph(state, i))
        if ops.is_alt(sg.atom):
            if not ops.find_in_graph_candidates(state, i):
                out.extend(ops.op_find_prob_dependency(state, i))
        else:
            out.extend(ops.op_prove_goal(state, i))
    for rv in list(state.graph.rv_index):
        if rv == ops.hypothesis_rv:
            continue
        if len(state.graph.referencing(rv)) != 1:
            continue
        if ops.subgoal_mentions(state, rv):
            continue
        out.append(ops.op_margin(state, rv))
    ids = sorted(state.graph.nodes)
    for a, b in itertools.combinations(ids, 2):
        if ops.merge_admissible(state, [a, b]):
            out.append(ops.op_multiply(state, a, b))
    return [s for s in out if ops.detect_marg_error(s) is None]


def state_key(ops: SearchOps, state: SearchState):
    """Canonical key for deduplication: node ids are relabeled by factor
    signature so converging action orders collapse."""
    sigs = {}
    for nid, node in state.graph.nodes.items():
        sigs[nid] = (
            tuple(str(d) for d in node.factor.dims),
            node.factor.values.tobytes(),
        )
    rank = {nid: i for i, (_, nid) in enumerate(sorted((s, n) for n, s in sigs.items()))}
    edges = frozenset(
        (rank[p], rank[c]) for p, cs in state.graph.edges.items() for c in cs
    )
    goals = tuple(
        sorted(
            (ops.goal_str(sg, state), tuple(sorted(rank[state.graph.resolve(x)] for x in sg.pending)))
            for sg in state.subgoals
        )
    )
    nodes = tuple(sorted((rank[n], sigs[n]) for n in sigs))
    return (goals, nodes, edges, tuple(sorted(map(str, state.marginalized))))


def enumerate_terminal_answers(kb, query, cap: int = 200_000) -> list[dict]:
    """Walk the whole (deduplicated) search space; returns the normalized
    answer of every distinct terminal state found."""
    ops = SearchOps(kb, query)
    init = ops.init_state()
    seen = {state_key(ops, init)}
    stack = [init]
    answers = []
    expansions = 0
    while stack:
        state = stack.pop()
        if ops.is_terminal(state):
            answers.append(ops.answer(state))
            continue
        expansions += 1
        assert expansions <= cap, "search space larger than expected"
        for succ in all_successors(ops, state):
            key = state_key(ops, succ)
            if key not in seen:
                seen.add(key)
                stack.append(succ)
    return answers


def forward_chain(kb) -> set:
    """Ground closure of the KB's facts and rules by naive forward
    chaining; the deduction soundness oracle."""
    constants = set()
    for clause in kb.clauses:
        for atom in (clause.head, *clause.body):
            for arg in atom.args:
                if isinstance(arg, probkb.Constant):
                    constants.add(arg.name)
    constants = sorted(constants) or ["_"]
    facts: set = set()
    for clause in kb.clauses:
        if not clause.body and not clause.head.variables():
            facts.add((clause.head.predicate, tuple(a.name for a in clause.head.args)))
    changed = True
    while changed:
        changed = False
        for clause in kb.clauses:
            variables = sorted(
                {v for a in (clause.head, *clause.body) for v in a.variables()},
                key=lambda v: v.name,
            )
            for combo in itertools.product(constants, repeat=len(variables)):
                env = dict(zip(variables, combo))

                def ground(atom):
                    return (
                        atom.predicate,
                        tuple(
                            env[a] if isinstance(a, probkb.Variable) else a.name
                            for a in atom.args
                        ),
                    )

                if all(ground(b) in facts for b in clause.body):
                    g = ground(clause.head)
                    if g not in facts:
                        facts.add(g)
                        changed = True
    return facts


def net_factors(kb, query) -> tuple[list[Factor], GroundRV]:
    """The fully constructed model's CPT factors with evidence conditioned
    in, plus the hypothesis variable."""
    net = probkb.ground_network(kb, query)
    ops = SearchOps(kb, query)
    factors = []
    for inst in net.cpts:
        dep = kb.dependencies[inst.statement_index]
        f = cpt_factor(dep, inst.rv, inst.parents)
        if inst.rv in ops.evidence:
            f = condition(f, inst.rv, ops.evidence[inst.rv])
        factors.append(f)
    return factors, ops.hypothesis_rv
