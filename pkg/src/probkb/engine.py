"""Agenda-driven query answering with an anytime, replayable trace.

The engine runs a depth-first search over states: at each state the active
policy proposes an ordered list of actions; the first is applied and the
rest stay available for backtracking.  A state whose subgoals unify with an
already-marginalized variable is failed on arrival.  Every applied action
appends one trace record; ``args[0]`` of each record is the step that
produced the parent state, which makes a finished trace replayable without
re-running the policy.

The default policy fires evaluation actions whenever the margin gate lets
a variable go (choosing the margin that sheds the most factor cells), and
otherwise resolves subgoals preferring find_in_graph, then prove_goal,
then find_prob_dependency, scanning subgoals in insertion order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .deduce import DEFAULT_DEPTH
from .factor import GroundRV
from .lang import KnowledgeBase, Query
from .search import (
    AmbiguityError,
    MarkerTable,
    QueryUnanswerableError,
    SearchOps,
    SearchState,
    build_marker_table,
)


@dataclass(frozen=True)
class Action:
    kind: str  # find_in_graph | prove_goal | find_prob_dependency | multiply | margin
    subgoal: int | None = None
    node: int | None = None
    ordinal: int | None = None
    statement: int | None = None
    pair: tuple[int, int] | None = None
    rv: GroundRV | None = None


@dataclass
class TraceStep:
    step: int
    action: str
    args: list
    subgoals: int
    nodes: int
    score: dict | None = None
    state: SearchState | None = field(default=None, repr=False)

    def record(self) -> dict:
        return {
            "step": self.step,
            "action": self.action,
            "args": self.args,
            "subgoals": self.subgoals,
            "nodes": self.nodes,
            "score": self.score,
        }


@dataclass
class AnytimeTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def records(self) -> list[dict]:
        return [s.record() for s in self.steps]

    def actions(self) -> list[str]:
        return [s.action for s in self.steps]


@dataclass
class QueryResult:
    answer: dict[str, float] | None
    partial: bool
    trace: AnytimeTrace
    final_state: SearchState
    partial_score: dict[str, float] | None = None

    @property
    def steps(self) -> int:
        return len(self.trace.steps)


class DefaultPolicy:
    """Deterministic greedy policy; see module docstring."""

    def __init__(self, use_margin_gate: bool = True, newest_first: bool = False):
        self.use_margin_gate = use_margin_gate
        self.newest_first = newest_first

    def plan(
        self, state: SearchState, ops: SearchOps, marker: MarkerTable, strict: bool
    ) -> list[Action]:
        act = self.evaluation_action(state, ops, marker)
        if act is not None:
            return [act]
        actions = self.construction_actions(state, ops, strict)
        if actions:
            return actions
        return self.wrap_up_action(state, ops)

    # -- evaluation: pick the admissible margin shedding the most cells --

    def margin_candidates(self, state, ops, marker):
        out = []
        for rv in state.graph.rv_index:
            if rv == ops.hypothesis_rv:
                continue
            if ops.subgoal_mentions(state, rv):
                continue
            if self.use_margin_gate and not ops.margin_safe(rv, state, marker):
                continue
            refs = state.graph.referencing(rv)
            if len(refs) > 1 and not ops.merge_admissible(state, refs):
                continue  # deferred until merging cannot close a cycle
            out.append((rv, refs))
        return out

    def evaluation_action(self, state, ops, marker) -> Action | None:
        best = None
        for rv, refs in self.margin_candidates(state, ops, marker):
            dims = set()
            before = 0
            for nid in refs:
                f = state.graph.nodes[nid].factor
                dims.update(f.dims)
                before += f.values.size
            after = 1
            for d in dims:
                if d != rv:
                    after *= len(d.outcomes)
            reduction = before - after
            if best is None or reduction > best[0]:
                best = (reduction, rv, refs)
        if best is None:
            return None
        _, rv, refs = best
        if len(refs) > 1:
            # merge the two topologically smallest members first: an
            # admissible merge set never has a path between its two minima,
            # so every intermediate pairwise merge stays acyclic
            rank = state.graph.topo_order()
            first, second = sorted(refs, key=lambda n: rank[n])[:2]
            return Action("multiply", pair=(first, second))
        return Action("margin", rv=rv)

    # -- construction ----------------------------------------------------

    def subgoal_order(self, state: SearchState) -> list[int]:
        idx = list(range(len(state.subgoals)))
        return list(reversed(idx)) if self.newest_first else idx

    def construction_actions(self, state, ops, strict) -> list[Action]:
        order = self.subgoal_order(state)
        for i in order:
            acts = [
                Action("find_in_graph", subgoal=i, node=nid)
                for nid, _, _, _ in ops.find_in_graph_candidates(state, i)
                if ops.op_find_in_graph(state, i, node_id=nid)  # cycle-pruned
            ]
            if acts:
                return acts
        for i in order:
            sg = state.subgoals[i]
            if ops.is_alt(sg.atom):
                continue
            n = len(ops.op_prove_goal(state, i))
            if n:
                return [Action("prove_goal", subgoal=i, ordinal=k) for k in range(n)]
        for i in order:
            sg = state.subgoals[i]
            if not ops.is_alt(sg.atom) or ops.find_in_graph_candidates(state, i):
                continue
            cands = ops.dependency_candidates(state, i)
            if strict and len(cands) > 1:
                raise AmbiguityError(
                    f"{len(cands)} dependency statements match {sg.atom}"
                )
            if cands:
                return [
                    Action("find_prob_dependency", subgoal=i, statement=idx)
                    for idx, _ in cands
                ]
        return []

    # -- no subgoals, no gated margin: finish the product ------------------

    def wrap_up_action(self, state, ops) -> list[Action]:
        if state.subgoals:
            return []
        live = sorted(state.graph.nodes)
        if len(live) > 1:
            rank = state.graph.topo_order()
            first, second = sorted(live, key=lambda n: rank[n])[:2]
            return [Action("multiply", pair=(first, second))]
        return []


class ForcedEarlyMarginPolicy(DefaultPolicy):
    """Test policy: marginalize at the first opportunity, gate off, and
    expand the newest subgoal first so evaluation windows open early."""

    def __init__(self):
        super().__init__(use_margin_gate=False, newest_first=True)


class RandomPolicy(DefaultPolicy):
    """Shuffles all applicable actions; used to probe policy independence.
    The margin gate stays off so mistaken orders exercise the failure
    detector."""

    def __init__(self, seed: int = 0):
        super().__init__(use_margin_gate=False)
        self.rng = random.Random(seed)

    def plan(self, state, ops, marker, strict):
        actions = []
        ev = self.evaluation_action(state, ops, marker)
        if ev is not None:
            actions.append(ev)
        actions.extend(self.construction_actions(state, ops, strict))
        if not actions:
            actions = self.wrap_up_action(state, ops)
        self.rng.shuffle(actions)
        return actions


def apply_action(
    ops: SearchOps, state: SearchState, action: Action, marker: MarkerTable, gated: bool
) -> SearchState:
    if action.kind == "find_in_graph":
        return ops.op_find_in_graph(state, action.subgoal, node_id=action.node)[0]
    if action.kind == "prove_goal":
        return ops.op_prove_goal(state, action.subgoal, only=action.ordinal)[0]
    if action.kind == "find_prob_dependency":
        return ops.op_find_prob_dependency(
            state, action.subgoal, statement_index=action.statement
        )[0]
    if action.kind == "multiply":
        return ops.op_multiply(state, *action.pair)
    if action.kind == "margin":
        return ops.op_margin(state, action.rv, marker if gated else None)
    raise ValueError(f"unknown action {action.kind}")


def action_args(ops: SearchOps, state: SearchState, action: Action, parent: int) -> list:
    if action.kind in ("find_in_graph", "prove_goal", "find_prob_dependency"):
        sg = state.subgoals[action.subgoal]
        detail = {
            "find_in_graph": action.node,
            "prove_goal": action.ordinal,
            "find_prob_dependency": action.statement,
        }[action.kind]
        return [parent, action.subgoal, ops.goal_str(sg, state), detail]
    if action.kind == "multiply":
        return [parent, action.pair[0], action.pair[1]]
    return [parent, str(action.rv)]


@dataclass
class _Frame:
    state: SearchState
    step: int
    actions: list[Action]
    idx: int = 0


def run_query(
    kb: KnowledgeBase,
    query: Query,
    policy: DefaultPolicy | None = None,
    budget: int | None = None,
    *,
    strict: bool = False,
    score_mode: str | None = None,
    depth: int = DEFAULT_DEPTH,
) -> QueryResult:
    """Answer a query, or return the best partial answer when the step
    budget runs out first.  Deterministic given (kb, query, policy, seed)."""
    from . import scoring

    ops = SearchOps(kb, query, depth=depth)
    if not kb.dependencies_for(query.hypothesis.predicate):
        raise QueryUnanswerableError(
            f"no dependency statement for {query.hypothesis.predicate}"
        )
    marker = build_marker_table(kb, query)
    policy = policy if policy is not None else DefaultPolicy()
    trace = AnytimeTrace()
    init = ops.init_state()
    frames = [_Frame(init, 0, policy.plan(init, ops, marker, strict))]
    step = 0
    last_live = init

    def emit(action_name: str, args: list, state: SearchState) -> TraceStep:
        nonlocal step
        step += 1
        rec = TraceStep(
            step,
            action_name,
            args,
            len(state.subgoals),
            len(state.graph.nodes),
            scoring.score(state, ops, score_mode) if score_mode else None,
            state,
        )
        trace.steps.append(rec)
        return rec

    while frames:
        frame = frames[-1]
        state = frame.state
        if ops.is_terminal(state):
            return QueryResult(ops.answer(state), False, trace, state)
        if budget is not None and step >= budget:
            return QueryResult(
                None, True, trace, state, partial_score=scoring.score_default(state, ops)
            )
        if frame.idx >= len(frame.actions):
            if not frame.actions:
                emit("dead_end", [frame.step], state)
            frames.pop()
            continue
        action = frame.actions[frame.idx]
        frame.idx += 1
        new_state = apply_action(ops, state, action, marker, policy.use_margin_gate)
        if __debug__:
            ops.check_invariants(new_state)
        rec = emit(action.kind, action_args(ops, state, action, frame.step), new_state)
        failure = ops.detect_marg_error(new_state)
        if failure is not None:
            atom, rv = failure
            emit("detect_marg_error", [rec.step, str(atom), str(rv)], new_state)
            continue
        last_live = new_state
        frames.append(
            _Frame(new_state, rec.step, policy.plan(new_state, ops, marker, strict))
        )
    raise QueryUnanswerableError(
        "search exhausted without completing a model for the query",
        trace=trace,
        final_state=last_live,
    )


def replay_trace(
    kb: KnowledgeBase, query: Query, records: list[dict], depth: int = DEFAULT_DEPTH
) -> SearchState:
    """Re-apply a recorded action sequence; returns the state after the
    last constructive record (bit-identical factors to the original run)."""
    ops = SearchOps(kb, query, depth=depth)
    states: dict[int, SearchState] = {0: ops.init_state()}
    last = 0
    for rec in records:
        name, args = rec["action"], rec["args"]
        if name in ("detect_marg_error", "dead_end"):
            continue
        parent = args[0]
        state = states[parent]
        if name == "find_in_graph":
            new = ops.op_find_in_graph(state, args[1], node_id=args[3])[0]
        elif name == "prove_goal":
            new = ops.op_prove_goal(state, args[1], only=args[3])[0]
        elif name == "find_prob_dependency":
            new = ops.op_find_prob_dependency(state, args[1], statement_index=args[3])[0]
        elif name == "multiply":
            new = ops.op_multiply(state, args[1], args[2])
        elif name == "margin":
            rv = next(r for r in state.graph.rv_index if str(r) == args[1])
            new = ops.op_margin(state, rv)
        else:
            raise ValueError(f"unknown trace action {name!r}")
        states[rec["step"]] = new
        last = rec["step"]
    return states[last]
