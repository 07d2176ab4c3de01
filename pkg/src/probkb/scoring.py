"""Partial-model evaluation: answer a query from any intermediate state.

Three modes, each a different stance on how construction will end:

* default  -- assume every pending subgoal fails: evaluate the fragment of
  the graph whose predecessors are all fully specified and read the
  hypothesis distribution off it (or report no answer if the hypothesis
  is not in that fragment).  Nonmonotonic across steps by design.
* interval -- assume pending subgoals succeed but their parameters are
  unknown: identified-but-unparameterized variables become root nodes with
  vacuous [0,1] tables and bounds are propagated with interval arithmetic.
* correct  -- commit to nothing until the model is finished: vacuous
  bounds on every non-terminal state, the exact answer on a terminal one.
"""

from __future__ import annotations

from .factor import (
    GroundRV,
    IntervalFactor,
    eliminate,
    interval_condition,
    interval_eliminate,
    interval_normalize,
)
from .search import SearchOps, SearchState


def _included_node_ids(state: SearchState) -> set[int]:
    """Live nodes none of whose direct or indirect predecessors are still
    pending subgoals."""
    g = state.graph
    bad = {g.resolve(nid) for sg in state.subgoals for nid in sg.pending}
    stack = list(bad)
    while stack:
        for child in g.children(stack.pop()):
            if child not in bad:
                bad.add(child)
                stack.append(child)
    return set(g.nodes) - bad


def score_default(state: SearchState, ops: SearchOps) -> dict[str, float] | None:
    hrv = ops.hypothesis_rv
    nid = state.graph.rv_index.get(hrv)
    if nid is None:
        return None
    included = _included_node_ids(state)
    if nid not in included:
        return None
    factors = [state.graph.nodes[n].factor for n in sorted(included)]
    result = eliminate(factors, (hrv,))
    total = result.total()
    if total <= 0.0:
        return None
    values = result.values / total
    return {out: float(values[i]) for i, out in enumerate(hrv.outcomes)}


def interval_factor_set(state: SearchState, ops: SearchOps) -> list[IntervalFactor]:
    """Current node factors as degenerate intervals, plus a vacuous root
    prior for every frontier variable (a ground alt subgoal, or a factor
    dimension whose own node has not been built yet), with evidence
    conditioned into the vacuous priors."""
    factors = [
        IntervalFactor.from_factor(node.factor) for node in state.live_nodes()
    ]
    g = state.graph
    frontier: list[GroundRV] = []
    seen: set[GroundRV] = set()

    def add(rv: GroundRV | None):
        if rv is None or rv in seen:
            return
        seen.add(rv)
        if rv in g.rv_index or rv in state.marginalized:
            return
        frontier.append(rv)

    for sg in state.subgoals:
        if ops.is_alt(sg.atom):
            add(ops.rv_of(sg.atom, state.theta))
    for node in state.live_nodes():
        for rv in node.factor.dims:
            add(rv)

    for rv in frontier:
        vac = IntervalFactor.vacuous(rv)
        if rv in ops.evidence:
            vac = interval_condition(vac, rv, ops.evidence[rv])
        factors.append(vac)
    return factors


def _vacuous_bounds(hrv: GroundRV) -> tuple[dict[str, float], dict[str, float]]:
    return ({o: 0.0 for o in hrv.outcomes}, {o: 1.0 for o in hrv.outcomes})


def score_interval(
    state: SearchState, ops: SearchOps
) -> tuple[dict[str, float], dict[str, float]]:
    hrv = ops.hypothesis_rv
    factors = interval_factor_set(state, ops)
    if not factors or not any(hrv in f.dims for f in factors):
        return _vacuous_bounds(hrv)
    result = interval_normalize(interval_eliminate(factors, (hrv,)))
    lo = {out: float(result.lo[i]) for i, out in enumerate(hrv.outcomes)}
    hi = {out: float(result.hi[i]) for i, out in enumerate(hrv.outcomes)}
    return lo, hi


def score_correct(
    state: SearchState, ops: SearchOps
) -> tuple[dict[str, float], dict[str, float]]:
    if ops.is_terminal(state):
        exact = ops.answer(state)
        return dict(exact), dict(exact)
    return _vacuous_bounds(ops.hypothesis_rv)


def score(state: SearchState, ops: SearchOps, mode: str) -> dict:
    """JSON-ready score record for one state."""
    if mode == "default":
        dist = score_default(state, ops)
        if dist is None:
            return {"mode": "default", "answer": None}
        return {"mode": "default", "dist": dist}
    if mode == "interval":
        lo, hi = score_interval(state, ops)
        return {"mode": "interval", "lo": lo, "hi": hi}
    if mode == "correct":
        lo, hi = score_correct(state, ops)
        return {"mode": "correct", "lo": lo, "hi": hi}
    raise ValueError(f"unknown score mode {mode!r}")
