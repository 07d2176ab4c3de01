"""Search states and operators for query-directed network construction.

A query is answered by searching over states ``(subgoals, theta, graph,
marginalized)``: construction operators resolve subgoals into graph nodes
(each node owns one or more ground random variables and a factor), and
evaluation operators merge nodes and sum variables out of the expression.
Everything here is purely functional: operators map a state to successor
states and never mutate their input.

Premature marginalization (summing a variable out before all of its
children joined the model) is caught two ways: ``detect_marg_error`` fails
any state whose subgoals unify with an already-marginalized variable, and
``margin_safe`` gates the margin operator with a predicate-level marker
pass that counts how many children each variable may still acquire.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .deduce import DEFAULT_DEPTH, EMPTY, FreshNamer, Substitution, prove, unify
from .factor import Factor, GroundRV, condition, marginalize, multiply, normalize
from .lang import (
    Atom,
    Constant,
    KnowledgeBase,
    OutcomeSet,
    ProbDependency,
    ProbKBError,
    Query,
    Variable,
)


class OperatorError(ProbKBError):
    """An operator was applied outside its precondition."""


class QueryUnanswerableError(ProbKBError):
    """No complete model can be constructed for the query."""

    def __init__(self, message, trace=None, final_state=None):
        super().__init__(message)
        self.trace = trace
        self.final_state = final_state


class AmbiguityError(ProbKBError):
    """Strict mode: several dependency statements match one subgoal."""


@dataclass(frozen=True)
class SubGoal:
    """A formula still to be resolved.  ``pending`` holds the ids of graph
    nodes awaiting an incoming edge from this goal's variable once it is
    located or constructed."""

    atom: Atom
    pending: tuple[int, ...] = ()


@dataclass(frozen=True)
class Node:
    id: int
    members: tuple[GroundRV, ...]
    factor: Factor


@dataclass(frozen=True)
class PartialGraph:
    """Under-construction network.  ``edges`` maps a live parent id to its
    live child ids; ``forward`` records node merges so stale ids stay
    resolvable; ``child_counts`` tracks, per variable, how many children
    have been attached (feeds the margin gate)."""

    nodes: dict[int, Node] = field(default_factory=dict)
    edges: dict[int, frozenset[int]] = field(default_factory=dict)
    rv_index: dict[GroundRV, int] = field(default_factory=dict)
    forward: dict[int, int] = field(default_factory=dict)
    child_counts: dict[GroundRV, int] = field(default_factory=dict)
    next_id: int = 1

    def resolve(self, nid: int) -> int:
        while nid in self.forward:
            nid = self.forward[nid]
        return nid

    def children(self, nid: int) -> frozenset[int]:
        return self.edges.get(nid, frozenset())

    def reaches(self, src: int, dst: int) -> bool:
        """Directed path of length >= 0 from src to dst."""
        if src == dst:
            return True
        seen, stack = {src}, [src]
        while stack:
            for c in self.children(stack.pop()):
                if c == dst:
                    return True
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return False

    def add_node(self, members: tuple[GroundRV, ...], factor: Factor):
        nid = self.next_id
        nodes = dict(self.nodes)
        nodes[nid] = Node(nid, members, factor)
        rv_index = dict(self.rv_index)
        for rv in members:
            assert rv not in rv_index, f"{rv} already has a node"
            rv_index[rv] = nid
        g = replace(self, nodes=nodes, rv_index=rv_index, next_id=nid + 1)
        return g, nid

    def add_edges(self, parent: int, children: tuple[int, ...], rv: GroundRV):
        edges = dict(self.edges)
        edges[parent] = self.children(parent) | frozenset(children)
        counts = dict(self.child_counts)
        counts[rv] = counts.get(rv, 0) + len(children)
        return replace(self, edges=edges, child_counts=counts)

    def merge(self, a: int, b: int, factor: Factor):
        nid = self.next_id
        old = {a, b}
        members = tuple(sorted(set(self.nodes[a].members) | set(self.nodes[b].members)))
        nodes = {k: v for k, v in self.nodes.items() if k not in old}
        nodes[nid] = Node(nid, members, factor)
        edges: dict[int, frozenset[int]] = {}
        for p, cs in self.edges.items():
            p2 = nid if p in old else p
            cs2 = frozenset(nid if c in old else c for c in cs) - {p2}
            if cs2:
                edges[p2] = edges.get(p2, frozenset()) | cs2
        rv_index = {rv: (nid if n in old else n) for rv, n in self.rv_index.items()}
        forward = dict(self.forward)
        forward[a] = nid
        forward[b] = nid
        g = replace(
            self, nodes=nodes, edges=edges, rv_index=rv_index, forward=forward,
            next_id=nid + 1,
        )
        return g, nid

    def drop_rv(self, rv: GroundRV, new_factor: Factor):
        nid = self.rv_index[rv]
        node = self.nodes[nid]
        nodes = dict(self.nodes)
        nodes[nid] = Node(nid, tuple(m for m in node.members if m != rv), new_factor)
        rv_index = {r: n for r, n in self.rv_index.items() if r != rv}
        return replace(self, nodes=nodes, rv_index=rv_index)

    def referencing(self, rv: GroundRV) -> list[int]:
        return [nid for nid, node in sorted(self.nodes.items()) if rv in node.factor.dims]

    def topo_order(self) -> dict[int, int]:
        """Deterministic topological rank of the live nodes (parents first,
        ties by ascending id)."""
        indeg = {nid: 0 for nid in self.nodes}
        for cs in self.edges.values():
            for c in cs:
                indeg[c] += 1
        ready = sorted(nid for nid, d in indeg.items() if d == 0)
        rank: dict[int, int] = {}
        while ready:
            nid = ready.pop(0)
            rank[nid] = len(rank)
            opened = []
            for c in sorted(self.children(nid)):
                indeg[c] -= 1
                if indeg[c] == 0:
                    opened.append(c)
            ready = sorted(ready + opened)
        assert len(rank) == len(self.nodes), "graph has a cycle"
        return rank

    def is_acyclic(self) -> bool:
        seen: set[int] = set()
        onpath: set[int] = set()

        def visit(n: int) -> bool:
            if n in onpath:
                return False
            if n in seen:
                return True
            seen.add(n)
            onpath.add(n)
            ok = all(visit(c) for c in self.children(n))
            onpath.discard(n)
            return ok

        return all(visit(n) for n in sorted(self.nodes))


@dataclass(frozen=True)
class SearchState:
    subgoals: tuple[SubGoal, ...]
    theta: Substitution
    graph: PartialGraph
    marginalized: tuple[GroundRV, ...] = ()
    trace: tuple[tuple[str, tuple], ...] = ()
    fresh_n: int = 0  # fresh-variable high-water mark along this path

    def live_nodes(self) -> list[Node]:
        return [self.graph.nodes[n] for n in sorted(self.graph.nodes)]


@dataclass(frozen=True)
class MarkerTable:
    """Predicate-level upper bounds on discoverable children, produced by
    propagating marks from the query's predicates to their possible causal
    ancestors.  Instance-heavy knowledge bases (many ground children per
    predicate) can exceed these bounds; ``detect_marg_error`` remains the
    soundness backstop there."""

    expected: dict[str, int]
    marked: frozenset[str]


def build_marker_table(kb: KnowledgeBase, query: Query) -> MarkerTable:
    parents: dict[str, set[str]] = {}
    for dep in kb.dependencies:
        ps = parents.setdefault(dep.head.predicate, set())
        for atom in dep.alt_body():
            ps.add(atom.predicate)
    seeds = [query.hypothesis.predicate] + [e.predicate for e in query.evidence]
    marked: set[str] = set()
    frontier = list(dict.fromkeys(seeds))
    while frontier:
        p = frontier.pop(0)
        if p in marked:
            continue
        marked.add(p)
        frontier.extend(sorted(parents.get(p, ())))
    expected: dict[str, int] = {}
    for child in sorted(marked):
        for parent in sorted(parents.get(child, ())):
            expected[parent] = expected.get(parent, 0) + 1
    return MarkerTable(expected, frozenset(marked))


def cpt_factor(
    dep: ProbDependency, head_rv: GroundRV, parent_rvs: tuple[GroundRV, ...]
) -> Factor:
    """Materialize a dependency statement's CPT as a factor over the ground
    head and parent variables (statement body order)."""
    dims = (head_rv, *parent_rvs)
    shape = tuple(len(rv.outcomes) for rv in dims)
    values = np.empty(shape)
    for (h, bt), p in dep.cpt.items():
        idx = (head_rv.outcomes.index(h),) + tuple(
            rv.outcomes.index(o) for rv, o in zip(parent_rvs, bt)
        )
        values[idx] = p
    return Factor.make(dims, values)


class SearchOps:
    """The operator suite, bound to one knowledge base and query."""

    def __init__(self, kb: KnowledgeBase, query: Query, depth: int = DEFAULT_DEPTH):
        self.kb = kb
        self.query = query
        self.depth = depth
        self.decls = kb.alt_decls()
        self.hypothesis_rv = self._rv_from_query_atom(query.hypothesis)
        self.evidence: dict[GroundRV, str] = {}
        for atom in query.evidence:
            decl = self.decls[atom.predicate]
            slot_arg = atom.args[decl.slot]
            assert isinstance(slot_arg, Constant)
            self.evidence[self._rv_from_query_atom(atom)] = slot_arg.name

    # ---- plumbing ------------------------------------------------------

    def _rv_from_query_atom(self, atom: Atom) -> GroundRV:
        decl = self.decls[atom.predicate]
        args = tuple(
            a.name
            for i, a in enumerate(atom.args)
            if i != decl.slot and isinstance(a, Constant)
        )
        return GroundRV(atom.predicate, args, decl.outcomes)

    def is_alt(self, atom: Atom) -> bool:
        return atom.predicate in self.decls

    def rv_of(self, atom: Atom, theta: Substitution) -> GroundRV | None:
        """Ground variable denoted by an alt atom under theta, or None if
        an object argument is still unbound."""
        decl = self.decls.get(atom.predicate)
        if decl is None:
            return None
        args = []
        for i, a in enumerate(atom.args):
            if i == decl.slot:
                continue
            if isinstance(a, OutcomeSet):
                return None
            t = theta.walk(a)
            if not isinstance(t, Constant):
                return None
            args.append(t.name)
        return GroundRV(atom.predicate, tuple(args), decl.outcomes)

    def rv_atom(self, rv: GroundRV, namer: FreshNamer) -> Atom:
        """Surface atom for a ground variable, fresh variable in the alt
        slot so it unifies with any outcome or placeholder."""
        decl = self.decls[rv.predicate]
        namer.n += 1
        slot_var = Variable(f"#{namer.n}")
        args: list = []
        it = iter(rv.args)
        for i in range(decl.arity):
            args.append(slot_var if i == decl.slot else Constant(next(it)))
        return Atom(rv.predicate, tuple(args))

    def unify_alt(
        self, goal: Atom, other: Atom, theta: Substitution, namer: FreshNamer
    ) -> Substitution | None:
        """Unify two atoms whose alt slots may hold outcome-set literals;
        a slot variable bound to a constant must name a declared outcome."""
        constraints: list[tuple[Variable, tuple[str, ...]]] = []

        def widen(atom: Atom) -> Atom:
            slot = atom.alt_slot()
            if slot is None:
                return atom
            oset = atom.args[slot]
            assert isinstance(oset, OutcomeSet)
            widened = namer.widen_alt(atom)
            var = widened.args[slot]
            assert isinstance(var, Variable)
            constraints.append((var, oset.outcomes))
            return widened

        th = unify(widen(goal), widen(other), theta)
        if th is None:
            return None
        for var, outcomes in constraints:
            val = th.walk(var)
            if isinstance(val, Constant) and val.name not in outcomes:
                return None
        return th

    def goal_str(self, sg: SubGoal, state: SearchState) -> str:
        return str(state.theta.apply(sg.atom))

    # ---- initial state -------------------------------------------------

    def init_state(self) -> SearchState:
        subgoals = [SubGoal(self.query.hypothesis)]
        subgoals += [SubGoal(e) for e in self.query.evidence]
        return SearchState(tuple(subgoals), EMPTY, PartialGraph())

    # ---- construction operators ----------------------------------------

    def find_in_graph_candidates(
        self, state: SearchState, i: int
    ) -> list[tuple[int, GroundRV, Substitution, int]]:
        """Graph nodes holding a variable that unifies with subgoal ``i``.
        Nonempty candidates make find_prob_dependency inapplicable."""
        sg = state.subgoals[i]
        if not self.is_alt(sg.atom):
            return []
        out = []
        for nid in sorted(state.graph.nodes):
            for rv in state.graph.nodes[nid].members:
                if rv.predicate != sg.atom.predicate:
                    continue
                namer = FreshNamer(start=state.fresh_n)
                th = self.unify_alt(sg.atom, self.rv_atom(rv, namer), state.theta, namer)
                if th is not None:
                    out.append((nid, rv, th, namer.n))
        return out

    def op_find_in_graph(
        self, state: SearchState, i: int, node_id: int | None = None
    ) -> list[SearchState]:
        """Resolve subgoal ``i`` against an existing node, attaching the
        pending out-edges.  Successors that would close a directed cycle
        are silently pruned."""
        sg = state.subgoals[i]
        succs = []
        for nid, rv, th, fresh_n in self.find_in_graph_candidates(state, i):
            if node_id is not None and nid != node_id:
                continue
            pending = tuple(sorted({state.graph.resolve(c) for c in sg.pending}))
            if any(state.graph.reaches(c, nid) for c in pending):
                continue
            graph = state.graph.add_edges(nid, pending, rv)
            succs.append(
                replace(
                    state,
                    subgoals=state.subgoals[:i] + state.subgoals[i + 1 :],
                    theta=th,
                    graph=graph,
                    fresh_n=fresh_n,
                    trace=state.trace + (("find_in_graph", (self.goal_str(sg, state), nid)),),
                )
            )
        return succs

    def op_prove_goal(
        self, state: SearchState, i: int, only: int | None = None
    ) -> list[SearchState]:
        """Resolve a plain subgoal by deduction, one successor per proof."""
        sg = state.subgoals[i]
        if self.is_alt(sg.atom):
            raise OperatorError(f"{sg.atom} is a random variable, not a provable goal")
        namer = FreshNamer(start=state.fresh_n)
        result = prove(sg.atom, state.theta, self.kb, self.depth, namer=namer)
        succs = []
        for k, th in enumerate(result.answers):
            if only is not None and k != only:
                continue
            tag: tuple = (self.goal_str(sg, state), k)
            if result.depth_exceeded:
                tag += ("depth_truncated",)
            succs.append(
                replace(
                    state,
                    subgoals=state.subgoals[:i] + state.subgoals[i + 1 :],
                    theta=th,
                    fresh_n=namer.n,
                    trace=state.trace + (("prove_goal", tag),),
                )
            )
        return succs

    def dependency_candidates(
        self, state: SearchState, i: int
    ) -> list[tuple[int, ProbDependency]]:
        sg = state.subgoals[i]
        out = []
        for idx, dep in self.kb.dependencies_for(sg.atom.predicate):
            namer = FreshNamer(start=state.fresh_n)
            head = namer.rename(dep.head, {})
            if self.unify_alt(sg.atom, head, state.theta, namer) is not None:
                out.append((idx, dep))
        return out

    def op_find_prob_dependency(
        self, state: SearchState, i: int, statement_index: int | None = None
    ) -> list[SearchState]:
        """Resolve an alt subgoal by instantiating a dependency statement:
        a node is created for the goal's variable carrying the CPT factor
        (conditioned immediately if the variable is observed), pending
        out-edges are attached, and the statement body becomes new
        subgoals.  Only applicable when find_in_graph would fail."""
        sg = state.subgoals[i]
        if not self.is_alt(sg.atom):
            raise OperatorError(f"{sg.atom} is not a random-variable goal")
        if self.find_in_graph_candidates(state, i):
            raise OperatorError(
                f"find_in_graph applies to {sg.atom}; find_prob_dependency is barred"
            )
        succs = []
        for idx, dep in self.kb.dependencies_for(sg.atom.predicate):
            if statement_index is not None and idx != statement_index:
                continue
            namer = FreshNamer(start=state.fresh_n)
            mapping: dict[Variable, Variable] = {}
            head = namer.rename(dep.head, mapping)
            th = self.unify_alt(sg.atom, head, state.theta, namer)
            if th is None:
                continue
            head_rv = self.rv_of(head, th)
            if head_rv is None:
                raise OperatorError(
                    f"dependency for {sg.atom} leaves its variable non-ground"
                )
            body = tuple(namer.rename(a, mapping) for a in dep.body)
            parent_rvs = []
            for atom in body:
                if atom.alt_slot() is None:
                    continue
                rv = self.rv_of(atom, th)
                if rv is None:
                    raise OperatorError(
                        f"conditioning atom {atom} of {dep.head} is non-ground"
                    )
                parent_rvs.append(rv)
            fac = cpt_factor(dep, head_rv, tuple(parent_rvs))
            if head_rv in self.evidence:
                fac = condition(fac, head_rv, self.evidence[head_rv])
            graph, nid = state.graph.add_node((head_rv,), fac)
            pending = tuple(sorted({graph.resolve(c) for c in sg.pending}))
            graph = graph.add_edges(nid, pending, head_rv)
            new_goals = tuple(
                SubGoal(a, (nid,) if a.alt_slot() is not None else ()) for a in body
            )
            succs.append(
                replace(
                    state,
                    subgoals=state.subgoals[:i] + state.subgoals[i + 1 :] + new_goals,
                    theta=th,
                    graph=graph,
                    fresh_n=namer.n,
                    trace=state.trace
                    + (("find_prob_dependency", (self.goal_str(sg, state), idx)),),
                )
            )
        return succs

    def detect_marg_error(self, state: SearchState) -> tuple[Atom, GroundRV] | None:
        """Fail check: some subgoal unifies with a marginalized variable,
        i.e. that variable lost a child that was summed away too early."""
        for sg in state.subgoals:
            if not self.is_alt(sg.atom):
                continue
            for rv in state.marginalized:
                if rv.predicate != sg.atom.predicate:
                    continue
                namer = FreshNamer(start=state.fresh_n)
                th = self.unify_alt(sg.atom, self.rv_atom(rv, namer), state.theta, namer)
                if th is not None:
                    return (state.theta.apply(sg.atom), rv)
        return None

    # ---- evaluation operators ------------------------------------------

    def merge_admissible(self, state: SearchState, ids: list[int]) -> bool:
        """Contracting ``ids`` to one node must not create a directed cycle:
        no path may leave the set and come back."""
        group = set(ids)
        for u in group:
            stack = [c for c in state.graph.children(u) if c not in group]
            seen = set(stack)
            while stack:
                n = stack.pop()
                if n in group:
                    return False
                for c in state.graph.children(n):
                    if c not in seen:
                        seen.add(c)
                        stack.append(c)
        return True

    def op_multiply(self, state: SearchState, a: int, b: int) -> SearchState:
        """Merge two nodes, multiplying their factors."""
        a, b = state.graph.resolve(a), state.graph.resolve(b)
        if a == b or a not in state.graph.nodes or b not in state.graph.nodes:
            raise OperatorError("multiply needs two distinct live nodes")
        if not self.merge_admissible(state, [a, b]):
            raise OperatorError("merging these nodes would create a directed cycle")
        fac = multiply(state.graph.nodes[a].factor, state.graph.nodes[b].factor)
        graph, _ = state.graph.merge(a, b, fac)
        return replace(
            state, graph=graph, trace=state.trace + (("multiply", (a, b)),)
        )

    def subgoal_mentions(self, state: SearchState, rv: GroundRV) -> bool:
        for sg in state.subgoals:
            if not self.is_alt(sg.atom) or sg.atom.predicate != rv.predicate:
                continue
            namer = FreshNamer(start=state.fresh_n)
            if self.unify_alt(sg.atom, self.rv_atom(rv, namer), state.theta, namer):
                return True
        return False

    def margin_safe(
        self, rv: GroundRV, state: SearchState, marker: MarkerTable
    ) -> bool:
        """True when every child the marker pass anticipates for this
        variable's predicate has been attached, or when no construction
        remains to add one."""
        if not state.subgoals:
            return True
        discovered = state.graph.child_counts.get(rv, 0)
        return discovered >= marker.expected.get(rv.predicate, 0)

    def op_margin(
        self, state: SearchState, rv: GroundRV, marker: MarkerTable | None = None
    ) -> SearchState:
        """Sum a variable out of the unique factor mentioning it and record
        it as absorbed."""
        if rv not in state.graph.rv_index:
            raise OperatorError(f"{rv} has no live node")
        refs = state.graph.referencing(rv)
        if len(refs) != 1:
            raise OperatorError(f"{rv} is referenced by {len(refs)} nodes, not 1")
        if self.subgoal_mentions(state, rv):
            raise OperatorError(f"a pending subgoal still mentions {rv}")
        if marker is not None and not self.margin_safe(rv, state, marker):
            raise OperatorError(f"margin gate rejects {rv}: children may be missing")
        node = state.graph.nodes[refs[0]]
        assert state.graph.rv_index[rv] == refs[0], "indexed node must hold the factor"
        graph = state.graph.drop_rv(rv, marginalize(node.factor, rv))
        return replace(
            state,
            graph=graph,
            marginalized=state.marginalized + (rv,),
            trace=state.trace + (("margin", (str(rv),)),),
        )

    # ---- termination -----------------------------------------------------

    def is_terminal(self, state: SearchState) -> bool:
        if state.subgoals or len(state.graph.nodes) != 1:
            return False
        (node,) = state.graph.nodes.values()
        return node.factor.dims == (self.hypothesis_rv,)

    def answer(self, state: SearchState) -> dict[str, float]:
        assert self.is_terminal(state)
        (node,) = state.graph.nodes.values()
        f = normalize(node.factor)
        return {
            out: float(f.values[i]) for i, out in enumerate(self.hypothesis_rv.outcomes)
        }

    def check_invariants(self, state: SearchState):
        """Debug-build assertions run after every applied action."""
        g = state.graph
        assert g.is_acyclic(), "partial graph acquired a cycle"
        assert set(g.rv_index).isdisjoint(state.marginalized), "M* overlaps rv_index"
        for rv, nid in g.rv_index.items():
            assert nid in g.nodes and rv in g.nodes[nid].members
        for nid, node in g.nodes.items():
            assert np.all(node.factor.values >= 0.0)
        for p, cs in g.edges.items():
            assert p in g.nodes and all(c in g.nodes for c in cs)
