"""Ground-truth by exhaustion.

``ground_network`` closes the query over the knowledge base with the
construction rules alone (no evaluation), yielding every ground variable
the model needs together with its instantiated CPT.  ``exact_posterior``
then enumerates the full joint with plain dictionary lookups and Python
arithmetic; it deliberately shares no code with the factor algebra so the
two routes check each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .deduce import DEFAULT_DEPTH, EMPTY, FreshNamer, prove
from .factor import GroundRV, InconsistentEvidenceError
from .lang import Atom, Constant, KnowledgeBase, ProbKBError, Query
from .search import QueryUnanswerableError, SearchOps

MAX_JOINT_CELLS = 2**20


class CycleError(ProbKBError):
    """The instantiated dependency statements form a directed cycle."""


class ResourceCapError(ProbKBError):
    """Deduction depth or joint size exceeded a hard cap."""


@dataclass(frozen=True)
class CPTInstance:
    rv: GroundRV
    parents: tuple[GroundRV, ...]
    table: dict[tuple[str, tuple[str, ...]], float]
    statement_index: int


@dataclass
class GroundNet:
    rvs: list[GroundRV] = field(default_factory=list)  # discovery order
    cpts: list[CPTInstance] = field(default_factory=list)
    alt_slots: dict[str, int] = field(default_factory=dict)

    def joint_cells(self) -> int:
        return math.prod(len(rv.outcomes) for rv in self.rvs)

    def rv_of_atom(self, atom: Atom) -> GroundRV:
        """Ground variable named by a fully ground query atom."""
        slot = self.alt_slots[atom.predicate]
        args = tuple(a.name for i, a in enumerate(atom.args) if i != slot)  # type: ignore[union-attr]
        target = GroundRV(atom.predicate, args, ())
        for rv in self.rvs:
            if rv == target:
                return rv
        raise ValueError(f"{atom} names no variable of this network")


def ground_network(kb: KnowledgeBase, query: Query, depth: int = DEFAULT_DEPTH) -> GroundNet:
    """Instantiate, to fixpoint, the dependency statement of every variable
    the query reaches.  Each variable takes the first statement that
    unifies and whose plain conditions are provable (clause order), the
    same resolution the engine's default search commits to first."""
    ops = SearchOps(kb, query, depth=depth)
    work: list[GroundRV] = [ops.hypothesis_rv]
    for atom in query.evidence:
        rv = ops.rv_of(atom, EMPTY)
        if rv is not None and rv not in work:
            work.append(rv)
    net = GroundNet(alt_slots={p: d.slot for p, d in ops.decls.items()})
    done: set[GroundRV] = set()
    while work:
        rv = work.pop(0)
        if rv in done:
            continue
        done.add(rv)
        net.rvs.append(rv)
        instance = _instantiate(kb, ops, rv, depth)
        net.cpts.append(instance)
        for parent in instance.parents:
            if parent not in done:
                work.append(parent)
    _check_acyclic(net)
    if net.joint_cells() > MAX_JOINT_CELLS:
        raise ResourceCapError(
            f"joint has {net.joint_cells()} cells, cap is {MAX_JOINT_CELLS}"
        )
    return net


def _instantiate(kb: KnowledgeBase, ops: SearchOps, rv: GroundRV, depth: int) -> CPTInstance:
    for idx, dep in kb.dependencies_for(rv.predicate):
        namer = FreshNamer()
        mapping: dict = {}
        head = namer.rename(dep.head, mapping)
        theta = ops.unify_alt(ops.rv_atom(rv, namer), head, EMPTY, namer)
        if theta is None:
            continue
        body = [namer.rename(a, mapping) for a in dep.body]
        ok = True
        for atom in body:
            if atom.alt_slot() is not None:
                continue
            result = prove(atom, theta, kb, depth, namer=namer)
            if not result.answers:
                if result.depth_exceeded:
                    raise ResourceCapError(
                        f"deduction depth {depth} exceeded proving {atom}"
                    )
                ok = False
                break
            theta = result.answers[0]
        if not ok:
            continue
        parents = []
        for atom in body:
            if atom.alt_slot() is None:
                continue
            prv = ops.rv_of(atom, theta)
            if prv is None:
                raise QueryUnanswerableError(f"conditioning atom {atom} is non-ground")
            parents.append(prv)
        return CPTInstance(rv, tuple(parents), dict(dep.cpt), idx)
    raise QueryUnanswerableError(f"no dependency statement applies to {rv}")


def _check_acyclic(net: GroundNet):
    parents = {c.rv: c.parents for c in net.cpts}
    seen: set[GroundRV] = set()
    onpath: set[GroundRV] = set()

    def visit(rv: GroundRV):
        if rv in onpath:
            raise CycleError(f"dependency cycle through {rv}")
        if rv in seen:
            return
        seen.add(rv)
        onpath.add(rv)
        for p in parents.get(rv, ()):
            visit(p)
        onpath.discard(rv)

    for rv in net.rvs:
        visit(rv)


def exact_posterior(net: GroundNet, query: Query) -> dict[str, float]:
    """Posterior over the hypothesis outcomes by summing the full joint."""
    if net.joint_cells() > MAX_JOINT_CELLS:
        raise ResourceCapError(
            f"joint has {net.joint_cells()} cells, cap is {MAX_JOINT_CELLS}"
        )
    rvs = net.rvs
    index = {rv: k for k, rv in enumerate(rvs)}
    hypothesis = net.rv_of_atom(query.hypothesis)
    evidence: dict[GroundRV, str] = {}
    for atom in query.evidence:
        rv = net.rv_of_atom(atom)
        slot_arg = atom.args[net.alt_slots[atom.predicate]]
        assert isinstance(slot_arg, Constant)
        evidence[rv] = slot_arg.name

    accum = {out: 0.0 for out in hypothesis.outcomes}
    for world in itertools.product(*(rv.outcomes for rv in rvs)):
        if any(world[index[rv]] != out for rv, out in evidence.items()):
            continue
        p = 1.0
        for cpt in net.cpts:
            h = world[index[cpt.rv]]
            bt = tuple(world[index[parent]] for parent in cpt.parents)
            p *= cpt.table[(h, bt)]
        accum[world[index[hypothesis]]] += p
    total = sum(accum.values())
    if total <= 0.0:
        raise InconsistentEvidenceError("evidence has probability 0 in the full joint")
    return {out: accum[out] / total for out in hypothesis.outcomes}


def posterior(kb: KnowledgeBase, query: Query, depth: int = DEFAULT_DEPTH) -> dict[str, float]:
    """Convenience: ground the network and enumerate in one call."""
    return exact_posterior(ground_network(kb, query, depth=depth), query)
