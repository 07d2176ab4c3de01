"""Unification and Horn-clause deduction.

Terms are flat (variables and constants only), which keeps unification
linear and the occurs check trivial.  ``prove`` is depth-bounded SLD
resolution over the KB's definite clauses; answers come back in clause
order and are deduplicated on the ground instance they assign to the goal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lang import Atom, Constant, KnowledgeBase, OutcomeSet, Term, Variable

DEFAULT_DEPTH = 64


@dataclass(frozen=True)
class Substitution:
    """Immutable binding map; extension is the only way to grow one."""

    bindings: dict[Variable, Term] = field(default_factory=dict)

    def walk(self, t: Term) -> Term:
        while isinstance(t, Variable) and t in self.bindings:
            t = self.bindings[t]
        return t

    def extend(self, var: Variable, term: Term) -> "Substitution":
        new = dict(self.bindings)
        new[var] = term
        return Substitution(new)

    def apply(self, atom: Atom) -> Atom:
        args = tuple(
            a if isinstance(a, OutcomeSet) else self.walk(a) for a in atom.args
        )
        return Atom(atom.predicate, args)

    def restrict(self, variables: set[Variable]) -> "Substitution":
        """Project onto ``variables``, resolving each fully."""
        return Substitution({v: self.walk(v) for v in variables if v in self.bindings})

    def __len__(self) -> int:
        return len(self.bindings)


EMPTY = Substitution()


def occurs(var: Variable, term: Term, theta: Substitution) -> bool:
    return theta.walk(term) == var


def unify(a, b, theta: Substitution | None = None) -> Substitution | None:
    """Most general unifier of two terms or atoms extending ``theta``;
    ``None`` means failure."""
    theta = EMPTY if theta is None else theta
    if isinstance(a, Atom) and isinstance(b, Atom):
        if a.predicate != b.predicate or len(a.args) != len(b.args):
            return None
        for x, y in zip(a.args, b.args):
            theta = unify(x, y, theta)
            if theta is None:
                return None
        return theta
    if isinstance(a, OutcomeSet) or isinstance(b, OutcomeSet):
        raise ValueError("outcome-set literals do not unify; widen them first")
    a, b = theta.walk(a), theta.walk(b)
    if a == b:
        return theta
    if isinstance(a, Variable):
        if occurs(a, b, theta):
            return None
        return theta.extend(a, b)
    if isinstance(b, Variable):
        if occurs(b, a, theta):
            return None
        return theta.extend(b, a)
    return None


class FreshNamer:
    """Deterministic fresh-variable supply; '#' never appears in source, so
    renamed variables cannot collide with user ones."""

    def __init__(self, start: int = 0, prefix: str = "#"):
        self.prefix = prefix
        self.n = start

    def rename(self, atom: Atom, mapping: dict[Variable, Variable]) -> Atom:
        args: list[Term | OutcomeSet] = []
        for a in atom.args:
            if isinstance(a, Variable):
                if a not in mapping:
                    self.n += 1
                    mapping[a] = Variable(f"{self.prefix}{self.n}")
                args.append(mapping[a])
            else:
                args.append(a)
        return Atom(atom.predicate, tuple(args))

    def widen_alt(self, atom: Atom) -> Atom:
        """Replace an outcome-set literal with a fresh variable so the atom
        can take part in ordinary unification."""
        slot = atom.alt_slot()
        if slot is None:
            return atom
        self.n += 1
        args = list(atom.args)
        args[slot] = Variable(f"{self.prefix}{self.n}")
        return Atom(atom.predicate, tuple(args))


@dataclass
class ProofResult:
    answers: list[Substitution]
    depth_exceeded: bool = False


def prove(
    goal: Atom,
    theta: Substitution,
    kb: KnowledgeBase,
    depth: int = DEFAULT_DEPTH,
    namer: FreshNamer | None = None,
) -> ProofResult:
    """All substitutions (extending ``theta``) under which ``goal`` follows
    from the KB's facts and rules, complete up to the depth bound."""
    if goal.alt_slot() is not None:
        raise ValueError(f"cannot prove alt atom {goal}")
    clauses = kb.clauses
    namer = namer if namer is not None else FreshNamer()
    result = ProofResult([])
    goal_vars = set(theta.apply(goal).variables()) | set(theta.bindings)

    def solve(goals: tuple[Atom, ...], th: Substitution, budget: int):
        if not goals:
            answer = th.restrict(goal_vars)
            if answer not in result.answers:
                result.answers.append(answer)
            return
        if budget <= 0:
            result.depth_exceeded = True
            return
        first, rest = goals[0], goals[1:]
        for clause in clauses:
            if clause.head.predicate != first.predicate:
                continue
            mapping: dict[Variable, Variable] = {}
            head = namer.rename(clause.head, mapping)
            th2 = unify(first, head, th)
            if th2 is None:
                continue
            body = tuple(namer.rename(a, mapping) for a in clause.body)
            solve(body + rest, th2, budget - 1)

    solve((goal,), theta, depth)
    return result
