"""Core types of the knowledge-base language.

A knowledge base mixes three kinds of statements:

* facts and definite Horn rules over flat atoms (no function symbols),
* alternative-outcome declarations: one argument slot of a predicate holds
  an outcome set ``{A,B,...}`` meaning exactly one outcome is true per
  ground instance (the predicate then names a random variable family),
* probabilistic dependency statements pairing such a head with conditioning
  atoms and a conditional probability table.

Types here are plain immutable dataclasses; parsing and printing live in
:mod:`probkb.parser`, semantic validation in :func:`validate_kb`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

#: Tolerance for probability comparisons (CPT row sums and the like).
PROB_TOL = 1e-9
#: Tolerance for algebraic identities (mass preservation, normalization).
ALGEBRA_TOL = 1e-12


class ProbKBError(Exception):
    """Base class for all engine errors."""


class KBSyntaxError(ProbKBError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class KBSemanticsError(ProbKBError):
    """Raised when a parsed knowledge base violates a language invariant."""


class QueryError(ProbKBError):
    """Malformed query (non-ground evidence, unknown predicate, ...)."""


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class OutcomeSet:
    """Inline outcome-set literal; only valid in a predicate's alt slot."""

    outcomes: tuple[str, ...]

    def __str__(self) -> str:
        return "{" + ",".join(self.outcomes) + "}"


Term = Variable | Constant


@dataclass(frozen=True)
class Atom:
    """A flat atom.  At most one argument may be an :class:`OutcomeSet`."""

    predicate: str
    args: tuple[Term | OutcomeSet, ...]

    def alt_slot(self) -> int | None:
        for i, a in enumerate(self.args):
            if isinstance(a, OutcomeSet):
                return i
        return None

    def variables(self) -> tuple[Variable, ...]:
        return tuple(a for a in self.args if isinstance(a, Variable))

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class HornClause:
    """Definite clause; ``body == ()`` for facts."""

    head: Atom
    body: tuple[Atom, ...] = ()
    pos: tuple[int, int] = field(default=(0, 0), compare=False)

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(a) for a in self.body)}."


@dataclass(frozen=True)
class ProbDependency:
    """``head`` is an alt atom; ``body`` mixes alt atoms and plain atoms.

    The CPT maps ``(head_outcome, body_outcome_tuple)`` to a probability,
    where the body tuple ranges over the alt atoms of the body in written
    order (plain body atoms are logical guards and carry no outcomes).
    """

    head: Atom
    body: tuple[Atom, ...]
    cpt: dict[tuple[str, tuple[str, ...]], float]
    pos: tuple[int, int] = field(default=(0, 0), compare=False)

    def alt_body(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.body if a.alt_slot() is not None)

    def plain_body(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.body if a.alt_slot() is None)

    def __eq__(self, other):
        if not isinstance(other, ProbDependency):
            return NotImplemented
        return (self.head, self.body, self.cpt) == (other.head, other.body, other.cpt)

    def __str__(self) -> str:
        out = f"prob {self.head}"
        if self.body:
            out += " <- " + ", ".join(str(a) for a in self.body)
        entries = []
        for key in _canonical_cpt_keys(self):
            h, bt = key
            label = h if not bt else f"{h}|{','.join(bt)}"
            entries.append(f"({label}):{self.cpt[key]!r}")
        return out + " = { " + "; ".join(entries) + " }."


def _canonical_cpt_keys(dep: ProbDependency):
    """Body-major entry order: all head outcomes per conditioning case."""
    head_set = dep.head.args[dep.head.alt_slot()]
    assert isinstance(head_set, OutcomeSet)
    body_sets = []
    for a in dep.alt_body():
        s = a.args[a.alt_slot()]
        assert isinstance(s, OutcomeSet)
        body_sets.append(s.outcomes)
    for bt in itertools.product(*body_sets):
        for h in head_set.outcomes:
            if (h, bt) in dep.cpt:
                yield (h, bt)


@dataclass(frozen=True)
class AltDecl:
    """Per-predicate alt declaration derived from the statements."""

    predicate: str
    slot: int
    outcomes: tuple[str, ...]
    arity: int  # full surface arity, alt slot included


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity}: {self.message}"


@dataclass
class KnowledgeBase:
    """Parsed statements in source order plus the derived alt declarations."""

    statements: list[HornClause | ProbDependency] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return self.statements == other.statements

    @property
    def clauses(self) -> list[HornClause]:
        return [s for s in self.statements if isinstance(s, HornClause)]

    @property
    def dependencies(self) -> list[ProbDependency]:
        return [s for s in self.statements if isinstance(s, ProbDependency)]

    def alt_decls(self) -> dict[str, AltDecl]:
        """First-occurrence declaration per predicate; conflicts surface in
        :func:`validate_kb`, not here."""
        decls: dict[str, AltDecl] = {}
        for dep in self.dependencies:
            for atom in (dep.head, *dep.alt_body()):
                slot = atom.alt_slot()
                if slot is None or atom.predicate in decls:
                    continue
                oset = atom.args[slot]
                assert isinstance(oset, OutcomeSet)
                decls[atom.predicate] = AltDecl(
                    atom.predicate, slot, oset.outcomes, len(atom.args)
                )
        return decls

    def dependencies_for(self, predicate: str) -> list[tuple[int, ProbDependency]]:
        return [
            (i, d)
            for i, d in enumerate(self.dependencies)
            if d.head.predicate == predicate
        ]


@dataclass(frozen=True)
class Query:
    """A conditional-probability question.

    ``hypothesis`` has a variable in its alt slot and ground object
    arguments; every ``evidence`` atom is fully ground with an outcome
    constant in its alt slot.
    """

    hypothesis: Atom
    evidence: tuple[Atom, ...] = ()

    def __str__(self) -> str:
        if not self.evidence:
            return str(self.hypothesis)
        return f"{self.hypothesis} | {', '.join(str(a) for a in self.evidence)}"


def validate_kb(kb: KnowledgeBase) -> list[Diagnostic]:
    """Check the semantic invariants of a parsed knowledge base.

    Returns an empty list iff the KB is well formed.  Checks: one alt slot
    per predicate with a consistent position and outcome set across all
    statements, fixed arity per predicate, CPTs total over the outcome
    cross product with rows summing to one, probabilities in [0,1], and
    every variable of an alt body atom bound by the head (so that parent
    random variables are ground whenever the head is).
    """
    diags: list[Diagnostic] = []
    decls: dict[str, AltDecl] = {}
    arities: dict[str, int] = {}

    def note(msg: str, pos: tuple[int, int]):
        diags.append(Diagnostic("error", msg, pos[0], pos[1]))

    def see_alt(atom: Atom, pos: tuple[int, int]):
        slot = atom.alt_slot()
        if slot is None:
            return
        oset = atom.args[slot]
        assert isinstance(oset, OutcomeSet)
        if len(oset.outcomes) < 2:
            note(f"outcome set of {atom.predicate} has fewer than 2 outcomes", pos)
        if len(set(oset.outcomes)) != len(oset.outcomes):
            note(f"duplicate outcomes in {atom.predicate}", pos)
        prev = decls.get(atom.predicate)
        if prev is None:
            decls[atom.predicate] = AltDecl(
                atom.predicate, slot, oset.outcomes, len(atom.args)
            )
        else:
            if prev.slot != slot:
                note(f"alt slot of {atom.predicate} moves between statements", pos)
            if prev.outcomes != oset.outcomes:
                note(
                    f"outcome set of {atom.predicate} conflicts with earlier "
                    f"declaration {{{','.join(prev.outcomes)}}}",
                    pos,
                )

    def see_arity(atom: Atom, pos: tuple[int, int]):
        prev = arities.setdefault(atom.predicate, len(atom.args))
        if prev != len(atom.args):
            note(
                f"arity conflict for {atom.predicate}: {len(atom.args)} vs {prev}",
                pos,
            )

    for stmt in kb.statements:
        if isinstance(stmt, HornClause):
            for atom in (stmt.head, *stmt.body):
                see_arity(atom, stmt.pos)
                if atom.alt_slot() is not None:
                    note(f"outcome set not allowed in rule atom {atom}", stmt.pos)
        else:
            head = stmt.head
            if head.alt_slot() is None:
                note(f"dependency head {head} lacks an outcome set", stmt.pos)
                continue
            for atom in (head, *stmt.body):
                see_arity(atom, stmt.pos)
                see_alt(atom, stmt.pos)
            head_vars = set(head.variables())
            for atom in stmt.alt_body():
                loose = [v for v in atom.variables() if v not in head_vars]
                if loose:
                    note(
                        f"variable {loose[0]} of conditioning atom {atom} not "
                        f"bound by the head {head}",
                        stmt.pos,
                    )
            diags.extend(_check_cpt(stmt))

    # predicates used both as random variables and as plain relations
    for stmt in kb.statements:
        atoms: tuple[Atom, ...]
        if isinstance(stmt, HornClause):
            atoms = (stmt.head, *stmt.body)
        else:
            atoms = stmt.plain_body()
        for atom in atoms:
            if atom.predicate in decls:
                note(
                    f"{atom.predicate} is declared as a random variable but "
                    f"used as a plain atom",
                    stmt.pos,
                )
    return diags


def _check_cpt(dep: ProbDependency) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    pos = dep.pos
    head_slot = dep.head.alt_slot()
    assert head_slot is not None
    head_set = dep.head.args[head_slot]
    assert isinstance(head_set, OutcomeSet)
    body_sets = []
    for a in dep.alt_body():
        s = a.args[a.alt_slot()]
        assert isinstance(s, OutcomeSet)
        body_sets.append(s.outcomes)

    expected = {
        (h, bt)
        for bt in itertools.product(*body_sets)
        for h in head_set.outcomes
    }
    got = set(dep.cpt)
    for key in sorted(expected - got):
        h, bt = key
        label = h if not bt else f"{h}|{','.join(bt)}"
        diags.append(Diagnostic("error", f"CPT entry ({label}) missing", *pos))
    for key in sorted(got - expected):
        h, bt = key
        label = h if not bt else f"{h}|{','.join(bt)}"
        diags.append(Diagnostic("error", f"CPT entry ({label}) not in outcome space", *pos))
    for key, p in dep.cpt.items():
        if not (0.0 <= p <= 1.0):
            diags.append(Diagnostic("error", f"probability {p!r} outside [0,1]", *pos))
    if expected == got:
        for bt in itertools.product(*body_sets):
            total = sum(dep.cpt[(h, bt)] for h in head_set.outcomes)
            if abs(total - 1.0) > PROB_TOL:
                cond = f" given ({','.join(bt)})" if bt else ""
                diags.append(
                    Diagnostic(
                        "error",
                        f"CPT row for {dep.head.predicate}{cond} sums to {total!r}, not 1",
                        *pos,
                    )
                )
    return diags
