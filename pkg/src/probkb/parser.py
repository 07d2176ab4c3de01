"""Concrete syntax for knowledge bases and queries.

Statement grammar (``%`` comments run to end of line)::

    fact:   atom.
    rule:   atom :- atom {, atom}.
    prob:   prob altatom [<- batom {, batom}] = { entry {; entry} }.
    entry:  (OUT [| OUT {, OUT}]) : number

An ``altatom`` carries an inline outcome set in exactly one argument slot,
e.g. ``coma({YES,NO},?y)``.  Variables are ``?name``; constants are bare
identifiers (hyphens allowed, e.g. ``serum-calcium``).  Queries are
``altatom [| ground-altatom {, ground-altatom}]`` with evidence outcomes
written in the alt slot, e.g. ``coma(YES,SAM)``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lang import (
    Atom,
    Constant,
    HornClause,
    KBSyntaxError,
    KnowledgeBase,
    OutcomeSet,
    ProbDependency,
    Query,
    QueryError,
    Term,
    Variable,
    validate_kb,
)

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT VAR NUMBER PUNCT EOF
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(msg):
        raise KBSyntaxError(msg, line, col)

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c == ":" and text[i : i + 2] == ":-":
            toks.append(Token("PUNCT", ":-", line, start_col))
            i += 2
            col += 2
            continue
        if c == "<" and text[i : i + 2] == "<-":
            toks.append(Token("PUNCT", "<-", line, start_col))
            i += 2
            col += 2
            continue
        if c in "(){},;.|=:":
            toks.append(Token("PUNCT", c, line, start_col))
            i += 1
            col += 1
            continue
        if c == "?":
            j = i + 1
            if j >= n or text[j] not in _IDENT_START:
                err("expected identifier after '?'")
            while j < n and text[j] in _IDENT_CONT:
                j += 1
            toks.append(Token("VAR", text[i + 1 : j], line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and (text[j].isdigit() or text[j] in ".eE+-"):
                # a '.' followed by non-digit terminates the statement
                if text[j] == "." and (j + 1 >= n or not text[j + 1].isdigit()):
                    break
                if text[j] in "+-" and text[j - 1] not in "eE":
                    break
                j += 1
            toks.append(Token("NUMBER", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c in _IDENT_START:
            j = i
            while j < n and text[j] in _IDENT_CONT:
                j += 1
                # allow interior hyphens: serum-calcium
                if j < n and text[j] == "-" and j + 1 < n and text[j + 1] in _IDENT_CONT:
                    j += 1
            toks.append(Token("IDENT", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        err(f"unexpected character {c!r}")
    toks.append(Token("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def err(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise KBSyntaxError(msg, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            self.err(f"expected {want!r}, found {t.text!r}")
        return self.next()

    def at_punct(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "PUNCT" and t.text == text

    # ---- grammar -------------------------------------------------------

    def kb(self) -> KnowledgeBase:
        kb = KnowledgeBase()
        while self.peek().kind != "EOF":
            kb.statements.append(self.statement())
        return kb

    def statement(self) -> HornClause | ProbDependency:
        t = self.peek()
        if t.kind == "IDENT" and t.text == "prob":
            return self.prob_statement()
        head = self.atom()
        if head.alt_slot() is not None:
            self.err("outcome sets are only allowed in prob statements", t)
        if self.at_punct(":-"):
            self.next()
            body = [self.atom()]
            while self.at_punct(","):
                self.next()
                body.append(self.atom())
            self.expect("PUNCT", ".")
            return HornClause(head, tuple(body), pos=(t.line, t.col))
        self.expect("PUNCT", ".")
        return HornClause(head, (), pos=(t.line, t.col))

    def prob_statement(self) -> ProbDependency:
        t = self.expect("IDENT", "prob")
        head = self.atom()
        if head.alt_slot() is None:
            self.err("prob statement head needs an outcome set", t)
        body: list[Atom] = []
        if self.at_punct("<-"):
            self.next()
            body.append(self.atom())
            while self.at_punct(","):
                self.next()
                body.append(self.atom())
        self.expect("PUNCT", "=")
        self.expect("PUNCT", "{")
        cpt: dict[tuple[str, tuple[str, ...]], float] = {}
        while True:
            key, p, ktok = self.cpt_entry()
            if key in cpt:
                self.err(f"duplicate CPT entry for {key}", ktok)
            cpt[key] = p
            if self.at_punct(";"):
                self.next()
                continue
            break
        self.expect("PUNCT", "}")
        self.expect("PUNCT", ".")
        return ProbDependency(head, tuple(body), cpt, pos=(t.line, t.col))

    def cpt_entry(self) -> tuple[tuple[str, tuple[str, ...]], float, Token]:
        ktok = self.expect("PUNCT", "(")
        head_out = self.expect("IDENT").text
        body_outs: list[str] = []
        if self.at_punct("|"):
            self.next()
            body_outs.append(self.expect("IDENT").text)
            while self.at_punct(","):
                self.next()
                body_outs.append(self.expect("IDENT").text)
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ":")
        num = self.expect("NUMBER")
        try:
            p = float(num.text)
        except ValueError:
            self.err(f"bad number {num.text!r}", num)
        return (head_out, tuple(body_outs)), p, ktok

    def atom(self) -> Atom:
        name = self.expect("IDENT")
        args: list[Term | OutcomeSet] = []
        if self.at_punct("("):
            self.next()
            args.append(self.term())
            while self.at_punct(","):
                self.next()
                args.append(self.term())
            self.expect("PUNCT", ")")
        sets = [a for a in args if isinstance(a, OutcomeSet)]
        if len(sets) > 1:
            self.err(f"more than one outcome set in {name.text}", name)
        return Atom(name.text, tuple(args))

    def term(self) -> Term | OutcomeSet:
        t = self.peek()
        if t.kind == "VAR":
            self.next()
            return Variable(t.text)
        if t.kind == "IDENT":
            self.next()
            return Constant(t.text)
        if self.at_punct("{"):
            self.next()
            outs = [self.expect("IDENT").text]
            while self.at_punct(","):
                self.next()
                outs.append(self.expect("IDENT").text)
            self.expect("PUNCT", "}")
            if len(outs) < 2:
                self.err("outcome set needs at least 2 outcomes", t)
            return OutcomeSet(tuple(outs))
        self.err(f"expected term, found {t.text!r}")
        raise AssertionError  # unreachable


def parse_kb(text: str, *, validate: bool = True) -> KnowledgeBase:
    """Parse a knowledge base; with ``validate`` (the default) raise
    :class:`KBSemanticsError` listing every diagnostic."""
    kb = _Parser(text).kb()
    if validate:
        diags = validate_kb(kb)
        if diags:
            from .lang import KBSemanticsError

            raise KBSemanticsError("\n".join(str(d) for d in diags))
    return kb


def print_kb(kb: KnowledgeBase) -> str:
    """Render a KB back to its surface syntax; ``parse_kb(print_kb(kb))``
    is structurally equal to ``kb``."""
    return "".join(f"{stmt}\n" for stmt in kb.statements)


def parse_query(text: str, kb: KnowledgeBase) -> Query:
    """Parse ``altatom [| ground-altatom {, ...}]`` against the KB's
    alt declarations."""
    p = _Parser(text)
    hypothesis = p.atom()
    evidence: list[Atom] = []
    if p.at_punct("|"):
        p.next()
        evidence.append(p.atom())
        while p.at_punct(","):
            p.next()
            evidence.append(p.atom())
    if p.peek().kind != "EOF":
        p.err(f"trailing input {p.peek().text!r}")

    decls = kb.alt_decls()

    def check(atom: Atom, role: str, need_outcome: bool) -> Atom:
        decl = decls.get(atom.predicate)
        if decl is None:
            raise QueryError(f"unknown random variable predicate {atom.predicate!r}")
        if len(atom.args) != decl.arity:
            raise QueryError(
                f"{atom.predicate} takes {decl.arity} arguments, got {len(atom.args)}"
            )
        slot_arg = atom.args[decl.slot]
        if isinstance(slot_arg, OutcomeSet):
            raise QueryError(f"{role} atom {atom} must not carry an outcome set")
        if need_outcome:
            if not isinstance(slot_arg, Constant) or slot_arg.name not in decl.outcomes:
                raise QueryError(
                    f"evidence atom {atom} needs one of "
                    f"{{{','.join(decl.outcomes)}}} in slot {decl.slot}"
                )
        else:
            if not isinstance(slot_arg, Variable):
                raise QueryError(
                    f"hypothesis atom {atom} needs a variable in its alt slot"
                )
        for i, a in enumerate(atom.args):
            if i == decl.slot:
                continue
            if not isinstance(a, Constant):
                raise QueryError(f"{role} atom {atom} has non-ground argument {a}")
        return atom

    check(hypothesis, "hypothesis", need_outcome=False)
    for e in evidence:
        check(e, "evidence", need_outcome=True)
    return Query(hypothesis, tuple(evidence))
