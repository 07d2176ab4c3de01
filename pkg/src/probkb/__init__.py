"""probkb: anytime conditional-probability queries over declarative
knowledge bases (Horn rules + alternative-outcome variables + CPTs).

A query is answered by interleaving model construction (resolving the
hypothesis and evidence into a ground belief network, statement by
statement) with partial evaluation (merging nodes and summing variables
out), so an interrupted run still yields a principled partial answer.
"""

from .deduce import EMPTY, ProofResult, Substitution, prove, unify
from .engine import (
    AnytimeTrace,
    DefaultPolicy,
    ForcedEarlyMarginPolicy,
    QueryResult,
    RandomPolicy,
    replay_trace,
    run_query,
)
from .factor import (
    Factor,
    GroundRV,
    InconsistentEvidenceError,
    IntervalFactor,
    condition,
    eliminate,
    interval_eliminate,
    interval_marginalize,
    interval_multiply,
    interval_normalize,
    marginalize,
    multiply,
    normalize,
)
from .lang import (
    Atom,
    Constant,
    Diagnostic,
    HornClause,
    KBSemanticsError,
    KBSyntaxError,
    KnowledgeBase,
    OutcomeSet,
    ProbDependency,
    ProbKBError,
    Query,
    QueryError,
    Variable,
    validate_kb,
)
from .oracle import CycleError, GroundNet, ResourceCapError, exact_posterior, ground_network
from .parser import parse_kb, parse_query, print_kb
from .scoring import score, score_correct, score_default, score_interval
from .search import (
    AmbiguityError,
    MarkerTable,
    OperatorError,
    PartialGraph,
    QueryUnanswerableError,
    SearchOps,
    SearchState,
    SubGoal,
    build_marker_table,
    cpt_factor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
