"""Random knowledge-base generator for property testing and sweeps.

Generates small acyclic families of random variables (one shared object
argument), a dependency statement per variable with random strictly
positive CPT rows, and a matching query with random evidence.  Everything
is emitted as surface syntax so the parser is exercised on every case.
"""

from __future__ import annotations

import random

OUTCOME_POOL = ("O0", "O1", "O2")


def random_kb_text(
    rng: random.Random,
    max_rvs: int = 6,
    max_outcomes: int = 3,
    max_parents: int = 2,
    max_evidence: int = 2,
) -> tuple[str, str]:
    """Returns ``(kb_text, query_text)``."""
    n = rng.randint(1, max_rvs)
    outcomes = [
        OUTCOME_POOL[: rng.randint(2, max_outcomes)] for _ in range(n)
    ]
    lines = []
    for i in range(n):
        k = min(i, rng.randint(0, max_parents))
        parents = sorted(rng.sample(range(i), k)) if k else []
        head = f"v{i}({{{','.join(outcomes[i])}}},?x)"
        body = ", ".join(f"v{j}({{{','.join(outcomes[j])}}},?x)" for j in parents)
        entries = []
        for bt in _product([outcomes[j] for j in parents]):
            row = [rng.uniform(0.05, 1.0) for _ in outcomes[i]]
            total = sum(row)
            for out, p in zip(outcomes[i], row):
                label = out if not bt else f"{out}|{','.join(bt)}"
                entries.append(f"({label}):{p / total!r}")
        stmt = f"prob {head}"
        if body:
            stmt += f" <- {body}"
        lines.append(stmt + " = { " + "; ".join(entries) + " }.")
    kb_text = "\n".join(lines) + "\n"

    h = rng.randrange(n)
    others = [i for i in range(n) if i != h]
    rng.shuffle(others)
    ev = sorted(others[: rng.randint(0, min(max_evidence, len(others)))])
    query = f"v{h}(?a,C)"
    if ev:
        query += " | " + ", ".join(
            f"v{i}({rng.choice(outcomes[i])},C)" for i in ev
        )
    return kb_text, query


def _product(pools: list[tuple[str, ...] | list[str]]):
    if not pools:
        yield ()
        return
    for head in pools[0]:
        for rest in _product(pools[1:]):
            yield (head, *rest)
