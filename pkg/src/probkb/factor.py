"""Dense factor algebra over ground random variables.

A factor is a nonnegative tensor indexed by the outcome tuples of its
dimensions; dimensions are kept in a canonical sort order so that products
are associative and commutative on the nose.  The interval variant carries
[lo, hi] tensors and propagates conservative bounds: because every cell is
nonnegative, lo*lo / hi*hi products and lo/hi sums enclose every pointwise
selection, and the normalization bound for cell i is

    [ lo_i / (lo_i + sum_{j!=i} hi_j),  hi_i / (hi_i + sum_{j!=i} lo_j) ]

clamped to [0,1] with 0/0 resolved to the vacuous endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lang import ALGEBRA_TOL, ProbKBError


class InconsistentEvidenceError(ProbKBError):
    """The observed evidence has probability zero under the model."""


@dataclass(frozen=True, order=True)
class GroundRV:
    """A ground random variable: predicate + object constants.  The alt
    slot is abstracted away; identity ignores the outcome list (the KB
    validator guarantees it is consistent per predicate)."""

    predicate: str
    args: tuple[str, ...]
    outcomes: tuple[str, ...] = field(compare=False)

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(self.args)})"


def _freeze(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class Factor:
    dims: tuple[GroundRV, ...]
    values: np.ndarray

    def __post_init__(self):
        assert list(self.dims) == sorted(self.dims), "dims must be canonical"
        assert len(set(self.dims)) == len(self.dims), "dims must be distinct"
        assert self.values.shape == tuple(len(rv.outcomes) for rv in self.dims)
        assert np.all(self.values >= 0.0), "negative cell"
        object.__setattr__(self, "values", _freeze(self.values))

    @classmethod
    def make(cls, dims: tuple[GroundRV, ...], values: np.ndarray) -> "Factor":
        """Build a factor from dims in any order, sorting canonically."""
        order = sorted(range(len(dims)), key=lambda i: dims[i])
        return cls(
            tuple(dims[i] for i in order),
            np.ascontiguousarray(np.transpose(values, order)) if dims else np.asarray(values, dtype=np.float64),
        )

    @classmethod
    def scalar(cls, value: float = 1.0) -> "Factor":
        return cls((), np.asarray(value, dtype=np.float64))

    def total(self) -> float:
        return float(self.values.sum())

    def __eq__(self, other):
        if not isinstance(other, Factor):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.values, other.values)


def _aligned(f_dims, values, out_dims) -> np.ndarray:
    """View of ``values`` broadcastable over ``out_dims``."""
    shape = [1] * len(out_dims)
    src_axes = []
    for rv in f_dims:
        i = out_dims.index(rv)
        shape[i] = len(rv.outcomes)
        src_axes.append(i)
    order = sorted(range(len(f_dims)), key=lambda k: src_axes[k])
    arranged = np.transpose(values, order) if f_dims else values
    return arranged.reshape(shape)


def multiply(f: Factor, g: Factor) -> Factor:
    """Pointwise product over the union of the two dimension sets."""
    for rv in f.dims:
        for sv in g.dims:
            if rv == sv and rv.outcomes != sv.outcomes:
                raise ValueError(f"outcome spaces of {rv} disagree")
    out_dims = tuple(sorted(set(f.dims) | set(g.dims)))
    fv = _aligned(f.dims, f.values, out_dims)
    gv = _aligned(g.dims, g.values, out_dims)
    return Factor(out_dims, fv * gv)


def marginalize(f: Factor, v: GroundRV) -> Factor:
    if v not in f.dims:
        raise ValueError(f"{v} is not a dimension of this factor")
    axis = f.dims.index(v)
    return Factor(tuple(rv for rv in f.dims if rv != v), f.values.sum(axis=axis))


def condition(f: Factor, v: GroundRV, outcome: str) -> Factor:
    """Zero every cell where ``v != outcome``; dimensions are unchanged."""
    if v not in f.dims:
        raise ValueError(f"{v} is not a dimension of this factor")
    rv = f.dims[f.dims.index(v)]
    if outcome not in rv.outcomes:
        raise ValueError(f"{outcome!r} is not an outcome of {v}")
    axis = f.dims.index(v)
    mask_shape = [1] * f.values.ndim
    mask_shape[axis] = len(rv.outcomes)
    mask = np.zeros(mask_shape)
    mask.flat[rv.outcomes.index(outcome)] = 1.0
    return Factor(f.dims, f.values * mask)


def normalize(f: Factor) -> Factor:
    total = f.values.sum()
    if total <= 0.0:
        raise InconsistentEvidenceError("all-zero factor: evidence has probability 0")
    return Factor(f.dims, f.values / total)


def eliminate(factors: list[Factor], keep: tuple[GroundRV, ...]) -> Factor:
    """Multiply out a factor set, summing away everything not in ``keep``.
    Elimination proceeds in canonical variable order; any order gives the
    same answer up to roundoff."""
    factors = list(factors)
    drop = sorted({rv for f in factors for rv in f.dims} - set(keep))
    for v in drop:
        touching = [f for f in factors if v in f.dims]
        rest = [f for f in factors if v not in f.dims]
        prod = touching[0]
        for f in touching[1:]:
            prod = multiply(prod, f)
        factors = rest + [marginalize(prod, v)]
    result = factors[0]
    for f in factors[1:]:
        result = multiply(result, f)
    return result


# ---- interval factors ---------------------------------------------------


@dataclass(frozen=True)
class IntervalFactor:
    dims: tuple[GroundRV, ...]
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        assert list(self.dims) == sorted(self.dims)
        assert np.all(self.lo >= 0.0) and np.all(self.lo <= self.hi + ALGEBRA_TOL)
        object.__setattr__(self, "lo", _freeze(self.lo))
        object.__setattr__(self, "hi", _freeze(self.hi))

    @classmethod
    def from_factor(cls, f: Factor) -> "IntervalFactor":
        return cls(f.dims, f.values, f.values)

    @classmethod
    def vacuous(cls, rv: GroundRV) -> "IntervalFactor":
        n = len(rv.outcomes)
        return cls((rv,), np.zeros(n), np.ones(n))

    def is_degenerate(self) -> bool:
        return np.array_equal(self.lo, self.hi)


def interval_multiply(f: IntervalFactor, g: IntervalFactor) -> IntervalFactor:
    out_dims = tuple(sorted(set(f.dims) | set(g.dims)))
    flo = _aligned(f.dims, f.lo, out_dims)
    fhi = _aligned(f.dims, f.hi, out_dims)
    glo = _aligned(g.dims, g.lo, out_dims)
    ghi = _aligned(g.dims, g.hi, out_dims)
    return IntervalFactor(out_dims, flo * glo, fhi * ghi)


def interval_marginalize(f: IntervalFactor, v: GroundRV) -> IntervalFactor:
    if v not in f.dims:
        raise ValueError(f"{v} is not a dimension of this factor")
    axis = f.dims.index(v)
    dims = tuple(rv for rv in f.dims if rv != v)
    return IntervalFactor(dims, f.lo.sum(axis=axis), f.hi.sum(axis=axis))


def interval_condition(f: IntervalFactor, v: GroundRV, outcome: str) -> IntervalFactor:
    axis = f.dims.index(v)
    rv = f.dims[axis]
    mask_shape = [1] * f.lo.ndim
    mask_shape[axis] = len(rv.outcomes)
    mask = np.zeros(mask_shape)
    mask.flat[rv.outcomes.index(outcome)] = 1.0
    return IntervalFactor(f.dims, f.lo * mask, f.hi * mask)


def interval_normalize(f: IntervalFactor) -> IntervalFactor:
    lo_tot, hi_tot = f.lo.sum(), f.hi.sum()
    lo_den = f.lo + (hi_tot - f.hi)  # lo_i + sum over other cells of hi
    hi_den = f.hi + (lo_tot - f.lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(lo_den > 0.0, f.lo / lo_den, 0.0)  # 0/0 -> vacuous 0
        hi = np.where(hi_den > 0.0, f.hi / hi_den, 1.0)  # 0/0 -> vacuous 1
    return IntervalFactor(f.dims, np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0))


def interval_eliminate(
    factors: list[IntervalFactor], keep: tuple[GroundRV, ...]
) -> IntervalFactor:
    factors = list(factors)
    drop = sorted({rv for f in factors for rv in f.dims} - set(keep))
    for v in drop:
        touching = [f for f in factors if v in f.dims]
        rest = [f for f in factors if v not in f.dims]
        prod = touching[0]
        for f in touching[1:]:
            prod = interval_multiply(prod, f)
        factors = rest + [interval_marginalize(prod, v)]
    result = factors[0]
    for f in factors[1:]:
        result = interval_multiply(result, f)
    return result
