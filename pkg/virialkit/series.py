"""Truncated formal power series over a finite species space.

A series K of truncation order N holds one symmetric tensor K_n per order
n = 0..N.  Tensors are stored on canonical (sorted) multi-indices only and
exact zeros are omitted.  Evaluated at a measure z the series means

    K(z) = sum_n (1/n!) sum_{x_1..x_n} K_n(x_1..x_n) z(x_1)w_1 ... z(x_n)w_n

and every operation below is the coefficient-level counterpart of the
corresponding operation on such functionals.  None of the coefficient
formulas involve the quadrature weights.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import factorial
from types import MappingProxyType
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from virialkit import settings
from virialkit.errors import CapabilityError, DomainError, StructuralError
from virialkit.species import MeasureVec, SpeciesSpace
from virialkit.utils.partitions import (
    anchored_splits,
    inverse_multiplicity,
    multi_indices,
    ordered_assignments,
    pick,
    set_partitions,
    sub_multisets,
)
from virialkit.utils.scalars import Scalar, div, format_scalar, magnitude, parse_scalar

logger = logging.getLogger(__name__)

Key = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SymTensor:
    order: int
    space: SpeciesSpace
    entries: Mapping[Key, Scalar]

    def __getitem__(self, idx: Sequence[int]) -> Scalar:
        return self.entries.get(tuple(sorted(idx)), 0)

    def items(self):
        return self.entries.items()

    def is_zero(self) -> bool:
        return not self.entries


def _tensor(order: int, space: SpeciesSpace, entries: Dict[Key, Scalar]) -> SymTensor:
    return SymTensor(order, space, MappingProxyType({k: v for k, v in entries.items() if v != 0}))


class FormalSeries:
    """Immutable truncated series; build with ``from_function`` or ``from_entries``."""

    __slots__ = ("space", "trunc", "tensors")

    def __init__(self, space: SpeciesSpace, trunc: int, tensors: Sequence[SymTensor], allow_large: bool = False):
        if trunc < 0:
            raise DomainError("truncation order must be >= 0")
        if trunc > settings.MAX_ORDER and not allow_large:
            raise CapabilityError(f"truncation order {trunc} exceeds VIRIALKIT_MAX_ORDER={settings.MAX_ORDER}")
        if len(tensors) != trunc + 1:
            raise StructuralError("need exactly one tensor per order 0..N")
        self.space = space
        self.trunc = trunc
        self.tensors = tuple(tensors)

    @classmethod
    def from_entries(cls, space: SpeciesSpace, trunc: int, entries: Mapping[Key, Scalar],
                     allow_large: bool = False) -> "FormalSeries":
        """Entries keyed by (unsorted) multi-indices; keys longer than trunc are dropped."""
        per_order: List[Dict[Key, Scalar]] = [{} for _ in range(trunc + 1)]
        for key, value in entries.items():
            key = tuple(sorted(key))
            if len(key) <= trunc:
                per_order[len(key)][key] = value
        return cls(space, trunc, [_tensor(n, space, e) for n, e in enumerate(per_order)], allow_large)

    @classmethod
    def from_function(cls, space: SpeciesSpace, trunc: int, fn: Callable[[Key], Scalar],
                      allow_large: bool = False) -> "FormalSeries":
        tensors = [
            _tensor(n, space, {key: fn(key) for key in multi_indices(space.size, n)})
            for n in range(trunc + 1)
        ]
        return cls(space, trunc, tensors, allow_large)

    def __getitem__(self, n: int) -> SymTensor:
        return self.tensors[n]

    def coeff(self, key: Sequence[int]) -> Scalar:
        key = tuple(sorted(key))
        if len(key) > self.trunc:
            return 0
        return self.tensors[len(key)].entries.get(key, 0)

    @property
    def constant(self) -> Scalar:
        return self.tensors[0].entries.get((), 0)

    def is_zero(self) -> bool:
        return all(t.is_zero() for t in self.tensors)

    def truncate(self, trunc: int) -> "FormalSeries":
        if trunc > self.trunc:
            raise StructuralError("cannot raise the truncation order of a series")
        return FormalSeries(self.space, trunc, self.tensors[: trunc + 1], allow_large=True)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FormalSeries):
            return NotImplemented
        return (
            _same_space(self.space, other.space)
            and self.trunc == other.trunc
            and all(dict(a.entries) == dict(b.entries) for a, b in zip(self.tensors, other.tensors))
        )

    __hash__ = None

    def __add__(self, other: "FormalSeries") -> "FormalSeries":
        return add(self, other)

    def __sub__(self, other: "FormalSeries") -> "FormalSeries":
        return add(self, scale(-1, other))

    def __mul__(self, other: "FormalSeries") -> "FormalSeries":
        return mul(self, other)

    def __neg__(self) -> "FormalSeries":
        return scale(-1, self)

    def __repr__(self) -> str:
        nz = sum(len(t.entries) for t in self.tensors)
        return f"FormalSeries(S={self.space.size}, N={self.trunc}, nonzero={nz})"


class RootedSeriesFamily:
    """One series per root species q; the root slot is not symmetrized."""

    __slots__ = ("space", "trunc", "members")

    def __init__(self, members: Sequence[FormalSeries]):
        if not members:
            raise StructuralError("a rooted family needs one series per species")
        space, trunc = members[0].space, members[0].trunc
        if len(members) != space.size:
            raise StructuralError(f"family has {len(members)} members for {space.size} species")
        for m in members:
            _check_pair(members[0], m)
        self.space = space
        self.trunc = trunc
        self.members = tuple(members)

    @classmethod
    def from_function(cls, space: SpeciesSpace, trunc: int, fn: Callable[[int, Key], Scalar],
                      allow_large: bool = False) -> "RootedSeriesFamily":
        return cls([
            FormalSeries.from_function(space, trunc, lambda key, q=q: fn(q, key), allow_large)
            for q in range(space.size)
        ])

    def __getitem__(self, q: int) -> FormalSeries:
        return self.members[q]

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def coeff(self, q: int, key: Sequence[int]) -> Scalar:
        return self.members[q].coeff(key)

    def map(self, fn: Callable[[FormalSeries], FormalSeries]) -> "RootedSeriesFamily":
        return RootedSeriesFamily([fn(m) for m in self.members])

    def __eq__(self, other) -> bool:
        if not isinstance(other, RootedSeriesFamily):
            return NotImplemented
        return all(a == b for a, b in zip(self.members, other.members)) and len(self) == len(other)

    __hash__ = None

    def __repr__(self) -> str:
        return f"RootedSeriesFamily(S={self.space.size}, N={self.trunc})"


def _same_space(a: SpeciesSpace, b: SpeciesSpace) -> bool:
    return a is b or a.weights == b.weights


def _check_pair(K: FormalSeries, G: FormalSeries) -> None:
    if K.trunc != G.trunc:
        raise StructuralError(f"truncation mismatch: {K.trunc} vs {G.trunc}")
    if not _same_space(K.space, G.space):
        raise StructuralError("series live on different species spaces")


def _build(space: SpeciesSpace, trunc: int, fill: Callable[[int, Key], Scalar]) -> FormalSeries:
    tensors = []
    for n in range(trunc + 1):
        tensors.append(_tensor(n, space, {key: fill(n, key) for key in multi_indices(space.size, n)}))
    return FormalSeries(space, trunc, tensors, allow_large=True)


# -- constructors ----------------------------------------------------------


def zero(space: SpeciesSpace, trunc: int) -> FormalSeries:
    return FormalSeries(space, trunc, [_tensor(n, space, {}) for n in range(trunc + 1)])


def unit(space: SpeciesSpace, trunc: int) -> FormalSeries:
    return constant(space, trunc, 1)


def constant(space: SpeciesSpace, trunc: int, value: Scalar) -> FormalSeries:
    return FormalSeries.from_entries(space, trunc, {(): value})


def coordinate(space: SpeciesSpace, trunc: int, q: int) -> FormalSeries:
    """The series z -> z(q), i.e. order-1 coefficient delta_{xq} / w_q."""
    return FormalSeries.from_entries(space, trunc, {(q,): div(1, 1) / space.weights[q]} if trunc >= 1 else {})


def unit_family(space: SpeciesSpace, trunc: int) -> RootedSeriesFamily:
    return RootedSeriesFamily([unit(space, trunc) for _ in range(space.size)])


def from_univariate(space: SpeciesSpace, egf: Sequence[Scalar]) -> FormalSeries:
    """Series whose coefficient K_n(x) = egf[n] for every multi-index."""
    return _build(space, len(egf) - 1, lambda n, key: egf[n])


# -- linear operations -----------------------------------------------------


def add(K: FormalSeries, G: FormalSeries) -> FormalSeries:
    _check_pair(K, G)
    tensors = []
    for a, b in zip(K.tensors, G.tensors):
        entries = dict(a.entries)
        for key, v in b.items():
            entries[key] = entries.get(key, 0) + v
        tensors.append(_tensor(a.order, K.space, entries))
    return FormalSeries(K.space, K.trunc, tensors, allow_large=True)


def scale(lam: Scalar, K: FormalSeries) -> FormalSeries:
    tensors = [_tensor(t.order, K.space, {k: lam * v for k, v in t.items()}) for t in K.tensors]
    return FormalSeries(K.space, K.trunc, tensors, allow_large=True)


def abs_series(K: FormalSeries) -> FormalSeries:
    """Coefficientwise absolute value."""
    tensors = [_tensor(t.order, K.space, {k: magnitude(v) for k, v in t.items()}) for t in K.tensors]
    return FormalSeries(K.space, K.trunc, tensors, allow_large=True)


# -- residual reports ------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    """Coefficientwise residual of an identity between series.

    ``exact`` is True when every residual coefficient is an exact rational,
    in which case ``passed`` demands exact zeros; otherwise max_abs <= tol.
    """

    name: str
    trunc: int
    max_abs: float
    per_order: Tuple[float, ...]
    exact: bool
    passed: bool
    tol: float = 0.0
    evaluated: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "trunc": self.trunc,
            "max_abs": self.max_abs,
            "per_order": list(self.per_order),
            "exact": self.exact,
            "passed": self.passed,
            "tol": self.tol,
            "evaluated": self.evaluated,
        }


def residual_report(name: str, residuals: Sequence[FormalSeries], tol: float = 1e-12,
                    start: int = 0) -> ResidualReport:
    """Summarize residual series; orders below ``start`` are ignored."""
    trunc = max(r.trunc for r in residuals)
    per_order = [0.0] * (trunc + 1)
    exact = True
    nonzero = False
    for r in residuals:
        for t in r.tensors[start:]:
            for v in t.entries.values():
                if not isinstance(v, (int, Fraction)):
                    exact = False
                nonzero = True
                per_order[t.order] = max(per_order[t.order], float(abs(v)))
    max_abs = max(per_order)
    passed = (not nonzero) if exact else max_abs <= tol
    logger.debug("residual %s: max=%g passed=%s", name, max_abs, passed)
    return ResidualReport(name, trunc, max_abs, tuple(per_order), exact, passed, tol)


# -- products --------------------------------------------------------------


def mul(K: FormalSeries, G: FormalSeries) -> FormalSeries:
    """(KG)_n(x) = sum over subsets J of positions of K(x_J) G(x_{J^c})."""
    _check_pair(K, G)

    def fill(n: int, key: Key) -> Scalar:
        acc = 0
        for part, rest, count in sub_multisets(key):
            a = K.tensors[len(part)].entries.get(part)
            if a is None:
                continue
            b = G.tensors[len(rest)].entries.get(rest)
            if b is None:
                continue
            acc += count * a * b
        return acc

    return _build(K.space, K.trunc, fill)


def multi_product(Ks: Sequence[FormalSeries]) -> FormalSeries:
    """Product of several series as one sum over ordered partitions of the
    positions into len(Ks) possibly empty blocks."""
    if not Ks:
        raise DomainError("multi_product needs at least one factor")
    for K in Ks[1:]:
        _check_pair(Ks[0], K)
    k = len(Ks)

    def fill(n: int, key: Key) -> Scalar:
        acc = 0
        for labels in product(range(k), repeat=n):
            term = 1
            for i, K in enumerate(Ks):
                sub = tuple(key[p] for p in range(n) if labels[p] == i)
                c = K.tensors[len(sub)].entries.get(sub)
                if c is None:
                    term = 0
                    break
                term *= c
            acc += term
        return acc

    return _build(Ks[0].space, Ks[0].trunc, fill)


# -- compositions ----------------------------------------------------------


def compose_univariate(F: Sequence[Scalar], K: FormalSeries) -> FormalSeries:
    """F o K for F(t) = sum_m F[m] t^m / m!, by a sum over set partitions.

    Coefficients of F beyond the truncation order are ignored; missing
    ones count as zero.
    """
    if K.constant != 0:
        raise DomainError("composition needs a series with zero constant term")
    f = list(F) + [0] * max(0, K.trunc + 1 - len(F))

    def fill(n: int, key: Key) -> Scalar:
        if n == 0:
            return f[0]
        acc = 0
        for blocks in set_partitions(n):
            fm = f[len(blocks)]
            if fm == 0:
                continue
            term = fm
            for block in blocks:
                c = K.tensors[len(block)].entries.get(pick(key, block))
                if c is None:
                    term = 0
                    break
                term *= c
            acc += term
        return acc

    return _build(K.space, K.trunc, fill)


def exp_series(K: FormalSeries) -> FormalSeries:
    """exp(K) for K_0 = 0.

    Uses the recursion E_n(x) = sum_{J containing position 0} K(x_J) E(x_{J^c}),
    which is the partition sum grouped by the block holding the first point.
    """
    if K.constant != 0:
        raise DomainError("exp_series needs a series with zero constant term")
    levels: List[Dict[Key, Scalar]] = [{(): 1}]
    for n in range(1, K.trunc + 1):
        entries = {}
        for key in multi_indices(K.space.size, n):
            acc = 0
            for part, rest, count in anchored_splits(key):
                a = K.tensors[len(part)].entries.get(part)
                if a is None:
                    continue
                b = levels[len(rest)].get(rest)
                if b is None:
                    continue
                acc += count * a * b
            if acc != 0:
                entries[key] = acc
        levels.append(entries)
    return FormalSeries(K.space, K.trunc, [_tensor(n, K.space, e) for n, e in enumerate(levels)], allow_large=True)


def log_series(K: FormalSeries) -> FormalSeries:
    """The unique L with L_0 = 0 and exp(L) = K through order N (needs K_0 = 1)."""
    if K.constant != 1:
        raise DomainError("log_series needs a series with constant term 1")
    levels: List[Dict[Key, Scalar]] = [{}]
    for n in range(1, K.trunc + 1):
        entries = {}
        for key in multi_indices(K.space.size, n):
            acc = K.tensors[n].entries.get(key, 0)
            for part, rest, count in anchored_splits(key):
                if not rest:
                    continue
                a = levels[len(part)].get(part)
                if a is None:
                    continue
                b = K.tensors[len(rest)].entries.get(rest)
                if b is None:
                    continue
                acc -= count * a * b
            if acc != 0:
                entries[key] = acc
        levels.append(entries)
    return FormalSeries(K.space, K.trunc, [_tensor(n, K.space, e) for n, e in enumerate(levels)], allow_large=True)


def var_derivative(K: FormalSeries, q: int) -> FormalSeries:
    """Variational derivative at species q: (dK/dz(q))_n(x) = K_{n+1}(q, x)."""
    if K.trunc < 1:
        raise DomainError("variational derivative needs truncation order >= 1")

    def fill(n: int, key: Key) -> Scalar:
        return K.coeff((q,) + key)

    return _build(K.space, K.trunc - 1, fill)


def compose_measure(K: FormalSeries, G: RootedSeriesFamily) -> FormalSeries:
    """K evaluated at the measure G(x; z) z(dx), as a series in z.

    F_n(x) = sum over non-empty position sets J and assignments of the
    remaining positions to elements of J of K(x_J) * prod_j G(x_j; x_{V_j}).
    """
    _check_pair(K, G.members[0])
    if K.space.size != G.space.size:
        raise StructuralError("family and series live on different species spaces")
    levels = [t.entries for t in K.tensors]
    g_levels = family_levels(G)

    def fill(n: int, key: Key) -> Scalar:
        if n == 0:
            return K.constant
        return compose_measure_coeff(levels, g_levels, key)

    return _build(K.space, K.trunc, fill)


def family_levels(G: RootedSeriesFamily) -> List[List[Mapping[Key, Scalar]]]:
    return [[t.entries for t in member.tensors] for member in G.members]


def compose_measure_coeff(levels: Sequence[Mapping[Key, Scalar]], g_levels: Sequence[Sequence[Mapping[Key, Scalar]]],
                          key: Key, skip_full: bool = False) -> Scalar:
    """One coefficient of compose_measure, with K and the family G given as
    per-order entry maps (g_levels[x][m] is order m of G(x; .)).

    With skip_full the J = all-positions term is left out, which is what a
    triangular solve for K_n needs.
    """
    n = len(key)
    acc = 0
    for J, blocks in ordered_assignments(n):
        if skip_full and len(J) == n:
            continue
        if len(J) >= len(levels):
            continue
        c = levels[len(J)].get(pick(key, J))
        if c is None:
            continue
        term = c
        for anchor, block in zip(J, blocks):
            g = g_levels[key[anchor]][len(block)].get(pick(key, block))
            if g is None:
                term = 0
                break
            term *= g
        acc += term
    return acc


# -- evaluation ------------------------------------------------------------


def evaluate_orders(K: FormalSeries, z: MeasureVec) -> List[Scalar]:
    """Per-order contributions (1/n!) sum_x K_n(x) prod z(x_i) w_i."""
    masses = [z.mass(x) for x in range(z.space.size)]
    out = []
    for t in K.tensors:
        acc = 0
        for key, value in t.items():
            term = value * inverse_multiplicity(key)
            for x in key:
                term *= masses[x]
            acc += term
        out.append(acc)
    return out


def evaluate(K: FormalSeries, z: MeasureVec) -> Scalar:
    return sum(evaluate_orders(K, z))


def evaluate_family(G: RootedSeriesFamily, z: MeasureVec) -> Tuple[Scalar, ...]:
    return tuple(evaluate(member, z) for member in G.members)


# -- univariate truncated series -------------------------------------------


class UnivariateSeries:
    """Ordinary power series sum_n c[n] t^n truncated at len(c) - 1."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Scalar]):
        self.coeffs = tuple(coeffs)
        if not self.coeffs:
            raise DomainError("univariate series needs at least the constant term")

    @classmethod
    def from_egf(cls, egf: Sequence[Scalar]) -> "UnivariateSeries":
        return cls(div(c, factorial(n)) for n, c in enumerate(egf))

    def to_egf(self) -> List[Scalar]:
        return [c * factorial(n) for n, c in enumerate(self.coeffs)]

    @property
    def trunc(self) -> int:
        return len(self.coeffs) - 1

    def _same(self, other: "UnivariateSeries"):
        if other.trunc != self.trunc:
            raise StructuralError("univariate truncation mismatch")

    def __add__(self, other: "UnivariateSeries") -> "UnivariateSeries":
        self._same(other)
        return UnivariateSeries(a + b for a, b in zip(self.coeffs, other.coeffs))

    def __mul__(self, other: "UnivariateSeries") -> "UnivariateSeries":
        self._same(other)
        a, b = self.coeffs, other.coeffs
        return UnivariateSeries(sum(a[k] * b[n - k] for k in range(n + 1)) for n in range(len(a)))

    def __eq__(self, other) -> bool:
        return isinstance(other, UnivariateSeries) and self.coeffs == other.coeffs

    __hash__ = None

    def exp(self) -> "UnivariateSeries":
        a = self.coeffs
        if a[0] != 0:
            raise DomainError("exp needs zero constant term")
        e = [1]
        for n in range(1, len(a)):
            e.append(div(sum(k * a[k] * e[n - k] for k in range(1, n + 1)), n))
        return UnivariateSeries(e)

    def log(self) -> "UnivariateSeries":
        a = self.coeffs
        if a[0] != 1:
            raise DomainError("log needs constant term 1")
        out = [0]
        for n in range(1, len(a)):
            acc = n * a[n] - sum(k * out[k] * a[n - k] for k in range(1, n))
            out.append(div(acc, n))
        return UnivariateSeries(out)

    def compose(self, inner: "UnivariateSeries") -> "UnivariateSeries":
        """self(inner(t)) for inner with zero constant term."""
        self._same(inner)
        if inner.coeffs[0] != 0:
            raise DomainError("inner series must have zero constant term")
        result = UnivariateSeries([self.coeffs[-1]] + [0] * self.trunc)
        for c in reversed(self.coeffs[:-1]):
            shifted = result * inner
            result = UnivariateSeries((shifted.coeffs[0] + c,) + shifted.coeffs[1:])
        return result

    def __call__(self, t: Scalar) -> Scalar:
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    def __repr__(self) -> str:
        return f"UnivariateSeries({[format_scalar(c) for c in self.coeffs]})"


def single_species_egf(K: FormalSeries) -> List[Scalar]:
    """Coefficients K_n(0, ..., 0) of a one-species series."""
    return [K.coeff((0,) * n) for n in range(K.trunc + 1)]


# -- serialization ---------------------------------------------------------


def series_to_json(K: FormalSeries) -> Dict[str, Any]:
    return {
        "trunc": K.trunc,
        "species": K.space.size,
        "coeffs": {
            str(t.order): [{"multiindex": list(key), "value": format_scalar(v)} for key, v in sorted(t.items())]
            for t in K.tensors
        },
    }


def series_from_json(space: SpeciesSpace, payload: Mapping[str, Any], mode: str = "rational") -> FormalSeries:
    entries = {}
    for rows in payload["coeffs"].values():
        for row in rows:
            entries[tuple(row["multiindex"])] = parse_scalar(row["value"], mode)
    return FormalSeries.from_entries(space, int(payload["trunc"]), entries)


# -- dense debug backend ---------------------------------------------------

DENSE_MAX_ORDER = 3


def to_dense(K: FormalSeries, n: int) -> np.ndarray:
    """Full S^n tensor (object dtype so Fractions stay exact)."""
    if n > DENSE_MAX_ORDER:
        raise CapabilityError(f"dense backend supports orders <= {DENSE_MAX_ORDER}")
    S = K.space.size
    if n == 0:
        return np.array(K.constant, dtype=object)
    out = np.zeros((S,) * n, dtype=object)
    for idx in product(range(S), repeat=n):
        out[idx] = K.coeff(idx)
    return out


def mul_dense(K: FormalSeries, G: FormalSeries) -> FormalSeries:
    """Reference product on dense tensors, for cross-checking ``mul``."""
    _check_pair(K, G)
    if K.trunc > DENSE_MAX_ORDER:
        raise CapabilityError(f"dense backend supports truncation <= {DENSE_MAX_ORDER}")
    S = K.space.size
    dense_k = [to_dense(K, n) for n in range(K.trunc + 1)]
    dense_g = [to_dense(G, n) for n in range(G.trunc + 1)]
    entries = {(): K.constant * G.constant}
    for n in range(1, K.trunc + 1):
        total = np.zeros((S,) * n, dtype=object)
        for mask in range(1 << n):
            J = [p for p in range(n) if mask >> p & 1]
            Jc = [p for p in range(n) if not mask >> p & 1]
            outer = np.multiply.outer(dense_k[len(J)], dense_g[len(Jc)])
            # outer's axes are (J..., Jc...); move them back to their positions
            total = total + np.transpose(outer, np.argsort(J + Jc))
        for key in multi_indices(S, n):
            entries[key] = total[key]
    return FormalSeries.from_entries(K.space, K.trunc, entries)
