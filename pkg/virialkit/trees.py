"""The inverse-series family t_n(q; x) and its checks.

t solves the fixed-point problem T_q(nu) = exp(A(q; nu T(nu))) order by
order: B_q = A_q composed with the measure nu T(nu), t_q = exp(B_q).  The
enriched-tree enumeration is kept as an independent (slow) oracle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from virialkit import settings
from virialkit.errors import CapabilityError, DomainError, StructuralError
from virialkit.series import (
    FormalSeries,
    ResidualReport,
    RootedSeriesFamily,
    abs_series,
    add,
    compose_measure,
    compose_measure_coeff,
    evaluate,
    evaluate_orders,
    exp_series,
    family_levels,
    log_series,
    mul,
    residual_report,
    scale,
    unit,
)
from virialkit.species import BoundCertificate, MeasureVec
from virialkit.utils.parallel import ordered_map
from virialkit.utils.partitions import anchored_splits, multi_indices, set_partitions
from virialkit.utils.scalars import Scalar, exp_scalar, log_scalar

logger = logging.getLogger(__name__)

# t_0 = 1 is stored explicitly as the order-0 coefficient of every member
TnFamily = RootedSeriesFamily


@dataclass(frozen=True)
class EnrichedTree:
    """Rooted tree on {0..n} (root 0) whose children at each vertex are
    grouped into cliques.

    parent[i - 1] is the parent of vertex i; cliques[v] is a set partition
    of the children of v (empty for leaves).
    """

    n: int
    parent: Tuple[int, ...]
    cliques: Tuple[Tuple[Tuple[int, ...], ...], ...]


def _is_rooted_tree(parent: Sequence[int]) -> bool:
    n = len(parent)
    for start in range(1, n + 1):
        v, steps = start, 0
        while v != 0:
            v = parent[v - 1]
            steps += 1
            if steps > n:
                return False
    return True


def enumerate_enriched_trees(n: int) -> Iterator[EnrichedTree]:
    if n < 0:
        raise DomainError("tree size must be >= 0")
    if n > settings.MAX_ENRICHED_TREE_SIZE:
        raise CapabilityError(f"enriched trees supported up to n = {settings.MAX_ENRICHED_TREE_SIZE}")
    for parent in product(range(n + 1), repeat=n):
        if any(parent[i] == i + 1 for i in range(n)) or not _is_rooted_tree(parent):
            continue
        children = [[] for _ in range(n + 1)]
        for child, p in enumerate(parent, start=1):
            children[p].append(child)
        options = []
        for kids in children:
            options.append([
                tuple(tuple(kids[i] for i in block) for block in part)
                for part in set_partitions(len(kids))
            ])
        for choice in product(*options):
            yield EnrichedTree(n, parent, tuple(choice))


def tree_weight(A: RootedSeriesFamily, tree: EnrichedTree, q: int, xs: Sequence[int]) -> Scalar:
    """prod over vertices i and cliques J of A_{|J|}(x_i; x_J), with x_0 = q."""
    labels = (q,) + tuple(xs)
    weight = 1
    for v, part in enumerate(tree.cliques):
        for clique in part:
            weight *= A.coeff(labels[v], [labels[c] for c in clique])
            if weight == 0:
                return 0
    return weight


def tn_via_trees(A: RootedSeriesFamily, n: int, q: int, xs: Sequence[int]) -> Scalar:
    if len(xs) != n:
        raise DomainError("need exactly n species labels")
    if n == 0:
        return 1
    return sum(tree_weight(A, tree, q, xs) for tree in enumerate_enriched_trees(n))


def compute_tn(A: RootedSeriesFamily, N: Optional[int] = None, threads: Optional[int] = None) -> TnFamily:
    """Triangular recursion for t: order n of B needs t up to order n - 1 only."""
    N = A.trunc if N is None else N
    if A.trunc < N:
        raise StructuralError(f"A family has truncation {A.trunc} < {N}")
    if any(A[q].constant != 0 for q in range(A.space.size)):
        raise DomainError("A(q; .) must have zero constant term")
    S = A.space.size
    a_levels = family_levels(A)
    t_levels: List[List[Dict[tuple, Scalar]]] = [[{(): 1}] for _ in range(S)]
    b_levels: List[List[Dict[tuple, Scalar]]] = [[{}] for _ in range(S)]
    for n in range(1, N + 1):
        keys = multi_indices(S, n)

        def b_order(q: int) -> Dict[tuple, Scalar]:
            out = {}
            for key in keys:
                v = compose_measure_coeff(a_levels[q], t_levels, key)
                if v != 0:
                    out[key] = v
            return out

        for q, entries in enumerate(ordered_map(b_order, range(S), threads)):
            b_levels[q].append(entries)

        def t_order(q: int) -> Dict[tuple, Scalar]:
            out = {}
            for key in keys:
                acc = 0
                for part, rest, count in anchored_splits(key):
                    b = b_levels[q][len(part)].get(part)
                    if b is None:
                        continue
                    t = t_levels[q][len(rest)].get(rest)
                    if t is None:
                        continue
                    acc += count * b * t
                if acc != 0:
                    out[key] = acc
            return out

        for q, entries in enumerate(ordered_map(t_order, range(S), threads)):
            t_levels[q].append(entries)
    logger.debug("computed t family: S=%d N=%d", S, N)
    return RootedSeriesFamily([
        FormalSeries.from_entries(A.space, N, {k: v for level in t_levels[q] for k, v in level.items()},
                                  allow_large=True)
        for q in range(S)
    ])


def eval_T(t: TnFamily, nu: MeasureVec, q: int) -> Scalar:
    return evaluate(t[q], nu)


def eval_T_abs(t: TnFamily, nu_abs: MeasureVec, b: Sequence[Scalar]) -> BoundCertificate:
    """Certify 1 + sum_{n<=N} (1/n!) sum |t_n| |nu|^n <= e^{b(q)} per species.

    Partial sums by order are recorded; they are monotone in N, so the
    certificate holds for every truncation below the stored one.
    """
    nu_abs = nu_abs.abs()
    margins, partials = [], []
    for q in range(t.space.size):
        orders = evaluate_orders(abs_series(t[q]), nu_abs)
        running, acc = [], 0
        for value in orders:
            acc += value
            running.append(float(acc))
        partials.append(running)
        margins.append(float(exp_scalar(float(b[q]))) - running[-1])
    return BoundCertificate.from_margins(
        "Mb", (0,) * len(margins), tuple(b), margins, truncation=t.trunc,
        partial_sums=partials, sharpness_b=[float(log_scalar(p[-1])) for p in partials],
    )


def sharpness_b(t: TnFamily, nu: MeasureVec) -> Tuple[float, ...]:
    """b(q) = log T_q(nu), the smallest weight for which the bound can hold
    when all A_n are non-negative."""
    out = []
    for q in range(t.space.size):
        value = eval_T(t, nu, q)
        if isinstance(value, complex) or value <= 0:
            raise DomainError(f"T_{q}(nu) = {value} has no real logarithm")
        out.append(float(log_scalar(value)))
    return tuple(out)


def fp_residual(A: RootedSeriesFamily, t: TnFamily) -> List[FormalSeries]:
    """t_q - exp(A_q composed with the measure nu T(nu))."""
    return [add(t[q], scale(-1, exp_series(compose_measure(A[q], t)))) for q in range(t.space.size)]


def inverse_factor_family(A: RootedSeriesFamily) -> RootedSeriesFamily:
    """E_x = exp(-A(x; .)), the density factor rho = z E."""
    return A.map(lambda member: exp_series(scale(-1, member)))


def fp_prime_residual(A: RootedSeriesFamily, t: TnFamily) -> List[FormalSeries]:
    """T_q(z e^{-A(.; z)}) - e^{A(q; z)}."""
    E = inverse_factor_family(A)
    return [add(compose_measure(t[q], E), scale(-1, exp_series(A[q]))) for q in range(t.space.size)]


def _with_evaluation(report: ResidualReport, residuals: Sequence[FormalSeries],
                     measure: Optional[MeasureVec]) -> ResidualReport:
    if measure is None:
        return report
    worst = max(abs(evaluate(r, measure)) for r in residuals)
    return ResidualReport(report.name, report.trunc, report.max_abs, report.per_order, report.exact,
                          report.passed, report.tol, float(worst))


def verify_FP(A: RootedSeriesFamily, t: TnFamily, nu: Optional[MeasureVec] = None,
              N: Optional[int] = None, tol: float = 1e-12) -> ResidualReport:
    A, t = _common(A, t, N)
    residuals = fp_residual(A, t)
    return _with_evaluation(residual_report("FP", residuals, tol, start=1), residuals, nu)


def verify_FPprime(A: RootedSeriesFamily, t: TnFamily, z: Optional[MeasureVec] = None,
                   N: Optional[int] = None, tol: float = 1e-12) -> ResidualReport:
    A, t = _common(A, t, N)
    residuals = fp_prime_residual(A, t)
    return _with_evaluation(residual_report("FP'", residuals, tol), residuals, z)


def _common(A: RootedSeriesFamily, t: TnFamily, N: Optional[int]):
    N = min(A.trunc, t.trunc) if N is None else N
    if A.trunc < N or t.trunc < N:
        raise StructuralError("families are shorter than the requested truncation")
    if A.trunc != N:
        A = A.map(lambda m: m.truncate(N))
    if t.trunc != N:
        t = t.map(lambda m: m.truncate(N))
    return A, t


def extract_d_family(t: TnFamily) -> RootedSeriesFamily:
    """Biconnected family from the tree solution: D_q = -log T_q."""
    return t.map(lambda member: scale(-1, log_series(member)))


def roundtrip_residuals(A: RootedSeriesFamily, t: TnFamily) -> Tuple[List[FormalSeries], List[FormalSeries]]:
    """Formal residuals of both compositions of the density and activity maps.

    With rho = z E(z) and zeta = nu T(nu): zeta(rho(z)) = z iff
    E_q * T_q(z E) = 1, and rho(zeta(nu)) = nu iff T_q * E_q(nu T) = 1.
    """
    E = inverse_factor_family(A)
    S = t.space.size
    one = unit(t.space, t.trunc)
    zeta_rho = [add(mul(E[q], compose_measure(t[q], E)), scale(-1, one)) for q in range(S)]
    rho_zeta = [add(mul(t[q], compose_measure(E[q], t)), scale(-1, one)) for q in range(S)]
    return zeta_rho, rho_zeta
