"""Labeled graph classes and the graph-sum coefficients built on them.

Graphs on vertices 0..n-1 are edge bitsets over the pairs (i, j), i < j,
in lexicographic order.  Connected, biconnected (no articulation vertex,
the single edge counts) and tree classes are generated vertex by vertex
and streamed; the small classes are cached as edge-index lists.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from typing import Dict, Iterator, List, Literal, Sequence, Tuple

import numpy as np

from virialkit import settings
from virialkit.errors import CapabilityError, DomainError
from virialkit.series import (
    FormalSeries,
    RootedSeriesFamily,
    compose_measure_coeff,
    family_levels,
    log_series,
    var_derivative,
)
from virialkit.species import MayerMatrices, PairPotential
from virialkit.utils.parallel import ordered_map
from virialkit.utils.partitions import multi_indices
from virialkit.utils.scalars import Scalar

logger = logging.getLogger(__name__)

GraphClass = Literal["connected", "biconnected", "tree"]

# largest graph size for which D coefficients are summed over graphs by default
ENUMERATION_D_VERTICES = 5


@lru_cache(maxsize=None)
def pairs(n: int) -> Tuple[Tuple[int, int], ...]:
    return tuple(combinations(range(n), 2))


@lru_cache(maxsize=None)
def _pair_bit(n: int) -> Dict[Tuple[int, int], int]:
    return {p: i for i, p in enumerate(pairs(n))}


@dataclass(frozen=True)
class EdgeMask:
    n: int
    mask: int

    def __post_init__(self):
        if self.mask >> len(pairs(self.n)):
            raise DomainError("edge mask has bits beyond C(n, 2)")

    def edge_indices(self) -> Tuple[int, ...]:
        return tuple(i for i in range(len(pairs(self.n))) if self.mask >> i & 1)

    def edges(self) -> List[Tuple[int, int]]:
        p = pairs(self.n)
        return [p[i] for i in self.edge_indices()]

    def adjacency(self) -> List[int]:
        adj = [0] * self.n
        for i, j in self.edges():
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        return adj


def _reach(adj: Sequence[int], start: int, alive: int) -> int:
    seen = 1 << start
    frontier = seen
    while frontier:
        nxt = 0
        v = frontier
        while v:
            low = v & -v
            nxt |= adj[low.bit_length() - 1]
            v ^= low
        nxt &= alive & ~seen
        seen |= nxt
        frontier = nxt
    return seen


def is_connected(adj: Sequence[int], alive: int = -1) -> bool:
    n = len(adj)
    if alive == -1:
        alive = (1 << n) - 1
    if not alive:
        return True
    start = (alive & -alive).bit_length() - 1
    return _reach(adj, start, alive) == alive


def is_biconnected(adj: Sequence[int]) -> bool:
    n = len(adj)
    if n < 2 or not is_connected(adj):
        return False
    if n == 2:
        return True
    full = (1 << n) - 1
    return all(is_connected(adj, full & ~(1 << v)) for v in range(n))


def _generate(n: int) -> Iterator[Tuple[int, List[int], int]]:
    """All graphs on n vertices as (mask, adjacency, edge count), built by
    choosing for each vertex k its neighbours among 0..k-1."""
    bit = _pair_bit(n)

    def grow(k: int, adj: List[int], mask: int, edges: int):
        if k == n:
            yield mask, adj, edges
            return
        for lower in range(1 << k):
            new_adj = list(adj)
            new_mask = mask
            count = edges
            v = lower
            while v:
                low = v & -v
                i = low.bit_length() - 1
                new_adj[i] |= 1 << k
                new_adj[k] |= low
                new_mask |= 1 << bit[(i, k)]
                count += 1
                v ^= low
            yield from grow(k + 1, new_adj, new_mask, count)

    yield from grow(0, [0] * n, 0, 0)


def _limit(n: int, graph_class: GraphClass) -> None:
    if graph_class not in ("connected", "biconnected", "tree"):
        raise DomainError(f"unknown graph class {graph_class!r}")
    cap = settings.MAX_TREE_VERTICES if graph_class == "tree" else settings.MAX_GRAPH_VERTICES
    if n < 1:
        raise DomainError("graphs need at least one vertex")
    if n > cap:
        raise CapabilityError(f"{graph_class} graphs on {n} vertices exceed the limit of {cap}")


def enumerate_class(n: int, graph_class: GraphClass) -> Iterator[EdgeMask]:
    """Stream every labeled graph of the class on n vertices exactly once."""
    _limit(n, graph_class)
    if graph_class == "tree":
        yield from (EdgeMask(n, m) for m in _trees(n))
        return
    for mask, adj, edges in _generate(n):
        if graph_class == "connected":
            if edges >= n - 1 and is_connected(adj):
                yield EdgeMask(n, mask)
        elif is_biconnected(adj):
            yield EdgeMask(n, mask)


def _trees(n: int) -> Iterator[int]:
    """Labeled trees from Pruefer sequences (n^(n-2) of them)."""
    bit = _pair_bit(n)
    if n == 1:
        yield 0
        return
    if n == 2:
        yield 1 << bit[(0, 1)]
        return
    for seq in product(range(n), repeat=n - 2):
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        mask = 0
        for v in seq:
            leaf = min(u for u in range(n) if degree[u] == 1)
            mask |= 1 << bit[(min(leaf, v), max(leaf, v))]
            degree[leaf] -= 1
            degree[v] -= 1
        u, w = [x for x in range(n) if degree[x] == 1]
        mask |= 1 << bit[(u, w)]
        yield mask


@lru_cache(maxsize=None)
def class_table(n: int, graph_class: GraphClass) -> Tuple[Tuple[int, ...], ...]:
    """Cached edge-index lists of a class; the GraphClassTables of this module."""
    table = tuple(g.edge_indices() for g in enumerate_class(n, graph_class))
    logger.debug("built %s table for n=%d: %d graphs", graph_class, n, len(table))
    return table


def class_counts(max_n: int = 6) -> List[Dict[str, int]]:
    """Rows (n, connected, biconnected, trees) for documentation dumps."""
    rows = []
    for n in range(2, max_n + 1):
        rows.append({
            "n": n,
            "connected": len(class_table(n, "connected")),
            "biconnected": len(class_table(n, "biconnected")),
            "tree": len(class_table(n, "tree")),
        })
    return rows


# -- weighted sums ---------------------------------------------------------


def _pair_weights(f: MayerMatrices, xs: Sequence[int]) -> List[Scalar]:
    return [f.f[xs[i]][xs[j]] for i, j in pairs(len(xs))]


def graph_sum(f: MayerMatrices, xs: Sequence[int], graph_class: GraphClass) -> Scalar:
    """sum over the class of prod over edges of f[x_i][x_j]."""
    weights = _pair_weights(f, xs)
    acc = 0
    for edges in class_table(len(xs), graph_class):
        term = 1
        for e in edges:
            term *= weights[e]
            if term == 0:
                break
        acc += term
    return acc


def ursell(f: MayerMatrices, xs: Sequence[int]) -> Scalar:
    """Connected-graph sum by the cumulant recursion over subsets.

    phi(S) = w(S) - sum_{low(S) in T, T proper subset of S} phi(T) w(S \\ T),
    w(S) = prod_{i<j in S} (1 + f_ij); O(3^n).
    """
    n = len(xs)
    if n < 1:
        raise DomainError("Ursell functions start at n = 1")
    if n == 1:
        return 1
    if n > 12:
        raise CapabilityError("Ursell fast path supports n <= 12")
    one_plus = [[1 + f.f[xs[i]][xs[j]] for j in range(n)] for i in range(n)]
    size = 1 << n
    w = [1] * size
    for S in range(1, size):
        top = S.bit_length() - 1
        rest = S ^ (1 << top)
        term = w[rest]
        v = rest
        while v:
            low = v & -v
            term *= one_plus[low.bit_length() - 1][top]
            v ^= low
        w[S] = term
    phi = [0] * size
    for S in range(1, size):
        low = S & -S
        others = S ^ low
        acc = w[S]
        # T = low | sub for every proper sub of others
        sub = (others - 1) & others
        while True:
            if sub != others:
                T = low | sub
                acc -= phi[T] * w[S ^ T]
            if sub == 0:
                break
            sub = (sub - 1) & others
        phi[S] = acc
    return phi[size - 1]


def ursell_brute(f: MayerMatrices, xs: Sequence[int]) -> Scalar:
    if len(xs) == 1:
        return 1
    return graph_sum(f, xs, "connected")


def d_coeff(f: MayerMatrices, xs: Sequence[int]) -> Scalar:
    """Biconnected-graph sum D_n; D_2 = f."""
    n = len(xs)
    if n < 2:
        raise DomainError("biconnected coefficients start at n = 2")
    if n > settings.MAX_D_VERTICES:
        raise CapabilityError(f"D_n by enumeration supports n <= {settings.MAX_D_VERTICES}")
    if n == 2:
        return f.f[xs[0]][xs[1]]
    return graph_sum(f, xs, "biconnected")


def a_coeff(f: MayerMatrices, q: int, xs: Sequence[int]) -> Scalar:
    """A_n(q; x) = -[prod_j (1 + f[q][x_j]) - 1] phi_n^T(x)."""
    if not xs:
        raise DomainError("A_n starts at n = 1")
    prod = 1
    for x in xs:
        prod *= 1 + f.f[q][x]
    bracket = prod - 1
    if bracket == 0:
        return 0
    return -bracket * ursell(f, xs)


def d_coeff_batch(pair_f: np.ndarray, n: int) -> np.ndarray:
    """D_n for a batch of configurations.

    pair_f has shape (samples, C(n, 2)) with columns in the fixed pair order.
    """
    if n == 2:
        return pair_f[:, 0].copy()
    out = np.zeros(pair_f.shape[0])
    for edges in class_table(n, "biconnected"):
        out += np.prod(pair_f[:, list(edges)], axis=1)
    return out


# -- families --------------------------------------------------------------


def build_phi_series(pot: PairPotential, N: int, allow_large: bool = False) -> FormalSeries:
    """phi_n^T at order n (order 0 is zero)."""
    f = pot.mayer
    return FormalSeries.from_function(pot.space, N, lambda key: ursell(f, key) if key else 0, allow_large)


def build_A_family(pot: PairPotential, N: int, threads: int = None) -> RootedSeriesFamily:
    f = pot.mayer
    members = ordered_map(
        lambda q: FormalSeries.from_function(pot.space, N, lambda key: a_coeff(f, q, key) if key else 0),
        range(pot.size), threads,
    )
    return RootedSeriesFamily(members)


def build_D_family(pot: PairPotential, N: int, method: str = "auto", threads: int = None) -> RootedSeriesFamily:
    """Order n of member q holds D_{n+1}(q, x); order 0 is zero.

    method "graphs" sums over biconnected graphs, "series" extracts the
    coefficients from the rooted connected series, "auto" picks graphs
    while N + 1 <= ENUMERATION_D_VERTICES.
    """
    if method == "auto":
        method = "graphs" if N + 1 <= ENUMERATION_D_VERTICES else "series"
    if method == "series":
        return d_family_from_connected(pot, N)
    if method != "graphs":
        raise DomainError(f"unknown D-family method {method!r}")
    f = pot.mayer
    members = ordered_map(
        lambda q: FormalSeries.from_function(pot.space, N, lambda key: d_coeff(f, (q,) + key) if key else 0),
        range(pot.size), threads,
    )
    return RootedSeriesFamily(members)


def rooted_connected_family(pot: PairPotential, N: int) -> RootedSeriesFamily:
    """E_q = d phi / d z(q): order n holds phi_{n+1}^T(q, x)."""
    phi = build_phi_series(pot, N + 1, allow_large=True)
    return RootedSeriesFamily([var_derivative(phi, q) for q in range(pot.size)])


def d_family_from_connected(pot: PairPotential, N: int) -> RootedSeriesFamily:
    """Solve log E_q = compose_measure(D_q, E) for D order by order.

    A rooted connected graph is the set of biconnected blocks at the root,
    each carrying rooted connected graphs at its other vertices.
    """
    E = rooted_connected_family(pot, N)
    e_levels = family_levels(E)
    logs = [log_series(member) for member in E]
    S = pot.size
    levels: List[List[Dict[tuple, Scalar]]] = [[{}] for _ in range(S)]
    for n in range(1, N + 1):
        for q in range(S):
            entries = {}
            for key in multi_indices(S, n):
                value = logs[q].coeff(key) - compose_measure_coeff(levels[q], e_levels, key, skip_full=True)
                if value != 0:
                    entries[key] = value
            levels[q].append(entries)
    return RootedSeriesFamily([
        FormalSeries.from_entries(pot.space, N, {k: v for lv in levels[q] for k, v in lv.items()})
        for q in range(S)
    ])


def d_series(D: RootedSeriesFamily, N: int) -> FormalSeries:
    """Unrooted D_n (n >= 2) at order n, read off a family of truncation >= N - 1."""
    if D.trunc < N - 1:
        raise DomainError("D family is too short for the requested order")

    def fn(key):
        if len(key) < 2:
            return 0
        return D.coeff(key[0], key[1:])

    return FormalSeries.from_function(D.space, N, fn)


def edge_count_profile(n: int, graph_class: GraphClass) -> Dict[int, int]:
    """Number of graphs in the class by edge count."""
    out: Dict[int, int] = {}
    for edges in class_table(n, graph_class):
        out[len(edges)] = out.get(len(edges), 0) + 1
    return dict(sorted(out.items()))


def cayley(n: int) -> int:
    return n ** (n - 2) if n >= 2 else 1
