import math
import random
from itertools import combinations

import networkx as nx
import numpy as np
import pytest

from virialkit.errors import CapabilityError, DomainError
from virialkit.graphs import (
    EdgeMask,
    a_coeff,
    build_D_family,
    build_phi_series,
    cayley,
    class_counts,
    class_table,
    d_coeff,
    d_coeff_batch,
    edge_count_profile,
    enumerate_class,
    graph_sum,
    pairs,
    ursell,
    ursell_brute,
)
from virialkit.species import MayerMatrices, SpeciesSpace, PairPotential
from virialkit.utils.partitions import multi_indices, set_partitions

from tests.helpers import random_potential


def networkx_counts(n):
    nodes = range(n)
    all_pairs = list(combinations(nodes, 2))
    counts = {"connected": 0, "biconnected": 0, "tree": 0}
    for mask in range(1 << len(all_pairs)):
        g = nx.Graph()
        g.add_nodes_from(nodes)
        g.add_edges_from(p for i, p in enumerate(all_pairs) if mask >> i & 1)
        if nx.is_connected(g):
            counts["connected"] += 1
            counts["tree"] += nx.is_tree(g)
            counts["biconnected"] += nx.is_biconnected(g)
    return counts


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_class_sizes_match_networkx(n):
    expected = networkx_counts(n)
    for graph_class, count in expected.items():
        assert len(class_table(n, graph_class)) == count


def test_class_counts_table():
    rows = {r["n"]: r for r in class_counts(5)}
    assert [rows[n]["connected"] for n in range(2, 6)] == [1, 4, 38, 728]
    assert [rows[n]["biconnected"] for n in range(2, 6)] == [1, 1, 10, 238]
    assert all(rows[n]["tree"] == cayley(n) for n in range(2, 6))


def test_biconnected_members_really_are():
    for edges in class_table(5, "biconnected"):
        g = nx.Graph()
        g.add_nodes_from(range(5))
        g.add_edges_from(pairs(5)[e] for e in edges)
        assert nx.is_biconnected(g)


def test_edge_count_profile():
    assert edge_count_profile(4, "tree") == {3: 16}
    assert edge_count_profile(4, "biconnected") == {4: 3, 5: 6, 6: 1}


def test_edge_mask_validation():
    assert EdgeMask(3, 0b101).edges() == [(0, 1), (1, 2)]
    with pytest.raises(DomainError):
        EdgeMask(3, 1 << 3)


def test_limits():
    with pytest.raises(DomainError):
        class_table(3, "cliques")
    with pytest.raises(CapabilityError):
        class_table(9, "connected")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ursell_recursion_matches_graph_sum(seed):
    pot = random_potential(seed, 3)
    for n in range(1, 6):
        for key in multi_indices(3, n):
            assert ursell(pot.mayer, key) == ursell_brute(pot.mayer, key)


@pytest.mark.slow
def test_ursell_recursion_matches_graph_sum_at_six_points():
    pot = random_potential(7, 2)
    for key in multi_indices(2, 6):
        assert ursell(pot.mayer, key) == ursell_brute(pot.mayer, key)


@pytest.mark.parametrize("seed", [0, 1])
def test_boltzmann_factor_splits_into_connected_parts(seed):
    # prod (1 + f) over pairs = sum over set partitions of prod phi^T(block)
    f = random_potential(seed, 3).mayer
    for n in range(1, 6):
        for key in multi_indices(3, n):
            weight = 1
            for i, j in combinations(range(n), 2):
                weight *= 1 + f.f[key[i]][key[j]]
            total = 0
            for blocks in set_partitions(n):
                term = 1
                for block in blocks:
                    term *= ursell(f, tuple(key[p] for p in block))
                total += term
            assert total == weight, key


def test_single_hard_core_point():
    f = MayerMatrices(((-1,),), ((1,),))
    assert [ursell(f, (0,) * n) for n in range(1, 6)] == [1, -1, 2, -6, 24]
    assert [d_coeff(f, (0,) * n) for n in range(2, 6)] == [-1, -1, -2, -6]


def test_a_coeff_first_order(pair_potential):
    f = pair_potential.mayer
    for q in range(2):
        for x in range(2):
            assert a_coeff(f, q, (x,)) == -f.f[q][x]
    with pytest.raises(DomainError):
        a_coeff(f, 0, ())


def test_d_coeff_batch_matches_enumeration():
    rng = np.random.default_rng(5)
    n = 4
    pair_f = rng.uniform(-1.0, 0.5, size=(20, len(pairs(n))))
    batch = d_coeff_batch(pair_f, n)
    for row, value in zip(pair_f, batch):
        m = [[0.0] * n for _ in range(n)]
        for (i, j), w in zip(pairs(n), row):
            m[i][j] = m[j][i] = float(w)
        f = MayerMatrices(tuple(map(tuple, m)), tuple(tuple(abs(x) for x in r) for r in m))
        assert math.isclose(value, graph_sum(f, range(n), "biconnected"), abs_tol=1e-12)


@pytest.mark.parametrize("seed", [3, 4])
def test_d_family_methods_agree(seed):
    pot = random_potential(seed, 2)
    assert build_D_family(pot, 3, "graphs") == build_D_family(pot, 3, "series")


def test_d_family_of_ideal_gas_vanishes():
    pot = PairPotential.from_mayer(SpeciesSpace.uniform(2), [[0, 0], [0, 0]])
    assert all(member.is_zero() for member in build_D_family(pot, 3))


def test_unknown_d_method(pair_potential):
    with pytest.raises(DomainError):
        build_D_family(pair_potential, 2, "magic")


def test_random_graph_sum_uses_all_pairs():
    rng = random.Random(9)
    f = [[0] * 3 for _ in range(3)]
    for i, j in pairs(3):
        f[i][j] = f[j][i] = rng.randint(-3, 3)
    m = MayerMatrices(tuple(map(tuple, f)), tuple(map(tuple, f)))
    a, b, c = f[0][1], f[0][2], f[1][2]
    assert graph_sum(m, (0, 1, 2), "connected") == a * b + a * c + b * c + a * b * c
    assert d_coeff(m, (0, 1, 2)) == a * b * c


def test_enumerate_class_streams_edge_masks():
    trees = list(enumerate_class(4, "tree"))
    assert len(trees) == cayley(4)
    assert all(isinstance(g, EdgeMask) and len(g.edges()) == 3 for g in trees)


def test_phi_series_holds_ursell_functions(pair_potential):
    phi = build_phi_series(pair_potential, 3)
    assert phi.constant == 0
    for n in range(1, 4):
        for key in multi_indices(2, n):
            assert phi.coeff(key) == ursell(pair_potential.mayer, key)
