import math
from fractions import Fraction

import pytest

from virialkit.errors import CapabilityError, DomainError, StructuralError
from virialkit.graphs import build_A_family
from virialkit.inversion import GCState
from virialkit.species import MeasureVec
from virialkit.trees import (
    compute_tn,
    enumerate_enriched_trees,
    eval_T,
    eval_T_abs,
    extract_d_family,
    sharpness_b,
    tn_via_trees,
    verify_FP,
    verify_FPprime,
)
from virialkit.utils.partitions import multi_indices

from tests.helpers import random_state


@pytest.mark.parametrize("n, count", [(0, 1), (1, 1), (2, 4)])
def test_enriched_tree_counts(n, count):
    assert sum(1 for _ in enumerate_enriched_trees(n)) == count


def test_enriched_tree_limit():
    with pytest.raises(CapabilityError):
        next(enumerate_enriched_trees(6))


@pytest.mark.parametrize("pot", ["pair_potential", "hardcore_potential", 0, 1, 2])
def test_recursion_matches_tree_sums(request, pot):
    if isinstance(pot, int):
        st = random_state(pot, N=4, max_size=3)
    else:
        st = GCState(request.getfixturevalue(pot), 4)
    S = st.space.size
    for n in range(1, 5):
        for key in multi_indices(S, n):
            for q in range(S):
                assert st.t.coeff(q, key) == tn_via_trees(st.A, n, q, key)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_fixed_point_identities_are_exact(seed):
    st = random_state(seed)
    fp = verify_FP(st.A, st.t)
    fp_prime = verify_FPprime(st.A, st.t)
    assert fp.exact and fp.passed
    assert fp_prime.exact and fp_prime.passed


def test_fp_report_evaluates_at_measure(pair_state):
    nu = MeasureVec.constant(pair_state.space, Fraction(1, 10))
    report = verify_FP(pair_state.A, pair_state.t, nu)
    assert report.evaluated == 0


def test_tree_solution_gives_biconnected_family(pair_state, hardcore_state):
    assert extract_d_family(pair_state.t) == pair_state.D
    assert extract_d_family(hardcore_state.t) == hardcore_state.D


def test_t_starts_at_one_and_first_order(pair_state):
    f = pair_state.mayer.f
    for q in range(2):
        assert pair_state.t[q].constant == 1
        for x in range(2):
            # A_1(q; x) = -f(q, x), and t_1 = A_1
            assert pair_state.t.coeff(q, (x,)) == -f[q][x]


def test_compute_tn_guards(pair_potential):
    A = build_A_family(pair_potential, 2)
    with pytest.raises(StructuralError):
        compute_tn(A, 3)
    with pytest.raises(DomainError):
        tn_via_trees(A, 2, 0, (0,))


def test_mb_certificate_and_sharpness(hardcore_state):
    st = hardcore_state
    nu = MeasureVec.constant(st.space, Fraction(1, 50))
    assert eval_T_abs(st.t, nu, [1.0] * 3).passed
    assert not eval_T_abs(st.t, nu, [0.0] * 3).passed
    b = sharpness_b(st.t, nu)
    for q in range(3):
        assert b[q] == pytest.approx(math.log(float(eval_T(st.t, nu, q))))
