import math
from fractions import Fraction

import pytest

from virialkit.errors import CapabilityError, DomainError, StructuralError
from virialkit.inversion import (
    GCState,
    check_PU,
    check_Sab,
    check_Sb,
    check_dissymmetry_condition,
    check_virMb,
    density_exact,
    density_series_identity,
    dissymmetry_check,
    find_certificate,
    free_energy,
    legendre_residual,
    log_xi_series,
    pressure_of_nu,
    rho_of_z,
    roundtrip_check,
    run_operation,
    virial_certificate_report,
    xi_exact,
    xi_polynomial,
    zeta_of_nu,
    zeta_paths_residual,
)
from virialkit.series import UnivariateSeries, abs_series, evaluate_orders
from virialkit.species import MeasureVec, PairPotential, SpeciesSpace
from virialkit.trees import eval_T_abs

from tests.helpers import random_measure, random_potential, random_state


@pytest.mark.parametrize("state", ["pair_state", "hardcore_state"])
def test_formal_identities_hold_exactly(request, state):
    st = request.getfixturevalue(state)
    for report in (roundtrip_check(st), zeta_paths_residual(st), dissymmetry_check(st),
                   density_series_identity(st)):
        assert report.exact, report.name
        assert report.passed, report.name


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_identities_on_random_potentials(seed):
    st = random_state(seed)
    for report in (roundtrip_check(st), zeta_paths_residual(st), dissymmetry_check(st, 4)):
        assert report.exact, report.name
        assert report.passed, report.name


def test_identity_guards(pair_state):
    with pytest.raises(StructuralError):
        dissymmetry_check(pair_state, 4)
    with pytest.raises(StructuralError):
        roundtrip_check(pair_state, N=5)
    assert roundtrip_check(pair_state, N=2).passed
    with pytest.raises(DomainError):
        GCState(pair_state.pot, 0)
    with pytest.raises(CapabilityError):
        GCState(pair_state.pot, 7)


def test_maps_invert_each_other_numerically(pair_state):
    z = MeasureVec.constant(pair_state.space, Fraction(1, 100))
    rho = rho_of_z(pair_state, z)
    for path in ("tree", "biconnected"):
        back = zeta_of_nu(pair_state, MeasureVec(pair_state.space, tuple(float(r) for r in rho.values)), path)
        assert all(abs(float(b) - 0.01) < 1e-6 for b in back.values)
    with pytest.raises(DomainError):
        zeta_of_nu(pair_state, z, "loops")


def test_zero_species_stay_zero(pair_state):
    z = MeasureVec(pair_state.space, (Fraction(1, 10), 0))
    assert rho_of_z(pair_state, z)[1] == 0
    assert zeta_of_nu(pair_state, z)[1] == 0


def test_exact_partition_function_polynomial(hardcore_state):
    z = MeasureVec.constant(hardcore_state.space, 1)
    assert xi_polynomial(hardcore_state, z) == [1, Fraction(7, 4), Fraction(2, 3), Fraction(1, 12)]
    total = xi_exact(hardcore_state, z)
    assert total.value == 1 + Fraction(7, 4) + Fraction(2, 3) + Fraction(1, 12)
    assert total.n_max == 3 and not total.truncated
    # no configuration above three particles survives the hard core
    assert not xi_exact(hardcore_state, z, n_max=5).truncated
    cut = xi_exact(hardcore_state, z, n_max=2)
    assert cut.truncated and cut.value == 1 + Fraction(7, 4) + Fraction(2, 3)


def test_series_agree_with_exact_sums_at_small_activity(hardcore_state):
    z = MeasureVec.constant(hardcore_state.space, Fraction(1, 100))
    exact = math.log(xi_exact(hardcore_state, z).value)
    assert exact == pytest.approx(float(log_xi_series(hardcore_state, z)), abs=1e-7)
    rho = rho_of_z(hardcore_state, z)
    for q in range(3):
        assert float(density_exact(hardcore_state, z, q)) == pytest.approx(float(rho[q]), abs=1e-7)


@pytest.mark.parametrize("z_values", [(1, 1, 1), (Fraction(1, 2), Fraction(1, 3), Fraction(2, 5))])
def test_log_partition_function_is_the_ursell_series(hardcore_state, z_values):
    z = MeasureVec(hardcore_state.space, z_values)
    log_xi = UnivariateSeries(xi_polynomial(hardcore_state, z)).log()
    assert list(log_xi.coeffs[1:]) == evaluate_orders(hardcore_state.phi, z)[1:]


@pytest.mark.parametrize("seed", range(5))
def test_log_partition_function_on_random_hard_core_systems(seed):
    st = GCState(random_potential(seed, 4, hard_diagonal=True), 4)
    z = random_measure(seed, st.space, top=50)
    log_xi = UnivariateSeries(xi_polynomial(st, z)).log()
    assert list(log_xi.coeffs[1:]) == evaluate_orders(st.phi, z)[1:]


def test_configuration_sum_needs_termination(pair_state):
    z = MeasureVec.constant(pair_state.space, Fraction(1, 10))
    with pytest.raises(DomainError):
        xi_exact(pair_state, z)
    assert len(xi_polynomial(pair_state, z, n_max=3)) == 4
    cut = xi_exact(pair_state, z, n_max=3)
    assert cut.truncated and cut.n_max == 3
    assert cut.value == sum(xi_polynomial(pair_state, z, n_max=3))
    assert xi_exact(pair_state, z, n_max=8).truncated


def test_convergence_certificates(pair_state):
    small = MeasureVec.constant(pair_state.space, Fraction(1, 100))
    large = MeasureVec.constant(pair_state.space, 10)
    assert check_PU(pair_state, small, 0.1).passed
    assert not check_PU(pair_state, large, 0.1).passed
    assert check_Sab(pair_state, small, 0.1, 0.2).passed
    assert check_Sb(pair_state, small, 0.1).passed
    assert check_virMb(pair_state, small, 0.1).passed
    assert check_dissymmetry_condition(pair_state, small, 0.1, 0.2).passed
    with pytest.raises(DomainError):
        check_Sab(pair_state, small, 0.3, 0.2)
    with pytest.raises(DomainError):
        check_PU(pair_state, small, [0.1])
    with pytest.raises(DomainError):
        check_PU(pair_state, small, -0.1)


def test_grid_search(pair_state):
    small = MeasureVec.constant(pair_state.space, Fraction(1, 100))
    cert = find_certificate(pair_state, "Sab", small)
    assert cert.passed
    assert cert.a == cert.b
    refused = find_certificate(pair_state, "PU", MeasureVec.constant(pair_state.space, 10))
    assert not refused.passed
    with pytest.raises(DomainError):
        find_certificate(pair_state, "XYZ", small)


def test_virial_certificate_report(pair_state):
    report = virial_certificate_report(pair_state, MeasureVec.constant(pair_state.space, Fraction(1, 100)), 0.1)
    assert report["virMb"]["passed"] and report["Mb"]["passed"]


@pytest.mark.slow
def test_sab_bounds_tree_and_virial_sums_on_repulsive_potentials():
    passed = 0
    for seed in range(100):
        st = random_state(seed, N=5, max_size=3, repulsive=True)
        nu = random_measure(seed, st.space)
        cert = find_certificate(st, "Sab", nu)
        if not cert.passed:
            continue
        passed += 1
        b = cert.b
        mb = eval_T_abs(st.t, nu, b)
        assert mb.passed, seed
        for q in range(st.space.size):
            # partial sums for every truncation N <= 5
            assert all(s <= math.exp(b[q]) for s in mb.details["partial_sums"][q]), seed
            running = 0.0
            for value in evaluate_orders(abs_series(st.D[q]), nu):
                running += float(value)
                assert running <= b[q], seed
    assert passed >= 50


def test_sab_pass_implies_sb_pass():
    passed = 0
    for seed in range(50):
        st = random_state(seed, N=4, max_size=4, repulsive=True)
        nu = random_measure(seed, st.space)
        sab = find_certificate(st, "Sab", nu)
        if sab.passed:
            passed += 1
            assert check_Sb(st, nu, sab.b).passed, seed
    assert passed >= 25


def test_ideal_gas_thermodynamics():
    space = SpeciesSpace.from_weights([Fraction(1, 2), Fraction(1, 2)])
    st = GCState(PairPotential.from_mayer(space, [[0, 0], [0, 0]]), 3)
    nu = MeasureVec(space, (Fraction(1, 5), Fraction(2, 5)))
    assert pressure_of_nu(st, nu) == Fraction(3, 10)
    expected = sum(v * (math.log(v) - 1) * 0.5 for v in (0.2, 0.4))
    assert free_energy(st, nu) == pytest.approx(expected)
    assert [float(v) for v in zeta_of_nu(st, nu).values] == pytest.approx([0.2, 0.4])


def test_legendre_pairing(pair_state):
    nu = MeasureVec.constant(pair_state.space, Fraction(1, 50))
    residual = legendre_residual(pair_state, nu)
    assert abs(residual["biconnected"]) < 1e-14
    assert abs(residual["cluster"]) < 1e-5


def test_free_energy_domain(pair_state):
    with pytest.raises(DomainError):
        free_energy(pair_state, MeasureVec(pair_state.space, (Fraction(-1, 10), 0)))
    with pytest.raises(DomainError):
        free_energy(pair_state, MeasureVec.constant(pair_state.space, Fraction(1, 10)), [1, 0])


def test_run_operation_dispatch(pair_state):
    out = run_operation(pair_state, "rho_of_z", {"z": ["1/100", "1/100"]})
    assert len(out["values"]) == 2 and out["certificate"] is None
    out = run_operation(pair_state, "check_sab", {"nu": ["1/100", "1/100"]})
    assert out["certificate"]["passed"]
    out = run_operation(pair_state, "roundtrip_check", {})
    assert out["residual"]["passed"]
    with pytest.raises(DomainError):
        run_operation(pair_state, "zeta_of_nu", {})
    with pytest.raises(DomainError):
        run_operation(pair_state, "teleport", {})
