import math
from fractions import Fraction

import numpy as np
import pytest

from virialkit.errors import CapabilityError, DomainError
from virialkit.homogeneous import (
    INV_2E,
    HomogeneousModel,
    activity_of_density,
    ball_volume,
    banach_compare,
    beta_n_exact_1d,
    beta_n_mc,
    bloch_radii,
    bounds_table,
    cluster_integral_mc,
    hom_inversion_selftest,
    homogeneous_free_energy,
    homogeneous_pressure,
    k_closed_form,
    k_constant,
    k_maximizer,
    lp_chain,
    neighborhood_radii,
    r_lp,
    r_star,
    refinement_stub,
    ring_beta,
    tonks_beta_n,
    tonks_oracle,
    tree_fn_T,
    virial_pressure_coefficients,
    virial_table,
)
from virialkit.schemas import HomogeneousModelSchema

# C_bar = 1
UNIT_RODS = HomogeneousModel(dimension=1, kind="hard_rod", a=Fraction(1, 2))
RODS = HomogeneousModel(dimension=1, kind="hard_rod", a=1)
SPHERES = HomogeneousModel(dimension=3, kind="hard_sphere", radius=0.5)
DISKS = HomogeneousModel(dimension=2, kind="hard_sphere", radius=0.5)


def test_ball_volume():
    assert ball_volume(1, Fraction(1, 2)) == 1
    assert ball_volume(2, 1.0) == pytest.approx(math.pi)
    assert ball_volume(3, 1.0) == pytest.approx(4 * math.pi / 3)


@pytest.mark.parametrize("kwargs, error", [
    ({"dimension": 2, "kind": "hard_rod", "a": 1}, DomainError),
    ({"dimension": 4, "kind": "hard_sphere", "radius": 1}, CapabilityError),
    ({"dimension": 1, "kind": "hard_rod", "a": 0}, DomainError),
    ({"dimension": 3, "kind": "custom", "table": ((1.0, 0.0), (0.5, 0.0))}, DomainError),
    ({"dimension": 3, "kind": "custom", "table": ((0.0, -1.0), (1.0, 0.0))}, DomainError),
    ({"dimension": 3, "kind": "lennard"}, DomainError),
])
def test_model_validation(kwargs, error):
    with pytest.raises(error):
        HomogeneousModel(**kwargs)


def test_hard_sphere_geometry():
    assert SPHERES.exclusion_distance == 1.0
    assert SPHERES.exclusion_convention == "diameter"
    assert float(SPHERES.c_bar) == pytest.approx(4 * math.pi / 3)
    assert SPHERES.mayer_f([0.5, 1.5]).tolist() == [-1.0, 0.0]
    assert UNIT_RODS.c_bar == 1


def test_square_well_quadrature(fixtures_dir):
    schema = HomogeneousModelSchema.model_validate_json((fixtures_dir / "square_well.json").read_text())
    model = HomogeneousModel.from_schema(schema)
    core = 4 * math.pi / 3
    shell = core * (1.5 ** 3 - 1)
    assert model.c_bar == pytest.approx(core + (1 - math.exp(-0.5)) * shell, rel=1e-8)
    assert model.beta_1() == pytest.approx(-core + (math.exp(0.5) - 1) * shell, rel=1e-8)
    assert model.mayer_f([0.5, 1.0, 1.2, 1.4999, 1.5, 2.0]).tolist() == pytest.approx(
        [-1.0, math.exp(0.5) - 1, math.exp(0.5) - 1, math.exp(0.5) - 1, 0.0, 0.0])
    table = virial_table(model, 1)
    assert table.rows[0].method == "quadrature"


def test_tonks_coefficients():
    assert tonks_beta_n(1, 3) == [-2, Fraction(-3, 2), Fraction(-4, 3)]
    assert tonks_beta_n(Fraction(1, 2), 2) == [-1, Fraction(-3, 8)]
    with pytest.raises(DomainError):
        tonks_beta_n(1, 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_exact_one_dimensional_integrals(n):
    assert beta_n_exact_1d(1, n) == Fraction(-(n + 1), n)
    assert beta_n_exact_1d(Fraction(3, 2), n) == Fraction(-(n + 1), n) * Fraction(3, 2) ** n


def test_exact_one_dimensional_limits():
    with pytest.raises(CapabilityError):
        beta_n_exact_1d(1, 4)
    with pytest.raises(DomainError):
        beta_n_exact_1d(-1, 2)


def test_tonks_oracle_and_equation_of_state():
    exact = tonks_oracle(1, 0.5)
    assert exact["z"] == pytest.approx(math.e)
    assert exact["beta_p"] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        tonks_oracle(1, 1.0)

    rho = 0.05
    oracle = tonks_oracle(1, rho, N=10)
    beta_n = oracle["beta_n"]
    assert activity_of_density(beta_n, rho) == pytest.approx(oracle["z"], rel=1e-10)
    assert float(homogeneous_pressure(beta_n, rho)) == pytest.approx(oracle["beta_p"], rel=1e-10)
    assert homogeneous_free_energy(beta_n, rho) == pytest.approx(oracle["beta_f"], rel=1e-10)


def test_pressure_coefficients():
    assert virial_pressure_coefficients([-2, Fraction(-3, 2)]) == [1, 1]


def test_virial_table_for_hard_rods():
    table = virial_table(RODS, 4)
    assert [r.method for r in table.rows] == ["exact_1d"] * 3 + ["eos_inversion"]
    assert table.values == [-2, Fraction(-3, 2), Fraction(-4, 3), Fraction(-5, 4)]
    assert table.beta(2) == Fraction(-3, 2)
    assert table.as_rows()[0] == {"n": 1, "beta_n": -2, "method": "exact_1d", "stderr": 0.0}


def test_virial_table_first_order_and_ideal():
    assert virial_table(HomogeneousModel(dimension=3, kind="ideal"), 2).values == [0, 0]
    row = virial_table(SPHERES, 1).rows[0]
    assert row.method == "analytic"
    assert row.value == pytest.approx(-4 * math.pi / 3)
    with pytest.raises(DomainError):
        virial_table(SPHERES, 0)


def test_mc_guards():
    with pytest.raises(CapabilityError):
        beta_n_mc(RODS, 2)
    with pytest.raises(CapabilityError):
        beta_n_mc(SPHERES, 4)
    with pytest.raises(DomainError):
        cluster_integral_mc(DISKS.kernel, 1, 2, 1.0, samples=2, batches=4)


def test_mc_is_reproducible_and_thread_independent():
    one = cluster_integral_mc(DISKS.kernel, 1, 2, 1.0, samples=16000, seed=5, batches=16, threads=1)
    many = cluster_integral_mc(DISKS.kernel, 1, 2, 1.0, samples=16000, seed=5, batches=16, threads=4)
    assert one == many
    assert one.samples == 16000
    assert abs(one.value + math.pi) < 5 * one.stderr


@pytest.mark.slow
def test_mc_second_order_hard_spheres():
    value, err = beta_n_mc(SPHERES, 2, samples=64000, seed=1)
    expected = -(15 / 64) * (4 * math.pi / 3) ** 2
    assert abs(value - expected) < 4 * err


@pytest.mark.slow
def test_mc_second_order_hard_disks():
    value, err = beta_n_mc(DISKS, 2, samples=64000, seed=2)
    expected = -1.5 * (4 / 3 - math.sqrt(3) / math.pi) * math.pi ** 2 / 4
    assert abs(value - expected) < 4 * err


def test_radius_constants():
    assert 0.14476 <= k_constant() <= 0.14478
    assert k_maximizer() == pytest.approx(0.314923, abs=1e-5)
    assert k_closed_form() == pytest.approx(k_constant(), rel=1e-12)
    assert 0.1839 < INV_2E < 0.1840
    assert r_star(UNIT_RODS) == pytest.approx(INV_2E)
    assert r_lp(UNIT_RODS) == pytest.approx(k_constant())
    assert r_star(UNIT_RODS) / r_lp(UNIT_RODS) == pytest.approx(1.2706, abs=1e-4)


def test_neighborhood_radii():
    radii = neighborhood_radii(UNIT_RODS)
    assert radii["inner"] == pytest.approx(0.17627, abs=1e-5)
    assert radii["outer"] == pytest.approx(0.303265, abs=1e-6)
    assert radii["inner_below_r_star"] and radii["r_star_below_outer"]


def test_stability_constants_shrink_radii():
    bound = HomogeneousModel(dimension=1, kind="hard_rod", a=Fraction(1, 2), B=1.0)
    assert r_star(bound) == pytest.approx(INV_2E / math.e)
    assert r_lp(bound, B_bar=2.0) == pytest.approx(k_constant() / math.e ** 2)


def test_tree_function():
    assert tree_fn_T(0) == 0
    assert tree_fn_T(1 / math.e) == pytest.approx(1.0, abs=1e-10)
    assert tree_fn_T(1 / math.e - 1e-9) == pytest.approx(1.0, abs=1e-4)
    for s in np.linspace(1e-4, 1 / math.e, 100):
        T = tree_fn_T(s)
        assert T == pytest.approx(s * math.exp(T), abs=1e-10)
    with pytest.raises(DomainError):
        tree_fn_T(0.5)


@pytest.mark.parametrize("c", [1.0, 4 * math.pi / 3])
def test_lp_chain_supremum(c):
    chain = lp_chain(c)
    assert chain["sup"] == pytest.approx(chain["closed_form"], rel=1e-8)
    assert chain["closed_form"] == pytest.approx(1 / (2 * math.e * c))
    assert chain["argmax"] == pytest.approx(0.5 * math.exp(-0.5) / c, rel=1e-4)


@pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
def test_banach_ratio_is_eight(c):
    assert banach_compare(lambda r: c * r)["ratio"] == pytest.approx(8.0, abs=1e-6)
    assert banach_compare(lambda r: c * r * r)["ratio"] == pytest.approx(8.0, abs=1e-6)


def test_banach_sampled_growth():
    rs = np.linspace(0.0, 50.0, 5001)
    result = banach_compare((rs, 2.0 * rs))
    assert result["ratio"] == pytest.approx(8.0, abs=1e-6)
    assert result["P"] == pytest.approx(1 / (8 * 2.0 * math.e), rel=1e-8)
    with pytest.raises(DomainError):
        banach_compare((rs, -rs))


def test_bloch_radii():
    assert bloch_radii(2.0, 1.0, 1.0) == {"r": 1.0, "P": 0.5}
    with pytest.raises(DomainError):
        bloch_radii(0.0, 1.0, 1.0)


def test_bounds_table_rows():
    rows = {r["name"]: r["value"] for r in bounds_table(UNIT_RODS)}
    assert rows["C_bar"] == 1.0
    assert rows["R_star"] == pytest.approx(INV_2E)
    assert rows["lp_sup"] == pytest.approx(rows["lp_closed_form"], rel=1e-8)
    assert rows["banach_ratio"] == pytest.approx(8.0, abs=1e-6)
    assert rows["R_star_over_R_0"] == pytest.approx(1.2706, abs=1e-4)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_ring_lattice_coefficients(k):
    assert ring_beta(k, 2) == [Fraction(-2) + Fraction(1, k), Fraction(-(3 * k * k - 3 * k + 1), 2 * k * k)]


def test_homogeneous_self_test():
    report = hom_inversion_selftest(RODS, 3)
    assert report["passed"]
    assert report["exact_match"] and report["activity_coefficients_match"]
    assert report["zeta_path_residual"] < 1e-12
    assert all(0.8 < o < 1.2 for row in report["grid_orders"] for o in row)
    with pytest.raises(DomainError):
        hom_inversion_selftest(SPHERES, 2)


def test_refinement_is_not_available():
    with pytest.raises(CapabilityError):
        refinement_stub(DISKS)
