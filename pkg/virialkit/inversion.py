"""Density/activity inversion on a species space.

GCState bundles a pair potential with a truncation order and lazily builds
the coefficient families everything else reads:

    A   rooted family, A_n(q; x)
    D   rooted family, D_{n+1}(q, x) at order n
    phi series of Ursell functions
    t   inverse-series family

All convergence statements produced here are truncated certificates.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from virialkit import settings
from virialkit.errors import CapabilityError, DomainError, StructuralError
from virialkit.graphs import build_A_family, build_D_family, build_phi_series, d_series
from virialkit.series import (
    FormalSeries,
    ResidualReport,
    RootedSeriesFamily,
    abs_series,
    add,
    compose_measure,
    evaluate,
    evaluate_orders,
    exp_series,
    residual_report,
    scale,
    var_derivative,
)
from virialkit.species import BoundCertificate, MeasureVec, PairPotential, SpeciesSpace
from virialkit.trees import TnFamily, compute_tn, eval_T, eval_T_abs, roundtrip_residuals
from virialkit.utils.partitions import inverse_multiplicity
from virialkit.utils.scalars import Scalar, exp_scalar, parse_scalar

logger = logging.getLogger(__name__)

Weights = Union[Scalar, Sequence[Scalar]]


class GCState:
    """Grand-canonical state: potential + truncation order + cached families."""

    def __init__(self, pot: PairPotential, N: int, threads: Optional[int] = None, d_method: str = "auto",
                 allow_large: bool = False):
        if N < 1:
            raise DomainError("truncation order N must be >= 1")
        if N > settings.MAX_ORDER and not allow_large:
            raise CapabilityError(f"truncation order {N} exceeds VIRIALKIT_MAX_ORDER={settings.MAX_ORDER}")
        self.pot = pot
        self.N = N
        self.threads = threads
        self.d_method = d_method

    @property
    def space(self) -> SpeciesSpace:
        return self.pot.space

    @property
    def mayer(self):
        return self.pot.mayer

    @cached_property
    def A(self) -> RootedSeriesFamily:
        logger.info("building A family (S=%d, N=%d)", self.space.size, self.N)
        return build_A_family(self.pot, self.N, self.threads)

    @cached_property
    def D(self) -> RootedSeriesFamily:
        logger.info("building D family (S=%d, N=%d, method=%s)", self.space.size, self.N, self.d_method)
        return build_D_family(self.pot, self.N, self.d_method, self.threads)

    @cached_property
    def D_series(self) -> FormalSeries:
        return d_series(self.D, self.N)

    @cached_property
    def phi(self) -> FormalSeries:
        return build_phi_series(self.pot, self.N)

    @cached_property
    def t(self) -> TnFamily:
        logger.info("computing t family (S=%d, N=%d)", self.space.size, self.N)
        return compute_tn(self.A, self.N, self.threads)

    def measure(self, values: Union[MeasureVec, Sequence[Scalar], Scalar]) -> MeasureVec:
        if isinstance(values, MeasureVec):
            return values
        if not isinstance(values, (list, tuple)):
            values = [values] * self.space.size
        return MeasureVec(self.space, tuple(values))


def _per_species(st: GCState, w: Weights, name: str) -> Tuple[Scalar, ...]:
    if isinstance(w, (list, tuple)):
        values = tuple(w)
        if len(values) != st.space.size:
            raise DomainError(f"{name} needs {st.space.size} entries")
    else:
        values = (w,) * st.space.size
    if any(v < 0 for v in values):
        raise DomainError(f"weight function {name} must be non-negative")
    return values


# -- convergence conditions ------------------------------------------------


def check_PU(st: GCState, z: MeasureVec, a: Weights) -> BoundCertificate:
    """a(x) >= sum_y f_bar(x, y) e^{a(y) + beta B(y)} |z|(y) w_y."""
    a = _per_species(st, a, "a")
    z = st.measure(z).abs()
    beta = float(st.pot.beta)
    S = st.space.size
    load = [math.exp(float(a[y]) + beta * float(st.pot.b_stability[y])) * float(z.mass(y)) for y in range(S)]
    margins = [float(a[x]) - sum(float(st.mayer.f_bar[x][y]) * load[y] for y in range(S)) for x in range(S)]
    return BoundCertificate.from_margins("PU", a, a, margins)


def check_Sab(st: GCState, nu: MeasureVec, a: Weights, b: Weights) -> BoundCertificate:
    """a(x) >= sum_y f_bar(x, y) e^{a(y) + b(y) + beta B(y) + beta B*(y)} |nu|(y) w_y, a <= b."""
    a = _per_species(st, a, "a")
    b = _per_species(st, b, "b")
    if any(x > y for x, y in zip(a, b)):
        raise DomainError("condition Sab needs a <= b")
    nu = st.measure(nu).abs()
    beta = float(st.pot.beta)
    S = st.space.size
    load = [
        math.exp(float(a[y]) + float(b[y]) + beta * (float(st.pot.b_stability[y]) + float(st.pot.b_star[y])))
        * float(nu.mass(y))
        for y in range(S)
    ]
    margins = [float(a[x]) - sum(float(st.mayer.f_bar[x][y]) * load[y] for y in range(S)) for x in range(S)]
    return BoundCertificate.from_margins("Sab", a, b, margins)


def check_Sb(st: GCState, nu: MeasureVec, b: Weights) -> BoundCertificate:
    """b(q) >= sum_{n<=N} (1/n!) sum |A_n(q; x)| e^{b(x_1)+..+b(x_n)} |nu|^n (truncated)."""
    b = _per_species(st, b, "b")
    nu = st.measure(nu).abs()
    tilted = MeasureVec(st.space, tuple(float(nu[x]) * math.exp(float(b[x])) for x in range(st.space.size)))
    margins = [float(b[q]) - float(evaluate(abs_series(st.A[q]), tilted)) for q in range(st.space.size)]
    return BoundCertificate.from_margins("Sb", (0,) * len(b), b, margins, truncation=st.N)


def virMb_sums(st: GCState, nu: MeasureVec) -> Tuple[float, ...]:
    """sum_{n<=N} (1/n!) sum |D_{n+1}(q, x)| |nu|^n per root q."""
    nu = st.measure(nu).abs()
    return tuple(float(evaluate(abs_series(st.D[q]), nu)) for q in range(st.space.size))


def check_virMb(st: GCState, nu: MeasureVec, b: Weights) -> BoundCertificate:
    b = _per_species(st, b, "b")
    sums = virMb_sums(st, nu)
    return BoundCertificate.from_margins("virMb", (0,) * len(b), b, [float(bq) - s for bq, s in zip(b, sums)],
                                         truncation=st.N, sums=list(sums))


def check_dissymmetry_condition(st: GCState, nu: MeasureVec, a: Weights, b: Weights) -> BoundCertificate:
    """Sab, the truncated virMb bound and the finite-measure condition, which
    is automatic on a finite species space."""
    sab = check_Sab(st, nu, a, b)
    mb = check_virMb(st, nu, b)
    margins = [min(x, y) for x, y in zip(sab.margins, mb.margins)]
    return BoundCertificate.from_margins("dissym_b", sab.a, sab.b, margins, truncation=st.N,
                                         finite_measure="trivially satisfied on a finite species space")


def find_certificate(st: GCState, condition: str, measure: MeasureVec) -> BoundCertificate:
    """Constant-weight search a = b = GRID_STEP * k, k = 1..GRID_STEPS.

    Returns the first passing certificate, or the failing one with the
    largest worst margin when none passes.
    """
    best = None
    for k in range(1, settings.GRID_STEPS + 1):
        w = settings.GRID_STEP * k
        if condition == "PU":
            cert = check_PU(st, measure, w)
        elif condition == "Sab":
            cert = check_Sab(st, measure, w, w)
        elif condition == "Sb":
            cert = check_Sb(st, measure, w)
        else:
            raise DomainError(f"no grid search for condition {condition!r}")
        if cert.passed:
            logger.info("grid search: %s passes at a = b = %.2f", condition, w)
            return cert
        if best is None or cert.worst > best.worst:
            best = cert
    logger.info("grid search: %s fails for every grid weight", condition)
    return best


# -- density and activity maps ---------------------------------------------


def rho_of_z(st: GCState, z: MeasureVec) -> MeasureVec:
    """rho(q) = z(q) exp(-A(q; z))."""
    z = st.measure(z)
    return MeasureVec(st.space, tuple(
        z[q] * exp_scalar(-evaluate(st.A[q], z)) if z[q] != 0 else 0 for q in range(st.space.size)
    ))


def zeta_of_nu(st: GCState, nu: MeasureVec, path: str = "biconnected") -> MeasureVec:
    """zeta(q) = nu(q) T_q(nu) (tree path) or nu(q) exp(-D(q; nu)) (biconnected path)."""
    nu = st.measure(nu)
    S = st.space.size
    if path == "tree":
        values = tuple(nu[q] * eval_T(st.t, nu, q) for q in range(S))
    elif path == "biconnected":
        values = tuple(nu[q] * exp_scalar(-evaluate(st.D[q], nu)) if nu[q] != 0 else 0 for q in range(S))
    else:
        raise DomainError(f"unknown path {path!r}")
    return MeasureVec(st.space, values)


def zeta_paths_residual(st: GCState, tol: float = 1e-12) -> ResidualReport:
    """T_q - exp(-D_q), the formal difference of the two activity paths."""
    residuals = [add(st.t[q], scale(-1, exp_series(scale(-1, st.D[q])))) for q in range(st.space.size)]
    return residual_report("zeta paths", residuals, tol)


def roundtrip_check(st: GCState, x: Optional[MeasureVec] = None, N: Optional[int] = None,
                    tol: float = 1e-12) -> ResidualReport:
    """Residuals of zeta o rho - id and rho o zeta - id as series in the input."""
    A, t = st.A, st.t
    if N is not None and N != st.N:
        if N > st.N:
            raise StructuralError("requested order exceeds the state's truncation")
        A, t = A.map(lambda m: m.truncate(N)), t.map(lambda m: m.truncate(N))
    zeta_rho, rho_zeta = roundtrip_residuals(A, t)
    report = residual_report("roundtrip", zeta_rho + rho_zeta, tol)
    if x is None:
        return report
    worst = max(abs(evaluate(r, st.measure(x))) for r in zeta_rho + rho_zeta)
    return ResidualReport(report.name, report.trunc, report.max_abs, report.per_order, report.exact,
                          report.passed, tol, float(worst))


# -- exact finite partition function ---------------------------------------


def _configurations(st: GCState, n_max: Optional[int]):
    S = st.space.size
    if n_max is None:
        if not st.pot.diagonal_hard_core:
            raise DomainError("the configuration sum does not terminate; pass n_max")
        n_max = S
    for n in range(n_max + 1):
        for config in combinations_with_replacement(range(S), n):
            yield config


def _boltzmann(st: GCState, config: Sequence[int]) -> Scalar:
    """prod_{i<j} (1 + f) = e^{-beta H_n}."""
    f = st.mayer.f
    weight = 1
    for i in range(len(config)):
        for j in range(i + 1, len(config)):
            weight *= 1 + f[config[i]][config[j]]
            if weight == 0:
                return 0
    return weight


def xi_polynomial(st: GCState, z: MeasureVec, n_max: Optional[int] = None) -> List[Scalar]:
    """Coefficients c_n with Xi(lambda z) = sum_n c_n lambda^n."""
    z = st.measure(z)
    masses = [z.mass(x) for x in range(st.space.size)]
    coeffs: List[Scalar] = []
    for config in _configurations(st, n_max):
        while len(coeffs) <= len(config):
            coeffs.append(0)
        weight = _boltzmann(st, config)
        if weight == 0:
            continue
        term = weight * inverse_multiplicity(config)
        for x in config:
            term *= masses[x]
        coeffs[len(config)] += term
    return coeffs


@dataclass(frozen=True)
class PartitionSum:
    """Value of the configuration sum and whether it was cut short.

    ``truncated`` is False only when no configuration above n_max has
    non-zero weight, i.e. under a diagonal hard core with n_max >= |X|.
    """

    value: Scalar
    n_max: int
    truncated: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "n_max": self.n_max, "truncated": self.truncated}


def xi_exact(st: GCState, z: MeasureVec, n_max: Optional[int] = None) -> PartitionSum:
    """Xi = sum_n (1/n!) sum_x e^{-beta H_n(x)} prod z(x_i) w_i.

    Exact under a diagonal hard core; with n_max the sum is cut at n_max
    particles and the result is flagged as a truncation.
    """
    S = st.space.size
    coeffs = xi_polynomial(st, z, n_max)
    cut = S if n_max is None else n_max
    truncated = not (st.pot.diagonal_hard_core and cut >= S)
    if truncated:
        logger.warning("xi_exact: truncated at n_max=%d particles", cut)
    return PartitionSum(value=sum(coeffs), n_max=cut, truncated=truncated)


def density_exact(st: GCState, z: MeasureVec, q: int, n_max: Optional[int] = None) -> Scalar:
    """rho(q) = z(q) Xi^{-1} sum_n (1/n!) sum_x e^{-beta (H_n(x) + W(q; x))} prod z w."""
    z = st.measure(z)
    f = st.mayer.f
    masses = [z.mass(x) for x in range(st.space.size)]
    inner = 0
    limit = None if n_max is None else n_max - 1
    for config in _configurations(st, limit):
        weight = _boltzmann(st, config)
        for x in config:
            weight *= 1 + f[q][x]
        if weight == 0:
            continue
        term = weight * inverse_multiplicity(config)
        for x in config:
            term *= masses[x]
        inner += term
    return z[q] * inner / xi_exact(st, z, n_max).value


# -- thermodynamics --------------------------------------------------------


def log_xi_series(st: GCState, z: MeasureVec) -> Scalar:
    return evaluate(st.phi, st.measure(z))


def pressure_of_nu(st: GCState, nu: MeasureVec) -> Scalar:
    """sum nu w - sum_{2<=n<=N} ((n-1)/n!) sum D_n nu^n."""
    nu = st.measure(nu)
    orders = evaluate_orders(st.D_series, nu)
    ideal = sum(nu.mass(x) for x in range(st.space.size))
    return ideal - sum((n - 1) * orders[n] for n in range(2, len(orders)))


def _entropy(nu: MeasureVec, m_weights: Optional[Sequence[Scalar]]) -> float:
    if not nu.is_nonnegative():
        raise DomainError("free energy needs a non-negative density")
    m = m_weights or [1] * len(nu)
    if len(m) != len(nu):
        raise DomainError("m_weights needs one entry per species")
    total = 0.0
    for x in range(len(nu)):
        v = float(nu[x])
        if v == 0:
            continue
        if not m[x] > 0:
            raise DomainError(f"density has support on species {x} where the reference measure vanishes")
        total += v * (math.log(v / float(m[x])) - 1.0) * float(nu.space.weights[x])
    return total


def free_energy(st: GCState, nu: MeasureVec, m_weights: Optional[Sequence[Scalar]] = None) -> float:
    """beta F = sum nu (log(nu/m) - 1) w - sum_{2<=n<=N} (1/n!) sum D_n nu^n; 0 log 0 = 0."""
    nu = st.measure(nu)
    entropy = _entropy(nu, m_weights)
    orders = evaluate_orders(st.D_series, nu)
    return entropy - float(sum(orders[2:]))


def legendre_residual(st: GCState, nu: MeasureVec, m_weights: Optional[Sequence[Scalar]] = None) -> Dict[str, float]:
    """F(nu) + P(nu) - sum nu log(zeta[nu] / m) w.

    "biconnected" uses the pressure series in nu and vanishes identically;
    "cluster" uses log Xi(zeta[nu]) and vanishes to O(nu^{N+1}).
    """
    nu = st.measure(nu)
    S = st.space.size
    m = m_weights or [1] * S
    F = free_energy(st, nu, m)
    coupling = 0.0
    for q in range(S):
        if nu[q] == 0:
            continue
        # log zeta through order N overall: D_{n+1} terms with n <= N - 1
        tail = sum(evaluate_orders(st.D[q], nu)[: st.N])
        coupling += float(nu.mass(q)) * (math.log(float(nu[q]) / float(m[q])) - float(tail))
    zeta = zeta_of_nu(st, nu, "biconnected")
    return {
        "biconnected": F + float(pressure_of_nu(st, nu)) - coupling,
        "cluster": F + float(log_xi_series(st, zeta)) - coupling,
    }


def _order_weighted(K: FormalSeries, weight) -> FormalSeries:
    return FormalSeries.from_entries(
        K.space, K.trunc, {key: weight(t.order) * v for t in K.tensors for key, v in t.items()}, allow_large=True
    )


def dissymmetry_check(st: GCState, N: Optional[int] = None, tol: float = 1e-12) -> ResidualReport:
    """phi_n - n phi_n + sum_m (m-1) D_m composed with the rooted Ursell family."""
    N = st.N if N is None else N
    if N > 5:
        raise CapabilityError("dissymmetry check supports N <= 5")
    if N > st.N:
        raise StructuralError("requested order exceeds the state's truncation")
    phi_ext = build_phi_series(st.pot, N + 1, allow_large=True)
    rooted = RootedSeriesFamily([var_derivative(phi_ext, q) for q in range(st.space.size)])
    phi = phi_ext.truncate(N)
    k_dis = _order_weighted(st.D_series.truncate(N), lambda m: m - 1 if m >= 2 else 0)
    residual = add(add(phi, scale(-1, _order_weighted(phi, lambda n: n))), compose_measure(k_dis, rooted))
    return residual_report("dissymmetry", [residual], tol)


def density_series_identity(st: GCState, tol: float = 1e-12) -> ResidualReport:
    """d log Xi / d z(q) - exp(-A(q; .)) through order N."""
    phi_ext = build_phi_series(st.pot, st.N + 1, allow_large=True)
    residuals = [
        add(var_derivative(phi_ext, q), scale(-1, exp_series(scale(-1, st.A[q]))))
        for q in range(st.space.size)
    ]
    return residual_report("density", residuals, tol)


def virial_certificate_report(st: GCState, nu: MeasureVec, b: Weights) -> Dict[str, Any]:
    """Sab-adjacent bounds for a given nu and b: virMb and Mb certificates."""
    b = _per_species(st, b, "b")
    return {
        "virMb": check_virMb(st, nu, b).to_dict(),
        "Mb": eval_T_abs(st.t, st.measure(nu).abs(), b).to_dict(),
    }


# -- request dispatch (CLI and HTTP) ---------------------------------------


def run_operation(st: GCState, op: str, inputs: Mapping[str, Any]) -> Dict[str, Any]:
    """Evaluate one named operation; returns {values, certificate, residual}."""
    mode = "rational" if st.mayer.exact else "float"

    def vec(name: str) -> MeasureVec:
        raw = inputs.get(name)
        if raw is None:
            raise DomainError(f"operation {op} needs inputs.{name}")
        return st.measure([parse_scalar(v, mode) for v in raw])

    def weights(name: str) -> Optional[List[Scalar]]:
        raw = inputs.get(name)
        return None if raw is None else [parse_scalar(v, "float") for v in raw]

    out: Dict[str, Any] = {"values": None, "certificate": None, "residual": None}
    if op == "rho_of_z":
        out["values"] = list(rho_of_z(st, vec("z")).values)
    elif op == "zeta_of_nu":
        out["values"] = list(zeta_of_nu(st, vec("nu"), inputs.get("path") or "biconnected").values)
    elif op in ("check_pu", "check_sb", "check_sab"):
        key = "z" if op == "check_pu" else "nu"
        measure = vec(key)
        a, b = weights("a"), weights("b")
        if op == "check_pu":
            cert = check_PU(st, measure, a) if a is not None else find_certificate(st, "PU", measure)
        elif op == "check_sb":
            cert = check_Sb(st, measure, b) if b is not None else find_certificate(st, "Sb", measure)
        else:
            cert = check_Sab(st, measure, a, b) if a is not None and b is not None \
                else find_certificate(st, "Sab", measure)
        out["certificate"] = cert.to_dict()
    elif op == "roundtrip_check":
        out["residual"] = roundtrip_check(st).to_dict()
    elif op == "dissymmetry_check":
        out["residual"] = dissymmetry_check(st).to_dict()
    elif op == "pressure_of_nu":
        out["values"] = pressure_of_nu(st, vec("nu"))
    elif op == "free_energy":
        out["values"] = free_energy(st, vec("nu"))
    elif op == "log_xi_series":
        out["values"] = log_xi_series(st, vec("z"))
    elif op == "xi_exact":
        out["values"] = xi_exact(st, vec("z"), inputs.get("n_max")).to_dict()
    else:
        raise DomainError(f"unknown operation {op!r}")
    return out
