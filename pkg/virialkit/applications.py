"""Worked settings built on the inversion engine.

Grid profiles treat grid points as species (cell volumes become the
reference weights), so the external-potential inversion is the generic
activity map.  Mixtures and rod systems are homogeneous in space and only
need the cluster integrals of their labelled Mayer kernels.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from virialkit import settings
from virialkit.errors import CapabilityError, CertificateRefused, DomainError
from virialkit.homogeneous import INV_2E, ball_volume, cluster_integral_mc
from virialkit.inversion import GCState, check_Sab, density_exact, find_certificate
from virialkit.series import evaluate
from virialkit.species import (
    BoundCertificate,
    MeasureVec,
    PairPotential,
    SpeciesSpace,
    kernel_potential,
    overlap_segments,
    overlap_spheres,
)
from virialkit.utils.partitions import inverse_multiplicity

logger = logging.getLogger(__name__)

# grid size limit for N >= 3 (cost grows like S^n per order)
MAX_PROFILE_POINTS = 10


# -- inhomogeneous profiles ------------------------------------------------


@dataclass(frozen=True)
class GridProfile:
    points: Tuple[Tuple[float, ...], ...]
    cell_volumes: Tuple[float, ...]
    rho: Tuple[float, ...]
    z0: float = 1.0
    beta: float = 1.0
    v_ext: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        n = len(self.points)
        if n == 0:
            raise DomainError("a profile needs at least one grid point")
        if len(self.cell_volumes) != n or len(self.rho) != n:
            raise DomainError("points, cell_volumes and rho must have the same length")
        if any(not c > 0 for c in self.cell_volumes):
            raise DomainError("cell volumes must be positive")
        if any(r < 0 for r in self.rho):
            raise DomainError("densities must be non-negative")
        if not (self.z0 > 0 and self.beta > 0):
            raise DomainError("z0 and beta must be positive")
        if self.v_ext is not None and len(self.v_ext) != n:
            raise DomainError("v_ext needs one value per grid point")

    @classmethod
    def from_schema(cls, schema) -> "GridProfile":
        return cls(
            points=tuple(tuple(p) for p in schema.points), cell_volumes=tuple(schema.cell_volumes),
            rho=tuple(schema.rho), z0=schema.z0, beta=schema.beta,
            v_ext=None if schema.v_ext is None else tuple(schema.v_ext),
        )

    @property
    def size(self) -> int:
        return len(self.points)


def grid_potential(gp: GridProfile, kernel: Optional[Mapping[str, Any]] = None) -> PairPotential:
    """Pair potential between grid points; kernel None is the ideal gas."""
    space = SpeciesSpace.from_weights(gp.cell_volumes, [{"position": list(p)} for p in gp.points],
                                      allow_large=True)
    if kernel is None:
        v = [[0.0] * gp.size for _ in range(gp.size)]
    else:
        kernel = dict(kernel)
        kind = kernel.pop("kind")
        v = kernel_potential(kind, {k: x for k, x in kernel.items() if x is not None},
                             [s.payload for s in space.species])
    return PairPotential.from_matrix(space, v, gp.beta)


def _profile_state(gp: GridProfile, kernel, N: int, threads: Optional[int]) -> GCState:
    if N >= 3 and gp.size > MAX_PROFILE_POINTS:
        raise CapabilityError(f"grids above {MAX_PROFILE_POINTS} points are limited to N <= 2")
    return GCState(grid_potential(gp, kernel), N, threads=threads, allow_large=True)


def invert_profile(gp: GridProfile, kernel: Optional[Mapping[str, Any]], N: int,
                   a: Optional[float] = None, b: Optional[float] = None,
                   threads: Optional[int] = None) -> Dict[str, Any]:
    """External potential producing the target density on the grid.

    beta V(q) = log z0 - log rho(q) + sum_{n<=N} (1/n!) sum D_{n+1}(q, x) rho^n,
    accepted only under a passing Sab certificate.
    """
    st = _profile_state(gp, kernel, N, threads)
    nu = MeasureVec(st.space, gp.rho)
    if a is None and b is None:
        cert = find_certificate(st, "Sab", nu)
    else:
        a = b if a is None else a
        cert = check_Sab(st, nu, a, a if b is None else b)
    if not cert.passed:
        raise CertificateRefused("density profile fails the Sab condition", cert)

    beta_v = []
    for q in range(gp.size):
        if gp.rho[q] == 0:
            beta_v.append(math.inf)
            continue
        beta_v.append(math.log(gp.z0) - math.log(gp.rho[q]) + float(evaluate(st.D[q], nu)))
    v_ext = [x / gp.beta for x in beta_v]
    result = {
        "v_ext": v_ext,
        "z": [gp.z0 * math.exp(-x) for x in beta_v],
        "certificate": cert,
        "uniqueness": "unique among potentials whose activity satisfies the certificate's weighted bound",
    }
    if gp.v_ext is not None:
        result["v_ext_error"] = max(abs(x - y) for x, y in zip(v_ext, gp.v_ext) if math.isfinite(x))
    logger.info("inverted profile of %d points at N=%d (certificate %s)", gp.size, N, cert.condition)
    return result


def profile_density(gp: GridProfile, kernel: Optional[Mapping[str, Any]], v_ext: Sequence[float],
                    n_max: Optional[int] = None) -> List[float]:
    """Exact grid density for the activity z0 exp(-beta V)."""
    st = GCState(grid_potential(gp, kernel), 1, allow_large=True)
    z = MeasureVec(st.space, tuple(gp.z0 * math.exp(-gp.beta * v) for v in v_ext))
    return [float(density_exact(st, z, q, n_max)) for q in range(gp.size)]


# -- hard-sphere mixtures --------------------------------------------------


def lens_volume(d: int, t: float, r1: float, r2: float) -> float:
    """Volume of the intersection of balls of radii r1, r2 whose centres are t apart."""
    t = abs(t)
    if t >= r1 + r2:
        return 0.0
    if d == 1:
        return min(r1, t + r2) - max(-r1, t - r2)
    if t <= abs(r1 - r2):
        return float(ball_volume(d, min(r1, r2)))
    if d == 2:
        c1 = np.clip((t * t + r1 * r1 - r2 * r2) / (2 * t * r1), -1.0, 1.0)
        c2 = np.clip((t * t + r2 * r2 - r1 * r1) / (2 * t * r2), -1.0, 1.0)
        kite = math.sqrt(max(0.0, (-t + r1 + r2) * (t + r1 - r2) * (t - r1 + r2) * (t + r1 + r2)))
        return float(r1 * r1 * math.acos(c1) + r2 * r2 * math.acos(c2) - 0.5 * kite)
    if d == 3:
        return math.pi * (r1 + r2 - t) ** 2 * (t * t + 2 * t * (r1 + r2) - 3 * (r1 - r2) ** 2) / (12 * t)
    raise CapabilityError("lens volumes are available for d <= 3")


def triangle_integral(d: int, r01: float, r02: float, r12: float) -> float:
    """int int 1[|x1| < r01] 1[|x2| < r02] 1[|x1 - x2| < r12] dx1 dx2."""
    surface = float(d * ball_volume(d, 1.0))
    kinks = sorted({x for x in (abs(r02 - r12), r02 + r12) if 0 < x < r01})
    value, _ = integrate.quad(lambda t: t ** (d - 1) * lens_volume(d, t, r02, r12), 0.0, r01,
                              points=kinks or None, limit=200)
    return surface * value


@dataclass(frozen=True)
class MixtureSpec:
    radii: Tuple[float, ...]
    rho: Tuple[float, ...]
    dimension: int = 3
    a: Optional[Tuple[float, ...]] = None
    b: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        K = len(self.radii)
        if K == 0 or len(self.rho) != K:
            raise DomainError("radii and rho must be non-empty and of equal length")
        if any(not r > 0 for r in self.radii):
            raise DomainError("radii must be positive")
        if any(r < 0 for r in self.rho):
            raise DomainError("densities must be non-negative")
        if self.dimension not in (1, 2, 3):
            raise CapabilityError("mixtures are supported in d <= 3")
        for w in (self.a, self.b):
            if w is not None and len(w) != K:
                raise DomainError("weights need one entry per component")
        if self.a is not None and self.b is not None:
            if any(not (bk >= ak >= 0) for ak, bk in zip(self.a, self.b)):
                raise DomainError("weights must satisfy b_k >= a_k >= 0")

    @classmethod
    def from_schema(cls, schema) -> "MixtureSpec":
        return cls(tuple(schema.radii), tuple(schema.rho), schema.dimension,
                   None if schema.a is None else tuple(schema.a), None if schema.b is None else tuple(schema.b))

    @property
    def size(self) -> int:
        return len(self.radii)

    def excluded(self, k: int, l: int) -> float:
        return float(ball_volume(self.dimension, self.radii[k] + self.radii[l]))


def mixture_condition(ms: MixtureSpec, a: Sequence[float], b: Sequence[float]) -> BoundCertificate:
    """sum_l rho_l vol_d(R_k + R_l) e^{a_l + b_l} <= a_k."""
    margins = []
    for k in range(ms.size):
        load = sum(ms.rho[l] * ms.excluded(k, l) * math.exp(a[l] + b[l]) for l in range(ms.size))
        margins.append(a[k] - load)
    return BoundCertificate.from_margins("mixture", a, b, margins)


def _mixture_certificate(ms: MixtureSpec) -> BoundCertificate:
    if ms.a is not None:
        return mixture_condition(ms, ms.a, ms.b if ms.b is not None else ms.a)
    best = None
    for step in range(1, settings.GRID_STEPS + 1):
        w = [settings.GRID_STEP * step] * ms.size
        cert = mixture_condition(ms, w, w)
        if cert.passed:
            return cert
        if best is None or cert.worst > best.worst:
            best = cert
    return best


def _sphere_kernel(radii: Sequence[float], labels: Sequence[int]):
    def kernel(xi, xj, i, j):
        return -overlap_spheres(xi - xj, radii[labels[i]] + radii[labels[j]]).astype(float)
    return kernel


def invert_mixture(ms: MixtureSpec, N: int, seed: int = 0, samples: Optional[int] = None,
                   batches: Optional[int] = None, threads: Optional[int] = None) -> Dict[str, Any]:
    """Activities z_k of a hard-sphere mixture at densities rho_k.

    Orders 1 and 2 are exact (excluded volumes and radial lens integrals);
    order 3 is sampled.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    if N > 3:
        raise CapabilityError("mixture inversion is available for N <= 3")
    cert = _mixture_certificate(ms)
    if not cert.passed:
        raise CertificateRefused("mixture densities fail the activity condition", cert)
    K, d = ms.size, ms.dimension
    R = ms.radii
    terms = [[0.0] * N for _ in range(K)]
    stderr = [0.0] * K
    for k in range(K):
        terms[k][0] = -sum(ms.rho[l] * ms.excluded(k, l) for l in range(K))
        if N >= 2:
            acc = 0.0
            for l in range(K):
                for m in range(K):
                    acc -= ms.rho[l] * ms.rho[m] * triangle_integral(d, R[k] + R[l], R[k] + R[m], R[l] + R[m])
            terms[k][1] = acc / 2
        if N >= 3:
            acc, var = 0.0, 0.0
            for labels in combinations_with_replacement(range(K), 2 + 1):
                # ordered label tuples with the same multiset give the same integral
                weight = float(inverse_multiplicity(labels)) * math.factorial(3)
                dens = math.prod(ms.rho[l] for l in labels)
                if dens == 0:
                    continue
                verts = (k,) + labels
                est = cluster_integral_mc(_sphere_kernel(R, verts), 3, d, 2 * max(R[v] for v in verts),
                                          samples, (seed, k) + labels, batches, threads)
                acc += weight * dens * est.value
                var += (weight * dens * est.stderr) ** 2
            terms[k][2] = acc / math.factorial(3)
            stderr[k] = math.sqrt(var) / math.factorial(3)
    z = [ms.rho[k] * math.exp(-sum(terms[k])) if ms.rho[k] > 0 else 0.0 for k in range(K)]
    logger.info("inverted %d-component mixture at N=%d", K, N)
    return {"z": z, "terms": terms, "stderr": stderr, "certificate": cert}


# -- thin rods with discrete orientations ----------------------------------


@dataclass(frozen=True)
class RodSystem:
    length: float
    rho0: float
    angles: Tuple[float, ...]
    probabilities: Tuple[float, ...]
    dimension: int = 2

    def __post_init__(self):
        if self.dimension != 2:
            raise CapabilityError("rod systems are implemented in two dimensions")
        if not self.angles or len(self.angles) != len(self.probabilities):
            raise DomainError("angles and probabilities must be non-empty and of equal length")
        if any(p < 0 for p in self.probabilities) or not math.isclose(sum(self.probabilities), 1.0, abs_tol=1e-12):
            raise DomainError("orientation probabilities must be non-negative and sum to 1")
        if self.length < 0 or self.rho0 < 0:
            raise DomainError("length and rho0 must be non-negative")

    @classmethod
    def from_schema(cls, schema) -> "RodSystem":
        return cls(schema.length, schema.rho0, tuple(schema.angles), tuple(schema.probabilities), schema.dimension)

    def excluded_area(self, s: int, t: int) -> float:
        return self.length ** 2 * abs(math.sin(self.angles[s] - self.angles[t]))


def rods_bound(rs: RodSystem) -> BoundCertificate:
    """rho0 sup_s sum_t p(t) excl(s, t) <= 1/(2e)."""
    S = len(rs.angles)
    margins = [INV_2E - rs.rho0 * sum(rs.probabilities[t] * rs.excluded_area(s, t) for t in range(S))
               for s in range(S)]
    return BoundCertificate.from_margins("rods", (0.0,) * S, (0.0,) * S, margins)


def _rod_kernel(rs: RodSystem, labels: Sequence[int]):
    def kernel(xi, xj, i, j):
        return -overlap_segments(xi, rs.angles[labels[i]], xj, rs.angles[labels[j]], rs.length).astype(float)
    return kernel


def rods_free_energy(rs: RodSystem, N: int, seed: int = 0, samples: Optional[int] = None,
                     batches: Optional[int] = None, threads: Optional[int] = None) -> Dict[str, Any]:
    """beta F / |volume| split into ideal, orientational and cluster terms."""
    if N < 1:
        raise DomainError("N must be >= 1")
    if N > 4:
        raise CapabilityError("rod free energies are available for N <= 4")
    cert = rods_bound(rs)
    if not cert.passed:
        raise CertificateRefused("rod density exceeds the convergence bound", cert)
    rho0, p = rs.rho0, rs.probabilities
    S = len(p)
    terms: Dict[str, float] = {
        "ideal": rho0 * (math.log(rho0) - 1.0) if rho0 > 0 else 0.0,
        "orientational": rho0 * sum(x * math.log(x) for x in p if x > 0),
    }
    stderr: Dict[str, float] = {}
    for n in range(2, N + 1):
        if n == 2:
            integral = -sum(p[s] * p[t] * rs.excluded_area(s, t) for s in range(S) for t in range(S))
            err = 0.0
        elif rs.length == 0 or rho0 == 0:
            integral, err = 0.0, 0.0
        else:
            integral, var = 0.0, 0.0
            for labels in combinations_with_replacement(range(S), n):
                weight = float(inverse_multiplicity(labels)) * math.factorial(n) * math.prod(p[s] for s in labels)
                if weight == 0:
                    continue
                est = cluster_integral_mc(_rod_kernel(rs, labels), n - 1, 2, rs.length,
                                          samples, (seed, n) + labels, batches, threads)
                integral += weight * est.value
                var += (weight * est.stderr) ** 2
            err = math.sqrt(var)
        scale = rho0 ** n / math.factorial(n)
        terms[f"order_{n}"] = -scale * integral
        stderr[f"order_{n}"] = scale * err
    total = sum(terms.values())
    return {"total": total, "terms": terms, "stderr": stderr, "certificate": cert}


# -- a mixture with no bounded Banach inverse ------------------------------


def unbounded_mixture_demo(K: int = 3, z1: float = -0.1, zk: float = 1.0) -> Dict[str, Any]:
    """rho_1 = z_1, rho_k = z_k e^{-k z_1}, inverted by z_k = rho_k e^{k rho_1}.

    The deviation |rho_k - z_k| grows without bound in k for z_1 < 0, so no
    ball of the sup norm is mapped into a ball; weights b(k) proportional to
    k still give a passing certificate.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    z = [z1] + [zk] * (K - 1)
    rho = [z[0]] + [z[k - 1] * math.exp(-k * z1) for k in range(2, K + 1)]
    back = [rho[0]] + [rho[k - 1] * math.exp(k * rho[0]) for k in range(2, K + 1)]
    ratios = [abs(rho[k] / z[k]) if z[k] != 0 else 1.0 for k in range(K)]
    deviation = [abs(r - x) for r, x in zip(rho, z)]

    # A(k; z) = k z_1: weighted bound k |z_1| e^{a(1)} <= a(k) with a(k) = c k
    c = 2.0 * abs(z1)
    a = [c * k for k in range(1, K + 1)]
    margins = [a[k - 1] - k * abs(z1) * math.exp(a[0]) for k in range(1, K + 1)]
    cert = BoundCertificate.from_margins("weighted_PU", a, a, margins)
    return {
        "K": K,
        "z": z,
        "rho": rho,
        "ratios": ratios,
        "expected_ratios": [1.0] + [math.exp(-k * z1) for k in range(2, K + 1)],
        "deviation": deviation,
        "roundtrip_error": max(abs(x - y) for x, y in zip(back, z)),
        "certificate": cert,
        "note": "sup-norm deviation grows with k; the k-weighted certificate still passes",
    }
