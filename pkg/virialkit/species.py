"""Species spaces, measures, pair potentials and Mayer functions.

A species space is the discretization of the one-particle state space: a
finite list of species, each carrying the reference-measure mass of the
state it represents.  Every integral against a measure becomes the
weighted sum  sum_x h(x) * values[x] * weight[x].
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from virialkit import settings
from virialkit.errors import CapabilityError, DomainError, InputError
from virialkit.utils.scalars import (
    HARD_CORE,
    NumericMode,
    Scalar,
    is_hard_core,
    magnitude,
    parse_scalar,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Species:
    id: int
    weight: Scalar
    payload: Mapping[str, Any] = field(default_factory=dict, compare=False)


@dataclass(frozen=True, eq=False)
class SpeciesSpace:
    species: Tuple[Species, ...]
    allow_large: bool = False

    def __post_init__(self):
        if not self.species:
            raise DomainError("a species space needs at least one species")
        if [s.id for s in self.species] != list(range(len(self.species))):
            raise DomainError("species ids must be 0..S-1 in order")
        for s in self.species:
            w = s.weight
            if isinstance(w, complex) or not (w > 0) or (isinstance(w, float) and not math.isfinite(w)):
                raise DomainError(f"species {s.id}: quadrature weight must be positive and finite, got {w!r}")
        if len(self.species) > settings.MAX_SPECIES and not self.allow_large:
            raise CapabilityError(
                f"{len(self.species)} species exceeds the limit of {settings.MAX_SPECIES}; pass allow_large=True"
            )

    @classmethod
    def uniform(cls, size: int, weight: Scalar = 1, allow_large: bool = False) -> "SpeciesSpace":
        return cls(tuple(Species(i, weight) for i in range(size)), allow_large=allow_large)

    @classmethod
    def from_weights(cls, weights: Sequence[Scalar], payloads: Optional[Sequence[Mapping]] = None,
                     allow_large: bool = False) -> "SpeciesSpace":
        payloads = payloads or [{}] * len(weights)
        return cls(tuple(Species(i, w, dict(p)) for i, (w, p) in enumerate(zip(weights, payloads))),
                   allow_large=allow_large)

    @property
    def size(self) -> int:
        return len(self.species)

    @cached_property
    def weights(self) -> Tuple[Scalar, ...]:
        return tuple(s.weight for s in self.species)

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        return iter(range(self.size))


@dataclass(frozen=True, eq=False)
class MeasureVec:
    """A measure on the species space given by its density w.r.t. the weights."""

    space: SpeciesSpace
    values: Tuple[Scalar, ...]

    def __post_init__(self):
        if len(self.values) != self.space.size:
            raise DomainError(f"measure has {len(self.values)} entries for {self.space.size} species")

    @classmethod
    def zeros(cls, space: SpeciesSpace) -> "MeasureVec":
        return cls(space, (0,) * space.size)

    @classmethod
    def constant(cls, space: SpeciesSpace, value: Scalar) -> "MeasureVec":
        return cls(space, (value,) * space.size)

    def __getitem__(self, x: int) -> Scalar:
        return self.values[x]

    def __len__(self) -> int:
        return len(self.values)

    def mass(self, x: int) -> Scalar:
        """values[x] * weight[x], the point mass the measure puts on species x."""
        return self.values[x] * self.space.weights[x]

    def abs(self) -> "MeasureVec":
        return MeasureVec(self.space, tuple(magnitude(v) for v in self.values))

    def scale(self, lam: Scalar) -> "MeasureVec":
        return MeasureVec(self.space, tuple(lam * v for v in self.values))

    def total_variation(self) -> Scalar:
        return sum(magnitude(v) * w for v, w in zip(self.values, self.space.weights))

    def is_nonnegative(self) -> bool:
        return all(not isinstance(v, complex) and v >= 0 for v in self.values)


@dataclass(frozen=True)
class MayerMatrices:
    f: Tuple[Tuple[Scalar, ...], ...]
    f_bar: Tuple[Tuple[Scalar, ...], ...]

    @property
    def size(self) -> int:
        return len(self.f)

    @cached_property
    def exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for row in self.f for v in row)

    @cached_property
    def f_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.f], dtype=float)


@dataclass(frozen=True, eq=False)
class PairPotential:
    """Symmetric pair potential with stability constants.

    ``exact_f`` may carry the Mayer function directly (rational mode), in
    which case ``v`` is derived from it and never used to rebuild f.
    """

    space: SpeciesSpace
    beta: Scalar
    v: Tuple[Tuple[Any, ...], ...]
    b_stability: Tuple[Scalar, ...]
    b_star: Tuple[Scalar, ...]
    exact_f: Optional[Tuple[Tuple[Scalar, ...], ...]] = None

    def __post_init__(self):
        S = self.space.size
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if len(self.v) != S or any(len(row) != S for row in self.v):
            raise DomainError(f"potential matrix must be {S}x{S}")
        for i in range(S):
            for j in range(i + 1, S):
                if not _same(self.v[i][j], self.v[j][i]):
                    raise DomainError(f"potential is not symmetric at ({i}, {j})")
        if len(self.b_stability) != S or len(self.b_star) != S:
            raise DomainError("stability constants need one entry per species")
        for x in range(S):
            if self.b_stability[x] < 0:
                raise DomainError("B must be non-negative")
            floor = max([0] + [-v for v in self.v[x] if not is_hard_core(v)])
            if self.b_star[x] < floor:
                raise DomainError(f"B*({x}) = {self.b_star[x]} is below max(0, -min_y v(x, y)) = {floor}")

    @classmethod
    def from_matrix(cls, space: SpeciesSpace, v, beta: Scalar = 1, b_stability=None, b_star=None) -> "PairPotential":
        v = tuple(tuple(HARD_CORE if is_hard_core(e) else e for e in row) for row in v)
        return cls(space, beta, v, *_constants(v, b_stability, b_star))

    @classmethod
    def from_mayer(cls, space: SpeciesSpace, f, beta: Scalar = 1, b_stability=None, b_star=None) -> "PairPotential":
        """Potential specified through its Mayer function, kept exact."""
        f = tuple(tuple(e for e in row) for row in f)
        v = []
        for row in f:
            out = []
            for e in row:
                if e < -1:
                    raise DomainError("Mayer f must be >= -1")
                out.append(HARD_CORE if e == -1 else -math.log1p(float(e)) / float(beta))
            v.append(tuple(out))
        v = tuple(v)
        return cls(space, beta, v, *_constants(v, b_stability, b_star), exact_f=f)

    @property
    def size(self) -> int:
        return self.space.size

    @cached_property
    def mayer(self) -> MayerMatrices:
        return build_mayer(self)

    @cached_property
    def diagonal_hard_core(self) -> bool:
        return all(is_hard_core(self.v[x][x]) for x in range(self.size))


def _same(a, b) -> bool:
    if is_hard_core(a) or is_hard_core(b):
        return is_hard_core(a) and is_hard_core(b)
    return a == b


def _constants(v, b_stability, b_star):
    S = len(v)
    if b_stability is None:
        b_stability = (0,) * S
    if b_star is None:
        b_star = tuple(max([0] + [-e for e in row if not is_hard_core(e)]) for row in v)
    return tuple(b_stability), tuple(b_star)


def build_mayer(pot: PairPotential) -> MayerMatrices:
    """f = exp(-beta v) - 1 and f_bar = 1 - exp(-beta |v|), exact at hard cores."""
    if pot.exact_f is not None:
        f = pot.exact_f
        f_bar = tuple(tuple(_f_bar_from_f(e) for e in row) for row in f)
        return MayerMatrices(f, f_bar)

    f, f_bar = [], []
    for row in pot.v:
        f_row, fb_row = [], []
        for e in row:
            if is_hard_core(e):
                f_row.append(-1)
                fb_row.append(1)
            elif e == 0:
                f_row.append(0)
                fb_row.append(0)
            else:
                x = float(pot.beta) * float(e)
                f_row.append(math.expm1(-x))
                fb_row.append(-math.expm1(-abs(x)))
        f.append(tuple(f_row))
        f_bar.append(tuple(fb_row))
    return MayerMatrices(tuple(f), tuple(f_bar))


def _f_bar_from_f(e):
    # v >= 0  <=>  f <= 0, where f_bar = -f; otherwise f_bar = f / (1 + f)
    if e <= 0:
        return -e
    return e / (1 + e)


@dataclass(frozen=True)
class BoundCertificate:
    """Outcome of a weighted-norm condition check.

    Margins are per species; the certificate passes iff all are >= 0.
    ``truncation`` records the order at which series sums were cut, or
    None when the condition involves no series.
    """

    condition: str
    a: Tuple[Scalar, ...]
    b: Tuple[Scalar, ...]
    margins: Tuple[Scalar, ...]
    passed: bool
    truncation: Optional[int] = None
    details: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def from_margins(cls, condition: str, a, b, margins, truncation=None, **details) -> "BoundCertificate":
        margins = tuple(margins)
        passed = all(m >= 0 for m in margins)
        logger.debug("certificate %s: passed=%s min margin=%s", condition, passed, min(margins, default=None))
        return cls(condition, tuple(a), tuple(b), margins, passed, truncation, dict(details))

    @property
    def worst(self) -> Scalar:
        return min(self.margins)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "condition": self.condition,
            "passed": self.passed,
            "truncation": self.truncation,
            "a": list(self.a),
            "b": list(self.b),
            "margins": list(self.margins),
            "details": dict(self.details),
        }


def check_stability(pot: PairPotential, n_check: int = settings.DEFAULT_N_CHECK) -> BoundCertificate:
    """Brute-force stability check over all multisets of size <= n_check.

    The margin of species x is the worst H_n + sum B over the multisets
    containing x; configurations with a hard-core pair have infinite
    energy and are skipped.
    """
    if n_check < 2:
        raise DomainError("n_check must be >= 2")
    S = pot.size
    margins = [pot.b_stability[x] for x in range(S)]
    worst, worst_config = min(margins), None
    for n in range(2, n_check + 1):
        for config in combinations_with_replacement(range(S), n):
            energy = 0
            blocked = False
            for i in range(n):
                for j in range(i + 1, n):
                    e = pot.v[config[i]][config[j]]
                    if is_hard_core(e):
                        blocked = True
                        break
                    energy += e
                if blocked:
                    break
            if blocked:
                continue
            margin = energy + sum(pot.b_stability[x] for x in config)
            for x in set(config):
                if margin < margins[x]:
                    margins[x] = margin
            if margin < worst:
                worst, worst_config = margin, config
    return BoundCertificate.from_margins(
        "stability", (0,) * S, pot.b_stability, margins,
        n_check=n_check, worst_config=list(worst_config) if worst_config else None,
    )


def c_bar(pot: Union[PairPotential, MayerMatrices], z_abs: MeasureVec) -> Tuple[Scalar, ...]:
    """x -> sum_y f_bar[x][y] |z|(y) w_y."""
    if not z_abs.is_nonnegative():
        raise DomainError("c_bar needs a non-negative measure")
    mayer = pot.mayer if isinstance(pot, PairPotential) else pot
    S = mayer.size
    return tuple(sum(mayer.f_bar[x][y] * z_abs.mass(y) for y in range(S)) for x in range(S))


# -- geometric overlap kernels ---------------------------------------------
#
# Vectorized over leading axes; used both to build species potentials from
# payloads and by the Monte Carlo cluster integrals.


def overlap_spheres(dx: np.ndarray, reach) -> np.ndarray:
    """dx: (..., d) separations; reach: exclusion distance (broadcastable)."""
    return np.einsum("...i,...i->...", dx, dx) < np.square(reach)


def overlap_segments(p: np.ndarray, theta_p, q: np.ndarray, theta_q, length: float) -> np.ndarray:
    """Centered segments of equal length in the plane intersect."""
    half = 0.5 * length
    up = np.stack([np.cos(theta_p), np.sin(theta_p)], axis=-1) * half
    uq = np.stack([np.cos(theta_q), np.sin(theta_q)], axis=-1) * half
    a0, a1 = p - up, p + up
    b0, b1 = q - uq, q + uq

    def orient(o, s, t):
        return (s[..., 0] - o[..., 0]) * (t[..., 1] - o[..., 1]) - (s[..., 1] - o[..., 1]) * (t[..., 0] - o[..., 0])

    d1, d2 = orient(a0, a1, b0), orient(a0, a1, b1)
    d3, d4 = orient(b0, b1, a0), orient(b0, b1, a1)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def kernel_potential(kind: str, params: Mapping[str, Any], payloads: Sequence[Mapping[str, Any]]):
    S = len(payloads)
    pos = [np.asarray(p.get("position", [0.0]), dtype=float) for p in payloads]
    period = params.get("periodic_length")

    def sep(i, j):
        d = pos[i] - pos[j]
        if period:
            d = d - period * np.round(d / period)
        return d

    v = [[0] * S for _ in range(S)]
    for i in range(S):
        for j in range(i, S):
            if kind == "hard_rod":
                hit = abs(float(sep(i, j)[0])) < float(params["a"])
            elif kind == "hard_sphere":
                ri = payloads[i].get("radius", params.get("radius"))
                rj = payloads[j].get("radius", params.get("radius"))
                if ri is None or rj is None:
                    raise InputError("hard_sphere species need a radius (payload or params)")
                hit = bool(overlap_spheres(sep(i, j), float(ri) + float(rj)))
            elif kind == "rods2d":
                hit = i == j or bool(
                    overlap_segments(pos[i], payloads[i].get("angle", 0.0), pos[j],
                                     payloads[j].get("angle", 0.0), float(params["length"]))
                )
            else:
                raise InputError(f"unknown potential kind {kind!r}")
            v[i][j] = v[j][i] = HARD_CORE if hit else 0
    return v


def load_model(source: Union[str, Path, Mapping[str, Any]], mode: NumericMode = "float",
               allow_large: bool = False) -> PairPotential:
    """Build a PairPotential from a species file (path or already-parsed dict)."""
    from virialkit.schemas import SpeciesFileSchema

    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read model file {source}: {exc}") from exc
    else:
        raw = source
    try:
        model = SpeciesFileSchema.model_validate(raw)
    except ValidationError as exc:
        raise InputError(f"invalid model: {exc.errors()[0]['msg']}") from exc

    try:
        weights = [parse_scalar(s.weight, mode) for s in model.species]
        space = SpeciesSpace.from_weights(weights, [s.payload for s in model.species], allow_large=allow_large)
        beta = parse_scalar(model.beta, mode)
        params = model.potential.params
        b_stab = [parse_scalar(x, mode) for x in params["B"]] if "B" in params else None
        b_star = [parse_scalar(x, mode) for x in params["B_star"]] if "B_star" in params else None
        kind = model.potential.kind.value
        if kind == "matrix":
            if "f" in params:
                f = [[parse_scalar(e, mode) for e in row] for row in params["f"]]
                pot = PairPotential.from_mayer(space, f, beta, b_stab, b_star)
            elif "v" in params:
                v = [[parse_scalar(e, mode) for e in row] for row in params["v"]]
                pot = PairPotential.from_matrix(space, v, beta, b_stab, b_star)
            else:
                raise InputError("matrix potentials need params.v or params.f")
        else:
            v = kernel_potential(kind, params, [s.payload for s in model.species])
            if mode == "rational":
                f = [[-1 if is_hard_core(e) else 0 for e in row] for row in v]
                pot = PairPotential.from_mayer(space, f, beta, b_stab, b_star)
            else:
                pot = PairPotential.from_matrix(space, v, beta, b_stab, b_star)
    except (KeyError, ValueError, TypeError, ZeroDivisionError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise InputError(f"invalid model parameters: {exc}") from exc
    logger.info("loaded %s model with %d species (mode=%s)", kind, space.size, mode)
    return pot
