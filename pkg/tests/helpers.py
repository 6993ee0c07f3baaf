import random
from fractions import Fraction
from functools import lru_cache

from virialkit.inversion import GCState
from virialkit.species import MeasureVec, PairPotential, SpeciesSpace


def random_potential(seed: int, size: int, hard_diagonal: bool = False, repulsive: bool = False) -> PairPotential:
    """Exact Mayer matrix with entries in [-1, 1/2] and small denominators.

    repulsive keeps f in [-1, 0], i.e. a non-negative potential.
    """
    rng = random.Random(seed)
    weights = [Fraction(rng.randint(1, 4), rng.randint(2, 5)) for _ in range(size)]
    f = [[0] * size for _ in range(size)]
    for i in range(size):
        for j in range(i, size):
            value = Fraction(rng.randint(-4, 0 if repulsive else 2), 4)
            if i == j and hard_diagonal:
                value = Fraction(-1)
            f[i][j] = f[j][i] = value
    return PairPotential.from_mayer(SpeciesSpace.from_weights(weights), f)


def random_measure(seed: int, space: SpeciesSpace, top: int = 4) -> MeasureVec:
    """Densities in {0, 1/100, ..., top/100}."""
    rng = random.Random(10_000 + seed)
    return MeasureVec(space, tuple(Fraction(rng.randint(0, top), 100) for _ in range(space.size)))


@lru_cache(maxsize=None)
def random_state(seed: int, N: int = 4, max_size: int = 4, repulsive: bool = False) -> GCState:
    """Exact state on 1..max_size species, shared between test modules."""
    size = random.Random(seed).randint(1, max_size)
    return GCState(random_potential(seed, size, repulsive=repulsive), N)
