from pydantic import BaseModel, Field
from enum import Enum
from typing import Any, Dict, List, Optional, Union


# numbers may be given as JSON numbers or as strings ("1/3", "inf")
Number = Union[int, float, str]


class PotentialKind(str, Enum):
    MATRIX = "matrix"
    HARD_ROD = "hard_rod"
    HARD_SPHERE = "hard_sphere"
    RODS2D = "rods2d"


class NumericModeEnum(str, Enum):
    RATIONAL = "rational"
    FLOAT = "float"


class SpeciesSchema(BaseModel):
    id: int
    weight: Number
    payload: Dict[str, Any] = {}


class PotentialSchema(BaseModel):
    kind: PotentialKind
    params: Dict[str, Any] = {}


class SpeciesFileSchema(BaseModel):
    beta: Number = 1
    species: List[SpeciesSchema]
    potential: PotentialSchema


# ---------- inversion requests ----------

class InversionOp(str, Enum):
    RHO_OF_Z = "rho_of_z"
    ZETA_OF_NU = "zeta_of_nu"
    CHECK_PU = "check_pu"
    CHECK_SB = "check_sb"
    CHECK_SAB = "check_sab"
    ROUNDTRIP_CHECK = "roundtrip_check"
    DISSYMMETRY_CHECK = "dissymmetry_check"
    PRESSURE_OF_NU = "pressure_of_nu"
    FREE_ENERGY = "free_energy"
    LOG_XI_SERIES = "log_xi_series"
    XI_EXACT = "xi_exact"


class InversionInputs(BaseModel):
    z: Optional[List[Number]] = None
    nu: Optional[List[Number]] = None
    a: Optional[List[Number]] = None
    b: Optional[List[Number]] = None
    path: str = "biconnected"
    n_max: Optional[int] = Field(default=None, ge=0)  # particle cap for xi_exact


class InversionRequestSchema(BaseModel):
    state: SpeciesFileSchema
    N: int = Field(ge=1)
    op: InversionOp
    mode: NumericModeEnum = NumericModeEnum.FLOAT
    inputs: InversionInputs = InversionInputs()


class InversionResponseSchema(BaseModel):
    op: InversionOp
    N: int
    values: Any = None
    certificate: Optional[Dict[str, Any]] = None
    residual: Optional[Dict[str, Any]] = None


# ---------- homogeneous models ----------

class HomogeneousKind(str, Enum):
    HARD_ROD = "hard_rod"
    HARD_SPHERE = "hard_sphere"
    CUSTOM = "custom"
    IDEAL = "ideal"


class HomogeneousModelSchema(BaseModel):
    dimension: int = Field(default=1, ge=1, le=3)
    kind: HomogeneousKind = HomogeneousKind.HARD_ROD
    a: Optional[Number] = None         # rod length
    radius: Optional[Number] = None    # sphere radius; exclusion distance is 2 * radius
    table: Optional[List[List[Number]]] = None  # custom radial potential [[r, v(r)], ...]
    beta: float = 1.0
    B: float = 0.0
    B_star: float = 0.0
    B_bar: float = 0.0


class VirialRequestSchema(BaseModel):
    model: HomogeneousModelSchema
    N: int = Field(default=2, ge=1)
    seed: int = 0
    samples: Optional[int] = None
    mode: NumericModeEnum = NumericModeEnum.FLOAT


class TableResponseSchema(BaseModel):
    columns: List[str]
    rows: List[Dict[str, Any]]


# ---------- application inputs ----------

class KernelSchema(BaseModel):
    kind: PotentialKind = PotentialKind.HARD_SPHERE
    radius: Optional[float] = None
    a: Optional[float] = None


class GridProfileSchema(BaseModel):
    dimension: int = Field(default=1, ge=1, le=3)
    points: List[List[float]]
    cell_volumes: List[float]
    rho: List[float]
    z0: float = 1.0
    beta: float = 1.0
    kernel: Optional[KernelSchema] = None  # no kernel: ideal gas
    v_ext: Optional[List[float]] = None
    a: Optional[float] = None
    b: Optional[float] = None


class MixtureSchema(BaseModel):
    dimension: int = Field(default=3, ge=1, le=3)
    radii: List[float]
    rho: List[float]
    a: Optional[List[float]] = None
    b: Optional[List[float]] = None
    seed: int = 0
    samples: Optional[int] = None


class RodSystemSchema(BaseModel):
    dimension: int = 2
    length: float = 1.0
    rho0: float
    angles: List[float]
    probabilities: List[float]
    seed: int = 0
    samples: Optional[int] = None
