# virialkit/routes_bounds.py
from fastapi import APIRouter, Depends

from virialkit.dependencies import get_model, get_threads, http_error
from virialkit.errors import VirialKitError
from virialkit.homogeneous import (
    INV_2E,
    HomogeneousModel,
    bounds_table,
    k_constant,
    r_star,
    virial_table,
)
from virialkit.schemas import TableResponseSchema, VirialRequestSchema
from virialkit.utils.output import jsonable


router = APIRouter(prefix="/bounds", tags=["Bounds"])

BOUNDS_COLUMNS = ["name", "value", "formula"]
VIRIAL_COLUMNS = ["n", "beta_n", "method", "stderr"]


@router.get("/constants")
def constants():
    unit = HomogeneousModel(dimension=1, kind="hard_rod", a=0.5)   # C_bar = 1
    return {
        "k": k_constant(),
        "inv_2e": INV_2E,
        "R_star_times_C_bar": r_star(unit) * float(unit.c_bar),
    }


@router.post("/homogeneous", response_model=TableResponseSchema)
def homogeneous(model: HomogeneousModel = Depends(get_model)):
    try:
        rows = bounds_table(model)
    except VirialKitError as exc:
        raise http_error(exc)

    return {"columns": BOUNDS_COLUMNS, "rows": jsonable(rows)}


@router.post("/virial", response_model=TableResponseSchema)
def virial(body: VirialRequestSchema, threads: int = Depends(get_threads)):
    try:
        model = HomogeneousModel.from_schema(body.model, body.mode.value)
        table = virial_table(model, body.N, seed=body.seed, samples=body.samples, threads=threads)
    except VirialKitError as exc:
        raise http_error(exc)

    return {"columns": VIRIAL_COLUMNS, "rows": jsonable(table.as_rows())}
