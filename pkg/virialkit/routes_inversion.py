# virialkit/routes_inversion.py
from fastapi import APIRouter, Depends

from virialkit.dependencies import build_state, get_threads, http_error
from virialkit.errors import VirialKitError
from virialkit.inversion import run_operation
from virialkit.schemas import InversionRequestSchema, InversionResponseSchema
from virialkit.utils.output import jsonable


router = APIRouter(prefix="/inversion", tags=["Inversion"])


@router.post("/run", response_model=InversionResponseSchema)
def run(body: InversionRequestSchema, threads: int = Depends(get_threads)):
    try:
        st = build_state(body, threads)
        out = run_operation(st, body.op.value, body.inputs.model_dump())
    except VirialKitError as exc:
        raise http_error(exc)

    return {"op": body.op, "N": body.N, **jsonable(out)}
