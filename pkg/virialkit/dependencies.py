# virialkit/dependencies.py
from fastapi import HTTPException

from virialkit import settings
from virialkit.errors import CertificateRefused, VirialKitError
from virialkit.homogeneous import HomogeneousModel
from virialkit.inversion import GCState
from virialkit.schemas import HomogeneousModelSchema, InversionRequestSchema
from virialkit.species import load_model


def http_error(exc: VirialKitError) -> HTTPException:
    detail = str(exc)
    if isinstance(exc, CertificateRefused):
        detail = {"message": detail, "certificate": exc.certificate.to_dict()}
    return HTTPException(status_code=exc.status_code, detail=detail)


def get_threads():
    return settings.THREADS


def build_state(body: InversionRequestSchema, threads: int) -> GCState:
    pot = load_model(body.state.model_dump(mode="json"), mode=body.mode.value)
    return GCState(pot, body.N, threads=threads)


def get_model(model: HomogeneousModelSchema) -> HomogeneousModel:
    try:
        return HomogeneousModel.from_schema(model)
    except VirialKitError as exc:
        raise http_error(exc)
