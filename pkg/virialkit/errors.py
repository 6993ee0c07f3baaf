"""Exception hierarchy shared by the library, the CLI and the HTTP routers.

Every error knows the CLI exit code and the HTTP status it maps to, so the
front ends never have to pattern-match on messages.
"""
from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from virialkit.species import BoundCertificate


class VirialKitError(Exception):
    exit_code = 2
    status_code = 400


class StructuralError(VirialKitError):
    """Operands disagree on truncation order or species space."""

    status_code = 422


class DomainError(VirialKitError, ValueError):
    """An operation was called outside its mathematical domain."""


class InputError(VirialKitError):
    """A model, profile or request file could not be understood."""


class CapabilityError(VirialKitError):
    """The request is beyond the desk-scale limits of this package."""

    exit_code = 3
    status_code = 413


class CertificateRefused(VirialKitError):
    exit_code = 1
    status_code = 409

    def __init__(self, message: str, certificate: "BoundCertificate"):
        super().__init__(message)
        self.certificate = certificate
