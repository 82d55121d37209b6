"""Exception hierarchy for the retrieval engine.

Every error carries a stable machine-readable ``code`` (snake_case class
name) used verbatim by the HTTP service and the CLI's data-error exit path.
"""

from __future__ import annotations

import re


def _snake(name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


class PdvError(Exception):
    """Base class for all engine errors."""

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.code = _snake(cls.__name__)

    code = "pdv_error"


# vector arithmetic
class InvalidEmbedding(PdvError):
    pass


class DimensionMismatch(PdvError):
    pass


class InvalidParameter(PdvError):
    pass


class DegenerateQuery(PdvError):
    pass


# gallery / ranking
class DuplicateId(PdvError):
    pass


class EmptyGallery(PdvError):
    pass


class ZeroQuery(PdvError):
    pass


class UnknownSession(PdvError):
    pass


class UnknownGallery(PdvError):
    pass


# metrics
class MissingTarget(PdvError):
    pass


class SubsetNotInGallery(PdvError):
    pass


class TargetNotInSubset(PdvError):
    pass


# tuning
class ZeroPDV(PdvError):
    pass


class NonFiniteObjective(PdvError):
    pass


# geometry
class ZeroGT(PdvError):
    pass


class DegenerateComposed(PdvError):
    pass


class AllBundlesDegenerate(PdvError):
    pass


# file formats
class BadMagic(PdvError):
    pass


class TruncatedFile(PdvError):
    pass


class NonFiniteValue(PdvError):
    pass


class UnresolvedKey(PdvError):
    pass


class SchemaViolation(PdvError):
    pass


class IoFailure(PdvError):
    pass
