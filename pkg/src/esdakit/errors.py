"""Exception hierarchy shared across the engine.

Every error carries a stable machine-readable ``code`` so the CLI and the
HTTP service can emit structured error payloads without string matching.
"""

from __future__ import annotations


class EsdaError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str, **detail):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def to_json(self) -> dict:
        return {"type": self.code, "message": self.message, "detail": self.detail}


class ParseError(EsdaError):
    """Malformed input document; ``detail`` carries the byte offset."""

    code = "parse_error"


class EmptyInputError(EsdaError):
    code = "empty_input"


class UnsupportedGeometryError(EsdaError):
    """Geometry other than Polygon/MultiPolygon; names the offending feature."""

    code = "unsupported_geometry"


class GeometryError(EsdaError):
    """Degenerate or otherwise unusable geometry."""

    code = "geometry_error"


class RangeError(EsdaError):
    code = "range_error"


class DegenerateDistributionError(EsdaError):
    """Zero-variance column where a distribution test was requested."""

    code = "degenerate_distribution"


class TransformDomainError(EsdaError):
    """Transform applied outside its domain; detail lists offending regions."""

    code = "transform_domain"


class UndefinedCorrelationError(EsdaError):
    code = "undefined_correlation"


class DegenerateVariableError(EsdaError):
    code = "degenerate_variable"


class SingularDesignError(EsdaError):
    """Rank-deficient global design; detail lists dependent columns."""

    code = "singular_design"


class LocalSingularityError(EsdaError):
    """Singular local system; detail names the region and neighbor count."""

    code = "local_singularity"


class ConvergenceError(EsdaError):
    """Backfitting failed to converge; detail carries the iterate trace."""

    code = "convergence_error"


class OversaturatedModelError(EsdaError):
    code = "oversaturated_model"


class UndefinedStatisticError(EsdaError):
    code = "undefined_statistic"


class BandwidthSearchError(EsdaError):
    """Evaluator failure during bandwidth search; detail carries the probe."""

    code = "bandwidth_search_error"


class TemplateError(EsdaError):
    """Template file violates its declared-placeholder contract."""

    code = "template_error"


class NotFoundError(EsdaError):
    code = "not_found"


class ExportError(EsdaError):
    """Report export failure; detail lists unresolved asset references."""

    code = "export_error"


class IntegrityError(EsdaError):
    """State cross-reference or fingerprint violation; names the reference."""

    code = "integrity_error"


class VersionError(EsdaError):
    """Unknown state schema version; detail carries the highest supported."""

    code = "version_error"


class SpecValidationError(EsdaError):
    code = "invalid_spec"


class JobError(EsdaError):
    code = "job_error"


class FetchError(EsdaError):
    """External document fetch failed beyond the retry budget."""

    code = "fetch_error"
