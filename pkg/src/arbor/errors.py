"""Exception types shared across the package."""


class ArborError(Exception):
    """Base class for computation errors (CLI exit code 1)."""

    code = "error"

    def to_json(self):
        return {"error": self.code, "message": str(self)}


class ArityMismatch(ArborError):
    code = "arity_mismatch"


class NonEvaluable(ArborError):
    code = "non_evaluable"


class BoundExceeded(ArborError):
    code = "bound_exceeded"


class NotFoundWithinBound(ArborError):
    code = "not_found_within_bound"


class SelfSimilarityUnverified(ArborError):
    code = "self_similarity_unverified"


class TableTooShort(ArborError):
    code = "table_too_short"


class NoMovingGenerator(ArborError):
    code = "no_moving_generator"


class OrbitTooShort(ArborError):
    code = "orbit_too_short"


class DepthBudgetExceeded(ArborError):
    code = "depth_budget_exceeded"


class TrivialInput(ArborError):
    code = "trivial_input"


class SchemaViolation(ArborError):
    code = "schema_violation"


class InvalidParams(ArborError):
    code = "invalid_params"
