"""Exception hierarchy shared by all modules."""


class CurvVaeError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(CurvVaeError):
    pass


class DomainError(GeometryError):
    """An argument lies outside the domain of a (curvature-aware) function."""


class SingularityError(GeometryError):
    """A formula hit a genuine singularity (antipodal pair, pole, zero denominator)."""


class ContractError(GeometryError):
    """Inputs violate an operation's preconditions (shape, base point, curvature sign)."""


class ComponentError(GeometryError):
    """A component of a product space failed; carries the component index and model tag."""

    def __init__(self, index, model, cause):
        self.index = index
        self.model = model
        self.cause = cause
        super().__init__(f"component {index} ({model}): {cause}")


class SignatureError(CurvVaeError):
    pass


class FormatError(CurvVaeError):
    """Malformed file (bad magic, truncated payload, ...)."""


class ConfigError(CurvVaeError):
    pass


class TrainingError(CurvVaeError):
    pass
