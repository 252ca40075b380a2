"""Error hierarchy shared by the numerical services, the models and the CLI."""


class IbcLabError(ValueError):
    """Base class of every error raised on purpose by ibclab."""


class ConfigError(IbcLabError):
    pass


class DimensionMismatchError(IbcLabError):
    pass


class SingularMatrixError(IbcLabError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class HermiticityError(IbcLabError):
    pass


class SpectrumError(IbcLabError):
    pass


class RankError(IbcLabError):
    pass


class RealizationError(IbcLabError):
    pass


class ResolventError(IbcLabError):
    pass


class InvertibilityConditionError(ResolventError):
    pass


class GammaUndefinedError(IbcLabError):
    pass


class ParameterError(IbcLabError):
    pass


class RelationError(IbcLabError):
    pass


class MultivaluedError(RelationError):
    pass


class RangeError(RelationError):
    pass
