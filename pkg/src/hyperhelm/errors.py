"""Exception hierarchy shared by all modules."""


class HyperHelmError(Exception):
    """Base class for every error raised by the package."""


class NonFiniteInput(HyperHelmError, ValueError):
    pass


class OriginSingular(HyperHelmError, ValueError):
    pass


class InvalidHypothesis(HyperHelmError, ValueError):
    pass


class BlowUp(HyperHelmError, ArithmeticError):
    pass


class DegenerateSolution(HyperHelmError, ValueError):
    pass


class TooFewZeros(HyperHelmError, ValueError):
    pass


class MismatchedProblem(HyperHelmError, ValueError):
    pass


class NotAsymptotic(HyperHelmError, ValueError):
    pass


class EvenDimension(HyperHelmError, ValueError):
    pass


class RequiresAbsorption(HyperHelmError, ValueError):
    pass


class QuadratureFailure(HyperHelmError, ArithmeticError):
    pass


class ExtrapolationUnstable(HyperHelmError, ArithmeticError):
    pass


class TruncationTooSmall(HyperHelmError, ValueError):
    pass


class DegeneratePair(HyperHelmError, ArithmeticError):
    pass


class SupportViolation(HyperHelmError, ValueError):
    pass


class ExponentOutOfRange(HyperHelmError, ValueError):
    pass


class NoConvergence(HyperHelmError, ArithmeticError):
    pass


class CutoffViolated(HyperHelmError, ArithmeticError):
    pass


class TrivialCollapse(HyperHelmError, ArithmeticError):
    pass


class NotHomogeneous(HyperHelmError, ValueError):
    pass


class ConfigError(HyperHelmError, ValueError):
    """Configuration could not be parsed or validated.

    ``line`` and ``field`` locate the offending entry when known.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class MissingArtifact(HyperHelmError, FileNotFoundError):
    pass
