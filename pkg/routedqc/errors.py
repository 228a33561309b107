class RoutedQcError(Exception):
    pass


class ConfigurationError(RoutedQcError):
    pass


class InvalidValue(RoutedQcError):
    pass


class InvalidRelation(RoutedQcError):
    pass


class AlphabetMismatch(RoutedQcError):
    pass


class ArrowCollision(RoutedQcError):
    pass


class NotBranched(RoutedQcError):
    pass


class InvalidGraph(RoutedQcError):
    pass


class NontrivialOpenArrow(RoutedQcError):
    pass


class NotUnivocal(RoutedQcError):
    pass


class NotBiunivocal(RoutedQcError):
    pass


class AmbiguousArrow(RoutedQcError):
    pass


class OutOfDomain(RoutedQcError):
    pass


class SpaceMismatch(RoutedQcError):
    pass


class ShapeMismatch(RoutedQcError):
    pass


class DimMismatch(RoutedQcError):
    pass


class InvalidSpec(RoutedQcError):
    pass


class InvalidBifurcation(RoutedQcError):
    pass


class MissingDim(RoutedQcError):
    pass


class OneDimViolation(RoutedQcError):
    pass


class UncoveredNode(RoutedQcError):
    pass


class NotIsometryFleshing(RoutedQcError):
    pass


class PreconditionFailed(RoutedQcError):
    pass


class NotSplittable(RoutedQcError):
    pass


class UnknownProcess(RoutedQcError):
    pass
