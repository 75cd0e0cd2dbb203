"""Exception hierarchy.

Three families map onto the CLI exit codes: validation problems (2),
certificate failures (3) and numerical failures (4).
"""


class EtcError(Exception):
    exit_code = 1


class ValidationError(EtcError, ValueError):
    exit_code = 2


class CertificateError(EtcError):
    exit_code = 3


class NumericsError(EtcError, ArithmeticError):
    exit_code = 4


# graph
class NotSymmetric(ValidationError):
    pass


class NegativeWeight(ValidationError):
    pass


class Disconnected(ValidationError):
    pass


class UnsupportedTopology(ValidationError):
    pass


# shared
class DimensionMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


# numerics
class NotStabilizable(NumericsError):
    pass


class NotDetectable(NumericsError):
    pass


class NoConvergence(NumericsError):
    pass


class NotSchurStable(NumericsError):
    pass


class SolverFailure(NumericsError):
    pass


# baseline / trigger design
class EmptyGainInterval(CertificateError):
    pass


class GainOutsideInterval(ValidationError):
    pass


class EpsilonOutOfRange(ValidationError):
    pass


class SigmaTooLarge(ValidationError):
    pass


class NonPositiveProduct(ValidationError):
    pass


class Infeasible(CertificateError):
    pass


class AllEpsilonInfeasible(CertificateError):
    pass


# simulator / cli
class MissingTriggerParameters(ValidationError):
    pass


class CertificateInvalid(CertificateError):
    pass
