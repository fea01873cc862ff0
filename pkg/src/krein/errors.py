"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the CLI can map failures to the
documented process exit status without a lookup table.
"""


class KreinError(Exception):
    exit_code = 1


class BadParameter(KreinError, ValueError):
    exit_code = 2


class NyquistViolation(BadParameter):
    pass


class BandOutOfRange(BadParameter):
    pass


class GridMismatch(BadParameter):
    pass


class BadSpec(BadParameter):
    pass


class SupportViolation(BadParameter):
    pass


class RegularityNotCertified(BadParameter):
    pass


class StepTooLarge(BadParameter):
    pass


class NumericalBreakdown(KreinError, ArithmeticError):
    exit_code = 3


class NonFinite(NumericalBreakdown):
    pass


class NonIntegrable(NumericalBreakdown):
    pass


class NotPositive(NumericalBreakdown):
    pass


class Singular(NumericalBreakdown):
    pass


class NotContractive(NumericalBreakdown):
    pass


class NoConvergence(NumericalBreakdown):
    pass


class WeightVanishes(NumericalBreakdown):
    pass


class DepthExceeded(NumericalBreakdown):
    pass


class DivergedFromDirect(NumericalBreakdown):
    pass


class CrossCheckFailed(KreinError):
    exit_code = 1
