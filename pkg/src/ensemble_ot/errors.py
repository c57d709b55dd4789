"""Exception hierarchy shared by all modules."""


class EnsembleOTError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(EnsembleOTError, ValueError):
    pass


class NonFiniteState(EnsembleOTError, ArithmeticError):
    pass


class NotSymmetric(EnsembleOTError, ValueError):
    pass


class NotPsd(EnsembleOTError, ValueError):
    pass


class SingularKkt(EnsembleOTError, ArithmeticError):
    pass


class NotControllable(EnsembleOTError, ArithmeticError):
    pass


class Unbalanced(EnsembleOTError, ValueError):
    pass


class NoConvergence(EnsembleOTError, RuntimeError):
    pass


class TooLarge(EnsembleOTError, ValueError):
    pass


class ZeroMass(EnsembleOTError, ArithmeticError):
    pass


class EmptyBin(EnsembleOTError, ValueError):
    def __init__(self, message, bin_index=None):
        super().__init__(message)
        self.bin_index = bin_index


class Infeasible(EnsembleOTError, ValueError):
    pass


class InfeasibleConstraint(EnsembleOTError, ValueError):
    pass


class BlowUp(EnsembleOTError, ArithmeticError):
    pass


class NotFound(EnsembleOTError, LookupError):
    pass


class NotReachable(EnsembleOTError, ValueError):
    def __init__(self, message, unreached=None):
        super().__init__(message)
        self.unreached = unreached


class MassNotAttained(EnsembleOTError, ValueError):
    pass
