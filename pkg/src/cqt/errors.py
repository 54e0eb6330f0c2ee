"""Exception hierarchy shared by the state engine, protocols and script layer."""


class CQTError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(CQTError, ValueError):
    """Shapes, labels or site lists do not line up."""


class NonUnitaryError(StructuralError):
    pass


class NotSeparableError(StructuralError):
    """A subsystem was requested as a pure state but is entangled with the rest."""


class UsageError(CQTError, ValueError):
    """An operation was applied to an atom whose level pair does not support it."""


class TruncationError(CQTError):
    def __init__(self, message: str, mass: float):
        super().__init__(f"{message} (mass={mass:.3e})")
        self.mass = mass


class NumericalError(CQTError, ArithmeticError):
    pass


class PostselectionError(CQTError):
    def __init__(self, message: str, probability: float):
        super().__init__(f"{message} (p={probability:.3e})")
        self.probability = probability


class ProtocolAbort(CQTError):
    """A protocol could not be completed (e.g. the probe atom was never excited)."""
