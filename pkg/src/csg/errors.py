class CsgError(Exception):
    pass


class InvalidPlayerError(CsgError, IndexError):
    pass


class SpecFormatError(CsgError, ValueError):
    """Malformed game/strategy document (structure, not invariants)."""


class SolverError(CsgError, RuntimeError):
    pass


class NumericalError(CsgError, ArithmeticError):
    pass


class InvalidModelError(CsgError, ValueError):
    pass
