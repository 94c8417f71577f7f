"""Exception hierarchy for prodstab."""


class ProdstabError(Exception):
    """Base class for all package errors."""


class ValidationError(ProdstabError):
    """A network/grid configuration violates a model constraint.

    ``violations`` lists every violated constraint found during validation,
    not only the one whose class was raised.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [self]


class NonPositiveParameter(ValidationError):
    def __init__(self, name, value):
        super().__init__(f"{name} must be > 0, got {value!r}")
        self.name = name
        self.value = value


class GridMismatch(ValidationError):
    def __init__(self, length, h):
        super().__init__(
            f"processor length l={length!r} is not an integer multiple of h={h!r}"
        )
        self.length = length
        self.h = h


class CflViolation(ValidationError):
    def __init__(self, ratio):
        super().__init__(f"CFL condition violated: max_e(v_e)*tau/h = {ratio!r} > 1")
        self.ratio = ratio


class IndexOutOfRange(ProdstabError, IndexError):
    pass


class NonFiniteState(ProdstabError, FloatingPointError):
    """Raised when a flux or queue value stops being finite."""

    def __init__(self, e, j, k):
        where = f"queue e={e}" if j is None else f"cell (e={e}, j={j})"
        super().__init__(f"non-finite value in {where} at time index k={k}")
        self.e = e
        self.j = j
        self.k = k


class AssumptionViolated(ProdstabError):
    pass


class UnsupportedShape(ProdstabError):
    pass


class UnknownScenario(ProdstabError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown scenario"


class OracleMismatch(ProdstabError):
    def __init__(self, quantity, expected, actual):
        super().__init__(
            f"engine disagrees with oracle on {quantity}: expected {expected!r}, got {actual!r}"
        )
        self.quantity = quantity


class ParseError(ProdstabError):
    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        prefix = f"[{', '.join(loc)}] " if loc else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
