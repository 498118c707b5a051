"""Exception hierarchy shared across the package."""


class EnergyGraphError(Exception):
    """Base class for all package errors."""


class ExpressionError(EnergyGraphError):
    pass


class ExpressionSyntaxError(ExpressionError):
    """Raised when an equation string cannot be parsed.

    Attributes:
        position (int): 0-based character offset of the offending token.
    """

    def __init__(self, message, text, position):
        self.text = text
        self.position = position
        pointer = " " * position + "^"
        super().__init__(f"{message} at position {position}\n  {text}\n  {pointer}")


class UnboundSymbolError(ExpressionError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unbound symbol '{name}'")


class DomainError(ExpressionError):
    """Numerical domain violation (negative sqrt, division by zero, ...)."""

    def __init__(self, message, subexpression):
        self.subexpression = subexpression
        super().__init__(f"{message} in '{subexpression}'")


class NotDifferentiableError(ExpressionError):
    pass


class GraphError(EnergyGraphError):
    pass


class CompositionError(EnergyGraphError):
    pass


class ComponentError(EnergyGraphError):
    pass


class ReverseFlowError(ComponentError):
    pass


class StalledPumpError(ComponentError):
    pass


class DegenerateFluidError(ComponentError):
    pass


class FluidDomainError(ComponentError):
    pass


class SimulationError(EnergyGraphError):
    pass


class SingularCapacitanceError(SimulationError):
    pass


class NonFiniteStateError(SimulationError):
    pass


class ConvergenceError(SimulationError):
    pass


class ModelFileError(EnergyGraphError):
    pass


class DesignError(EnergyGraphError):
    """Invalid design problem or design-variable values."""
