"""Graph-based modeling of multi-domain energy systems."""

from .errors import EnergyGraphError
from .expr import parse
from .graph import Edge, Graph, Input, Parameter, Port, Vertex, structure_matrix, validate
from .library import instantiate
from .simulate import SignalSchedule, assemble, energy_audit, simulate, simulate_dae, simulate_ode

__version__ = "0.1.0"

__all__ = [
    "EnergyGraphError",
    "Edge",
    "Graph",
    "Input",
    "Parameter",
    "Port",
    "SignalSchedule",
    "Vertex",
    "assemble",
    "energy_audit",
    "instantiate",
    "parse",
    "simulate",
    "simulate_dae",
    "simulate_ode",
    "structure_matrix",
    "validate",
]
