"""Component catalog, physics helpers and fluid property model."""

from .components import BUILDERS, KINDS, instantiate
from .fluids import AffineRefrigerant, FluidState, constant_density, synthetic_refrigerant
from .physics import (
    PumpMap,
    advection_power,
    convection_power,
    duct_mdot,
    pump_mdot,
    two_phase_capacitance,
)
from .catalog import catalog_markdown

__all__ = [
    "BUILDERS",
    "KINDS",
    "instantiate",
    "AffineRefrigerant",
    "FluidState",
    "constant_density",
    "synthetic_refrigerant",
    "PumpMap",
    "advection_power",
    "convection_power",
    "duct_mdot",
    "pump_mdot",
    "two_phase_capacitance",
    "catalog_markdown",
]
