"""Control-oriented linearization ``xdot ~= A*x + B*u + Z``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SimulationError


@dataclass
class LinearModel:
    """Affine model about an operating point.

    ``Z = f(x0, u0, d0) - A*x0 - B*u0`` so the model is written in absolute
    state and input coordinates.
    """

    A: np.ndarray
    B: np.ndarray
    Z: np.ndarray
    x0: np.ndarray
    u0: np.ndarray
    d0: np.ndarray
    state_names: list
    input_names: list

    def derivative(self, x, u):
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.asarray(u, dtype=float) + self.Z


def linearize(sys, x0, u0=None, d0=None) -> LinearModel:
    """Linearize an ODE system at ``(x0, u0, d0)``.

    Disturbances are frozen at ``d0`` (defaults to the external vertex
    initial conditions). Derivatives are symbolic, with the state-dependent
    capacitance handled through ``C*(dF/dx) = d(rhs)/dx - (dC/dx)*F``.

    Raises:
        SimulationError: the system has algebraic states.
        SingularCapacitanceError: ``C(x0)`` is singular.
    """
    if sys.is_dae:
        raise SimulationError("linearize requires an ODE system (no algebraic states)")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u0 = np.zeros(sys.n_inputs) if u0 is None else np.asarray(u0, dtype=float).reshape(-1)
    d0 = sys.disturbance_defaults.copy() if d0 is None else np.asarray(d0, dtype=float).reshape(-1)
    if x0.size != sys.n:
        raise SimulationError(f"x0 has {x0.size} entries, system has {sys.n} states")
    if u0.size != sys.n_inputs:
        raise SimulationError(f"u0 has {u0.size} entries, system has {sys.n_inputs} inputs")
    if d0.size != len(sys.disturbance_names):
        raise SimulationError(f"d0 has {d0.size} entries, system has {len(sys.disturbance_names)} disturbances")
    f0 = sys.evaluate(x0, u0, d0)
    A, B = sys.jacobians(x0, u0, d0)
    Z = f0 - A @ x0 - B @ u0
    return LinearModel(A, B, Z, x0, u0, d0, list(sys.state_names), list(sys.input_names))
