"""Closed-form power and mass-flow relations for thermal-fluid edges."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateFluidError, ReverseFlowError, StalledPumpError
from ..tables import LookupTable


def advection_power(mdot, cp, T_tail):
    """Advective heat transfer carried by flow along the edge orientation.

    Args:
        mdot: Mass flow rate (kg/s), must be nonnegative.
        cp: Specific heat (J/(kg K)).
        T_tail: Upstream temperature (K).

    Returns:
        Power in W.
    """
    if mdot < 0:
        raise ValueError(f"advection requires nonnegative mass flow, got {mdot!r}")
    return mdot * cp * T_tail


def convection_power(hA, T_tail, T_head):
    if hA < 0:
        raise ValueError(f"hA must be nonnegative, got {hA!r}")
    return hA * (T_tail - T_head)


def duct_mdot(rho, A_c, p_tail, p_head, dh, fLD_KL, g=9.81, signed=False):
    """Mass flow through a duct from the pressure drop and elevation change.

    Args:
        rho: Density (kg/m^3).
        A_c: Cross-sectional area (m^2).
        p_tail, p_head: Upstream and downstream pressure (Pa).
        dh: Height difference between inlet and outlet (m).
        fLD_KL: Friction plus minor loss coefficient ``f*L/D + K_L``.
        g: Gravitational acceleration.
        signed: Return ``sign(r)*sqrt(|r|)`` instead of rejecting reverse flow.

    Raises:
        ReverseFlowError: negative radicand and ``signed`` is false.
    """
    if rho <= 0 or A_c <= 0 or fLD_KL <= 0:
        raise ValueError("rho, A_c and fLD_KL must be positive")
    r = 2.0 * (p_tail - p_head + rho * g * dh) / (rho * fLD_KL)
    if r < 0:
        if not signed:
            raise ReverseFlowError(
                f"pressure difference drives flow against the edge orientation (radicand {r:.6g})"
            )
        return -rho * A_c * math.sqrt(-r)
    return rho * A_c * math.sqrt(r)


class PumpMap(LookupTable):
    """Pump head H (m) tabulated over (speed omega in rad/s, pressure rise in Pa)."""

    def head(self, omega, dp):
        return self(omega, dp)

    @classmethod
    def quadratic(cls, H0=20.0, omega0=300.0, k=5e-5, omegas=None, dps=None):
        """Affinity-law style map ``H = H0*(omega/omega0)^2 - k*dp/...`` sampled on a grid."""
        omegas = np.linspace(0.0, 2 * omega0, 9) if omegas is None else np.asarray(omegas)
        dps = np.linspace(0.0, 4e5, 9) if dps is None else np.asarray(dps)
        H = np.array([[H0 * (w / omega0) ** 2 - k * dp for dp in dps] for w in omegas])
        return cls([omegas, dps], H)


def pump_mdot(rho, A_c, pump_map, omega, p_tail, p_head, g=9.81):
    """Mass flow delivered by a centrifugal pump.

    The head comes from ``pump_map`` at ``(omega, p_head - p_tail)``; queries
    off the map are held at the boundary with a warning.

    Raises:
        StalledPumpError: the map head is below the pressure-rise head.
    """
    H = pump_map(omega, p_head - p_tail)
    r = 2.0 * g * (H - (p_head - p_tail) / (rho * g))
    if r < 0:
        raise StalledPumpError(f"pump head {H:.6g} m cannot sustain the pressure rise (radicand {r:.6g})")
    return rho * A_c * math.sqrt(r)


def _singular(C):
    C = np.asarray(C, dtype=float)
    if not np.all(np.isfinite(C)):
        return True
    scale = np.prod(np.max(np.abs(C), axis=1))
    return scale == 0.0 or abs(np.linalg.det(C)) < 1e-12 * scale


def two_phase_capacitance(p, h, V, props):
    """Energy/mass capacitance block of a two-phase control volume.

    Rows are (energy, mass) balances, columns multiply (dh/dt, dp/dt).

    Raises:
        DegenerateFluidError: the block is numerically singular.
    """
    st = props.evaluate(p, h)
    phi1 = (st.drho_dp * h - 1.0) * V
    phi2 = (st.drho_dh * h + st.rho) * V
    C = np.array([[phi2, phi1], [st.drho_dh * V, st.drho_dp * V]])
    if _singular(C):
        raise DegenerateFluidError(
            f"two-phase capacitance is singular at p={p:.6g}, h={h:.6g}, V={V:.6g}"
        )
    return C
