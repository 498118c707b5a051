"""Synthetic refrigerant property model used by the two-phase components."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FluidDomainError
from ..tables import LookupTable


@dataclass(frozen=True)
class FluidState:
    rho: float
    drho_dp: float
    drho_dh: float
    T: float
    quality: float


@dataclass(frozen=True)
class AffineRefrigerant:
    """Density affine in pressure and enthalpy: ``rho = a + b*p + c*h``.

    Temperature is piecewise linear in enthalpy: it rises through the liquid
    region, stays at the saturation temperature (which grows with pressure)
    across the two-phase dome, then rises again in the vapor region. Quality
    is linear in enthalpy between the saturated-liquid and saturated-vapor
    enthalpies ``h_l`` and ``h_v`` (negative when subcooled, above 1 when
    superheated).

    Setting ``b = c = 0`` gives a constant-density (incompressible) fluid.
    """

    a: float = 500.0
    b: float = 1e-5
    c: float = -1e-3
    p_range: tuple = (1e5, 1e6)
    h_range: tuple = (1e5, 5e5)
    h_l: float = 2e5
    h_v: float = 4e5
    T_sat0: float = 250.0
    dTsat_dp: float = 5e-5
    cp_l: float = 1500.0
    cp_v: float = 1000.0

    def check_domain(self, p, h):
        if not (self.p_range[0] <= p <= self.p_range[1]):
            raise FluidDomainError(f"pressure {p!r} Pa outside [{self.p_range[0]}, {self.p_range[1]}]")
        if not (self.h_range[0] <= h <= self.h_range[1]):
            raise FluidDomainError(f"enthalpy {h!r} J/kg outside [{self.h_range[0]}, {self.h_range[1]}]")

    def density(self, p, h):
        return self.a + self.b * p + self.c * h

    def saturation_temperature(self, p):
        return self.T_sat0 + self.dTsat_dp * p

    def temperature(self, p, h):
        Ts = self.saturation_temperature(p)
        if h < self.h_l:
            return Ts - (self.h_l - h) / self.cp_l
        if h > self.h_v:
            return Ts + (h - self.h_v) / self.cp_v
        return Ts

    def quality(self, h):
        return (h - self.h_l) / (self.h_v - self.h_l)

    def evaluate(self, p, h) -> FluidState:
        """Properties at pressure ``p`` (Pa) and specific enthalpy ``h`` (J/kg).

        Raises:
            FluidDomainError: outside the documented (p, h) box.
        """
        p, h = float(p), float(h)
        self.check_domain(p, h)
        return FluidState(
            rho=self.density(p, h),
            drho_dp=self.b,
            drho_dh=self.c,
            T=self.temperature(p, h),
            quality=self.quality(h),
        )

    __call__ = evaluate

    def tables(self, n_p=10, n_h=17):
        """Sample the model onto lookup tables over (h, p).

        The enthalpy grid always contains ``h_l`` and ``h_v`` so the piecewise
        temperature is represented exactly by bilinear interpolation.

        Returns:
            dict of LookupTable keyed by ``rho``, ``drho_dp``, ``drho_dh``, ``T``, ``quality``.
        """
        ps = np.linspace(self.p_range[0], self.p_range[1], n_p)
        hs = np.union1d(np.linspace(self.h_range[0], self.h_range[1], n_h), [self.h_l, self.h_v])
        grid = {k: np.zeros((hs.size, ps.size)) for k in ("rho", "drho_dp", "drho_dh", "T", "quality")}
        for i, h in enumerate(hs):
            for j, p in enumerate(ps):
                st = self.evaluate(p, h)
                for k in grid:
                    grid[k][i, j] = getattr(st, k)
        return {k: LookupTable([hs, ps], v) for k, v in grid.items()}


def synthetic_refrigerant() -> AffineRefrigerant:
    """Default synthetic refrigerant (rho = 500 + 1e-5 p - 1e-3 h)."""
    return AffineRefrigerant()


def constant_density(rho=1000.0) -> AffineRefrigerant:
    return AffineRefrigerant(a=rho, b=0.0, c=0.0)
