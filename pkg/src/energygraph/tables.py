"""Gridded lookup tables with linear interpolation and flat extrapolation."""

from __future__ import annotations

import bisect
import warnings

import numpy as np


class ExtrapolationWarning(UserWarning):
    pass


class LookupTable:
    """1-D or 2-D table on a rectilinear grid.

    Args:
        axes: One or two strictly increasing sequences.
        values: Sample array of shape ``(len(axes[0]),)`` or
            ``(len(axes[0]), len(axes[1]))``.

    Queries outside the grid are clamped to the boundary (flat extrapolation)
    and emit an :class:`ExtrapolationWarning`. Derivatives along a clamped axis
    are zero.
    """

    def __init__(self, axes, values):
        axes = [tuple(float(v) for v in ax) for ax in axes]
        if len(axes) not in (1, 2):
            raise ValueError("lookup tables must have 1 or 2 axes")
        for ax in axes:
            if len(ax) < 2:
                raise ValueError("each table axis needs at least 2 points")
            if any(b <= a for a, b in zip(ax, ax[1:])):
                raise ValueError("table axes must be strictly increasing")
        vals = np.asarray(values, dtype=float)
        shape = tuple(len(ax) for ax in axes)
        if vals.shape != shape:
            raise ValueError(f"table values have shape {vals.shape}, expected {shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("table values must be finite")
        self.axes = tuple(axes)
        self.values = vals
        self.values.setflags(write=False)

    @property
    def ndim(self):
        return len(self.axes)

    def __eq__(self, other):
        return (
            isinstance(other, LookupTable)
            and self.axes == other.axes
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.axes, self.values.tobytes()))

    def __repr__(self):
        dims = "x".join(str(len(a)) for a in self.axes)
        return f"LookupTable({dims})"

    def _locate(self, axis, v):
        """Return (cell index, fraction, clamped flag, cell width)."""
        ax = self.axes[axis]
        clamped = False
        if v < ax[0] or v > ax[-1] or v != v:
            clamped = True
            warnings.warn(
                f"table query {v!r} outside axis {axis} range [{ax[0]}, {ax[-1]}]; holding boundary value",
                ExtrapolationWarning,
                stacklevel=4,
            )
            v = ax[0] if not v >= ax[0] else ax[-1]
        i = min(max(bisect.bisect_right(ax, v) - 1, 0), len(ax) - 2)
        w = ax[i + 1] - ax[i]
        return i, (v - ax[i]) / w, clamped, w

    def __call__(self, *args, orders=()):
        if len(args) != self.ndim:
            raise ValueError(f"table expects {self.ndim} arguments, got {len(args)}")
        orders = tuple(orders) or (0,) * self.ndim
        if any(o > 1 for o in orders):
            # piecewise-linear: second derivatives vanish inside cells
            return 0.0
        cells = [self._locate(k, float(a)) for k, a in enumerate(args)]
        for (_, _, clamped, _), o in zip(cells, orders):
            if clamped and o:
                return 0.0
        if self.ndim == 1:
            i, t, _, w = cells[0]
            y0, y1 = self.values[i], self.values[i + 1]
            if orders[0]:
                return float((y1 - y0) / w)
            return float(y0 + t * (y1 - y0))
        (i, s, _, wi), (j, t, _, wj) = cells
        v = self.values
        f00, f10, f01, f11 = v[i, j], v[i + 1, j], v[i, j + 1], v[i + 1, j + 1]
        ds = 1.0 if orders[0] else None
        dt = 1.0 if orders[1] else None
        # bilinear: f = a + b s + c t + d s t
        a, b, c, d = f00, f10 - f00, f01 - f00, f11 - f10 - f01 + f00
        if ds and dt:
            return float(d / (wi * wj))
        if ds:
            return float((b + d * t) / wi)
        if dt:
            return float((c + d * s) / wj)
        return float(a + b * s + c * t + d * s * t)

    def to_dict(self):
        return {"axes": [list(a) for a in self.axes], "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["axes"], data["values"])
