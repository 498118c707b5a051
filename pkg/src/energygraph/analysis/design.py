"""Design-variable augmentation, control-law families and objective evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .. import expr as ex
from ..errors import DesignError, EnergyGraphError
from ..graph import Graph, Port, _replace_edge, _replace_vertex, capacitance_entries
from ..simulate import SignalSchedule, assemble, simulate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DesignVariable:
    """One design gene.

    Args:
        name: Symbol used in scaling expressions (and, if it matches a
            design-variable parameter of the graph, that parameter's value).
        lower, upper: Bounds for continuous variables.
        values: Allowed values for a discrete variable (e.g. ``(0, 1)`` for
            topology selection); bounds are then taken from min/max.
    """

    name: str
    lower: float = 0.0
    upper: float = 1.0
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.values is not None:
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise DesignError(f"discrete variable '{self.name}' has no values")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "lower", min(vals))
            object.__setattr__(self, "upper", max(vals))
        if not self.lower <= self.upper:
            raise DesignError(f"variable '{self.name}' has lower bound above upper bound")

    @property
    def discrete(self):
        return self.values is not None


# -- control-law family -----------------------------------------------------


@dataclass
class OpenLoop:
    """Inputs follow the scenario schedule; no controller parameters."""

    n_params = 0

    def bind(self, sys, phi):
        return None


@dataclass
class ProportionalTracking:
    """``u[input] = clip(bias + phi[0]*(r(t) - x[state]))``.

    Args:
        state: State name tracked.
        input: Input name driven (others follow the schedule).
        reference: Constant setpoint or callable ``r(t)``.
    """

    state: str
    input: str
    reference: Union[float, Callable] = 0.0
    bias: float = 0.0
    u_min: float = -math.inf
    u_max: float = math.inf
    n_params = 1

    def bind(self, sys, phi):
        i = sys.state_names.index(self.state)
        j = sys.input_names.index(self.input)
        gain = float(phi[0])
        ref = self.reference if callable(self.reference) else (lambda t, r=float(self.reference): r)
        lo, hi, bias = self.u_min, self.u_max, self.bias

        def law(t, x, u):
            u[j] = min(max(bias + gain * (ref(t) - x[i]), lo), hi)
            return u

        return law


@dataclass
class AffineFeedback:
    """``u[inputs] = clip(u0 - K*(x - x_ref))`` with ``K`` = phi reshaped row-major."""

    inputs: Sequence[str]
    u0: Sequence[float]
    x_ref: Sequence[float]
    u_min: float = -math.inf
    u_max: float = math.inf

    @property
    def n_params(self):
        return len(self.inputs) * len(self.x_ref)

    def bind(self, sys, phi):
        idx = [sys.input_names.index(n) for n in self.inputs]
        K = np.asarray(phi, dtype=float).reshape(len(idx), len(self.x_ref))
        u0 = np.asarray(self.u0, dtype=float)
        xr = np.asarray(self.x_ref, dtype=float)
        lo, hi = self.u_min, self.u_max

        def law(t, x, u):
            u[idx] = np.clip(u0 - K @ (x - xr), lo, hi)
            return u

        return law


# -- problem ---------------------------------------------------------------


@dataclass
class DesignProblem:
    """Design and controller optimization over a simulated scenario.

    Args:
        graph: Baseline graph.
        theta: Design variables.
        vertex_scaling: Vertex name -> capacitance scaling expression over
            the design-variable names.
        edge_scaling: Edge name -> flow scaling expression; a value of 0
            removes the edge.
        phi_bounds: (lower, upper) per controller parameter.
        control: Control law from the family above.
        objective: Integrand ``F_J``; a callable ``(t, x, u) -> float`` or an
            expression over ``x<k>`` (1-based states), ``u<k>``, ``t`` and
            the design-variable names.
        t_final, dt, x0, schedule: Scenario.
    """

    graph: Graph
    theta: Sequence[DesignVariable] = ()
    vertex_scaling: dict = field(default_factory=dict)
    edge_scaling: dict = field(default_factory=dict)
    phi_bounds: Sequence = ()
    control: object = field(default_factory=OpenLoop)
    objective: Union[str, Callable] = "0"
    t_final: float = 1.0
    dt: float = 1e-2
    x0: Optional[Sequence[float]] = None
    schedule: Optional[SignalSchedule] = None

    def __post_init__(self):
        self.theta = tuple(self.theta)
        self.phi_bounds = tuple((float(a), float(b)) for a, b in self.phi_bounds)
        names = [v.name for v in self.theta]
        if len(set(names)) != len(names):
            raise DesignError("design variable names must be unique")
        for a, b in self.phi_bounds:
            if not a <= b:
                raise DesignError("controller bound lower exceeds upper")
        n_ctrl = self.control.n_params
        if n_ctrl != len(self.phi_bounds):
            raise DesignError(f"control law needs {n_ctrl} parameters, {len(self.phi_bounds)} bounds given")
        vnames = {v.name for v in self.graph.vertices}
        enames = {e.name for e in self.graph.edges}
        for k in self.vertex_scaling:
            if k not in vnames:
                raise DesignError(f"vertex scaling names unknown vertex '{k}'")
        for k in self.edge_scaling:
            if k not in enames:
                raise DesignError(f"edge scaling names unknown edge '{k}'")
        self.vertex_scaling = {k: ex.as_expression(v) for k, v in self.vertex_scaling.items()}
        self.edge_scaling = {k: ex.as_expression(v) for k, v in self.edge_scaling.items()}
        allowed = set(names)
        for v in list(self.vertex_scaling.values()) + list(self.edge_scaling.values()):
            bad = ex.free_symbols(v) - allowed
            if bad:
                raise DesignError(f"scaling expression uses unknown symbol(s) {sorted(bad)}")

    @property
    def bounds(self):
        return [(v.lower, v.upper) for v in self.theta] + list(self.phi_bounds)


def _theta_bindings(problem, theta):
    theta = np.asarray(theta if theta is not None else [], dtype=float).reshape(-1)
    if theta.size != len(problem.theta):
        raise DesignError(f"expected {len(problem.theta)} design values, got {theta.size}")
    out = {}
    for v, val in zip(problem.theta, theta):
        if v.discrete:
            if val not in v.values:
                raise DesignError(f"'{v.name}' must be one of {v.values}, got {val}")
        elif not v.lower <= val <= v.upper:
            raise DesignError(f"'{v.name}'={val} outside bounds [{v.lower}, {v.upper}]")
        out[v.name] = float(val)
    return out


def augment_design(g: Graph, problem: DesignProblem, theta) -> Graph:
    """Apply the capacitance and flow scalings at ``theta``.

    Each listed vertex row ``C(x)*xdot + g(x)`` becomes ``psi_c*C(x)*xdot + g(x)``;
    each listed edge's entries are multiplied by ``psi``. A scaling of exactly
    1 leaves the equation object untouched; ``psi = 0`` removes the edge.
    Design variables that name design-variable parameters set their value.

    Raises:
        DesignError: out-of-bounds theta, negative capacitance scaling on a
            dynamic vertex.
    """
    bind = _theta_bindings(problem, theta)
    vertices = []
    for v in g.vertices:
        if v.name not in problem.vertex_scaling:
            vertices.append(v)
            continue
        psi = ex.evaluate(problem.vertex_scaling[v.name], bind)
        if v.kind == "dynamic" and psi < 0:
            raise DesignError(f"negative capacitance scaling {psi} for dynamic vertex '{v.name}'")
        if psi == 1.0:
            vertices.append(v)
            continue
        _, gg = capacitance_entries(v)
        p = ex.Const(psi)
        rows = tuple(ex.add(ex.mul(p, row), ex.mul(ex.Const(1.0 - psi), gr)) for row, gr in zip(v.equations, gg))
        vertices.append(_replace_vertex(v, equations=rows))
    edges, em, removed = [], [], []
    for k, (e, ends) in enumerate(zip(g.edges, g.edge_matrix)):
        psi = ex.evaluate(problem.edge_scaling[e.name], bind) if e.name in problem.edge_scaling else 1.0
        if psi == 0.0:
            removed.append(k + 1)
            continue
        if psi != 1.0:
            e = _replace_edge(e, equations=tuple(ex.mul(ex.Const(psi), q) for q in e.equations))
        edges.append(e)
        em.append(ends)
    ports = []
    for p in g.ports:
        if p.connection_type == "EdgeConnection":
            if p.element_index in removed:
                continue
            p = Port(p.connection_type, p.element_index - sum(r < p.element_index for r in removed), p.domain)
        ports.append(p)
    params = []
    for p in g.parameters:
        if p.design_variable and p.var in bind and not p.is_table:
            p = type(p)(p.description, p.var, bind[p.var], p.units, True)
        params.append(p)
    meta = dict(g.metadata)
    if removed:
        meta["removed_edges"] = [g.edges[k - 1].name for k in removed]
    return g.replace(vertices=tuple(vertices), edges=tuple(edges), edge_matrix=tuple(em), ports=tuple(ports), parameters=tuple(params), metadata=meta)


def _integrand(problem, sys, bind):
    obj = problem.objective
    if callable(obj):
        return lambda t, x, u: float(obj(t, x, u))
    e = ex.as_expression(obj)
    names = {f"x{k + 1}": k for k in range(sys.n)}
    inames = {f"u{k + 1}": k for k in range(sys.n_inputs)}
    bad = ex.free_symbols(e) - set(names) - set(inames) - set(bind) - {"t"}
    if bad:
        raise DesignError(f"objective uses unknown symbol(s) {sorted(bad)}")

    def fj(t, x, u):
        b = dict(bind)
        b["t"] = t
        b.update({n: x[k] for n, k in names.items()})
        b.update({n: u[k] for n, k in inames.items()})
        return ex.evaluate(e, b)

    return fj


def simulate_design(problem: DesignProblem, theta, phi=()):
    """Forward-simulate the augmented system; returns the trajectory."""
    bind = _theta_bindings(problem, theta)
    g = augment_design(problem.graph, problem, theta)
    sys = assemble(g)
    phi = np.asarray(phi, dtype=float).reshape(-1)
    for (a, b), val in zip(problem.phi_bounds, phi):
        if not a <= val <= b:
            raise DesignError(f"controller parameter {val} outside [{a}, {b}]")
    law = problem.control.bind(sys, phi)
    control = None
    if law is not None:
        sched = problem.schedule or SignalSchedule()

        def control(t, x, d):
            U, _ = sys.signal_matrix(sched, [t])
            return law(t, x, U[0].copy())

    traj = simulate(sys, x0=problem.x0, schedule=problem.schedule, t_span=(0.0, problem.t_final), dt=problem.dt, control=control)
    return traj, sys, bind


def evaluate_objective(problem: DesignProblem, theta, phi=()) -> float:
    """``J = int_0^tf F_J dt`` by the trapezoid rule; ``inf`` if the simulation fails."""
    try:
        traj, sys, bind = simulate_design(problem, theta, phi)
        fj = _integrand(problem, sys, bind)
        vals = np.array([fj(t, x, u) for t, x, u in zip(traj.times, traj.states, traj.inputs)])
    except DesignError:
        raise
    except (EnergyGraphError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("objective infeasible at theta=%s phi=%s: %s", list(np.atleast_1d(theta)), list(np.atleast_1d(phi)), exc)
        return math.inf
    if not np.all(np.isfinite(vals)):
        log.warning("objective integrand not finite at theta=%s", list(np.atleast_1d(theta)))
        return math.inf
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(traj.times)))
