"""Prebuilt component graphs.

Every builder returns a :class:`~energygraph.graph.Graph` with default
parameter values and initial conditions chosen for well-conditioned desk-scale
simulation. The values are illustrative constants, not physical reference data.

Common options accepted by every kind:

* ``initial_conditions``: flat list covering all dynamic then algebraic states.
* ``parameters``: mapping ``var -> value`` overriding defaults.
* ``design_variables``: iterable of parameter names to flag as design variables.
"""

from __future__ import annotations

from ..errors import ComponentError
from ..graph import Edge, Graph, Input, Parameter, Port, Vertex
from .fluids import synthetic_refrigerant
from .physics import PumpMap

THERMAL, HYDRAULIC, ELECTRICAL, MECHANICAL = "Thermal", "Hydraulic", "Electrical", "Mechanical"


def _finish(name, kind, vertices, edges, edge_matrix, params, inputs, ports, options, known=()):
    options = dict(options)
    ics = options.pop("initial_conditions", None)
    overrides = dict(options.pop("parameters", None) or {})
    design = set(options.pop("design_variables", None) or ())
    unknown = set(options) - set(known)
    if unknown:
        raise ComponentError(f"unknown option(s) for {kind}: {', '.join(sorted(unknown))}")
    vars_ = {p.var for p in params}
    for key in list(overrides) + list(design):
        if key not in vars_:
            raise ComponentError(f"{kind} has no parameter '{key}'")
    params = [
        Parameter(
            p.description,
            p.var,
            overrides.get(p.var, p.value),
            p.units,
            p.design_variable or p.var in design,
        )
        for p in params
    ]
    g = Graph(
        name=name,
        vertices=vertices,
        edges=edges,
        edge_matrix=edge_matrix,
        parameters=params,
        inputs=inputs,
        ports=ports,
        metadata={"kind": kind},
    )
    if ics is not None:
        try:
            g = g.with_initial_conditions(ics)
        except Exception as exc:
            raise ComponentError(f"invalid initial conditions for {kind}: {exc}") from None
    return g


def tank(name, **options):
    """Well-mixed thermal-fluid tank with temperature and mass states."""
    vertices = [
        Vertex(
            "Tank",
            "dynamic",
            ["cp_f*x2*x1_dot + cp_f*x1*x2_dot", "x2_dot"],
            state_count=2,
            units=("K", "kg"),
            initial_condition=(300.0, 6000.0),
        ),
        Vertex("Inlet Source", "external", units="K", initial_condition=300.0),
    ]
    edges = [
        Edge("Advection In", ["cp_f*u1*xt", "u1"], external=True),
        Edge("Advection Out", ["cp_f*u2*xt", "u2"], external=True),
    ]
    params = [Parameter("Fluid Specific Heat", "cp_f", 3300.0, "J/(kg*K)")]
    inputs = [Input("Inlet Mass Flow", "u1", "kg/s"), Input("Outlet Mass Flow", "u2", "kg/s")]
    ports = [
        Port("EdgeConnection", 1, THERMAL),
        Port("EdgeConnection", 2, THERMAL),
        Port("VertexConnection", 2, THERMAL),
    ]
    return _finish(name, "tank", vertices, edges, [(2, 1), (1, 0)], params, inputs, ports, options)


def heat_load(name, **options):
    """Single-phase cold plate: inlet fluid, lumped fluid and lumped wall."""
    vertices = [
        Vertex("Inlet Fluid", "external", units="K", initial_condition=300.0),
        Vertex("Fluid", "dynamic", "cp_f*V_f*rho*x_dot", units="K", initial_condition=300.0),
        Vertex("Wall", "dynamic", "Mcp_w*x_dot", units="K", initial_condition=300.0),
    ]
    edges = [
        Edge("Advection In", ["cp_f*u1*xt", "u1"], external=True),
        Edge("Advection Out", ["cp_f*u1*xt", "u1"], external=True),
        Edge("Convection", "hA*(xt-xh)"),
        Edge("Heat Load", "u2", external=True),
    ]
    params = [
        Parameter("Fluid Specific Heat", "cp_f", 3300.0, "J/(kg*K)"),
        Parameter("Fluid Volume", "V_f", 1e-3, "m^3"),
        Parameter("Fluid Density", "rho", 1000.0, "kg/m^3"),
        Parameter("Wall Heat Capacity", "Mcp_w", 500.0, "J/K"),
        Parameter("Wall Conductance", "hA", 50.0, "W/K"),
    ]
    inputs = [Input("Fluid Mass Flow", "u1", "kg/s"), Input("Heat Load", "u2", "W")]
    ports = [
        Port("EdgeConnection", 1, THERMAL),
        Port("EdgeConnection", 2, THERMAL),
        Port("EdgeConnection", 4, THERMAL),
    ]
    em = [(1, 2), (2, 0), (3, 2), (0, 3)]
    return _finish(name, "heat_load", vertices, edges, em, params, inputs, ports, options)


def _duct(tail, head, signed):
    drive = f"({tail}-{head}+rho*g*dz)"
    if signed:
        return f"rho*A_c*sign{drive}*sqrt(2*abs{drive}/(rho*fLD_KL))"
    return f"rho*A_c*sqrt(2*{drive}/(rho*fLD_KL))"


def pipe(name, signed=False, **options):
    """Hydraulic duct with one lumped pressure volume.

    Args:
        signed: Use the signed flow variant that allows reverse flow instead of
            failing when the pressure gradient opposes the edge orientation.
    """
    vertices = [
        Vertex("Inlet Pressure", "external", units="Pa", initial_condition=1.2e5),
        Vertex("Pipe Pressure", "dynamic", "rho*V_p/E_b*x_dot", units="Pa", initial_condition=1.1e5),
        Vertex("Outlet Pressure", "external", units="Pa", initial_condition=1.0e5),
    ]
    edges = [
        Edge("Inflow", _duct("xt", "xh", signed), external=True),
        Edge("Outflow", _duct("xt", "xh", signed), external=True),
    ]
    params = [
        Parameter("Fluid Density", "rho", 1000.0, "kg/m^3"),
        Parameter("Flow Area", "A_c", 1e-4, "m^2"),
        Parameter("Loss Coefficient fL/D+K", "fLD_KL", 2.0, "-"),
        Parameter("Height Difference", "dz", 0.0, "m"),
        Parameter("Gravity", "g", 9.81, "m/s^2"),
        Parameter("Pipe Volume", "V_p", 1e-3, "m^3"),
        Parameter("Effective Bulk Modulus", "E_b", 1e6, "Pa"),
    ]
    ports = [
        Port("EdgeConnection", 1, HYDRAULIC),
        Port("EdgeConnection", 2, HYDRAULIC),
        Port("VertexConnection", 1, HYDRAULIC),
        Port("VertexConnection", 3, HYDRAULIC),
    ]
    return _finish(name, "pipe", vertices, edges, [(1, 2), (2, 3)], params, [], ports, options)


def pump(name, **options):
    """Centrifugal pump feeding a lumped discharge volume."""
    vertices = [
        Vertex("Suction Pressure", "external", units="Pa", initial_condition=1.0e5),
        Vertex("Discharge Pressure", "dynamic", "rho*V_d/E_b*x_dot", units="Pa", initial_condition=1.5e5),
    ]
    edges = [
        Edge("Pump Flow", "rho*A_p*sqrt(2*g*(H_pump(u1, xh-xt)-(xh-xt)/(rho*g)))", external=True),
        Edge("Discharge Flow", "u2", external=True),
    ]
    params = [
        Parameter("Fluid Density", "rho", 1000.0, "kg/m^3"),
        Parameter("Pump Flow Area", "A_p", 1e-4, "m^2"),
        Parameter("Gravity", "g", 9.81, "m/s^2"),
        Parameter("Discharge Volume", "V_d", 1e-3, "m^3"),
        Parameter("Effective Bulk Modulus", "E_b", 1e6, "Pa"),
        Parameter("Pump Head Map", "H_pump", PumpMap.quadratic(), "m"),
    ]
    inputs = [Input("Pump Speed", "u1", "rad/s"), Input("Discharge Mass Flow", "u2", "kg/s")]
    ports = [Port("EdgeConnection", 1, HYDRAULIC), Port("EdgeConnection", 2, HYDRAULIC)]
    return _finish(name, "pump", vertices, edges, [(1, 2), (2, 0)], params, inputs, ports, options)


def reservoir(name, **options):
    """Open reservoir; capacitance A/g relates stored mass to bottom pressure."""
    vertices = [
        Vertex("Reservoir Pressure", "dynamic", "A_r/g*x_dot", units="Pa", initial_condition=1.2e5)
    ]
    edges = [Edge("Inflow", "u1", external=True), Edge("Outflow", "u2", external=True)]
    params = [
        Parameter("Reservoir Area", "A_r", 0.5, "m^2"),
        Parameter("Gravity", "g", 9.81, "m/s^2"),
    ]
    inputs = [Input("Inflow", "u1", "kg/s"), Input("Outflow", "u2", "kg/s")]
    ports = [
        Port("EdgeConnection", 1, HYDRAULIC),
        Port("EdgeConnection", 2, HYDRAULIC),
        Port("VertexConnection", 1, HYDRAULIC),
    ]
    return _finish(name, "reservoir", vertices, edges, [(0, 1), (1, 0)], params, inputs, ports, options)


def split_junction(name, **options):
    """Thermal-fluid junction with one inlet (u3) and two outlets (u1, u2)."""
    vertices = [
        Vertex("Inlet Fluid", "external", units="K", initial_condition=300.0),
        Vertex("Junction", "dynamic", "cp_f*M_j*x_dot", units="K", initial_condition=300.0),
    ]
    edges = [
        Edge("Inflow", ["cp_f*u3*xt", "u3"], external=True),
        Edge("Outflow 1", ["cp_f*u1*xt", "u1"], external=True),
        Edge("Outflow 2", ["cp_f*u2*xt", "u2"], external=True),
    ]
    params = [
        Parameter("Fluid Specific Heat", "cp_f", 3300.0, "J/(kg*K)"),
        Parameter("Junction Fluid Mass", "M_j", 0.5, "kg"),
    ]
    inputs = [
        Input("Outlet 1 Mass Flow", "u1", "kg/s"),
        Input("Outlet 2 Mass Flow", "u2", "kg/s"),
        Input("Inlet Mass Flow", "u3", "kg/s"),
    ]
    ports = [Port("EdgeConnection", k, THERMAL) for k in (1, 2, 3)]
    em = [(1, 2), (2, 0), (2, 0)]
    return _finish(name, "split_junction", vertices, edges, em, params, inputs, ports, options)


def mix_junction(name, **options):
    """Thermal-fluid junction with two inlets (u1, u2) and one outlet (u3)."""
    vertices = [
        Vertex("Inlet Fluid 1", "external", units="K", initial_condition=300.0),
        Vertex("Inlet Fluid 2", "external", units="K", initial_condition=300.0),
        Vertex("Junction", "dynamic", "cp_f*M_j*x_dot", units="K", initial_condition=300.0),
    ]
    edges = [
        Edge("Inflow 1", ["cp_f*u1*xt", "u1"], external=True),
        Edge("Inflow 2", ["cp_f*u2*xt", "u2"], external=True),
        Edge("Outflow", ["cp_f*u3*xt", "u3"], external=True),
    ]
    params = [
        Parameter("Fluid Specific Heat", "cp_f", 3300.0, "J/(kg*K)"),
        Parameter("Junction Fluid Mass", "M_j", 0.5, "kg"),
    ]
    inputs = [
        Input("Inlet 1 Mass Flow", "u1", "kg/s"),
        Input("Inlet 2 Mass Flow", "u2", "kg/s"),
        Input("Outlet Mass Flow", "u3", "kg/s"),
    ]
    ports = [Port("EdgeConnection", k, THERMAL) for k in (1, 2, 3)]
    em = [(1, 3), (2, 3), (3, 0)]
    return _finish(name, "mix_junction", vertices, edges, em, params, inputs, ports, options)


_REFRIGERANT_ENERGY = (
    "(drho_dh(x1, x2)*x1+rho_r(x1, x2))*V_r*x1_dot+(drho_dp(x1, x2)*x1-1)*V_r*x2_dot"
)
_REFRIGERANT_MASS = "drho_dh(x1, x2)*V_r*x1_dot+drho_dp(x1, x2)*V_r*x2_dot"
_REGIME_HTC = (
    "(hA_sub*(1-sign(quality(xh1, xh2)))/2"
    "+hA_tp*(sign(quality(xh1, xh2))-sign(quality(xh1, xh2)-1))/2"
    "+hA_sup*(1+sign(quality(xh1, xh2)-1))/2)"
)


def two_phase_cold_plate(name, n=1, mass_flow="input", **options):
    """Two-phase cold plate discretized into ``n`` series control volumes.

    Each volume has a refrigerant vertex with states (h, p) and a wall vertex
    with temperature state. Rows of the refrigerant vertex are the energy and
    mass balances. Fluid properties come from lookup tables sampled from the
    synthetic refrigerant.

    Args:
        n: Number of control volumes (>= 1).
        mass_flow: ``"input"`` uses inlet (u1) and outlet (u2) mass-flow inputs,
            with interior flows equal to u1; ``"duct"`` computes every mass
            flow from the pressure difference with the signed duct relation.
    """
    if not isinstance(n, int) or n < 1:
        raise ComponentError(f"two_phase_cold_plate needs n >= 1 control volumes, got {n!r}")
    if mass_flow not in ("input", "duct"):
        raise ComponentError(f"mass_flow must be 'input' or 'duct', got {mass_flow!r}")
    tables = synthetic_refrigerant().tables()
    vertices, edges, em = [], [], []
    ref = [2 * k + 1 for k in range(n)]
    wall = [2 * k + 2 for k in range(n)]
    for k in range(n):
        suffix = "" if n == 1 else f" {k + 1}"
        vertices.append(
            Vertex(
                f"Refrigerant{suffix}",
                "dynamic",
                [_REFRIGERANT_ENERGY, _REFRIGERANT_MASS],
                state_count=2,
                units=("J/kg", "Pa"),
                initial_condition=(2.5e5, 4.0e5),
            )
        )
        vertices.append(Vertex(f"Wall{suffix}", "dynamic", "Mcp_w*x_dot", units="K", initial_condition=280.0))
    inlet, outlet = 2 * n + 1, 2 * n + 2
    vertices.append(Vertex("Inlet", "external", state_count=2, units=("J/kg", "Pa"), initial_condition=(2.2e5, 4.1e5)))
    vertices.append(Vertex("Outlet", "external", state_count=2, units=("J/kg", "Pa"), initial_condition=(2.6e5, 3.9e5)))

    def flow(default_input):
        if mass_flow == "input":
            m = default_input
        else:
            m = "rho_r(xt1, xt2)*A_c*sign(xt2-xh2)*sqrt(2*abs(xt2-xh2)/(rho_r(xt1, xt2)*K_f))"
        return [f"{m}*xt1" if mass_flow == "input" else f"({m})*xt1", m]

    edges.append(Edge("Inflow", flow("u1"), external=True))
    em.append((inlet, ref[0]))
    edges.append(Edge("Outflow", flow("u2"), external=True))
    em.append((ref[-1], outlet))
    for k in range(n):
        suffix = "" if n == 1 else f" {k + 1}"
        edges.append(Edge(f"Wall Convection{suffix}", f"{_REGIME_HTC}*(xt-T_r(xh1, xh2))"))
        em.append((wall[k], ref[k]))
        load = "u3" if n == 1 else f"u3/{n}"
        edges.append(Edge(f"Heat Load{suffix}", load, external=True))
        em.append((0, wall[k]))
    for k in range(n - 1):
        edges.append(Edge(f"Flow {k + 1}-{k + 2}", flow("u1")))
        em.append((ref[k], ref[k + 1]))
    params = [
        Parameter("Refrigerant Volume", "V_r", 1e-3 / n, "m^3"),
        Parameter("Wall Heat Capacity", "Mcp_w", 200.0 / n, "J/K"),
        Parameter("Subcooled Conductance", "hA_sub", 20.0 / n, "W/K"),
        Parameter("Two-Phase Conductance", "hA_tp", 100.0 / n, "W/K"),
        Parameter("Superheated Conductance", "hA_sup", 10.0 / n, "W/K"),
        Parameter("Refrigerant Density", "rho_r", tables["rho"], "kg/m^3"),
        Parameter("Density Pressure Derivative", "drho_dp", tables["drho_dp"], "kg/(m^3*Pa)"),
        Parameter("Density Enthalpy Derivative", "drho_dh", tables["drho_dh"], "kg^2/(m^3*J)"),
        Parameter("Refrigerant Temperature", "T_r", tables["T"], "K"),
        Parameter("Vapor Quality", "quality", tables["quality"], "-"),
    ]
    inputs = []
    if mass_flow == "input":
        inputs += [Input("Inlet Mass Flow", "u1", "kg/s"), Input("Outlet Mass Flow", "u2", "kg/s")]
    else:
        params += [
            Parameter("Flow Area", "A_c", 1e-5, "m^2"),
            Parameter("Loss Coefficient", "K_f", 5.0, "-"),
        ]
    inputs.append(Input("Heat Load", "u3", "W"))
    ports = [Port("EdgeConnection", 1, THERMAL), Port("EdgeConnection", 2, THERMAL)]
    return _finish(
        name, "two_phase_cold_plate", vertices, edges, em, params, inputs, ports, options
    )


def mass_spring_damper(name, **options):
    """Translational mass-spring-damper; capacitances are compliance*F and mass*v."""
    vertices = [
        Vertex("Spring Force", "dynamic", "c_s*x*x_dot", units="N", initial_condition=1.0),
        Vertex("Mass Velocity", "dynamic", "m*x*x_dot", units="m/s", initial_condition=0.5),
        Vertex("Damper Heat", "external", units="K", initial_condition=300.0),
    ]
    edges = [
        Edge("Spring Power", "xt*xh"),
        Edge("Damper Loss", "b*xt^2"),
        Edge("Applied Force", "u1*xh", external=True),
    ]
    params = [
        Parameter("Spring Compliance", "c_s", 0.01, "m/N"),
        Parameter("Mass", "m", 1.0, "kg"),
        Parameter("Damping Coefficient", "b", 0.5, "N*s/m"),
    ]
    inputs = [Input("Applied Force", "u1", "N")]
    ports = [Port("EdgeConnection", 3, MECHANICAL), Port("VertexConnection", 3, THERMAL)]
    em = [(2, 1), (2, 3), (0, 2)]
    return _finish(name, "mass_spring_damper", vertices, edges, em, params, inputs, ports, options)


def buck_converter(name, **options):
    """Averaged buck converter with duty-cycle input u1."""
    vertices = [
        Vertex("Inductor Current", "dynamic", "L*x*x_dot", units="A", initial_condition=0.1),
        Vertex("Capacitor Voltage", "dynamic", "C_out*x*x_dot", units="V", initial_condition=1.0),
        Vertex("Source Voltage", "external", units="V", initial_condition=12.0),
        Vertex("Heat Sink", "external", units="K", initial_condition=300.0),
    ]
    edges = [
        Edge("Switched Power", "u1*xt*xh"),
        Edge("Inductor Transfer", "xt*xh"),
        Edge("Load", "xt^2/R_load"),
        Edge("Inductor Loss", "R_L*xt^2"),
    ]
    params = [
        Parameter("Inductance", "L", 1e-2, "H"),
        Parameter("Output Capacitance", "C_out", 1e-2, "F"),
        Parameter("Load Resistance", "R_load", 10.0, "Ohm"),
        Parameter("Inductor Resistance", "R_L", 0.1, "Ohm"),
    ]
    inputs = [Input("Duty Cycle", "u1", "-")]
    ports = [Port("VertexConnection", 3, ELECTRICAL), Port("VertexConnection", 4, THERMAL)]
    em = [(3, 1), (1, 2), (2, 4), (1, 4)]
    return _finish(name, "buck_converter", vertices, edges, em, params, inputs, ports, options)


def dc_motor(name, **options):
    """Permanent-magnet DC motor driven by a voltage input against a load torque."""
    vertices = [
        Vertex("Armature Current", "dynamic", "L_a*x*x_dot", units="A", initial_condition=0.5),
        Vertex("Rotor Speed", "dynamic", "J_m*x*x_dot", units="rad/s", initial_condition=10.0),
        Vertex("Load Torque", "external", units="N*m", initial_condition=0.1),
        Vertex("Heat Sink", "external", units="K", initial_condition=300.0),
    ]
    edges = [
        Edge("Voltage Input", "u1*xh", external=True),
        Edge("Armature Loss", "R_a*xt^2"),
        Edge("Energy Conversion", "k_m*xt*xh"),
        Edge("Friction Loss", "b_m*xt^2"),
        Edge("Load", "xt*xh"),
    ]
    params = [
        Parameter("Armature Inductance", "L_a", 1e-2, "H"),
        Parameter("Rotor Inertia", "J_m", 1e-2, "kg*m^2"),
        Parameter("Armature Resistance", "R_a", 1.0, "Ohm"),
        Parameter("Motor Constant", "k_m", 0.1, "N*m/A"),
        Parameter("Viscous Friction", "b_m", 1e-3, "N*m*s"),
    ]
    inputs = [Input("Supply Voltage", "u1", "V")]
    ports = [
        Port("EdgeConnection", 1, ELECTRICAL),
        Port("VertexConnection", 3, MECHANICAL),
        Port("VertexConnection", 4, THERMAL),
    ]
    em = [(0, 1), (1, 4), (1, 2), (2, 4), (2, 3)]
    return _finish(name, "dc_motor", vertices, edges, em, params, inputs, ports, options)


def loss_element(name, **options):
    """Dissipative edge ``lam*xt^2`` between two connection vertices."""
    vertices = [
        Vertex("Element", "external", initial_condition=1.0),
        Vertex("Sink", "external", units="K", initial_condition=300.0),
    ]
    edges = [Edge("Loss", "lam*xt^2")]
    params = [Parameter("Loss Coefficient", "lam", 1.0)]
    ports = [Port("VertexConnection", 1), Port("VertexConnection", 2, THERMAL)]
    return _finish(name, "loss_element", vertices, edges, [(1, 2)], params, [], ports, options)


def conversion_element(name, **options):
    """Power conversion edge ``lam*xt*xh`` (gear, transformer, motor constant)."""
    vertices = [
        Vertex("Side A", "external", initial_condition=1.0),
        Vertex("Side B", "external", initial_condition=1.0),
    ]
    edges = [Edge("Conversion", "lam*xt*xh")]
    params = [Parameter("Conversion Ratio", "lam", 1.0)]
    ports = [Port("VertexConnection", 1), Port("VertexConnection", 2)]
    return _finish(name, "conversion_element", vertices, edges, [(1, 2)], params, [], ports, options)


def virtual_element(name, **options):
    """Zero-capacitance node algebraically coupling two storage elements."""
    vertices = [
        Vertex("Storage 1", "dynamic", "C_1*x_dot", units="K", initial_condition=350.0),
        Vertex("Virtual Node", "algebraic", "0", units="K", initial_condition=325.0),
        Vertex("Storage 2", "dynamic", "C_2*x_dot", units="K", initial_condition=300.0),
    ]
    edges = [Edge("Link 1", "G_1*(xt-xh)"), Edge("Link 2", "G_2*(xt-xh)")]
    params = [
        Parameter("Capacitance 1", "C_1", 100.0, "J/K"),
        Parameter("Capacitance 2", "C_2", 200.0, "J/K"),
        Parameter("Conductance 1", "G_1", 5.0, "W/K"),
        Parameter("Conductance 2", "G_2", 10.0, "W/K"),
    ]
    ports = [Port("VertexConnection", 1, THERMAL), Port("VertexConnection", 3, THERMAL)]
    em = [(1, 2), (2, 3)]
    return _finish(name, "virtual_element", vertices, edges, em, params, [], ports, options)


BUILDERS = {
    "tank": tank,
    "heat_load": heat_load,
    "pipe": pipe,
    "pump": pump,
    "reservoir": reservoir,
    "split_junction": split_junction,
    "mix_junction": mix_junction,
    "two_phase_cold_plate": two_phase_cold_plate,
    "mass_spring_damper": mass_spring_damper,
    "buck_converter": buck_converter,
    "dc_motor": dc_motor,
    "loss_element": loss_element,
    "conversion_element": conversion_element,
    "virtual_element": virtual_element,
}

KINDS = tuple(BUILDERS)


def instantiate(kind, name=None, **options) -> Graph:
    """Build a catalog component.

    Args:
        kind: One of :data:`KINDS`.
        name: Graph name (defaults to the kind).
        **options: Kind-specific options plus the common ones listed in the
            module docstring.

    Raises:
        ComponentError: unknown kind or invalid options.
    """
    try:
        builder = BUILDERS[kind]
    except KeyError:
        raise ComponentError(f"unknown component kind '{kind}' (known: {', '.join(KINDS)})") from None
    try:
        return builder(name or kind, **options)
    except TypeError as exc:
        raise ComponentError(f"invalid options for {kind}: {exc}") from None
