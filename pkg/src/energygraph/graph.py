"""Graph data model: vertices, edges, parameters, inputs, ports and incidence.

Symbol conventions inside equations:

* Vertex rows use ``x``/``x_dot`` for single-state vertices and
  ``x1..xN``/``x1_dot..xN_dot`` for multi-state vertices. Each row is the left
  side of a conservation law and must be linear in the derivatives.
* Edge entries use ``xt``/``xh`` for the tail/head state. For a multi-state
  endpoint the individual states are ``xt1..xtN`` / ``xh1..xhN``; ``xt`` and
  ``xh`` then refer to state 1.
* ``u<k>`` are inputs; any other identifier must be a declared parameter.

An edge endpoint index of 0 means the edge leaves or enters the graph from
outside (an exogenous power flow, which must be flagged ``external``).
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import expr as ex
from .errors import ExpressionError, GraphError
from .tables import LookupTable

KINDS = ("dynamic", "algebraic", "external")
CONNECTION_TYPES = ("EdgeConnection", "VertexConnection")
INPUT_RE = re.compile(r"u([0-9]+)\Z")
_RESERVED_RE = re.compile(r"(x|xt|xh|d)[0-9]*(_dot)?\Z|u[0-9]+\Z|t\Z|x[0-9]+_dot\Z")


def input_number(var):
    m = INPUT_RE.match(var)
    return int(m.group(1)) if m else None


def state_symbols(count):
    """Names of vertex states and their derivatives for a vertex of ``count`` states."""
    if count == 1:
        return ["x"], ["x_dot"]
    return [f"x{k}" for k in range(1, count + 1)], [f"x{k}_dot" for k in range(1, count + 1)]


def endpoint_symbols(prefix, count):
    """Map edge symbols (``xt``, ``xt1``, ...) to 0-based endpoint state index."""
    names = {prefix: 0}
    for k in range(count):
        names[f"{prefix}{k + 1}"] = k
    return names


def _exprs(value):
    if value is None:
        return ()
    if isinstance(value, (str, ex.Expression, int, float)):
        value = [value]
    return tuple(ex.as_expression(v) for v in value)


def _floats(value):
    if value is None:
        return None
    if np.isscalar(value):
        value = [value]
    return tuple(float(v) for v in value)


@dataclass(frozen=True)
class Vertex:
    """A storage element (dynamic), constraint node (algebraic) or boundary (external).

    ``equations`` holds one conservation-law row per state. External vertices
    carry no equations; their ``initial_condition`` is the nominal disturbance
    value used when no signal is scheduled.
    """

    name: str
    kind: str = "dynamic"
    equations: tuple = ()
    state_count: int = 1
    units: tuple = ()
    initial_condition: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "equations", _exprs(self.equations))
        units = self.units
        if isinstance(units, str):
            units = (units,)
        object.__setattr__(self, "units", tuple(units))
        object.__setattr__(self, "initial_condition", _floats(self.initial_condition))
        object.__setattr__(self, "state_count", int(self.state_count))

    @property
    def state_names(self):
        return state_symbols(self.state_count)[0]

    @property
    def derivative_names(self):
        return state_symbols(self.state_count)[1]


@dataclass(frozen=True)
class Edge:
    """A directed power flow; ``equations`` lists the flow entries (arity >= 1)."""

    name: str
    equations: tuple = ()
    external: bool = False

    def __post_init__(self):
        object.__setattr__(self, "equations", _exprs(self.equations))
        object.__setattr__(self, "external", bool(self.external))

    @property
    def flow_arity(self):
        return len(self.equations)


@dataclass(frozen=True)
class Parameter:
    description: str
    var: str
    value: Union[float, LookupTable]
    units: str = ""
    design_variable: bool = False

    def __post_init__(self):
        if not isinstance(self.value, LookupTable):
            object.__setattr__(self, "value", float(self.value))

    @property
    def is_table(self):
        return isinstance(self.value, LookupTable)


@dataclass(frozen=True)
class Input:
    description: str
    var: str
    units: str = ""


@dataclass(frozen=True)
class Port:
    connection_type: str
    element_index: int
    domain: str = ""


@dataclass(frozen=True)
class Graph:
    """One component or composed system.

    Vertices are reordered at construction into dynamic, algebraic, external
    order; ``edge_matrix`` and vertex ports are remapped accordingly. Indices
    in ``edge_matrix`` and ``ports`` are 1-based; 0 denotes outside.
    """

    name: str
    vertices: tuple
    edges: tuple
    edge_matrix: tuple
    parameters: tuple = ()
    inputs: tuple = ()
    ports: tuple = ()
    metadata: dict = field(default_factory=dict, compare=True)

    def __post_init__(self):
        vertices = tuple(self.vertices)
        edge_matrix = tuple((int(t), int(h)) for t, h in self.edge_matrix)
        rank = {k: i for i, k in enumerate(KINDS)}
        order = sorted(range(len(vertices)), key=lambda i: rank.get(vertices[i].kind, len(KINDS)))
        new_index = {old + 1: new + 1 for new, old in enumerate(order)}
        new_index[0] = 0
        if order != list(range(len(vertices))):
            vertices = tuple(vertices[i] for i in order)
            edge_matrix = tuple(
                (new_index.get(t, t), new_index.get(h, h)) for t, h in edge_matrix
            )
            ports = []
            for p in self.ports:
                if p.connection_type == "VertexConnection":
                    p = Port(p.connection_type, new_index.get(p.element_index, p.element_index), p.domain)
                ports.append(p)
            object.__setattr__(self, "ports", tuple(ports))
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "edge_matrix", edge_matrix)
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "metadata", copy.deepcopy(dict(self.metadata)))

    # -- structural summaries -------------------------------------------

    def indices(self, kind):
        return [i for i, v in enumerate(self.vertices) if v.kind == kind]

    @property
    def n_dynamic(self):
        return len(self.indices("dynamic"))

    @property
    def n_algebraic(self):
        return len(self.indices("algebraic"))

    @property
    def n_external(self):
        return len(self.indices("external"))

    def vertex_index(self, name):
        """0-based index of the vertex named ``name``."""
        for i, v in enumerate(self.vertices):
            if v.name == name:
                return i
        raise GraphError(f"graph '{self.name}' has no vertex named '{name}'")

    def parameter(self, var):
        for p in self.parameters:
            if p.var == var:
                return p
        raise GraphError(f"graph '{self.name}' has no parameter '{var}'")

    @property
    def parameter_values(self):
        return {p.var: p.value for p in self.parameters}

    def state_offsets(self, kinds=("dynamic", "algebraic")):
        """Offsets of each listed vertex's states in the stacked state vector."""
        offsets = {}
        pos = 0
        for i, v in enumerate(self.vertices):
            if v.kind in kinds:
                offsets[i] = pos
                pos += v.state_count
        return offsets, pos

    def flow_offsets(self):
        offsets = []
        pos = 0
        for e in self.edges:
            offsets.append(pos)
            pos += e.flow_arity
        return offsets, pos

    def flow_names(self):
        names = []
        for e in self.edges:
            if e.flow_arity == 1:
                names.append(e.name)
            else:
                names.extend(f"{e.name}[{k + 1}]" for k in range(e.flow_arity))
        return names

    def state_names(self, kinds=("dynamic", "algebraic")):
        names = []
        for v in self.vertices:
            if v.kind in kinds:
                if v.state_count == 1:
                    names.append(v.name)
                else:
                    names.extend(f"{v.name}[{k + 1}]" for k in range(v.state_count))
        return names

    def replace(self, **changes):
        data = dict(
            name=self.name,
            vertices=self.vertices,
            edges=self.edges,
            edge_matrix=self.edge_matrix,
            parameters=self.parameters,
            inputs=self.inputs,
            ports=self.ports,
            metadata=self.metadata,
        )
        data.update(changes)
        return Graph(**data)

    def with_initial_conditions(self, values):
        """Assign initial conditions to all dynamic and algebraic vertices at once.

        Args:
            values: Flat list covering every dynamic then algebraic state.
                All of them must be given.
        """
        values = [float(v) for v in values]
        _, total = self.state_offsets()
        if len(values) != total:
            raise GraphError(f"expected {total} initial values, got {len(values)}")
        new = []
        pos = 0
        for v in self.vertices:
            if v.kind == "external":
                new.append(v)
                continue
            new.append(_replace_vertex(v, initial_condition=values[pos : pos + v.state_count]))
            pos += v.state_count
        return self.replace(vertices=tuple(new))

    def initial_state(self):
        """Stacked initial state of dynamic+algebraic vertices (raises if unassigned)."""
        out = []
        for v in self.vertices:
            if v.kind == "external":
                continue
            if v.initial_condition is None:
                raise GraphError(f"vertex '{v.name}' has no initial condition")
            out.extend(v.initial_condition)
        return np.array(out, dtype=float)


def _replace_vertex(v, **changes):
    data = dict(
        name=v.name,
        kind=v.kind,
        equations=v.equations,
        state_count=v.state_count,
        units=v.units,
        initial_condition=v.initial_condition,
    )
    data.update(changes)
    return Vertex(**data)


def _replace_edge(e, **changes):
    data = dict(name=e.name, equations=e.equations, external=e.external)
    data.update(changes)
    return Edge(**data)


# ---------------------------------------------------------------------------
# incidence, S-matrix and Khatri-Rao expansion


def incidence_matrix(g: Graph) -> np.ndarray:
    """Vertex-by-edge incidence: +1 at the tail, -1 at the head.

    An edge whose tail or head lies outside the graph contributes a single
    nonzero entry; those columns are the exogenous flows.
    """
    M = np.zeros((len(g.vertices), len(g.edges)))
    for j, (t, h) in enumerate(g.edge_matrix):
        if t:
            M[t - 1, j] = 1.0
        if h:
            M[h - 1, j] = -1.0
    return M


def partition_incidence(M, g: Graph):
    """Split ``M`` into rows of dynamic+algebraic vertices and rows of external vertices."""
    M = np.asarray(M)
    n = g.n_dynamic + g.n_algebraic
    return M[:n, :], M[n:, :]


def external_flow_map(g: Graph):
    """Rows ``(vertex, edge, sign)`` (0-based) for edges entering or leaving the graph.

    The dense matrix D of the exogenous-flow term has entry ``sign`` at
    ``(vertex, edge)``: +1 when the flow enters the vertex, -1 when it leaves.
    """
    rows = []
    for j, (t, h) in enumerate(g.edge_matrix):
        if t == 0 and h:
            rows.append((h - 1, j, 1))
        elif h == 0 and t:
            rows.append((t - 1, j, -1))
    return rows


@dataclass
class SMatrix:
    """Block 0/1 map from edge flow entries to vertex states.

    Attributes:
        row_sizes: states per vertex.
        col_sizes: flow entries per edge.
        blocks: ``(vertex, edge) -> array(row_sizes[i], col_sizes[j])``;
            missing blocks are zero.
    """

    row_sizes: list
    col_sizes: list
    blocks: dict = field(default_factory=dict)

    def block(self, i, j):
        b = self.blocks.get((i, j))
        if b is None:
            return np.zeros((self.row_sizes[i], self.col_sizes[j]))
        return b

    @classmethod
    def ones(cls, shape):
        """Scalar blocks of 1 everywhere (the single-state, single-flow case)."""
        n, m = shape
        return cls([1] * n, [1] * m, {(i, j): np.ones((1, 1)) for i in range(n) for j in range(m)})


def default_state_map(state_count, arity):
    """0/1 block mapping flow entry n to state n of the endpoint."""
    b = np.zeros((state_count, arity))
    for n in range(min(state_count, arity)):
        b[n, n] = 1.0
    return b


def s_matrix(g: Graph) -> SMatrix:
    blocks = {}
    for j, (t, h) in enumerate(g.edge_matrix):
        arity = g.edges[j].flow_arity
        for end in (t, h):
            if end:
                i = end - 1
                blocks[(i, j)] = default_state_map(g.vertices[i].state_count, arity)
    return SMatrix(
        [v.state_count for v in g.vertices], [e.flow_arity for e in g.edges], blocks
    )


def khatri_rao(M, S: SMatrix) -> np.ndarray:
    """Blockwise product: block (i, j) of the result is ``M[i, j] * S_ij``."""
    M = np.asarray(M, dtype=float)
    if M.shape != (len(S.row_sizes), len(S.col_sizes)):
        raise GraphError(
            f"incidence shape {M.shape} does not match S block structure "
            f"({len(S.row_sizes)}, {len(S.col_sizes)})"
        )
    for (i, j), b in S.blocks.items():
        if np.shape(b) != (S.row_sizes[i], S.col_sizes[j]):
            raise GraphError(f"S block ({i + 1}, {j + 1}) has wrong shape {np.shape(b)}")
    r_off = np.concatenate([[0], np.cumsum(S.row_sizes)]).astype(int)
    c_off = np.concatenate([[0], np.cumsum(S.col_sizes)]).astype(int)
    out = np.zeros((r_off[-1], c_off[-1]))
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            if M[i, j] != 0.0:
                out[r_off[i] : r_off[i + 1], c_off[j] : c_off[j + 1]] = M[i, j] * S.block(i, j)
    return out + 0.0  # normalize -0.0


def structure_matrix(g: Graph) -> np.ndarray:
    """``M*S`` restricted to dynamic and algebraic state rows."""
    MS = khatri_rao(incidence_matrix(g), s_matrix(g))
    _, n = g.state_offsets()
    return MS[:n, :]


# ---------------------------------------------------------------------------
# vertex-row decomposition


def capacitance_entries(v: Vertex):
    """Split each row into ``C`` (coefficients of the derivatives) and the residual ``g``.

    Returns:
        (C, g): ``C[r][k]`` multiplies state k's derivative in row r; ``g[r]`` is
        the row with all derivatives set to zero.
    """
    _, dots = state_symbols(v.state_count)
    C, g = [], []
    zero = {d: ex.ZERO for d in dots}
    for row in v.equations:
        C.append([ex.simplify(ex.differentiate(row, d)) for d in dots])
        g.append(ex.simplify(ex.substitute(row, zero)))
    return C, g


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors

    def __str__(self):
        lines = [f"error: {e}" for e in self.errors] + [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "ok"


def _symbol_check(where, expr_, allowed, inputs, scalars, tables, report):
    for s in sorted(ex.free_symbols(expr_)):
        if s in allowed or s in scalars:
            continue
        if input_number(s) is not None:
            if s not in inputs:
                report.errors.append(f"undeclared input {s} in {where}")
            continue
        if s in tables:
            report.errors.append(f"lookup table '{s}' used without arguments in {where}")
            continue
        report.errors.append(f"unknown symbol '{s}' in {where}")
    for node in ex.walk(expr_):
        if isinstance(node, ex.Call):
            if node.name not in tables:
                what = "scalar parameter" if node.name in scalars else "undeclared table"
                report.errors.append(f"call to {what} '{node.name}' in {where}")
            elif len(node.args) != tables[node.name].ndim:
                report.errors.append(
                    f"table '{node.name}' expects {tables[node.name].ndim} arguments in {where}"
                )


def validate(g: Graph, require_initial_conditions: bool = False) -> ValidationReport:
    """Check structural and symbolic consistency; never raises.

    Args:
        g: Graph to check.
        require_initial_conditions: Treat missing initial conditions of
            dynamic/algebraic vertices as errors (needed before simulation).
    """
    r = ValidationReport()
    try:
        _validate(g, require_initial_conditions, r)
    except Exception as exc:  # defensive: the report must always be produced
        r.errors.append(f"validation aborted: {exc}")
    return r


def _validate(g, require_ic, r):
    nv, ne = len(g.vertices), len(g.edges)
    inputs = set()
    for inp in g.inputs:
        if input_number(inp.var) is None:
            r.errors.append(f"input variable '{inp.var}' must have the form u<k>")
        if inp.var in inputs:
            r.errors.append(f"duplicate input {inp.var}")
        inputs.add(inp.var)
    scalars, tables = set(), {}
    for p in g.parameters:
        if not ex.SYMBOL_RE.match(p.var):
            r.errors.append(f"invalid parameter name '{p.var}'")
            continue
        if _RESERVED_RE.match(p.var):
            r.errors.append(f"parameter name '{p.var}' is reserved")
        if p.var in scalars or p.var in tables:
            r.errors.append(f"duplicate parameter {p.var}")
        if p.is_table:
            tables[p.var] = p.value
        else:
            scalars.add(p.var)
            if not np.isfinite(p.value):
                r.errors.append(f"parameter {p.var} is not finite")
    names = [v.name for v in g.vertices]
    for n in sorted({n for n in names if names.count(n) > 1}):
        r.warnings.append(f"duplicate vertex name '{n}'")

    for i, v in enumerate(g.vertices, start=1):
        where = f"vertex {i} '{v.name}'"
        if v.kind not in KINDS:
            r.errors.append(f"{where}: unknown kind '{v.kind}'")
            continue
        if v.state_count < 1:
            r.errors.append(f"{where}: state_count must be positive")
            continue
        if v.initial_condition is not None:
            if len(v.initial_condition) != v.state_count:
                r.errors.append(
                    f"{where}: {len(v.initial_condition)} initial values for {v.state_count} states"
                )
            elif not all(np.isfinite(v.initial_condition)):
                r.errors.append(f"{where}: initial condition is not finite")
        elif v.kind != "external":
            msg = f"{where}: initial condition unassigned"
            (r.errors if require_ic else r.warnings).append(msg)
        if v.kind == "external":
            if v.equations:
                r.errors.append(f"{where}: external vertices carry no equation")
            continue
        if len(v.equations) != v.state_count:
            r.errors.append(f"{where}: {len(v.equations)} equation rows for {v.state_count} states")
            continue
        states, dots = state_symbols(v.state_count)
        allowed = set(states) | set(dots)
        for k, row in enumerate(v.equations, start=1):
            rw = f"{where} row {k}"
            _symbol_check(rw, row, allowed, set(), scalars, tables, r)
            used = ex.free_symbols(row) & set(dots)
            if v.kind == "dynamic" and not used:
                r.errors.append(f"{rw}: dynamic vertex equation must contain a state derivative")
            if v.kind == "algebraic" and used:
                r.errors.append(f"{rw}: algebraic vertex equation must not contain a state derivative")
            for d in used:
                try:
                    coeff = ex.differentiate(row, d)
                except ExpressionError as exc:
                    r.errors.append(f"{rw}: {exc}")
                    continue
                if ex.free_symbols(coeff) & set(dots):
                    r.errors.append(f"{rw}: equation is not linear in {d}")

    if len(g.edge_matrix) != ne:
        r.errors.append(f"edge matrix has {len(g.edge_matrix)} rows for {ne} edges")
        return
    incident = set()
    for j, (e, (t, h)) in enumerate(zip(g.edges, g.edge_matrix), start=1):
        where = f"edge {j} '{e.name}'"
        bad = False
        for label, end in (("tail", t), ("head", h)):
            if not 0 <= end <= nv:
                r.errors.append(f"{where}: {label} vertex {end} out of range (graph has {nv} vertices)")
                bad = True
        if bad:
            continue
        if t == 0 and h == 0:
            r.errors.append(f"{where}: edge has neither tail nor head inside the graph")
            continue
        if t and t == h:
            r.errors.append(f"{where}: self-loop on vertex {t}")
        if (t == 0 or h == 0) and not e.external:
            r.errors.append(f"{where}: edge crossing the graph boundary must be external")
        if e.flow_arity < 1:
            r.errors.append(f"{where}: edge has no flow equation")
        incident.update(x for x in (t, h) if x)
        allowed = set()
        if t:
            allowed |= set(endpoint_symbols("xt", g.vertices[t - 1].state_count))
        if h:
            allowed |= set(endpoint_symbols("xh", g.vertices[h - 1].state_count))
        outside = set()
        if t == 0:
            outside |= set(endpoint_symbols("xt", 9))
        if h == 0:
            outside |= set(endpoint_symbols("xh", 9))
        for k, eq in enumerate(e.equations, start=1):
            ew = where if e.flow_arity == 1 else f"{where} entry {k}"
            for s in sorted(ex.free_symbols(eq) & outside):
                r.errors.append(f"{ew}: '{s}' refers to an endpoint outside the graph")
            _symbol_check(ew, eq, allowed | outside, inputs, scalars, tables, r)
    for i, v in enumerate(g.vertices, start=1):
        if v.kind == "dynamic" and i not in incident:
            r.warnings.append(f"vertex {i} '{v.name}' has no incident edges")

    for k, p in enumerate(g.ports, start=1):
        where = f"port {k}"
        if p.connection_type not in CONNECTION_TYPES:
            r.errors.append(f"{where}: unknown connection type '{p.connection_type}'")
            continue
        if p.connection_type == "EdgeConnection":
            if not 1 <= p.element_index <= ne:
                r.errors.append(f"{where}: edge {p.element_index} out of range")
            elif not g.edges[p.element_index - 1].external:
                r.errors.append(f"{where}: edge {p.element_index} is not external")
        elif not 1 <= p.element_index <= nv:
            r.errors.append(f"{where}: vertex {p.element_index} out of range")

