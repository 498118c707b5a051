"""Composition of component graphs.

``combine`` joins graphs through vertex or edge connections, ``input_common``
expresses inputs in terms of others and ``stitch`` couples dynamic graphs with
algebraic models into a DAE system.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .errors import CompositionError, GraphError
from .graph import (
    Edge,
    Graph,
    Input,
    Parameter,
    Port,
    _replace_edge,
    _replace_vertex,
    input_number,
    validate,
)


def _tag(name):
    tag = re.sub(r"\W", "_", name)
    return tag if re.match(r"[A-Za-z_]", tag) else f"c_{tag}"


@dataclass
class _Part:
    graph: Graph
    tag: str
    vertex_offset: int
    edge_offset: int


def _union(graphs):
    """Disjoint union with namespaced symbols and globally renumbered inputs.

    Returns (vertices, edges, edge_matrix, parameters, inputs, parts, input_map).
    """
    names = [g.name for g in graphs]
    if len(set(names)) != len(names):
        raise CompositionError(f"component names must be unique, got {names}")
    tags = [_tag(n) for n in names]
    if len(set(tags)) != len(tags):
        raise CompositionError(f"component names collide after sanitizing: {names}")
    vertices, edges, em, params, inputs, parts = [], [], [], [], [], []
    input_map = {}
    for g, tag in zip(graphs, tags):
        part = _Part(g, tag, len(vertices), len(edges))
        parts.append(part)
        rules, funcs = {}, {}
        for p in g.parameters:
            new = f"{tag}__{p.var}"
            if p.is_table:
                funcs[p.var] = new
            else:
                rules[p.var] = ex.Sym(new)
            params.append(Parameter(f"{g.name}: {p.description}", new, p.value, p.units, p.design_variable))
        for inp in sorted(g.inputs, key=lambda i: input_number(i.var)):
            new = f"u{len(inputs) + 1}"
            rules[inp.var] = ex.Sym(new)
            inputs.append(Input(f"{g.name}: {inp.description}", new, inp.units))
            origin = g.metadata.get("input_map", {}).get(inp.var, inp.var)
            input_map[new] = f"{g.name}.{origin}"

        def rewrite(eq):
            return ex.rename_functions(ex.substitute(eq, rules), funcs)

        for v in g.vertices:
            vertices.append(
                _replace_vertex(v, name=f"{g.name}/{v.name}", equations=tuple(rewrite(e) for e in v.equations))
            )
        for e, (t, h) in zip(g.edges, g.edge_matrix):
            edges.append(_replace_edge(e, name=f"{g.name}/{e.name}", equations=tuple(rewrite(q) for q in e.equations)))
            em.append((t + part.vertex_offset if t else 0, h + part.vertex_offset if h else 0))
    return vertices, edges, em, params, inputs, parts, input_map


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i


def combine(name, components, ports) -> Graph:
    """Connect component graphs into one system graph.

    Args:
        name: System name.
        components: Rows ``(primary, secondary)`` of Graph objects. A graph
            appearing in several rows is the same component (matched by name).
        ports: Rows ``(primary port, secondary port)`` of 1-based port numbers.

    The primary side of each row has priority: a merged vertex keeps the
    primary's properties (unless only the secondary is dynamic, in which case
    the dynamic vertex survives) and a merged edge keeps the primary's
    equations. Component parameters become ``<component>__<var>`` and inputs
    are renumbered globally; ``metadata["input_map"]`` records their origin.

    Raises:
        CompositionError: invalid port, domain or type mismatch, port reuse,
            self-connection, two dynamic vertices merged, flow arity mismatch.
    """
    components = [tuple(row) for row in components]
    ports = [tuple(int(p) for p in row) for row in np.atleast_2d(np.asarray(ports, dtype=int)).tolist()]
    if len(components) != len(ports):
        raise CompositionError(f"{len(components)} component rows but {len(ports)} port rows")
    graphs, by_name = [], {}
    for row in components:
        if len(row) != 2:
            raise CompositionError("each component row needs a primary and a secondary graph")
        for g in row:
            if not isinstance(g, Graph):
                raise CompositionError(f"components must be Graph objects, got {type(g).__name__}")
            if g.name in by_name:
                if by_name[g.name] != g:
                    raise CompositionError(f"two different components are named '{g.name}'")
            else:
                by_name[g.name] = g
                graphs.append(g)
        if row[0].name == row[1].name:
            raise CompositionError(f"cannot connect component '{row[0].name}' to itself")

    vertices, edges, em, params, inputs, parts, input_map = _union(graphs)
    part_of = {p.graph.name: p for p in parts}
    uf = _UnionFind(len(vertices))
    survivor = {}  # root -> vertex index whose properties survive
    removed_edges = set()
    new_edges = {}
    used = set()
    discarded = []
    connections = []

    def port_of(g, k):
        if not 1 <= k <= len(g.ports):
            raise CompositionError(f"component '{g.name}' has no port {k} (it has {len(g.ports)})")
        if (g.name, k) in used:
            raise CompositionError(f"port {k} of '{g.name}' is already connected")
        return g.ports[k - 1]

    for (ga, gb), (ka, kb) in zip(components, ports):
        pa, pb = port_of(ga, ka), port_of(gb, kb)
        if pa.connection_type != pb.connection_type:
            raise CompositionError(
                f"port {ka} of '{ga.name}' is a {pa.connection_type} but port {kb} of '{gb.name}' is a {pb.connection_type}"
            )
        if pa.domain and pb.domain and pa.domain != pb.domain:
            raise CompositionError(
                f"domain mismatch: '{ga.name}' port {ka} is {pa.domain}, '{gb.name}' port {kb} is {pb.domain}"
            )
        A, B = part_of[ga.name], part_of[gb.name]
        if pa.connection_type == "VertexConnection":
            _merge_vertices(uf, survivor, vertices, A.vertex_offset + pa.element_index - 1, B.vertex_offset + pb.element_index - 1)
        else:
            ia = A.edge_offset + pa.element_index - 1
            ib = B.edge_offset + pb.element_index - 1
            _merge_edges(ia, ib, vertices, edges, em, removed_edges, new_edges, discarded)
        used.add((ga.name, ka))
        used.add((gb.name, kb))
        connections.append({"primary": [ga.name, ka], "secondary": [gb.name, kb], "type": pa.connection_type})

    # resolve vertices
    root_of = [uf.find(i) for i in range(len(vertices))]
    edge_rows = []
    for k, e in enumerate(edges):
        if k in removed_edges:
            continue
        t, h = new_edges.get(k, (em[k], None))[0]
        e = new_edges[k][1] if k in new_edges else e
        t = root_of[t - 1] + 1 if t else 0
        h = root_of[h - 1] + 1 if h else 0
        if t and t == h:
            raise CompositionError(f"edge '{e.name}' would connect vertex '{vertices[t - 1].name}' to itself")
        edge_rows.append((e, t, h))
    touched = {v for _, t, h in edge_rows for v in (t, h) if v}
    keep = []
    for i, v in enumerate(vertices):
        if root_of[i] != i:
            continue
        if v.kind == "external" and (i + 1) not in touched:
            continue  # isolated boundary left behind by an edge merge
        keep.append(i)
    new_index = {old + 1: k + 1 for k, old in enumerate(keep)}
    out_vertices = []
    for i in keep:
        src = survivor.get(i, i)
        out_vertices.append(_replace_vertex(vertices[src], name=vertices[i].name if src == i else vertices[src].name))
    out_edges, out_em = [], []
    for e, t, h in edge_rows:
        t2, h2 = new_index.get(t, 0), new_index.get(h, 0)
        crosses = t2 == 0 or h2 == 0 or out_vertices[t2 - 1].kind == "external" or out_vertices[h2 - 1].kind == "external"
        out_edges.append(_replace_edge(e, external=crosses))
        out_em.append((t2, h2))

    # remaining ports become system ports
    out_ports, port_map = [], []
    edge_new_index = {}
    pos = 0
    for k in range(len(edges)):
        if k in removed_edges:
            continue
        pos += 1
        edge_new_index[k] = pos
    for part in parts:
        for k, p in enumerate(part.graph.ports, start=1):
            if (part.graph.name, k) in used:
                continue
            if p.connection_type == "VertexConnection":
                old = part.vertex_offset + p.element_index - 1
                idx = new_index.get(root_of[old] + 1)
            else:
                idx = edge_new_index.get(part.edge_offset + p.element_index - 1)
            if idx is None:
                continue
            out_ports.append(Port(p.connection_type, idx, p.domain))
            port_map.append(f"{part.graph.name}:{k}")

    metadata = {
        "kind": "system",
        "components": [g.name for g in graphs],
        "connections": connections,
        "input_map": input_map,
        "port_map": port_map,
        "discarded_equations": discarded,
    }
    g = Graph(name, tuple(out_vertices), tuple(out_edges), tuple(out_em), tuple(params), tuple(inputs), tuple(out_ports), metadata)
    # ports refer to positions before the kind sort; Graph remaps vertex ports itself
    return g


def _merge_vertices(uf, survivor, vertices, a, b):
    ra, rb = uf.find(a), uf.find(b)
    if ra == rb:
        raise CompositionError(f"vertices '{vertices[a].name}' and '{vertices[b].name}' are already merged")
    va = vertices[survivor.get(ra, ra)]
    vb = vertices[survivor.get(rb, rb)]
    if va.kind == "dynamic" and vb.kind == "dynamic":
        raise CompositionError(f"cannot merge two dynamic vertices ('{va.name}' and '{vb.name}')")
    if va.state_count != vb.state_count:
        raise CompositionError(
            f"cannot merge '{va.name}' ({va.state_count} states) with '{vb.name}' ({vb.state_count} states)"
        )
    # primary keeps priority unless the secondary carries the only dynamic state
    keep = survivor.get(rb, rb) if (vb.kind == "dynamic" and va.kind != "dynamic") else survivor.get(ra, ra)
    uf.parent[rb] = ra
    survivor.pop(rb, None)
    survivor[ra] = keep


def _interior(end_pair, vertices, edge_name):
    t, h = end_pair
    inside = [(pos, v) for pos, v in (("tail", t), ("head", h)) if v and vertices[v - 1].kind != "external"]
    if len(inside) != 1:
        raise CompositionError(f"edge '{edge_name}' is not an external edge with exactly one interior endpoint")
    return inside[0]


def _merge_edges(ia, ib, vertices, edges, em, removed, new_edges, discarded):
    ea, eb = edges[ia], edges[ib]
    for e in (ea, eb):
        if not e.external:
            raise CompositionError(f"edge '{e.name}' is not external and cannot be connected")
    if ea.flow_arity != eb.flow_arity:
        raise CompositionError(
            f"flow arity mismatch: '{ea.name}' has {ea.flow_arity} entries, '{eb.name}' has {eb.flow_arity}"
        )
    if ia in removed or ib in removed or ia in new_edges or ib in new_edges:
        raise CompositionError("edge already consumed by another connection")
    pos_a, va = _interior(em[ia], vertices, ea.name)
    _, vb = _interior(em[ib], vertices, eb.name)
    # keep the primary edge orientation; its outside end becomes the secondary interior
    ends = (va, vb) if pos_a == "tail" else (vb, va)
    new_edges[ia] = (ends, _replace_edge(ea, external=False))
    removed.add(ib)
    if [ex.to_string(q) for q in ea.equations] != [ex.to_string(q) for q in eb.equations]:
        discarded.append({"kept": ea.name, "discarded": eb.name, "equations": [ex.to_string(q) for q in eb.equations]})


def input_common(g: Graph, rules) -> Graph:
    """Replace inputs by expressions of other inputs and parameters.

    Args:
        rules: Pairs ``(old input, replacement expression)`` applied
            simultaneously to every vertex and edge equation.

    Replaced inputs are removed and the rest renumbered contiguously;
    ``metadata["input_renumbering"]`` maps old names to new ones.
    """
    declared = {i.var for i in g.inputs}
    scalars = {p.var for p in g.parameters if not p.is_table}
    subs = {}
    for old, new in rules:
        new = ex.as_expression(new)
        if old not in declared:
            raise CompositionError(f"input '{old}' is not declared in graph '{g.name}'")
        if new == ex.Sym(old):
            continue
        subs[old] = new
    for old, new in subs.items():
        bad = ex.free_symbols(new) - (declared | scalars)
        if bad:
            raise CompositionError(f"replacement for '{old}' uses undeclared symbol(s) {sorted(bad)}")
        gone = ex.free_symbols(new) & set(subs)
        if gone:
            raise CompositionError(f"replacement for '{old}' uses input(s) {sorted(gone)} that are also being replaced")
    if not subs:
        return g
    keep = sorted((i for i in g.inputs if i.var not in subs), key=lambda i: input_number(i.var))
    renumber = {i.var: f"u{k + 1}" for k, i in enumerate(keep)}
    rename = {old: ex.Sym(new) for old, new in renumber.items() if old != new}
    full = {k: ex.substitute(v, rename) for k, v in subs.items()}
    full.update(rename)

    def rewrite(eq):
        return ex.substitute(eq, full)

    vertices = tuple(_replace_vertex(v, equations=tuple(rewrite(e) for e in v.equations)) for v in g.vertices)
    edges = tuple(_replace_edge(e, equations=tuple(rewrite(q) for q in e.equations)) for e in g.edges)
    inputs = tuple(Input(i.description, renumber[i.var], i.units) for i in keep)
    meta = dict(g.metadata)
    old_map = meta.get("input_map")
    if old_map is not None:
        meta["input_map"] = {renumber[k]: v for k, v in old_map.items() if k in renumber}
    history = dict(meta.get("input_renumbering", {}))
    history.update({old: new for old, new in renumber.items()})
    history.update({old: ex.to_string(v) for old, v in subs.items()})
    meta["input_renumbering"] = history
    return g.replace(vertices=vertices, edges=edges, inputs=inputs, metadata=meta)


# ---------------------------------------------------------------------------
# stitching


@dataclass(frozen=True)
class AlgebraicModel:
    """Static component model ``x_out = f(x_in, params)``.

    Args:
        name: Model name.
        equation: Expression over ``x_in`` and the model parameters.
        parameters: Mapping of parameter name to value.
    """

    name: str
    equation: object
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        eq = ex.as_expression(self.equation)
        object.__setattr__(self, "equation", eq)
        object.__setattr__(self, "parameters", {k: float(v) for k, v in dict(self.parameters).items()})
        bad = ex.free_symbols(eq) - {"x_in"} - set(self.parameters)
        if bad:
            raise CompositionError(f"model '{self.name}' uses undeclared symbol(s) {sorted(bad)}")
        if ex.function_names(eq):
            raise CompositionError(f"model '{self.name}' may not call lookup tables")


@dataclass(frozen=True)
class Link:
    """Directed stitching connection.

    ``upstream`` is ``"bc:NAME"``, ``"graph/vertex"`` or an algebraic node
    name; ``downstream`` is an algebraic node name or an external vertex
    ``"graph/vertex"``. With a ``model`` (name of an :class:`AlgebraicModel`)
    the downstream value is the model output, otherwise it equals upstream.
    """

    upstream: str
    downstream: str
    model: Optional[str] = None


class StitchedSystem:
    """Dynamic graphs and algebraic models coupled into one DAE.

    The state is ``x = (x_alg, x_dyn)`` where ``x_alg`` holds the stitched
    algebraic nodes followed by algebraic graph vertices. Each stitched node
    has exactly one defining row, of kind ``prescription`` (``x_k - BC``),
    ``continuity`` (``x_k - x_up``) or ``model`` (``x_k - f(x_up)``).
    External graph vertices fed by a link take the identical state of their
    upstream element.
    """

    def __init__(self, name, graph, nodes, rows, row_kinds, boundary, ext_alias, model_params):
        self.name = name
        self.graph = graph
        self.nodes = list(nodes)
        self.rows = list(rows)
        self.row_kinds = list(row_kinds)
        self.boundary = list(boundary)
        self.ext_alias = dict(ext_alias)
        self.model_params = dict(model_params)
        self._system = None

    def build_system(self):
        from .simulate import _build

        return _build(
            self.graph,
            name=self.name,
            extra_states=self.nodes,
            extra_rows=self.rows,
            extra_params=self.model_params,
            ext_alias=self.ext_alias,
            boundary=self.boundary,
            order="stitched",
        )

    @property
    def system(self):
        if self._system is None:
            self._system = self.build_system()
        return self._system

    @property
    def mass_matrix(self):
        return np.diag(self.system.mass_diag)

    @property
    def n_algebraic(self):
        return int(np.sum(self.system.mass_diag == 0.0))

    @property
    def n_dynamic(self):
        return int(np.sum(self.system.mass_diag != 0.0))

    def algebraic_rows(self):
        """Defining rows as ``(node, kind, "node = f")`` with readable names.

        Boundary conditions appear as ``bc:NAME`` and graph states as
        ``component/vertex`` (with ``[m]`` for multi-state vertices).
        """
        bcs = [n for n, _ in self.boundary]

        def name(m):
            if m.group(1) == "B":
                return f"bc:{bcs[int(m.group(2))]}"
            if m.group(1) == "A":
                return self.nodes[int(m.group(2))]
            v = self.graph.vertices[int(m.group(2))]
            return v.name if v.state_count == 1 else f"{v.name}[{int(m.group(3)) + 1}]"

        out = []
        for k, row in enumerate(self.rows):
            text = re.sub(r"\b([ABV])__(\d+)(?:__(\d+))?\b", name, ex.to_string(row))
            out.append((self.nodes[k], self.row_kinds[k], f"{self.nodes[k]} = {text}"))
        return out

    def residual(self, x, xdot, u=None, t=0.0, schedule=None):
        """``R = S_mass*xdot - F`` at time ``t``."""
        sys = self.system
        u = np.zeros(sys.n_inputs) if u is None else np.asarray(u, dtype=float)
        _, D = sys.signal_matrix(schedule, [t])
        return sys.residual(x, xdot, u, D[0])


def stitch(name, components, links, boundary_conditions=None) -> StitchedSystem:
    """Couple graphs and algebraic models through directed links.

    Args:
        name: System name.
        components: Graphs and :class:`AlgebraicModel` objects.
        links: Ordered :class:`Link` objects (or ``(up, down[, model])`` tuples).
        boundary_conditions: Mapping of BC name to default value; values over
            time come from the simulation schedule.

    Raises:
        CompositionError: unknown references, a node without (or with more
            than one) defining link, a dynamic or algebraic graph vertex used
            as a downstream target, or an algebraic cycle without an anchor.
    """
    boundary = dict(boundary_conditions or {})
    graphs = [c for c in components if isinstance(c, Graph)]
    models = {c.name: c for c in components if isinstance(c, AlgebraicModel)}
    if len(graphs) + len(models) != len(components):
        raise CompositionError("components must be Graph or AlgebraicModel objects")
    links = [l if isinstance(l, Link) else Link(*l) for l in links]
    if graphs:
        vertices, edges, em, params, inputs, parts, input_map = _union(graphs)
        union = Graph(name, tuple(vertices), tuple(edges), tuple(em), tuple(params), tuple(inputs), (), {"kind": "stitched", "input_map": input_map})
    else:
        union = Graph(name, (), (), (), (), (), (), {"kind": "stitched"})
    vindex = {v.name: i for i, v in enumerate(union.vertices)}
    bc_names = list(boundary)

    def classify(ref):
        if ref.startswith("bc:"):
            if ref[3:] not in boundary:
                raise CompositionError(f"unknown boundary condition '{ref[3:]}'")
            return ("bc", ref[3:])
        if "/" in ref:
            if ref not in vindex:
                raise CompositionError(f"unknown graph vertex '{ref}'")
            return ("vertex", vindex[ref])
        return ("node", ref)

    nodes, defining = [], {}
    for l in links:
        kind, ref = classify(l.downstream)
        if kind == "bc":
            raise CompositionError(f"boundary condition '{ref}' cannot be a link target")
        if kind == "node" and ref not in nodes:
            nodes.append(ref)
        if l.downstream in defining:
            raise CompositionError(f"'{l.downstream}' has more than one defining link")
        defining[l.downstream] = l
        if l.model is not None and l.model not in models:
            raise CompositionError(f"link into '{l.downstream}' names unknown model '{l.model}'")
    for l in links:
        kind, ref = classify(l.upstream)
        if kind == "node" and ref not in defining:
            raise CompositionError(f"algebraic node '{ref}' has no defining link")

    # anchoring: follow upstream until a BC or a graph state
    for start in defining:
        seen, cur = set(), start
        while True:
            if cur in seen:
                raise CompositionError(f"algebraic cycle through '{start}' has no dynamic or boundary anchor")
            seen.add(cur)
            kind, ref = classify(defining[cur].upstream)
            if kind == "bc":
                break
            if kind == "vertex":
                if union.vertices[ref].kind != "external" or defining.get(union.vertices[ref].name) is None:
                    break
            cur = defining[cur].upstream

    node_index = {n: k for k, n in enumerate(nodes)}
    model_params = {}

    def placeholders(ref, count):
        kind, r = classify(ref)
        if kind == "bc":
            return [f"B__{bc_names.index(r)}"] * count
        if kind == "node":
            return [f"A__{node_index[r]}"] * count
        return [f"V__{r}__{m}" for m in range(union.vertices[r].state_count)]

    rows = [None] * len(nodes)
    kinds = [None] * len(nodes)
    ext_alias = {}
    for l in links:
        dkind, dref = classify(l.downstream)
        ukind, uref = classify(l.upstream)
        if dkind == "vertex":
            v = union.vertices[dref]
            if v.kind != "external":
                raise CompositionError(f"link target '{l.downstream}' is a {v.kind} vertex; only external vertices can be driven")
            if l.model is not None and v.state_count != 1:
                raise CompositionError("models can only drive single-state vertices")
            up = placeholders(l.upstream, v.state_count)
            if len(up) != v.state_count:
                raise CompositionError(f"state count mismatch between '{l.upstream}' and '{l.downstream}'")
            if l.model is not None:
                # model outputs feeding a graph vertex get their own node state
                raise CompositionError("route model outputs through an algebraic node before a graph vertex")
            ext_alias[dref] = up
            continue
        up = placeholders(l.upstream, 1)
        if len(up) != 1:
            raise CompositionError(f"'{l.upstream}' has several states; link it directly to a vertex with the same count")
        sym = ex.Sym(up[0])
        if l.model is None:
            rows[node_index[dref]] = sym
            kinds[node_index[dref]] = "prescription" if ukind == "bc" else "continuity"
        else:
            m = models[l.model]
            tag = _tag(m.name)
            rules = {"x_in": sym}
            for p, val in m.parameters.items():
                rules[p] = ex.Sym(f"{tag}__{p}")
                model_params[f"{tag}__{p}"] = val
            rows[node_index[dref]] = ex.substitute(m.equation, rules)
            kinds[node_index[dref]] = "model"
    return StitchedSystem(name, union, nodes, rows, kinds, list(boundary.items()), ext_alias, model_params)
