"""Fixed-width text reports of graph data."""

from __future__ import annotations

from .. import expr as ex
from ..graph import Graph

REPORT_KINDS = ("graph", "parameter", "input", "port", "initcond", "full")


def _num(v):
    return repr(float(v))


def table(title, header, rows):
    """Render a titled table; columns are as wide as their longest cell."""
    rows = [[str(c) for c in r] for r in rows] or [["none"] + [""] * (len(header) - 1)]
    widths = [max(len(h), *(len(r[k]) for r in rows)) for k, h in enumerate(header)]

    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [title, line(header), "  ".join("-" * w for w in widths)]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"


def _vertex_label(g, idx):
    return "(outside)" if idx == 0 else f"{idx}:{g.vertices[idx - 1].name}"


def graph_report(g: Graph) -> str:
    vrows = [
        (
            i,
            v.name,
            v.kind,
            v.state_count,
            ", ".join(v.units) or "-",
            "; ".join(ex.to_string(e) for e in v.equations) or "-",
        )
        for i, v in enumerate(g.vertices, start=1)
    ]
    erows = [
        (
            j,
            e.name,
            _vertex_label(g, t),
            _vertex_label(g, h),
            "yes" if e.external else "no",
            "; ".join(ex.to_string(q) for q in e.equations),
        )
        for j, (e, (t, h)) in enumerate(zip(g.edges, g.edge_matrix), start=1)
    ]
    return (
        table(f"Vertices of {g.name}", ["Index", "Name", "Kind", "States", "Units", "Equation"], vrows)
        + "\n"
        + table(f"Edges of {g.name}", ["Index", "Name", "Tail", "Head", "External", "Equation"], erows)
    )


def parameter_report(g: Graph) -> str:
    rows = []
    for k, p in enumerate(g.parameters, start=1):
        if p.is_table:
            value = "table " + "x".join(str(len(a)) for a in p.value.axes)
        else:
            value = _num(p.value)
        rows.append((k, p.var, value, p.units or "-", "yes" if p.design_variable else "no", p.description))
    return table(f"Parameters of {g.name}", ["Index", "Variable", "Value", "Units", "Design", "Description"], rows)


def input_report(g: Graph) -> str:
    rows = [(k, i.var, i.units or "-", i.description) for k, i in enumerate(g.inputs, start=1)]
    return table(f"Inputs of {g.name}", ["Index", "Variable", "Units", "Description"], rows)


def port_report(g: Graph) -> str:
    rows = []
    for k, p in enumerate(g.ports, start=1):
        if p.connection_type == "VertexConnection":
            element = f"vertex {p.element_index}:{g.vertices[p.element_index - 1].name}"
        else:
            element = f"edge {p.element_index}:{g.edges[p.element_index - 1].name}"
        rows.append((k, p.connection_type, element, p.domain or "-"))
    return table(f"Ports of {g.name}", ["Index", "Type", "Element", "Domain"], rows)


def initcond_report(g: Graph) -> str:
    rows = []
    for i, v in enumerate(g.vertices, start=1):
        ic = "unassigned" if v.initial_condition is None else ", ".join(_num(x) for x in v.initial_condition)
        rows.append((i, v.name, v.kind, ic))
    return table(f"Initial conditions of {g.name}", ["Index", "Vertex", "Kind", "Initial Condition"], rows)


_RENDER = {
    "graph": graph_report,
    "parameter": parameter_report,
    "input": input_report,
    "port": port_report,
    "initcond": initcond_report,
}


def render_report(g: Graph, kind="full") -> str:
    """Text report of one kind; ``full`` concatenates all kinds in order."""
    if kind == "full":
        return "\n".join(_RENDER[k](g) for k in REPORT_KINDS[:-1])
    if kind not in _RENDER:
        raise ValueError(f"unknown report kind '{kind}' (choose from {', '.join(REPORT_KINDS)})")
    return _RENDER[kind](g)
