"""Generate the catalog reference document from the component builders."""

from __future__ import annotations

import inspect

from ..expr import to_string
from .components import BUILDERS


def _fmt_value(p):
    if p.is_table:
        dims = " x ".join(str(len(a)) for a in p.value.axes)
        return f"table ({dims})"
    return f"{p.value:g}"


def _endpoint(g, k):
    return "outside" if k == 0 else g.vertices[k - 1].name


def catalog_markdown() -> str:
    """Markdown listing vertices, edges, parameters, inputs, ports and defaults per kind."""
    out = ["# Component catalog", ""]
    out.append("Generated by `energygraph.library.catalog_markdown()`. Default values are")
    out.append("illustrative constants for well-conditioned simulation.")
    out.append("")
    for kind, builder in BUILDERS.items():
        g = builder(kind)
        doc = inspect.getdoc(builder) or ""
        out += [f"## {kind}", "", doc.split("\n\n")[0], ""]
        out += ["| # | Vertex | Kind | States | Equation rows | Default |", "|---|---|---|---|---|---|"]
        for i, v in enumerate(g.vertices, 1):
            eqs = "; ".join(f"`{to_string(e)}`" for e in v.equations) or "-"
            ic = "-" if v.initial_condition is None else ", ".join(f"{x:g}" for x in v.initial_condition)
            out.append(f"| {i} | {v.name} | {v.kind} | {v.state_count} | {eqs} | {ic} |")
        out += ["", "| # | Edge | Tail -> Head | External | Flow entries |", "|---|---|---|---|---|"]
        for j, (e, (t, h)) in enumerate(zip(g.edges, g.edge_matrix), 1):
            eqs = "; ".join(f"`{to_string(x)}`" for x in e.equations)
            out.append(
                f"| {j} | {e.name} | {_endpoint(g, t)} -> {_endpoint(g, h)} | {'yes' if e.external else 'no'} | {eqs} |"
            )
        out += ["", "| Parameter | Description | Default | Units |", "|---|---|---|---|"]
        for p in g.parameters:
            out.append(f"| `{p.var}` | {p.description} | {_fmt_value(p)} | {p.units or '-'} |")
        if g.inputs:
            out += ["", "| Input | Description | Units |", "|---|---|---|"]
            for u in g.inputs:
                out.append(f"| `{u.var}` | {u.description} | {u.units or '-'} |")
        out += ["", "| Port | Connection | Element | Domain |", "|---|---|---|---|"]
        for k, p in enumerate(g.ports, 1):
            target = g.edges if p.connection_type == "EdgeConnection" else g.vertices
            out.append(
                f"| {k} | {p.connection_type} | {p.element_index} ({target[p.element_index - 1].name}) | {p.domain or '-'} |"
            )
        out.append("")
    return "\n".join(out)
