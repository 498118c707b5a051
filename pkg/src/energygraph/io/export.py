"""DOT drawings and human-readable equation export."""

from __future__ import annotations

from .. import expr as ex
from ..graph import Graph, capacitance_entries, endpoint_symbols, state_symbols, structure_matrix

_STYLE = {
    "dynamic": 'shape=circle, style=solid',
    "algebraic": 'shape=doublecircle, style=solid',
    "external": 'shape=circle, style=dashed',
}


def _quote(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(g: Graph) -> str:
    """Graph drawing in DOT.

    Dynamic vertices are solid circles, algebraic vertices double circles and
    external vertices dashed. Edges to or from outside the graph end at
    unlabeled point nodes.
    """
    lines = [f"digraph {_quote(g.name)} {{", "  rankdir=LR;", '  node [shape=point, label=""];']
    for i, v in enumerate(g.vertices, start=1):
        lines.append(f"  v{i} [{_STYLE[v.kind]}, label={_quote(v.name)}];")
    for j, (e, (t, h)) in enumerate(zip(g.edges, g.edge_matrix), start=1):
        tail = f"v{t}" if t else f"outside{j}"
        head = f"v{h}" if h else f"outside{j}"
        lines.append(f"  {tail} -> {head} [label={_quote(e.name)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _state_rules(g):
    """Global symbols: x<k> for dynamic/algebraic states, d<k> for external vertices."""
    rules = {}
    pos = dpos = 0
    for i, v in enumerate(g.vertices):
        names = []
        for k in range(v.state_count):
            if v.kind == "external":
                dpos += 1
                names.append(f"d{dpos}")
            else:
                pos += 1
                names.append(f"x{pos}")
        rules[i] = names
    return rules


def export_equations(g: Graph, substitute_params=False) -> str:
    """One line per dynamic state: ``C * x<i>_dot = <signed flow sum>``.

    Algebraic rows are written as ``0 = ...``. States of dynamic and
    algebraic vertices are ``x<k>`` in stacked order; external vertex values
    are ``d<k>``. With ``substitute_params`` scalar parameters that are not
    design variables become literals.
    """
    rules = _state_rules(g)
    literal = {}
    if substitute_params:
        literal = {p.var: ex.Const(p.value) for p in g.parameters if not p.is_table and not p.design_variable}
    flows = []
    for e, (t, h) in zip(g.edges, g.edge_matrix):
        sub = dict(literal)
        for prefix, end in (("xt", t), ("xh", h)):
            if end:
                names = rules[end - 1]
                for sym, k in endpoint_symbols(prefix, len(names)).items():
                    sub[sym] = ex.Sym(names[k])
        flows.extend(ex.substitute(q, sub) for q in e.equations)
    MS = structure_matrix(g)
    lines = []
    row = 0
    for i, v in enumerate(g.vertices):
        if v.kind == "external":
            continue
        local, dots = state_symbols(v.state_count)
        gl = rules[i]
        sub = dict(literal)
        sub.update({n: ex.Sym(gl[k]) for k, n in enumerate(local)})
        C, gg = capacitance_entries(v)
        for r in range(v.state_count):
            rhs = ex.ZERO
            for j, coef in enumerate(-MS[row]):
                if coef > 0:
                    rhs = ex.add(rhs, flows[j])
                elif coef < 0:
                    rhs = ex.sub(rhs, flows[j])
            rhs = ex.sub(rhs, ex.substitute(gg[r], sub))
            if v.kind == "dynamic":
                lhs = ex.ZERO
                for k in range(v.state_count):
                    term = ex.mul(ex.substitute(C[r][k], sub), ex.Sym(f"{gl[k]}_dot"))
                    lhs = ex.add(lhs, term)
                lhs_text = ex.to_string(lhs)
            else:
                lhs_text = "0"
            lines.append(f"{lhs_text} = {ex.to_string(rhs)}")
            row += 1
    return "\n".join(lines) + ("\n" if lines else "")
