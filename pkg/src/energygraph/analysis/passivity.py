"""Structural passivity checks and the passivity-index accumulator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import expr as ex
from ..errors import ExpressionError
from ..graph import INPUT_RE, Graph, endpoint_symbols


@dataclass
class EdgeForm:
    """Decomposition of one flow entry as ``f + sum_k g_k*u_k``."""

    edge: str
    entry: int
    affine: bool
    f: ex.Expression
    g: dict  # input name -> coefficient expression

    def __str__(self):
        if not self.affine:
            return f"{self.edge}[{self.entry + 1}]: not affine in its inputs"
        terms = ", ".join(f"{k}: {ex.to_string(v)}" for k, v in sorted(self.g.items())) or "none"
        return f"{self.edge}[{self.entry + 1}]: f = {ex.to_string(self.f)}; g = {{{terms}}}"


@dataclass
class PassivityReport:
    edges: list

    @property
    def ok(self):
        return all(e.affine for e in self.edges)

    def __str__(self):
        verdict = "affine in inputs" if self.ok else "NOT affine in inputs"
        return "\n".join([f"verdict: {verdict}"] + [str(e) for e in self.edges])


def _wraps_input(e, inputs):
    """True if an input appears inside sqrt/abs/sign or a table call."""
    for node in ex.walk(e):
        if isinstance(node, ex.Unary) and node.op != "neg" and ex.free_symbols(node.arg) & inputs:
            return True
        if isinstance(node, ex.Call) and any(ex.free_symbols(a) & inputs for a in node.args):
            return True
        if isinstance(node, ex.Binary) and node.op == "/" and ex.free_symbols(node.right) & inputs:
            return True
        if isinstance(node, ex.Binary) and node.op == "^" and ex.free_symbols(node) & inputs:
            try:
                pw = float(ex.evaluate(node.right, {}))
            except ExpressionError:
                return True
            if pw not in (0.0, 1.0) and ex.free_symbols(node.left) & inputs:
                return True
    return False


def edge_form(e, name="", entry=0):
    e = ex.as_expression(e)
    inputs = {s for s in ex.free_symbols(e) if INPUT_RE.match(s)}
    zero = {u: ex.ZERO for u in inputs}
    f = ex.simplify(ex.substitute(e, zero))
    g = {u: ex.simplify(ex.substitute(ex.differentiate(e, u), zero)) for u in inputs}
    affine = not _wraps_input(e, inputs)
    if affine:
        for a in inputs:
            da = ex.differentiate(e, a)
            if any(not ex.is_zero(ex.differentiate(da, b)) for b in inputs):
                affine = False
                break
    return EdgeForm(name, entry, affine, f, {k: v for k, v in g.items() if not ex.is_zero(v)})


def passivity_form_check(g: Graph) -> PassivityReport:
    """Check that every flow entry is affine in the inputs: ``P = f(x) + g(x)*u``."""
    return PassivityReport([edge_form(q, e.name, k) for e in g.edges for k, q in enumerate(e.equations)])


def passivity_outputs(g: Graph, x, d=None, report=None):
    """Companion outputs ``y_k = -sum_j g_jk(x) * (x_tail - x_head)`` for the whole graph.

    Args:
        x: Stacked dynamic+algebraic state (graph order).
        d: Values of the external vertices (first state each), default their
            initial conditions. Outside endpoints count as 0.

    Returns:
        Dict of input name -> output value.
    """
    report = report or passivity_form_check(g)
    offsets, _ = g.state_offsets()
    ext = [i for i, v in enumerate(g.vertices) if v.kind == "external"]
    dvals = {}
    for k, i in enumerate(ext):
        ic = g.vertices[i].initial_condition
        dvals[i] = list(ic) if ic is not None else [0.0] * g.vertices[i].state_count
        if d is not None:
            dvals[i][0] = float(d[k])

    def states_of(v):
        if v == 0:
            return None
        i = v - 1
        if i in offsets:
            return list(x[offsets[i] : offsets[i] + g.vertices[i].state_count])
        return dvals[i]

    params = {p.var: p.value for p in g.parameters if not p.is_table}
    tables = {p.var: p.value for p in g.parameters if p.is_table}
    y = {i.var: 0.0 for i in g.inputs}
    forms = iter(report.edges)
    for e, (t, h) in zip(g.edges, g.edge_matrix):
        st, sh = states_of(t), states_of(h)
        bind = dict(params)
        for prefix, s in (("xt", st), ("xh", sh)):
            if s is not None:
                for sym, k in endpoint_symbols(prefix, len(s)).items():
                    bind[sym] = s[k]
        diff = (st[0] if st else 0.0) - (sh[0] if sh else 0.0)
        for _ in e.equations:
            form = next(forms)
            for u, coef in form.g.items():
                y[u] -= ex.evaluate(coef, bind, tables) * diff
    return y


@dataclass
class PassivityTrace:
    times: np.ndarray
    z: np.ndarray
    beta: float

    @property
    def violated(self):
        return bool(np.max(self.z) > self.beta)


def passivity_index(u_series, y_series, times, beta) -> PassivityTrace:
    """Accumulate ``z(t) = int_0^t u^T y`` by the trapezoid rule.

    Args:
        u_series, y_series: (N,) or (N, m) arrays on the grid ``times``.
        beta: Threshold; the trace is violated when ``max z > beta``.
    """
    t = np.asarray(times, dtype=float)
    u = np.asarray(u_series, dtype=float).reshape(t.size, -1)
    y = np.asarray(y_series, dtype=float).reshape(t.size, -1)
    if u.shape != y.shape:
        raise ValueError(f"u has shape {u.shape} but y has shape {y.shape}")
    w = np.sum(u * y, axis=1)
    z = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(t))])
    return PassivityTrace(t, z, float(beta))
