import math

import numpy as np
import pytest

from energygraph import Edge, Graph, Input, Parameter, SignalSchedule, Vertex, assemble, instantiate
from energygraph.analysis import (
    AffineFeedback,
    DesignProblem,
    DesignVariable,
    ProportionalTracking,
    augment_design,
    edge_form,
    evaluate_objective,
    genetic_search,
    linearize,
    optimize,
    passivity_form_check,
    passivity_index,
    passivity_outputs,
    simulate_design,
)
from energygraph.errors import DesignError, SimulationError


def heater():
    """Room heated by input power u1, losing heat to a fixed ambient."""
    return Graph(
        "room",
        [Vertex("Room", "dynamic", "C*x_dot", initial_condition=280.0), Vertex("Ambient", "external", initial_condition=280.0)],
        [Edge("Heater", "u1", external=True), Edge("Loss", "G*(xt-xh)")],
        [(0, 1), (1, 2)],
        [Parameter("Capacity", "C", 100.0, design_variable=True), Parameter("Conductance", "G", 10.0)],
        [Input("Power", "u1")],
    )


# -- linearization ----------------------------------------------------------


def test_linear_model_reproduces_linear_system():
    sys = assemble(heater())
    lm = linearize(sys, [290.0], [50.0])
    assert lm.A.tolist() == [[-0.1]]
    assert lm.B.tolist() == [[0.01]]
    assert lm.Z[0] == pytest.approx(28.0)
    assert lm.derivative([300.0], [0.0]) == pytest.approx(sys.evaluate(np.array([300.0]), [0.0], [280.0]))


def test_linearize_argument_checks():
    sys = assemble(heater())
    with pytest.raises(SimulationError, match="x0 has"):
        linearize(sys, [1.0, 2.0])
    with pytest.raises(SimulationError, match="u0 has"):
        linearize(sys, [1.0], [1.0, 2.0])
    with pytest.raises(SimulationError, match="ODE"):
        linearize(assemble(instantiate("virtual_element")), [1.0, 1.0, 1.0])


def test_finite_difference_fallback_warns():
    g = Graph(
        "exp",
        [Vertex("A", "dynamic", "x_dot", initial_condition=0.5)],
        [Edge("out", "2^xt", external=True)],
        [(1, 0)],
    )
    with pytest.warns(UserWarning, match="finite differences"):
        sys = assemble(g)
    lm = linearize(sys, [0.5])
    assert lm.A[0, 0] == pytest.approx(-math.log(2) * 2**0.5, rel=1e-7)


def test_variable_capacitance_correction():
    # C(x) = x: x*x_dot = -k*x  =>  x_dot = -k, so df/dx = 0 everywhere
    g = Graph(
        "var",
        [Vertex("A", "dynamic", "x*x_dot", initial_condition=2.0)],
        [Edge("out", "k*xt", external=True)],
        [(1, 0)],
        [Parameter("", "k", 3.0)],
    )
    lm = linearize(assemble(g), [2.0])
    assert lm.A[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert lm.Z[0] == pytest.approx(-3.0)


# -- passivity ----------------------------------------------------------------


@pytest.mark.parametrize(
    "text, affine",
    [
        ("cp*u1*xt", True),
        ("u1*xt + u2*xh + xt^2", True),
        ("u1*u2", False),
        ("u1^2", False),
        ("sqrt(u1)", False),
        ("xt/u1", False),
        ("T(u1)", False),
        ("abs(xt)*u1", True),
    ],
)
def test_edge_form_affinity(text, affine):
    assert edge_form(text).affine is affine


def test_edge_form_decomposition():
    f = edge_form("cp*u1*xt + G*xt", "e")
    assert set(f.g) == {"u1"}
    assert str(f) == "e[1]: f = G*xt; g = {u1: cp*xt}"


def test_form_check_on_catalog():
    assert passivity_form_check(instantiate("tank")).ok
    report = passivity_form_check(instantiate("pump"))
    assert not report.ok
    assert "NOT affine" in str(report)


def test_passivity_outputs_and_index():
    g = heater()
    y = passivity_outputs(g, [300.0])
    # heater edge comes from outside (0) into Room: y = -(0 - 300)
    assert y == {"u1": 300.0}
    t = np.linspace(0.0, 2.0, 21)
    trace = passivity_index(np.ones_like(t), 2 * t, t, beta=3.0)
    assert trace.z[-1] == pytest.approx(4.0)
    assert trace.violated
    assert not passivity_index(np.ones_like(t), -t, t, beta=0.0).violated
    with pytest.raises(ValueError):
        passivity_index(np.ones((21, 2)), np.ones(21), t, 1.0)


# -- design ---------------------------------------------------------------------


def test_design_variable_parameter_binding():
    g = heater()
    prob = DesignProblem(g, theta=[DesignVariable("C", 50.0, 200.0)], t_final=1.0, dt=0.1)
    g2 = augment_design(g, prob, [150.0])
    assert g2.parameter("C").value == 150.0
    assert g2.parameter("G").value == 10.0


def test_edge_removal_remaps_ports():
    g = instantiate("heat_load")
    prob = DesignProblem(g, theta=[DesignVariable("s", values=(0, 1))], edge_scaling={"Convection": "s"})
    g2 = augment_design(g, prob, [0.0])
    assert [e.name for e in g2.edges] == ["Advection In", "Advection Out", "Heat Load"]
    assert [p.element_index for p in g2.ports] == [1, 2, 3]
    assert g2.metadata["removed_edges"] == ["Convection"]


def test_design_errors():
    g = heater()
    with pytest.raises(DesignError, match="unknown vertex"):
        DesignProblem(g, vertex_scaling={"Attic": "1"})
    with pytest.raises(DesignError, match="unknown symbol"):
        DesignProblem(g, theta=[DesignVariable("a")], vertex_scaling={"Room": "b"})
    with pytest.raises(DesignError, match="needs 1 parameters"):
        DesignProblem(g, control=ProportionalTracking("Room", "u1", 295.0))
    with pytest.raises(DesignError, match="unique"):
        DesignProblem(g, theta=[DesignVariable("a"), DesignVariable("a")])
    prob = DesignProblem(g, theta=[DesignVariable("a", -1.0, 1.0)], vertex_scaling={"Room": "a"})
    with pytest.raises(DesignError, match="negative capacitance"):
        augment_design(g, prob, [-0.5])
    with pytest.raises(DesignError, match="outside bounds"):
        augment_design(g, prob, [2.0])
    with pytest.raises(DesignError, match="lower bound"):
        DesignVariable("z", 1.0, 0.0)


def test_proportional_tracking_controls_room():
    prob = DesignProblem(
        heater(),
        control=ProportionalTracking("Room", "u1", reference=295.0, bias=150.0, u_min=0.0, u_max=500.0),
        phi_bounds=[(0.0, 1000.0)],
        objective="(x1-295)^2",
        t_final=50.0,
        dt=0.1,
    )
    traj, _, _ = simulate_design(prob, [], [200.0])
    # proportional control settles with offset (bias - G*15)/(G + K)
    assert traj.states[-1, 0] == pytest.approx(295.0 + (150.0 - 150.0) / 210.0, abs=1e-3)
    assert np.all(traj.inputs[:, 0] <= 500.0)
    weak = evaluate_objective(prob, [], [1.0])
    strong = evaluate_objective(prob, [], [200.0])
    assert strong < weak


def test_affine_feedback_law():
    law = AffineFeedback(["u1"], [100.0], [290.0], u_min=0.0)
    sys = assemble(heater())
    f = law.bind(sys, [5.0])
    assert f(0.0, np.array([300.0]), np.zeros(1)).tolist() == [50.0]
    assert f(0.0, np.array([400.0]), np.zeros(1)).tolist() == [0.0]
    assert law.n_params == 1


def test_infeasible_design_is_infinite(caplog):
    g = instantiate("pump")
    prob = DesignProblem(g, schedule=SignalSchedule.constant({"u1": 1.0}), objective="x1", t_final=0.1, dt=0.01)
    assert evaluate_objective(prob, []) == math.inf
    assert "infeasible" in caplog.text


# -- genetic search -----------------------------------------------------------


def test_budget_and_elitism():
    J = lambda g: float(np.sum((g - 0.25) ** 2))
    best, Jbest, hist = genetic_search(J, [(0, 1), (0, 1)], seed=1, budget=100)
    assert len(hist) == 100
    bests = [h.best_J for h in hist]
    assert all(b1 <= b0 for b0, b1 in zip(bests, bests[1:]))
    assert Jbest == min(h.J for h in hist) == J(best)
    with pytest.raises(DesignError, match="population"):
        genetic_search(J, [(0, 1)], budget=5)


def test_discrete_genes_stay_on_their_values():
    J = lambda g: (g[0] - 2.0) ** 2 + (g[1] - 0.7) ** 2
    best, _, hist = genetic_search(J, [(0, 3), (0, 1)], seed=4, budget=200, discrete={0: [0, 1, 3]})
    assert {h.genes[0] for h in hist} <= {0.0, 1.0, 3.0}
    assert best[0] in (1.0, 3.0)


def test_seeds_differ_but_repeat():
    J = lambda g: float(g[0] ** 2)
    a = optimize(J, bounds=[(-1, 1)], seed=1, budget=32)
    b = optimize(J, bounds=[(-1, 1)], seed=2, budget=32)
    c = optimize(J, bounds=[(-1, 1)], seed=1, budget=32)
    assert a.theta.tolist() == c.theta.tolist()
    assert a.theta.tolist() != b.theta.tolist()
    with pytest.raises(DesignError, match="bounds"):
        optimize(J)


def test_optimize_design_problem():
    g = heater()
    prob = DesignProblem(
        g,
        theta=[DesignVariable("C", 20.0, 200.0)],
        schedule=SignalSchedule.constant({"u1": 100.0}),
        objective="(x1-285)^2",
        t_final=5.0,
        dt=0.1,
    )
    res = optimize(prob, seed=0, budget=64)
    assert res.theta.shape == (1,) and res.phi.shape == (0,)
    assert res.J == min(h.J for h in res.history)
