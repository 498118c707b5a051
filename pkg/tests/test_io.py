import json
import os

import numpy as np
import pytest

from energygraph import Edge, Graph, Input, Parameter, SignalSchedule, Vertex, assemble, instantiate, simulate
from energygraph.analysis import linearize
from energygraph.cli import main
from energygraph.errors import ModelFileError
from energygraph.io import (
    REPORT_KINDS,
    ProblemDefinition,
    SystemDefinition,
    dumps,
    export_dot,
    export_equations,
    graph_to_dict,
    load,
    load_model,
    loads,
    read_linear_model,
    read_signals,
    render_report,
    save,
    write_history,
    write_linear_model,
    write_trajectory,
)
from energygraph.library import KINDS

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")
REGEN = os.environ.get("REGEN_GOLDEN") == "1"


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def heater():
    return Graph(
        "room",
        [Vertex("Room", "dynamic", "C*x_dot", initial_condition=280.0), Vertex("Ambient", "external", initial_condition=280.0)],
        [Edge("Heater", "u1", external=True), Edge("Loss", "G*(xt-xh)")],
        [(0, 1), (1, 2)],
        [Parameter("Capacity", "C", 100.0, design_variable=True), Parameter("Conductance", "G", 10.0)],
        [Input("Power", "u1")],
    )


# -- golden reports ---------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_full_report_matches_golden(kind, tmp_path, capsys):
    text = render_report(instantiate(kind), "full")
    path = os.path.join(GOLDEN, f"{kind}.txt")
    if REGEN:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    with open(path, encoding="utf-8", newline="") as fh:
        expected = fh.read()
    assert text == expected
    # the CLI prints the same bytes
    model = tmp_path / f"{kind}.json"
    save(instantiate(kind), model)
    assert main(["report", str(model)]) == 0
    assert capsys.readouterr().out == expected


@pytest.mark.parametrize("kind", REPORT_KINDS)
def test_every_report_kind_renders(kind):
    text = render_report(instantiate("heat_load"), kind)
    assert text.endswith("\n") and len(text.splitlines()) > 1


def test_report_lists_every_element():
    g = instantiate("heat_load")
    text = render_report(g, "full")
    for v in g.vertices:
        assert v.name in text
    for e in g.edges:
        assert e.name in text


def test_unknown_report_kind():
    with pytest.raises(ValueError):
        render_report(instantiate("tank"), "summary")


# -- drawings and equations -------------------------------------------------


def test_dot_counts_and_styles():
    g = instantiate("heat_load")
    dot = export_dot(g)
    assert dot.startswith('digraph "heat_load" {')
    assert dot.count("->") == len(g.edges)
    assert dot.count("style=dashed") == sum(v.kind == "external" for v in g.vertices)
    assert "outside2" in dot and "outside4" in dot
    alg = export_dot(instantiate("virtual_element"))
    assert "doublecircle" in alg


def test_dot_quotes_names():
    g = heater().replace(name='say "hi"')
    assert 'digraph "say \\"hi\\"" {' in export_dot(g)


def test_equation_export_tank():
    g = instantiate("tank")
    assert export_equations(g, substitute_params=True).splitlines() == [
        "3300*x2*x1_dot+3300*x1*x2_dot = 3300*u1*d1-3300*u2*x1",
        "x2_dot = u1-u2",
    ]
    assert export_equations(g).splitlines()[0].startswith("cp_f*x2*x1_dot")


def test_equation_export_keeps_design_parameters():
    text = export_equations(heater(), substitute_params=True)
    assert text == "C*x1_dot = u1-10*(x1-d1)\n"


def test_equation_export_algebraic_rows():
    lines = export_equations(instantiate("virtual_element")).splitlines()
    assert any(line.startswith("0 = ") for line in lines)


# -- model files ------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_component_round_trip(kind):
    g = instantiate(kind)
    assert loads(dumps(g)) == g


def test_table_parameter_round_trip(tmp_path):
    g = instantiate("pump")
    assert any(p.is_table for p in g.parameters)
    path = tmp_path / "pump.json"
    save(g, path)
    assert load(path) == g


def _component_doc():
    return graph_to_dict(heater())


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.update(schema_version=2), "schema_version"),
        (lambda d: d.update(type="widget"), r"\$\.type"),
        (lambda d: d.pop("edges"), "'edges' is a required property"),
        (lambda d: d["vertices"][0].update(kind="static"), r"\$\.vertices\[0\]\.kind"),
        (lambda d: d["edge_matrix"][1].append(3), r"\$\.edge_matrix\[1\]"),
        (lambda d: d["edge_matrix"].__setitem__(1, [1, 7]), "references vertex 7"),
        (lambda d: d["edges"].pop(), "rows for 1 edges"),
        (lambda d: d["edges"][1].update(equations=["G*(xt-"]), "Loss"),
        (lambda d: d["parameters"][0].update(value="big"), r"\$\.parameters\[0\]\.value"),
        (lambda d: d.update(colour="red"), "colour"),
        (lambda d: d["edges"][0].update(equations=["u9"]), "invalid"),
    ],
)
def test_component_schema_errors(mutate, message):
    doc = _component_doc()
    mutate(doc)
    with pytest.raises(ModelFileError, match=message):
        loads(json.dumps(doc))


def test_invalid_json_reports_position():
    with pytest.raises(ModelFileError, match="line 2"):
        loads('{"a": 1,\n oops}')
    with pytest.raises(ModelFileError, match="top level"):
        loads("[1, 2]")


def test_missing_file():
    with pytest.raises(ModelFileError, match="cannot read"):
        load("/nonexistent/model.json")


def test_system_file_with_connections(tmp_path):
    doc = {
        "schema_version": 1,
        "type": "system",
        "name": "loop",
        "components": {"mainTank": {"kind": "tank"}, "heatLoad": {"kind": "heat_load"}},
        "connections": [{"primary": ["mainTank", 2], "secondary": ["heatLoad", 1]}],
        "initial_conditions": {"heatLoad/Fluid": [300.0]},
    }
    path = write_json(tmp_path / "sys.json", doc)
    sysdef = load(path)
    assert isinstance(sysdef, SystemDefinition) and not sysdef.is_stitched
    g = load_model(path)
    assert isinstance(g, Graph) and g.name == "loop"
    assert next(v for v in g.vertices if v.name == "heatLoad/Fluid").initial_condition == (300.0,)
    # saving a definition keeps the document
    assert json.loads(dumps(sysdef)) == doc


def test_system_file_components_from_files(tmp_path):
    save(instantiate("tank"), tmp_path / "tank.json")
    doc = {"schema_version": 1, "type": "system", "name": "solo", "components": {"T": {"file": "tank.json"}}}
    g = load_model(write_json(tmp_path / "sys.json", doc))
    assert g.name == "solo"
    assert len(g.vertices) == 2


def test_system_file_errors(tmp_path):
    base = {"schema_version": 1, "type": "system", "name": "s"}
    bad = dict(base, components={"a": {"kind": "tank"}, "b": {"kind": "tank"}})
    with pytest.raises(ModelFileError, match="no connections"):
        load_model(write_json(tmp_path / "a.json", bad))
    bad = dict(base, components={"a": {"kind": "tank"}}, connections=[{"primary": ["a", 2], "secondary": ["z", 1]}])
    with pytest.raises(ModelFileError, match="unknown component 'z'"):
        load_model(write_json(tmp_path / "b.json", bad))
    bad = dict(base, components={"a": {"kind": "teapot"}})
    with pytest.raises(ModelFileError, match=r"\$\.components\.a"):
        load_model(write_json(tmp_path / "c.json", bad))
    bad = dict(base, components={"a": {"kind": "tank"}}, initial_conditions={"Tank": [1.0]})
    with pytest.raises(ModelFileError, match="needs 2"):
        load_model(write_json(tmp_path / "d.json", bad))
    bad = dict(base, components={"a": {"kind": "tank"}}, initial_conditions={"Boiler": [1.0]})
    with pytest.raises(ModelFileError, match="Boiler"):
        load_model(write_json(tmp_path / "e.json", bad))


def test_stitched_system_file(tmp_path):
    doc = {
        "schema_version": 1,
        "type": "system",
        "name": "chain",
        "components": {"load": {"kind": "heat_load"}},
        "models": [{"name": "pump", "equation": "x_in + dx", "parameters": {"dx": 2.0}}],
        "links": [
            {"upstream": "bc:T_in", "downstream": "v1"},
            {"upstream": "v1", "downstream": "v2", "model": "pump"},
            {"upstream": "v2", "downstream": "load/Inlet Fluid"},
        ],
        "boundary_conditions": {"T_in": 300.0},
    }
    path = write_json(tmp_path / "st.json", doc)
    assert load(path).is_stitched
    model = load_model(path)
    assert not isinstance(model, Graph)
    assert [r[2] for r in model.algebraic_rows()] == ["v1 = bc:T_in", "v2 = v1+pump__dx"]
    # links and connections cannot be mixed
    doc["connections"] = [{"primary": ["load", 2], "secondary": ["load", 1]}]
    with pytest.raises(ModelFileError, match="not both"):
        load_model(write_json(tmp_path / "mixed.json", doc))


def test_problem_file_builds(tmp_path):
    save(heater(), tmp_path / "room.json")
    doc = {
        "schema_version": 1,
        "type": "problem",
        "model": {"file": "room.json"},
        "theta": [{"name": "C", "lower": 20.0, "upper": 200.0}],
        "control": {"type": "proportional", "state": "Room", "input": "u1", "reference": 285.0, "bias": 50.0},
        "phi_bounds": [[0.0, 100.0]],
        "objective": "(x1-285)^2",
        "t_final": 1.0,
        "dt": 0.1,
    }
    obj = load(write_json(tmp_path / "p.json", doc))
    assert isinstance(obj, ProblemDefinition)
    prob = obj.build()
    assert [v.name for v in prob.theta] == ["C"]
    with pytest.raises(ModelFileError, match="problem file"):
        load_model(tmp_path / "p.json")
    assert prob.phi_bounds == ((0.0, 100.0),)
    doc["control"] = {"type": "affine", "inputs": ["u1"]}
    with pytest.raises(ModelFileError, match="missing field"):
        load(write_json(tmp_path / "q.json", doc)).build()
    doc["t_final"] = 0
    with pytest.raises(ModelFileError, match=r"\$\.t_final"):
        load(write_json(tmp_path / "r.json", doc))


# -- CSV --------------------------------------------------------------------


def test_trajectory_csv(tmp_path):
    sys_ = assemble(instantiate("tank"))
    traj = simulate(sys_, t_span=(0.0, 1.0), dt=0.25)
    path = tmp_path / "t.csv"
    write_trajectory(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[0] == "time"
    assert len(lines) == 1 + traj.times.size
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    # 17 significant digits survive the text round trip exactly
    assert np.array_equal(data[:, 1 : 1 + traj.states.shape[1]], traj.states)


def test_linear_model_csv_round_trip(tmp_path):
    sys_ = assemble(heater())
    lm = linearize(sys_, np.array([290.0]), [5.0], [280.0])
    path = tmp_path / "lin.csv"
    write_linear_model(lm, path)
    back = read_linear_model(path)
    assert np.array_equal(back["A"], lm.A)
    assert np.array_equal(back["B"], lm.B)
    assert np.array_equal(back["Z"], lm.Z)


def test_history_csv(tmp_path):
    from energygraph.analysis import optimize

    res = optimize(lambda g: float((g[0] - 0.3) ** 2), seed=1, budget=32, bounds=[(0.0, 1.0)])
    path = tmp_path / "h.csv"
    write_history(res, path, ["a"])
    lines = path.read_text().splitlines()
    assert lines[0] == "evaluation,generation,J,best_J,a"
    assert len(lines) == 33


def test_read_signals(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("time,u1,d1\n0,1,280\n10,3,290\n")
    sched = read_signals(path)
    assert isinstance(sched, SignalSchedule)
    assert sched.sample("u1", 5.0) == pytest.approx(2.0)
    assert sched.sample("d1", 5.0) == pytest.approx(285.0)


@pytest.mark.parametrize(
    "text, message",
    [
        ("time,u1\n", "at least one row"),
        ("time,u1\n0,abc\n", "abc"),
        ("time,u1\n0,1,2\n", "columns"),
        ("time,u1\n1,0\n0,1\n", "nondecreasing"),
    ],
)
def test_read_signals_errors(tmp_path, text, message):
    path = tmp_path / "s.csv"
    path.write_text(text)
    with pytest.raises(ModelFileError, match=message):
        read_signals(path)


# -- command line -----------------------------------------------------------


@pytest.fixture
def tank_file(tmp_path):
    path = tmp_path / "tank.json"
    save(instantiate("tank"), path)
    return str(path)


def test_cli_validate(tank_file, tmp_path, capsys):
    assert main(["validate", tank_file]) == 0
    assert "tank" in capsys.readouterr().out
    doc = graph_to_dict(instantiate("tank"))
    doc["vertices"][0]["initial_condition"] = None
    loose = write_json(tmp_path / "loose.json", doc)
    assert main(["validate", loose]) == 0
    assert main(["validate", loose, "--strict"]) == 2


def test_cli_usage_errors(capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["simulate", "x.json"]) == 1
    assert main(["simulate", "x.json", "--t-final", "1", "--dt", "a"]) == 1
    assert main(["report", "x.json", "--kind", "summary"]) == 1
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_cli_failures_exit_2(tank_file, tmp_path, capsys):
    assert main(["report", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["draw", str(bad)]) == 2
    # the tank empties and its temperature equation becomes singular
    assert main(["simulate", tank_file, "--t-final", "1e4", "--dt", "1", "--signals", str(_drain(tmp_path))]) == 2
    err = capsys.readouterr().err
    assert err.count("error:") == 3


def _drain(tmp_path):
    path = tmp_path / "drain.csv"
    path.write_text("time,u1,u2,d1\n0,0,5,300\n")
    return path


def test_cli_report_and_draw_outputs(tank_file, tmp_path):
    out = tmp_path / "r.txt"
    fig = tmp_path / "g.png"
    assert main(["report", tank_file, "--kind", "parameter", "-o", str(out), "--figure", str(fig)]) == 0
    assert out.read_text() == render_report(instantiate("tank"), "parameter")
    assert fig.read_bytes()[:4] == b"\x89PNG"
    dot = tmp_path / "g.dot"
    svg = tmp_path / "g.svg"
    assert main(["draw", tank_file, "-o", str(dot), "--figure", str(svg)]) == 0
    assert dot.read_text() == export_dot(instantiate("tank"))
    assert b"<svg" in svg.read_bytes()


def test_cli_simulate(tank_file, tmp_path, capsys):
    assert main(["simulate", tank_file, "--t-final", "1", "--dt", "0.1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[0].startswith("time,")
    assert float(lines[1].split(",")[0]) == 1.0
    out = tmp_path / "t.csv"
    fig = tmp_path / "t.png"
    sig = tmp_path / "s.csv"
    sig.write_text("time,u1,u2,d1\n0,2,1,320\n")
    args = ["simulate", tank_file, "--t-final", "2", "--dt", "0.5", "--signals", str(sig), "--x0", "300,1000", "-o", str(out), "--figure", str(fig)]
    assert main(args) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape[0] == 5
    assert data[0, 1:3].tolist() == [300.0, 1000.0]
    assert data[-1, 2] == pytest.approx(1002.0)
    assert fig.stat().st_size > 0


def test_cli_linearize(tmp_path, capsys):
    room = tmp_path / "room.json"
    save(heater(), room)
    out = tmp_path / "lin.csv"
    assert main(["linearize", str(room), "--u0", "5", "--d0", "280", "-o", str(out)]) == 0
    back = read_linear_model(out)
    assert back["A"][0, 0] == pytest.approx(-0.1)
    assert back["B"][0, 0] == pytest.approx(0.01)
    assert main(["linearize", str(room), "--x0", "290", "--u0", "5", "--d0", "280"]) == 0
    assert "A =" in capsys.readouterr().out


def test_cli_export_eqs(tank_file, capsys):
    assert main(["export-eqs", tank_file, "--substitute"]) == 0
    assert capsys.readouterr().out.startswith("3300*x2*x1_dot")


def test_cli_combine(tmp_path, capsys):
    doc = {
        "schema_version": 1,
        "type": "system",
        "name": "loop",
        "components": {"mainTank": {"kind": "tank"}, "heatLoad": {"kind": "heat_load"}},
        "connections": [{"primary": ["mainTank", 2], "secondary": ["heatLoad", 1]}],
    }
    sys_file = write_json(tmp_path / "sys.json", doc)
    out = tmp_path / "flat.json"
    assert main(["combine", sys_file, "-o", str(out)]) == 0
    assert "wrote" in capsys.readouterr().out
    assert load(out) == load_model(sys_file)


def test_cli_optimize(tmp_path, capsys):
    save(heater(), tmp_path / "room.json")
    doc = {
        "schema_version": 1,
        "type": "problem",
        "model": {"file": "room.json"},
        "theta": [{"name": "C", "lower": 20.0, "upper": 200.0}],
        "objective": "(x1-285)^2",
        "t_final": 2.0,
        "dt": 0.1,
        "signals": {"times": [0.0], "u1": [100.0]},
    }
    prob = write_json(tmp_path / "p.json", doc)
    hist = tmp_path / "h.csv"
    fig = tmp_path / "h.png"
    assert main(["optimize", prob, "--seed", "3", "--budget", "48", "-o", str(hist), "--figure", str(fig)]) == 0
    first = capsys.readouterr().out
    assert first.startswith("best: J=") and ", C=" in first
    assert len(hist.read_text().splitlines()) == 49
    assert fig.stat().st_size > 0
    assert main(["optimize", prob, "--seed", "3", "--budget", "48"]) == 0
    assert capsys.readouterr().out == first
    room = str(tmp_path / "room.json")
    assert main(["optimize", room]) == 2


MODELS = os.path.join(os.path.dirname(__file__), os.pardir, "models")


@pytest.mark.parametrize("name", ["tank.json", "room.json", "loop.json"])
def test_sample_models_validate(name, capsys):
    assert main(["validate", os.path.join(MODELS, name)]) == 0
    assert capsys.readouterr().out.endswith(": ok\n")


def test_sample_problem_builds():
    prob = load(os.path.join(MODELS, "room_problem.json")).build()
    assert [v.name for v in prob.theta] == ["C"] and len(prob.phi_bounds) == 1
    sched = read_signals(os.path.join(MODELS, "tank_signals.csv"))
    assert sched.sample("u1", 2.5) == pytest.approx(1.25)
