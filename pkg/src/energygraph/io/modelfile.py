"""JSON model files for components, systems and design problems.

Every document carries ``schema_version`` (currently 1) and a ``type``:

* ``component``: a complete graph (vertices, edges, edge_matrix, ...).
* ``system``: components by catalog kind or file path, plus connections,
  ``input_common`` rules, initial conditions, and optionally stitching links
  with algebraic models and boundary conditions.
* ``problem``: a design/control optimization problem over a model.

Unknown fields are rejected; errors name the offending location.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import jsonschema

from .. import expr as ex
from ..compose import AlgebraicModel, Link, combine, input_common, stitch
from ..errors import EnergyGraphError, ModelFileError
from ..graph import Edge, Graph, Input, Parameter, Port, Vertex, validate
from ..library import instantiate
from ..tables import LookupTable

SCHEMA_VERSION = 1

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}}
_TABLE = {
    "type": "object",
    "properties": {
        "axes": {"type": "array", "minItems": 1, "maxItems": 2, "items": _NUMBER_LIST},
        "values": {"type": "array"},
    },
    "required": ["axes", "values"],
    "additionalProperties": False,
}
_STR_LIST = {"type": "array", "items": {"type": "string"}}

COMPONENT_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "type": {"const": "component"},
        "name": {"type": "string", "minLength": 1},
        "metadata": {"type": "object"},
        "vertices": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": ["dynamic", "algebraic", "external"]},
                    "equations": _STR_LIST,
                    "state_count": {"type": "integer", "minimum": 1},
                    "units": _STR_LIST,
                    "initial_condition": {"oneOf": [_NUMBER_LIST, {"type": "null"}]},
                },
                "required": ["name", "kind"],
                "additionalProperties": False,
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "equations": {**_STR_LIST, "minItems": 1},
                    "external": {"type": "boolean"},
                },
                "required": ["name", "equations"],
                "additionalProperties": False,
            },
        },
        "edge_matrix": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        },
        "parameters": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "description": {"type": "string"},
                    "var": {"type": "string"},
                    "value": {"oneOf": [{"type": "number"}, _TABLE]},
                    "units": {"type": "string"},
                    "design_variable": {"type": "boolean"},
                },
                "required": ["var", "value"],
                "additionalProperties": False,
            },
        },
        "inputs": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"description": {"type": "string"}, "var": {"type": "string"}, "units": {"type": "string"}},
                "required": ["var"],
                "additionalProperties": False,
            },
        },
        "ports": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "connection_type": {"enum": ["EdgeConnection", "VertexConnection"]},
                    "element_index": {"type": "integer", "minimum": 1},
                    "domain": {"type": "string"},
                },
                "required": ["connection_type", "element_index"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["schema_version", "type", "name", "vertices", "edges", "edge_matrix"],
    "additionalProperties": False,
}

_COMPONENT_REF = {
    "type": "object",
    "properties": {
        "kind": {"type": "string"},
        "file": {"type": "string"},
        "options": {"type": "object"},
    },
    "oneOf": [{"required": ["kind"]}, {"required": ["file"]}],
    "additionalProperties": False,
}

SYSTEM_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "type": {"const": "system"},
        "name": {"type": "string", "minLength": 1},
        "components": {"type": "object", "minProperties": 1, "additionalProperties": _COMPONENT_REF},
        "connections": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "primary": {"type": "array", "prefixItems": [{"type": "string"}, {"type": "integer"}], "minItems": 2, "maxItems": 2},
                    "secondary": {"type": "array", "prefixItems": [{"type": "string"}, {"type": "integer"}], "minItems": 2, "maxItems": 2},
                },
                "required": ["primary", "secondary"],
                "additionalProperties": False,
            },
        },
        "input_common": {"type": "array", "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}},
        "initial_conditions": {"type": "object", "additionalProperties": _NUMBER_LIST},
        "models": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "equation": {"type": "string"},
                    "parameters": {"type": "object", "additionalProperties": {"type": "number"}},
                },
                "required": ["name", "equation"],
                "additionalProperties": False,
            },
        },
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "upstream": {"type": "string"},
                    "downstream": {"type": "string"},
                    "model": {"type": "string"},
                },
                "required": ["upstream", "downstream"],
                "additionalProperties": False,
            },
        },
        "boundary_conditions": {"type": "object", "additionalProperties": {"type": "number"}},
    },
    "required": ["schema_version", "type", "name", "components"],
    "additionalProperties": False,
}

PROBLEM_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "type": {"const": "problem"},
        "name": {"type": "string"},
        "model": _COMPONENT_REF,
        "theta": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "lower": {"type": "number"},
                    "upper": {"type": "number"},
                    "values": _NUMBER_LIST,
                },
                "required": ["name"],
                "additionalProperties": False,
            },
        },
        "vertex_scaling": {"type": "object", "additionalProperties": {"type": "string"}},
        "edge_scaling": {"type": "object", "additionalProperties": {"type": "string"}},
        "phi_bounds": {"type": "array", "items": {**_NUMBER_LIST, "minItems": 2, "maxItems": 2}},
        "control": {
            "type": "object",
            "properties": {
                "type": {"enum": ["open_loop", "proportional", "affine"]},
                "state": {"type": "string"},
                "input": {"type": "string"},
                "inputs": _STR_LIST,
                "reference": {"type": "number"},
                "bias": {"type": "number"},
                "u0": _NUMBER_LIST,
                "x_ref": _NUMBER_LIST,
                "u_min": {"type": "number"},
                "u_max": {"type": "number"},
            },
            "required": ["type"],
            "additionalProperties": False,
        },
        "objective": {"type": "string"},
        "t_final": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "x0": _NUMBER_LIST,
        "signals": {
            "type": "object",
            "properties": {"times": _NUMBER_LIST},
            "required": ["times"],
            "additionalProperties": _NUMBER_LIST,
        },
    },
    "required": ["schema_version", "type", "model", "objective", "t_final", "dt"],
    "additionalProperties": False,
}

_SCHEMAS = {"component": COMPONENT_SCHEMA, "system": SYSTEM_SCHEMA, "problem": PROBLEM_SCHEMA}


def _location(err):
    path = "$"
    for p in err.absolute_path:
        path += f"[{p}]" if isinstance(p, int) else f".{p}"
    return path


def check_document(doc, source="<document>"):
    """Validate a parsed document against its schema.

    Raises:
        ModelFileError: with the location of the first violation.
    """
    if not isinstance(doc, dict):
        raise ModelFileError(f"{source}: top level must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFileError(f"{source}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    kind = doc.get("type")
    if kind not in _SCHEMAS:
        raise ModelFileError(f"{source}: $.type must be one of {sorted(_SCHEMAS)}, got {kind!r}")
    validator = jsonschema.Draft202012Validator(_SCHEMAS[kind])
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise ModelFileError(f"{source}: {_location(err)}: {err.message}")


# -- component documents ----------------------------------------------------


def graph_to_dict(g: Graph) -> dict:
    """Serialize a graph as a component document."""
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "component",
        "name": g.name,
        "metadata": g.metadata,
        "vertices": [
            {
                "name": v.name,
                "kind": v.kind,
                "equations": [ex.to_string(e) for e in v.equations],
                "state_count": v.state_count,
                "units": list(v.units),
                "initial_condition": list(v.initial_condition) if v.initial_condition is not None else None,
            }
            for v in g.vertices
        ],
        "edges": [
            {"name": e.name, "equations": [ex.to_string(q) for q in e.equations], "external": e.external} for e in g.edges
        ],
        "edge_matrix": [list(r) for r in g.edge_matrix],
        "parameters": [
            {
                "description": p.description,
                "var": p.var,
                "value": p.value.to_dict() if p.is_table else p.value,
                "units": p.units,
                "design_variable": p.design_variable,
            }
            for p in g.parameters
        ],
        "inputs": [{"description": i.description, "var": i.var, "units": i.units} for i in g.inputs],
        "ports": [
            {"connection_type": p.connection_type, "element_index": p.element_index, "domain": p.domain} for p in g.ports
        ],
    }


def graph_from_dict(doc, source="<document>", check=True) -> Graph:
    """Build a graph from a component document.

    Raises:
        ModelFileError: schema violations, out-of-range edge endpoints,
            unparsable equations or (with ``check``) validation errors.
    """
    check_document(doc, source)
    if doc["type"] != "component":
        raise ModelFileError(f"{source}: expected a component document, got '{doc['type']}'")
    nv = len(doc["vertices"])
    if len(doc["edge_matrix"]) != len(doc["edges"]):
        raise ModelFileError(f"{source}: $.edge_matrix has {len(doc['edge_matrix'])} rows for {len(doc['edges'])} edges")
    for k, (e, (t, h)) in enumerate(zip(doc["edges"], doc["edge_matrix"])):
        for end in (t, h):
            if end > nv:
                raise ModelFileError(
                    f"{source}: $.edge_matrix[{k}]: edge '{e['name']}' references vertex {end} but the graph has {nv} vertices"
                )
    def build(where, make):
        try:
            return make()
        except (EnergyGraphError, ValueError) as exc:
            raise ModelFileError(f"{source}: {where}: {exc}") from None

    vertices = [
        build(
            f"$.vertices[{k}] '{v['name']}'",
            lambda v=v: Vertex(
                v["name"],
                v["kind"],
                v.get("equations", []),
                v.get("state_count", 1),
                tuple(v.get("units", [])),
                v.get("initial_condition"),
            ),
        )
        for k, v in enumerate(doc["vertices"])
    ]
    edges = [
        build(f"$.edges[{k}] '{e['name']}'", lambda e=e: Edge(e["name"], e["equations"], e.get("external", False)))
        for k, e in enumerate(doc["edges"])
    ]
    params = [
        build(
            f"$.parameters[{k}] '{p['var']}'",
            lambda p=p: Parameter(
                p.get("description", ""),
                p["var"],
                LookupTable.from_dict(p["value"]) if isinstance(p["value"], dict) else p["value"],
                p.get("units", ""),
                p.get("design_variable", False),
            ),
        )
        for k, p in enumerate(doc.get("parameters", []))
    ]
    inputs = [Input(i.get("description", ""), i["var"], i.get("units", "")) for i in doc.get("inputs", [])]
    ports = [Port(p["connection_type"], p["element_index"], p.get("domain", "")) for p in doc.get("ports", [])]
    g = Graph(doc["name"], vertices, edges, doc["edge_matrix"], params, inputs, ports, doc.get("metadata", {}))
    if check:
        report = validate(g)
        if not report.ok:
            raise ModelFileError(f"{source}: graph '{g.name}' is invalid:\n  " + "\n  ".join(report.errors))
    return g


# -- system documents -------------------------------------------------------


@dataclass
class SystemDefinition:
    """Parsed system document (kept so it can be saved back unchanged)."""

    doc: dict
    base_dir: str = "."
    components: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.doc["name"]

    @property
    def is_stitched(self):
        return bool(self.doc.get("links"))

    def build(self):
        """Return the combined Graph or the StitchedSystem."""
        doc = self.doc
        comps = {label: _resolve_component(label, ref, self.base_dir) for label, ref in doc["components"].items()}
        self.components = comps
        try:
            if self.is_stitched:
                if doc.get("connections"):
                    raise ModelFileError(f"system '{self.name}': use either connections or links, not both")
                models = [AlgebraicModel(m["name"], m["equation"], m.get("parameters", {})) for m in doc.get("models", [])]
                links = [Link(l["upstream"], l["downstream"], l.get("model")) for l in doc["links"]]
                graphs = [_apply_ics(_apply_common(g, doc), doc) for g in comps.values()]
                return stitch(self.name, graphs + models, links, doc.get("boundary_conditions", {}))
            if doc.get("connections"):
                rows, ports = [], []
                for k, c in enumerate(doc["connections"]):
                    (la, pa), (lb, pb) = c["primary"], c["secondary"]
                    for label in (la, lb):
                        if label not in comps:
                            raise ModelFileError(f"$.connections[{k}]: unknown component '{label}'")
                    rows.append((comps[la], comps[lb]))
                    ports.append((pa, pb))
                g = combine(self.name, rows, ports)
            else:
                if len(comps) != 1:
                    raise ModelFileError(f"system '{self.name}' lists {len(comps)} components but no connections")
                g = next(iter(comps.values())).replace(name=self.name)
            g = _apply_common(g, doc)
            return _apply_ics(g, doc)
        except ModelFileError:
            raise
        except EnergyGraphError as exc:
            raise ModelFileError(f"system '{self.name}': {exc}") from None


def _apply_common(g, doc):
    rules = doc.get("input_common") or []
    return input_common(g, [tuple(r) for r in rules]) if rules else g


def _apply_ics(g, doc):
    ics = doc.get("initial_conditions") or {}
    if not ics:
        return g
    names = {v.name for v in g.vertices}
    vertices = []
    for v in g.vertices:
        if v.name in ics:
            if len(ics[v.name]) != v.state_count:
                raise ModelFileError(f"$.initial_conditions['{v.name}'] needs {v.state_count} value(s)")
            v = Vertex(v.name, v.kind, v.equations, v.state_count, v.units, ics[v.name])
        vertices.append(v)
    unknown = [k for k in ics if k not in names]
    if unknown and not doc.get("links"):
        raise ModelFileError(f"$.initial_conditions names unknown vertex '{unknown[0]}'")
    return g.replace(vertices=tuple(vertices))


def _resolve_component(label, ref, base_dir):
    if "kind" in ref:
        try:
            return instantiate(ref["kind"], name=label, **ref.get("options", {}))
        except EnergyGraphError as exc:
            raise ModelFileError(f"$.components.{label}: {exc}") from None
    path = ref["file"] if os.path.isabs(ref["file"]) else os.path.join(base_dir, ref["file"])
    obj = load(path)
    if not isinstance(obj, Graph):
        obj = obj.build()
    if not isinstance(obj, Graph):
        raise ModelFileError(f"$.components.{label}: '{ref['file']}' is not a graph model")
    return obj.replace(name=label)


@dataclass
class ProblemDefinition:
    doc: dict
    base_dir: str = "."

    def build(self):
        from ..analysis.design import AffineFeedback, DesignProblem, DesignVariable, OpenLoop, ProportionalTracking
        from ..simulate import SignalSchedule

        doc = self.doc
        graph = _resolve_component("model", doc["model"], self.base_dir)
        if "name" in doc:
            graph = graph.replace(name=doc["name"])
        theta = [DesignVariable(t["name"], t.get("lower", 0.0), t.get("upper", 1.0), tuple(t["values"]) if "values" in t else None) for t in doc.get("theta", [])]
        c = dict(doc.get("control", {"type": "open_loop"}))
        kind = c.pop("type")
        try:
            if kind == "open_loop":
                control = OpenLoop()
            elif kind == "proportional":
                control = ProportionalTracking(c["state"], c["input"], c.get("reference", 0.0), c.get("bias", 0.0), c.get("u_min", -float("inf")), c.get("u_max", float("inf")))
            else:
                control = AffineFeedback(c["inputs"], c["u0"], c["x_ref"], c.get("u_min", -float("inf")), c.get("u_max", float("inf")))
        except KeyError as exc:
            raise ModelFileError(f"$.control: missing field {exc}") from None
        schedule = None
        if "signals" in doc:
            sig = dict(doc["signals"])
            times = sig.pop("times")
            schedule = SignalSchedule(times, sig)
        try:
            return DesignProblem(
                graph,
                theta,
                doc.get("vertex_scaling", {}),
                doc.get("edge_scaling", {}),
                [tuple(b) for b in doc.get("phi_bounds", [])],
                control,
                doc["objective"],
                doc["t_final"],
                doc["dt"],
                doc.get("x0"),
                schedule,
            )
        except EnergyGraphError as exc:
            raise ModelFileError(f"problem: {exc}") from None


# -- file entry points ------------------------------------------------------


def loads(text, source="<string>", base_dir="."):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    check_document(doc, source)
    if doc["type"] == "component":
        return graph_from_dict(doc, source)
    if doc["type"] == "system":
        return SystemDefinition(doc, base_dir)
    return ProblemDefinition(doc, base_dir)


def load(path):
    """Load a component (Graph), system (SystemDefinition) or problem (ProblemDefinition)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFileError(f"cannot read '{path}': {exc.strerror}") from None
    return loads(text, source=str(path), base_dir=os.path.dirname(os.path.abspath(path)))


def load_model(path):
    """Load a file and build it into a Graph or StitchedSystem."""
    obj = load(path)
    if isinstance(obj, SystemDefinition):
        return obj.build()
    if isinstance(obj, ProblemDefinition):
        raise ModelFileError(f"'{path}' is a problem file, not a model")
    return obj


def dumps(obj) -> str:
    if isinstance(obj, Graph):
        doc = graph_to_dict(obj)
    elif isinstance(obj, (SystemDefinition, ProblemDefinition)):
        doc = obj.doc
    else:
        raise TypeError(f"cannot save {type(obj).__name__}")
    return json.dumps(doc, indent=2) + "\n"


def save(obj, path):
    """Write a Graph (as a component document) or a system/problem definition."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
