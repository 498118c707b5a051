"""Model files, reports, drawings and CSV output."""

from .csvio import read_linear_model, read_signals, write_history, write_linear_model, write_trajectory
from .export import export_dot, export_equations
from .modelfile import (
    SCHEMA_VERSION,
    ProblemDefinition,
    SystemDefinition,
    dumps,
    graph_from_dict,
    graph_to_dict,
    load,
    load_model,
    loads,
    save,
)
from .reports import REPORT_KINDS, render_report

__all__ = [
    "REPORT_KINDS",
    "SCHEMA_VERSION",
    "ProblemDefinition",
    "SystemDefinition",
    "dumps",
    "export_dot",
    "export_equations",
    "graph_from_dict",
    "graph_to_dict",
    "load",
    "load_model",
    "loads",
    "read_linear_model",
    "read_signals",
    "render_report",
    "save",
    "write_history",
    "write_linear_model",
    "write_trajectory",
]
