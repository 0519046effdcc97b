from .engine import Divergence, Metrics, RunResult, SimulationError, Trace, TraceEvent, replay, replicate, run, sequential_replay
from .report import dump_policy_matrix, render_figures
from .scenario import Event, EventKind, ParseError, Scenario, ValidationError, generate_scenario, load_scenario, parse_scenario

__all__ = [
    "Divergence",
    "Event",
    "EventKind",
    "Metrics",
    "ParseError",
    "RunResult",
    "Scenario",
    "SimulationError",
    "Trace",
    "TraceEvent",
    "ValidationError",
    "dump_policy_matrix",
    "generate_scenario",
    "load_scenario",
    "parse_scenario",
    "render_figures",
    "replay",
    "replicate",
    "run",
    "sequential_replay",
]
