"""Transient simulator for self-organizing logic circuits: memristive gates
whose terminals are driven toward consistent logic levels by differential
current generators, so that clamping a gate's output solves for its inputs."""

__version__ = "0.1.0"

from .devices import MemristorParams, ParamSet, SBlockParams, VcdcgParams
from .gates import GateKind, build_gate, consistent_assignments, terminal_current
from .circuit import Circuit, assemble, build_multiplier, decode_factors
from .netlist import Netlist, NetlistError, format_netlist, parse_netlist
from .solver import Outcome, RunResult, SolverConfig, Trajectory, compile_circuit, run
from .analysis import (
    RunVerdict,
    detect_equilibrium,
    detect_limit_cycle,
    fs_root_profile,
    iv_sweep,
    validate_truth_table,
)

__all__ = [
    "MemristorParams",
    "ParamSet",
    "SBlockParams",
    "VcdcgParams",
    "GateKind",
    "build_gate",
    "consistent_assignments",
    "terminal_current",
    "Circuit",
    "assemble",
    "build_multiplier",
    "decode_factors",
    "Netlist",
    "NetlistError",
    "format_netlist",
    "parse_netlist",
    "Outcome",
    "RunResult",
    "SolverConfig",
    "Trajectory",
    "compile_circuit",
    "run",
    "RunVerdict",
    "detect_equilibrium",
    "detect_limit_cycle",
    "fs_root_profile",
    "iv_sweep",
    "validate_truth_table",
    "__version__",
]
