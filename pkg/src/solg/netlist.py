"""Line-oriented netlist format.

    # tiny example: solve for inputs of an OR whose output is high
    param r_on 0.05
    in OUT 1
    or A B OUT
    probe A
    probe B

Directives: `param <name> <value>`, `in <node> <0|1>` (clamp a node to a logic
level), `and|or|xor <n1> <n2> <no>`, `probe <node>`. `#` starts a comment.
Parse errors carry 1-based line and column numbers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .circuit import Circuit, assemble
from .devices import ParamSet

_WORD = re.compile(r"[A-Za-z0-9_.+-]+")
_NODE = re.compile(r"[A-Za-z0-9_]+\Z")


class NetlistError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass
class Netlist:
    params: Dict[str, float] = field(default_factory=dict)
    inputs: List[Tuple[str, bool]] = field(default_factory=list)
    gates: List[Tuple[str, str, str, str]] = field(default_factory=list)
    probes: List[str] = field(default_factory=list)

    def to_circuit(self, overrides: Optional[Dict[str, float]] = None) -> Circuit:
        merged = dict(self.params)
        merged.update(overrides or {})
        return assemble(self.gates, self.inputs, ParamSet().replace(**merged), self.probes)


def _tokens(line: str) -> List[Tuple[str, int]]:
    """(token, 1-based column) pairs, comment stripped."""
    line = line.split("#", 1)[0]
    return [(m.group(0), m.start() + 1) for m in _WORD.finditer(line)]


def parse_netlist(text: str) -> Netlist:
    nl = Netlist()
    clamped: Dict[str, int] = {}  # node -> line of first `in`, for duplicates
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokens(raw)
        if not toks:
            continue
        word, col = toks[0]
        args = toks[1:]

        def fail(msg: str, at: int = col):
            raise NetlistError(msg, lineno, at)

        if word == "param":
            if len(args) != 2:
                fail("param takes a name and a value")
            (name, ncol), (val, vcol) = args
            if name not in ParamSet.names():
                fail(f"unknown parameter {name!r}", ncol)
            if name in nl.params:
                fail(f"duplicate param {name!r}", ncol)
            try:
                nl.params[name] = float(val)
            except ValueError:
                fail(f"bad numeric literal {val!r}", vcol)
        elif word == "in":
            if len(args) != 2:
                fail("in takes a node and 0 or 1")
            (node, ncol), (level, lcol) = args
            if not _NODE.match(node):
                fail(f"bad node name {node!r}", ncol)
            if level not in ("0", "1"):
                fail(f"clamp level must be 0 or 1, got {level!r}", lcol)
            if node in clamped:
                fail(f"node {node!r} already clamped on line {clamped[node]}", ncol)
            clamped[node] = lineno
            nl.inputs.append((node, level == "1"))
        elif word in ("and", "or", "xor"):
            if len(args) != 3:
                fail(f"{word} takes three nodes")
            for node, ncol in args:
                if not _NODE.match(node):
                    fail(f"bad node name {node!r}", ncol)
            nl.gates.append((word, args[0][0], args[1][0], args[2][0]))
        elif word == "probe":
            if len(args) != 1:
                fail("probe takes one node")
            node, ncol = args[0]
            if not _NODE.match(node):
                fail(f"bad node name {node!r}", ncol)
            nl.probes.append(node)
        else:
            fail(f"unknown directive {word!r}")
    return nl


def format_netlist(nl: Netlist) -> str:
    lines = [f"param {k} {v!r}" for k, v in nl.params.items()]
    lines += [f"in {node} {1 if lvl else 0}" for node, lvl in nl.inputs]
    lines += [f"{kind} {a} {b} {c}" for kind, a, b, c in nl.gates]
    lines += [f"probe {p}" for p in nl.probes]
    return "\n".join(lines) + ("\n" if lines else "")
