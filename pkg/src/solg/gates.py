"""Self-organizing gate templates.

A gate is a three-terminal subcircuit. Each terminal carries a correction
module: a handful of memristor branches and one resistor branch, each driven
by a voltage-controlled voltage generator that is a linear function of the
three terminal voltages. Two plain resistors tie each input terminal to the
output terminal. The generator coefficients are chosen so that every logically
consistent terminal assignment is a zero-current state of the gate and every
inconsistent one forces a large correcting current back into the offending
terminal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from .devices import MemristorParams, memristance

TERMINAL_LABELS = ("1", "2", "o")


class GateKind(str, enum.Enum):
    AND = "and"
    OR = "or"
    XOR = "xor"


class Orientation(enum.IntEnum):
    """Which side of the memristor faces the gate terminal.

    TERMINAL_PLUS: device voltage v_m = v_terminal - v_generator.
    SOURCE_PLUS: v_m = v_generator - v_terminal.
    The Ohmic current into the terminal is (v_generator - v_terminal)/M(x)
    either way; orientation only flips the sign of the v_m that drives the
    state equation.
    """

    TERMINAL_PLUS = 1
    SOURCE_PLUS = -1


@dataclass(frozen=True)
class VcvgCoeffs:
    """Generator output a1*v1 + a2*v2 + ao*vo + dc (dc in volts)."""

    a1: float
    a2: float
    ao: float
    dc: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.a1, self.a2, self.ao, self.dc)


@dataclass(frozen=True)
class MemristorBranch:
    terminal: int  # 0, 1 = inputs, 2 = output terminal
    coeffs: VcvgCoeffs
    orientation: Orientation
    state_index: int  # position in the gate's x vector


@dataclass(frozen=True)
class ResistorBranch:
    terminal: int
    coeffs: VcvgCoeffs
    r: float


@dataclass(frozen=True)
class GateTemplate:
    kind: GateKind
    mem_branches: Tuple[MemristorBranch, ...]
    res_branches: Tuple[ResistorBranch, ...]
    pair_resistors: Tuple[Tuple[int, int, float], ...]  # (term_a, term_b, r)
    v_c: float

    @property
    def n_states(self) -> int:
        return len(self.mem_branches)


# Branch tables: (terminal, a1, a2, ao, dc in units of v_c, orientation).
# One row group per correction module, memristor rows first, resistor row last
# (resistor rows carry orientation None). Terminal 2 is the output.
_TP = Orientation.TERMINAL_PLUS
_SP = Orientation.SOURCE_PLUS

_MEM_ROWS = {
    GateKind.AND: (
        (0, 0, -1, 1, 1, _TP),
        (0, 0, 0, 1, 0, _SP),
        (1, -1, 0, 1, 1, _TP),
        (1, 0, 0, 1, 0, _SP),
        (2, 1, 0, 0, 0, _TP),
        (2, 0, 1, 0, 0, _TP),
        (2, 2, 2, -1, -2, _SP),
    ),
    GateKind.OR: (
        (0, 0, 0, 1, 0, _TP),
        (0, 0, -1, 1, -1, _SP),
        (1, 0, 0, 1, 0, _TP),
        (1, -1, 0, 1, -1, _SP),
        (2, 2, 2, -1, 2, _TP),
        (2, 1, 0, 0, 0, _SP),
        (2, 0, 1, 0, 0, _SP),
    ),
    GateKind.XOR: (
        (0, 0, -1, -1, 1, _TP),
        (0, 0, 1, 1, 1, _TP),
        (0, 0, -1, 1, -1, _SP),
        (0, 0, 1, -1, -1, _SP),
        (1, -1, 0, -1, 1, _TP),
        (1, 1, 0, 1, 1, _TP),
        (1, -1, 0, 1, -1, _SP),
        (1, 1, 0, -1, -1, _SP),
        (2, -1, -1, 0, 1, _TP),
        (2, 1, 1, 0, 1, _TP),
        (2, -1, 1, 0, -1, _SP),
        (2, 1, -1, 0, -1, _SP),
    ),
}

_RES_ROWS = {
    GateKind.AND: (
        (0, 4, 1, -3, -1),
        (1, 1, 4, -3, -1),
        (2, -4, -4, 7, 2),
    ),
    GateKind.OR: (
        (0, 4, 1, -3, 1),
        (1, 1, 4, -3, 1),
        (2, -4, -4, 7, -2),
    ),
    GateKind.XOR: (
        (0, 6, 0, -1, 0),
        (1, 0, 6, -1, 0),
        (2, -1, -1, 7, 0),
    ),
}


def build_gate(kind: GateKind | str, v_c: float = 1.0, r_off: float = 1.0) -> GateTemplate:
    """Instantiate a gate template with dc terms resolved against v_c and
    every resistor (branch and terminal-pair) set to r_off."""
    kind = GateKind(kind)
    mems = tuple(
        MemristorBranch(t, VcvgCoeffs(float(a1), float(a2), float(ao), dc * v_c), orient, k)
        for k, (t, a1, a2, ao, dc, orient) in enumerate(_MEM_ROWS[kind])
    )
    ress = tuple(
        ResistorBranch(t, VcvgCoeffs(float(a1), float(a2), float(ao), dc * v_c), r_off)
        for (t, a1, a2, ao, dc) in _RES_ROWS[kind]
    )
    pairs = ((0, 2, r_off), (1, 2, r_off))
    return GateTemplate(kind, mems, ress, pairs, v_c)


def consistent_assignments(kind: GateKind | str) -> frozenset:
    """All (in1, in2, out) boolean triples the gate accepts as solved."""
    kind = GateKind(kind)
    table = {
        GateKind.AND: lambda a, b: a and b,
        GateKind.OR: lambda a, b: a or b,
        GateKind.XOR: lambda a, b: a != b,
    }[kind]
    return frozenset((a, b, table(a, b)) for a in (False, True) for b in (False, True))


def _resolve(coeffs: VcvgCoeffs, v: Sequence[float]) -> float:
    return coeffs.a1 * v[0] + coeffs.a2 * v[1] + coeffs.ao * v[2] + coeffs.dc


def memristor_ports(
    gate: GateTemplate, v: Sequence[float], x: Sequence[float], p: MemristorParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Per memristor branch: (device voltage v_m, Ohmic current into the
    branch's terminal node). Branch order follows gate.mem_branches."""
    vm = np.empty(len(gate.mem_branches))
    cur = np.empty(len(gate.mem_branches))
    for b in gate.mem_branches:
        vg = _resolve(b.coeffs, v)
        vt = v[b.terminal]
        m = memristance(float(x[b.state_index]), p)
        vm[b.state_index] = int(b.orientation) * (vt - vg)
        cur[b.state_index] = (vg - vt) / m
    return vm, cur


def terminal_current(
    gate: GateTemplate, v: Sequence[float], x: Sequence[float], p: MemristorParams
) -> np.ndarray:
    """Resistive current delivered into each terminal node by the gate.

    Positive current raises the terminal voltage: at a consistent assignment
    with relaxed memristors every entry cancels to zero, at an inconsistent
    one at least one terminal sees a current of order v_c/r_on whose sign
    opposes that terminal's voltage. Capacitive currents are excluded.
    """
    out = np.zeros(3)
    _, cur = memristor_ports(gate, v, x, p)
    for b in gate.mem_branches:
        out[b.terminal] += cur[b.state_index]
    for rb in gate.res_branches:
        out[rb.terminal] += (_resolve(rb.coeffs, v) - v[rb.terminal]) / rb.r
    for a, bterm, r in gate.pair_resistors:
        i = (v[a] - v[bterm]) / r
        out[a] -= i
        out[bterm] += i
    return out


def format_gate_branches(gate: GateTemplate) -> str:
    """Canonical text form of the branch lists, used by the golden tests and
    handy for eyeballing a template. dc is printed in units of v_c."""
    lines = [gate.kind.value]
    for b in gate.mem_branches:
        orient = "TP" if b.orientation == Orientation.TERMINAL_PLUS else "SP"
        c = b.coeffs
        lines.append(
            f"mem {TERMINAL_LABELS[b.terminal]} {orient} "
            f"a=({c.a1:+g},{c.a2:+g},{c.ao:+g}) dc={c.dc / gate.v_c:+g}vc"
        )
    for rb in gate.res_branches:
        c = rb.coeffs
        lines.append(
            f"res {TERMINAL_LABELS[rb.terminal]}    "
            f"a=({c.a1:+g},{c.a2:+g},{c.ao:+g}) dc={c.dc / gate.v_c:+g}vc"
        )
    for a, b, _ in gate.pair_resistors:
        lines.append(f"pair {TERMINAL_LABELS[a]} {TERMINAL_LABELS[b]}")
    return "\n".join(lines) + "\n"
