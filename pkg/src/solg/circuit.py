"""Circuit graphs: gates wired node-to-node, clamp sources, and the
two-bit-by-two-bit factorization network.

A circuit is purely structural. Node indices, memristor state indices and
generator indices are assigned deterministically (first appearance order), so
identical inputs always produce identical circuits. Every free node gets
exactly one differential current generator; a single shared gating state spans
all generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .devices import ParamSet
from .gates import GateKind, GateTemplate, build_gate


class CircuitError(ValueError):
    """Structural problem while wiring a circuit."""


class NotConverged(RuntimeError):
    """A readout was requested from voltages that are not parked at logic levels."""


@dataclass(frozen=True)
class GateInstance:
    template: GateTemplate
    nodes: Tuple[int, int, int]  # global node ids for terminals (1, 2, o)
    x_offset: int  # position of this gate's first memristor state


@dataclass
class Circuit:
    params: ParamSet
    node_names: List[str]
    gates: List[GateInstance]
    clamps: Dict[int, bool]  # node id -> logic level
    probes: List[str] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    @property
    def n_states(self) -> int:
        return sum(g.template.n_states for g in self.gates)

    @property
    def free_nodes(self) -> List[int]:
        return [n for n in range(self.n_nodes) if n not in self.clamps]

    @property
    def n_generators(self) -> int:
        # one differential current generator per free node, always
        return len(self.free_nodes)

    def node_id(self, name: str) -> int:
        try:
            return self.node_names.index(name)
        except ValueError:
            raise CircuitError(f"unknown node {name!r}") from None

    def clamp_volts(self) -> Dict[int, float]:
        return {n: (self.params.v_c if lvl else -self.params.v_c) for n, lvl in self.clamps.items()}


def assemble(
    gate_specs: Sequence[Tuple[GateKind | str, str, str, str]],
    clamps: Sequence[Tuple[str, bool]] = (),
    params: Optional[ParamSet] = None,
    probes: Sequence[str] = (),
) -> Circuit:
    """Wire gates given as (kind, node1, node2, node_out) name tuples.

    Raises CircuitError for a gate whose terminals repeat a node, a clamp on a
    node no gate touches, or two clamps on one node at different levels.
    """
    params = params or ParamSet()
    names: List[str] = []
    index: Dict[str, int] = {}

    def intern(name: str) -> int:
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    gates: List[GateInstance] = []
    x_offset = 0
    for kind, n1, n2, no in gate_specs:
        if len({n1, n2, no}) != 3:
            raise CircuitError(f"gate {GateKind(kind).value} repeats a terminal node: {n1} {n2} {no}")
        template = build_gate(kind, v_c=params.v_c, r_off=params.r_off)
        gates.append(GateInstance(template, (intern(n1), intern(n2), intern(no)), x_offset))
        x_offset += template.n_states

    clamp_map: Dict[int, bool] = {}
    for name, level in clamps:
        if name not in index:
            raise CircuitError(f"clamp on unknown node {name!r}")
        nid = index[name]
        if nid in clamp_map and clamp_map[nid] != bool(level):
            raise CircuitError(f"conflicting clamps on node {name!r}")
        clamp_map[nid] = bool(level)

    for p in probes:
        if p not in index:
            raise CircuitError(f"probe on unknown node {p!r}")

    return Circuit(params, names, gates, clamp_map, list(probes))


# -- factorization network --------------------------------------------------

MULTIPLIER_PROBES = ("A1", "A0", "B1", "B0")

_REPRESENTABLE = (1, 2, 3, 4, 6, 9)


def product_bits(product: int) -> Tuple[bool, bool, bool, bool]:
    """(P3, P2, P1, P0) for the clamped product, P3 the 8s place."""
    if product not in _REPRESENTABLE:
        raise CircuitError(
            f"product {product} is not a product of two 2-bit factors >= 1 "
            f"(choose from {_REPRESENTABLE})"
        )
    return tuple(bool(product >> k & 1) for k in (3, 2, 1, 0))


def build_multiplier(product: int, params: Optional[ParamSet] = None) -> Circuit:
    """Factorization network for a 4-bit product of two 2-bit factors.

    A textbook array multiplier run in reverse: four partial-product AND
    gates plus two half-adders (XOR for the sum bit, AND for the carry).
    The product bits are clamped; the eight remaining nodes (four factor
    bits, four internal signals) stay free, each with its own generator.
    """
    p3, p2, p1, p0 = product_bits(product)
    gate_specs = [
        ("and", "A0", "B0", "P0"),
        ("and", "A1", "B0", "PP10"),
        ("and", "A0", "B1", "PP01"),
        ("and", "A1", "B1", "PP11"),
        ("xor", "PP10", "PP01", "P1"),
        ("and", "PP10", "PP01", "CARRY"),
        ("xor", "PP11", "CARRY", "P2"),
        ("and", "PP11", "CARRY", "P3"),
    ]
    clamps = [("P0", p0), ("P1", p1), ("P2", p2), ("P3", p3)]
    return assemble(gate_specs, clamps, params, probes=list(MULTIPLIER_PROBES))


def decode_factors(
    voltages: Sequence[float], v_c: float = 1.0, band: float = 0.1
) -> Tuple[int, int]:
    """Read (a, b) from final voltages at (A1, A0, B1, B0).

    Raises NotConverged unless every voltage sits within `band` of +/-v_c.
    """
    if len(voltages) != 4:
        raise ValueError("expected voltages at (A1, A0, B1, B0)")
    bits = []
    for name, v in zip(MULTIPLIER_PROBES, voltages):
        if abs(abs(v) - v_c) > band:
            raise NotConverged(f"{name} at {v:.4f} V is not parked at a logic level")
        bits.append(v > 0.0)
    a1, a0, b1, b0 = bits
    return 2 * a1 + a0, 2 * b1 + b0
