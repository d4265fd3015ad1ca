"""Element physics for self-organizing logic circuits.

Pure functions over plain floats plus the parameter dataclasses shared by the
rest of the package. Everything here is side-effect free; the solver kernels
inline the same arithmetic for speed and the unit tests cross-check the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Sequence


def theta(z: float, eps: float = 0.0) -> float:
    """Unit step with theta(0) = 0.

    With eps > 0 the step is replaced by a logistic ramp of slope ~1/eps,
    which trades model fidelity for a smoother right-hand side when the
    adaptive integrator fights a chattering discontinuity.
    """
    if eps > 0.0:
        # clip the exponent so extreme arguments cannot overflow
        a = z / eps
        if a > 40.0:
            return 1.0
        if a < -40.0:
            return 0.0
        return 1.0 / (1.0 + math.exp(-a))
    return 1.0 if z > 0.0 else 0.0


@dataclass(frozen=True)
class MemristorParams:
    """Linear-memristance device: M(x) = (r_off - r_on)*x + r_on."""

    r_on: float = 0.05
    r_off: float = 1.0
    alpha: float = 60.0  # state slew rate, 1/s per (V/ohm)
    c_par: float = 1e-9  # parasitic capacitance across the device, F

    def __post_init__(self):
        if not (0.0 < self.r_on < self.r_off):
            raise ValueError(f"need 0 < r_on < r_off, got {self.r_on}, {self.r_off}")
        if self.alpha <= 0.0 or self.c_par <= 0.0:
            raise ValueError("alpha and c_par must be positive")


@dataclass(frozen=True)
class VcdcgParams:
    """Differential current generator attached to every free node."""

    q: float = 5.0
    m0: float = -400.0  # slope of the drive curve at the origin (repelling 0)
    m1: float = 400.0  # slope at the +/-v_c wells (attracting)
    gamma: float = 60.0  # current decay rate while the generator is gated off
    v_c: float = 1.0  # logic level, V
    c1: float = 1e-3  # node capacitance contributed by the generator, F

    def __post_init__(self):
        if self.q <= 0.0 or self.m1 <= 0.0 or self.m0 >= 0.0:
            raise ValueError("need q > 0, m1 > 0, m0 < 0")
        if self.gamma <= 0.0 or self.v_c <= 0.0 or self.c1 <= 0.0:
            raise ValueError("gamma, v_c, c1 must be positive")


@dataclass(frozen=True)
class SBlockParams:
    """Shared gating state: one s spans all generators in a circuit."""

    k_s: float = 2e3
    k_i: float = 2e3
    i_min: float = 1e-8
    i_max: float = 10.0

    def __post_init__(self):
        if self.k_s <= 0.0 or self.k_i <= 0.0:
            raise ValueError("k_s and k_i must be positive")
        if not (0.0 < self.i_min < self.i_max):
            raise ValueError("need 0 < i_min < i_max")


@dataclass(frozen=True)
class ParamSet:
    """Flat bundle of every model parameter, the unit the netlist format and
    CLI overrides operate on. Views split it into the typed dataclasses."""

    r_on: float = 0.05
    r_off: float = 1.0
    alpha: float = 60.0
    c_par: float = 1e-9
    q: float = 5.0
    m0: float = -400.0
    m1: float = 400.0
    gamma: float = 60.0
    c1: float = 1e-3
    k_s: float = 2e3
    k_i: float = 2e3
    i_min: float = 1e-8
    i_max: float = 10.0
    v_c: float = 1.0

    def __post_init__(self):
        # delegate range checking to the typed views
        self.memristor()
        self.vcdcg()
        self.sblock()

    def memristor(self) -> MemristorParams:
        return MemristorParams(self.r_on, self.r_off, self.alpha, self.c_par)

    def vcdcg(self) -> VcdcgParams:
        return VcdcgParams(self.q, self.m0, self.m1, self.gamma, self.v_c, self.c1)

    def sblock(self) -> SBlockParams:
        return SBlockParams(self.k_s, self.k_i, self.i_min, self.i_max)

    def replace(self, **overrides: float) -> "ParamSet":
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise ValueError(f"unknown parameter(s): {', '.join(sorted(bad))}")
        return replace(self, **overrides)

    @staticmethod
    def names() -> tuple:
        return tuple(f.name for f in fields(ParamSet))


def memristance(x: float, p: MemristorParams) -> float:
    """M(x) for x in [0, 1]; x=0 is the low-resistance end."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"memristor state out of range: {x}")
    return (p.r_off - p.r_on) * x + p.r_on


def window_h(x: float, v_m: float, eps: float = 0.0) -> float:
    """Direction-dependent window: motion halts exactly at the state bounds.

    h = theta(x)*theta(v_m) + theta(1-x)*theta(-v_m), so a device parked at
    x=0 ignores further positive drive and one at x=1 ignores negative drive.
    """
    return theta(x, eps) * theta(v_m, eps) + theta(1.0 - x, eps) * theta(-v_m, eps)


def memristor_rate(x: float, v_m: float, p: MemristorParams, eps: float = 0.0) -> float:
    """dx/dt; positive device voltage pushes x down toward r_on."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"memristor state out of range: {x}")
    return -p.alpha * window_h(x, v_m, eps) * v_m / memristance(x, p)


def vcvg_voltage(coeffs: Sequence[float], v1: float, v2: float, vo: float) -> float:
    """Controlled source output a1*v1 + a2*v2 + ao*vo + dc."""
    a1, a2, ao, dc = coeffs
    return a1 * v1 + a2 * v2 + ao * vo + dc


def f_dcg(v: float, p: VcdcgParams) -> float:
    """Drive curve of the current generator.

    Odd in v, zero at the origin, a zero near each of +/-v_c, and saturating
    at +/-3q. The origin is repelling (slope ~m0 < 0) and the +/-v_c wells are
    attracting, which is what pushes every free node toward a logic level.
    """
    b1 = p.m1 * math.pi / (2.0 * p.q)
    b0 = p.m0 * math.pi / (2.0 * p.q)
    return (2.0 * p.q / math.pi) * (
        math.atan(b1 * (v + p.v_c)) + math.atan(b0 * v) + math.atan(b1 * (v - p.v_c))
    )


def vcdcg_rate(i: float, v: float, s: float, p: VcdcgParams, eps: float = 0.0) -> float:
    """di/dt: follow the drive curve while gated on, decay at gamma while off."""
    return theta(s - 0.5, eps) * f_dcg(v, p) - p.gamma * theta(0.5 - s, eps) * i


def f_s(i_all: Sequence[float], s: float, p: SBlockParams, eps: float = 0.0) -> float:
    """ds/dt for the shared gating state.

    The bistable cubic -k_s*s(s-1)(2s-1) is biased by the generator currents:
    all |i| below i_min pulls s above 1 (keep driving), any |i| above i_max
    pulls s negative (gate off and reset), anything in between leaves the
    plain cubic with its stable points at 0 and 1.
    """
    if len(i_all) == 0:
        raise ValueError("f_s needs at least one generator current")
    below = 1.0
    above = 1.0
    for i in i_all:
        ii = i * i
        below *= theta(p.i_min * p.i_min - ii, eps)
        above *= theta(p.i_max * p.i_max - ii, eps)
    cubic = -p.k_s * s * (s - 1.0) * (2.0 * s - 1.0)
    return cubic - p.k_i * (1.0 - below - above)
