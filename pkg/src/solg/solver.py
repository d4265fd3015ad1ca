"""Transient solver: compiles a circuit into flat branch arrays, then
integrates the coupled node/memristor/generator dynamics with an adaptive
embedded Runge-Kutta pair.

The node equation is algebraically prepared at compile time: every capacitor
in the network (the generator capacitance on each free node plus the parasitic
capacitance across each memristor, whose far plate rides on a controlled
source) stamps a constant capacitance matrix, inverted once. The hot loop is
then an explicit ODE right-hand side plus a dense matvec, executed by the
compiled kernel when available (see BACKEND) and by the numpy twin otherwise.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernel_py
from .circuit import Circuit, CircuitError
from .devices import ParamSet

try:  # compiled kernel is optional; pip builds it, source checkouts may lack it
    from . import _stepper as _compiled
except ImportError:
    _compiled = None

_force = os.environ.get("SOLG_BACKEND", "").strip().lower()
if _force == "python":
    _compiled = None
elif _force == "compiled" and _compiled is None:
    raise ImportError("SOLG_BACKEND=compiled but the _stepper extension is not built")
elif _force not in ("", "python", "compiled"):
    raise ValueError(f"SOLG_BACKEND must be 'python' or 'compiled', not {_force!r}")

BACKEND = "compiled" if _compiled is not None else "python"

S_INIT = 0.75  # gating state starts between its stable points, biased on


class StiffnessError(RuntimeError):
    """Integrator cannot advance at dt_min; consider smoothing_eps > 0."""


class NumericalError(RuntimeError):
    """Non-finite state; carries the last good time and packed state."""

    def __init__(self, message: str, t: float, y: np.ndarray):
        super().__init__(message)
        self.t = t
        self.y = y


@dataclass(frozen=True)
class SolverConfig:
    t_max: float = 3.0
    dt_init: float = 1e-9
    dt_min: float = 1e-12
    dt_max: float = 1e-5
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    seed: int = 0
    x_init: Tuple[float, float] = (0.18, 0.22)
    smoothing_eps: float = 0.0  # 0 = exact step functions
    sample_dt: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.dt_min <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_max")
        if not (self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("dt_init must lie in [dt_min, dt_max]")
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.t_max < 0.0 or self.sample_dt <= 0.0:
            raise ValueError("need t_max >= 0 and sample_dt > 0")
        lo, hi = self.x_init
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError("x_init range must satisfy 0 <= lo <= hi <= 1")
        if self.smoothing_eps < 0.0:
            raise ValueError("smoothing_eps must be >= 0")


@dataclass
class SimState:
    t: float
    v: np.ndarray  # free-node voltages
    x: np.ndarray  # memristor states
    i: np.ndarray  # generator currents
    s: float


class Outcome(enum.Enum):
    CONVERGED = "converged"
    MAX_TIME = "max_time"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class Trajectory:
    """Sampled run history. v covers every node (clamped columns included);
    free_nodes indexes the solved columns."""

    t: np.ndarray
    v: np.ndarray
    x: np.ndarray
    i: np.ndarray
    s: np.ndarray
    node_names: List[str]
    free_nodes: np.ndarray

    @property
    def n_samples(self) -> int:
        return len(self.t)

    @property
    def free_names(self) -> List[str]:
        return [self.node_names[k] for k in self.free_nodes]

    def column(self, name: str) -> np.ndarray:
        return self.v[:, self.node_names.index(name)]


@dataclass
class RunResult:
    trajectory: Trajectory
    outcome: Outcome
    t_star: Optional[float] = None
    bits: Optional[Dict[str, bool]] = None  # free-node logic levels at convergence
    message: str = ""


class CompiledSystem:
    """Flat array form of a circuit, ready for the stepping kernels."""

    def __init__(self, circuit: Circuit):
        p = circuit.params
        self.params = p
        self.node_names = list(circuit.node_names)
        n_nodes = circuit.n_nodes

        free = circuit.free_nodes
        self.free_nodes = np.asarray(free, dtype=np.int64)
        self.n_free = len(free)
        node_to_free = np.full(n_nodes, -1, dtype=np.int64)
        node_to_free[self.free_nodes] = np.arange(self.n_free)
        self.node_to_free = node_to_free

        clamp_items = sorted(circuit.clamps.items())
        self.clamp_nodes = np.asarray([n for n, _ in clamp_items], dtype=np.int64)
        self.clamp_levels = np.asarray([lvl for _, lvl in clamp_items], dtype=bool)
        self.clamp_v = np.where(self.clamp_levels, p.v_c, -p.v_c).astype(float)

        mem_term, mem_g, mem_a, mem_dc, mem_sign = [], [], [], [], []
        res_term, res_g, res_a, res_dc, res_r = [], [], [], [], []
        pair_a, pair_b, pair_r = [], [], []
        for gate in circuit.gates:
            gn = gate.nodes
            for b in gate.template.mem_branches:
                mem_term.append(gn[b.terminal])
                mem_g.append(gn)
                mem_a.append((b.coeffs.a1, b.coeffs.a2, b.coeffs.ao))
                mem_dc.append(b.coeffs.dc)
                mem_sign.append(float(int(b.orientation)))
            for rb in gate.template.res_branches:
                res_term.append(gn[rb.terminal])
                res_g.append(gn)
                res_a.append((rb.coeffs.a1, rb.coeffs.a2, rb.coeffs.ao))
                res_dc.append(rb.coeffs.dc)
                res_r.append(rb.r)
            for a, b, r in gate.template.pair_resistors:
                pair_a.append(gn[a])
                pair_b.append(gn[b])
                pair_r.append(r)

        self.n_mem = len(mem_term)
        self.n_res = len(res_term)
        self.n_pair = len(pair_a)
        self.mem_term = np.asarray(mem_term, dtype=np.int64).reshape(self.n_mem)
        self.mem_g = np.asarray(mem_g, dtype=np.int64).reshape(self.n_mem, 3)
        self.mem_a = np.asarray(mem_a, dtype=float).reshape(self.n_mem, 3)
        self.mem_dc = np.asarray(mem_dc, dtype=float)
        self.mem_sign = np.asarray(mem_sign, dtype=float)
        self.res_term = np.asarray(res_term, dtype=np.int64).reshape(self.n_res)
        self.res_g = np.asarray(res_g, dtype=np.int64).reshape(self.n_res, 3)
        self.res_a = np.asarray(res_a, dtype=float).reshape(self.n_res, 3)
        self.res_dc = np.asarray(res_dc, dtype=float)
        self.res_rinv = 1.0 / np.asarray(res_r, dtype=float)
        self.pair_a = np.asarray(pair_a, dtype=np.int64)
        self.pair_b = np.asarray(pair_b, dtype=np.int64)
        self.pair_rinv = 1.0 / np.asarray(pair_r, dtype=float)

        # one generator per free node, in free-node order
        self.n_gen = self.n_free
        self.gen_free = np.arange(self.n_gen, dtype=np.int64)

        self._finish()

    def _finish(self):
        """Derived arrays shared by both kernels; also used by hand-built
        layouts in tests (which set the raw arrays themselves)."""
        p = self.params
        self.p_r_on = p.r_on
        self.p_dr = p.r_off - p.r_on
        self.p_alpha = p.alpha
        self.p_gamma = p.gamma
        self.p_v_c = p.v_c
        self.p_k_s = p.k_s
        self.p_k_i = p.k_i
        self.p_i_min2 = p.i_min * p.i_min
        self.p_i_max2 = p.i_max * p.i_max
        self.p_fd_amp = 2.0 * p.q / math.pi
        self.p_fd_b1 = p.m1 * math.pi / (2.0 * p.q)
        self.p_fd_b0 = p.m0 * math.pi / (2.0 * p.q)

        sel = self.node_to_free[self.mem_term]
        self.mem_free_sel = np.nonzero(sel >= 0)[0]
        self.mem_free_tgt = sel[self.mem_free_sel]
        sel = self.node_to_free[self.res_term]
        self.res_free_sel = np.nonzero(sel >= 0)[0]
        self.res_free_tgt = sel[self.res_free_sel]
        sel = self.node_to_free[self.pair_a]
        self.pair_a_sel = np.nonzero(sel >= 0)[0]
        self.pair_a_tgt = sel[self.pair_a_sel]
        sel = self.node_to_free[self.pair_b]
        self.pair_b_sel = np.nonzero(sel >= 0)[0]
        self.pair_b_tgt = sel[self.pair_b_sel]

        self.scratch_v_all = np.zeros(len(self.node_names))

        c_mat = np.zeros((self.n_free, self.n_free))
        for j in range(self.n_gen):
            f = self.gen_free[j]
            c_mat[f, f] += p.c1
        for b in range(self.n_mem):
            tf = self.node_to_free[self.mem_term[b]]
            if tf < 0:
                continue
            c_mat[tf, tf] += p.c_par
            for k in range(3):
                kf = self.node_to_free[self.mem_g[b, k]]
                if kf >= 0:
                    c_mat[tf, kf] -= p.c_par * self.mem_a[b, k]
        self.c_mat = c_mat
        for j in range(self.n_free):
            if c_mat[j, j] <= 0.0:
                raise CircuitError(
                    f"node {self.node_names[self.free_nodes[j]]!r} has no capacitance to ground"
                )
        try:
            self.c_inv = np.linalg.inv(c_mat)
        except np.linalg.LinAlgError:
            raise CircuitError("singular capacitance matrix") from None
        if not np.isfinite(self.c_inv).all():
            raise CircuitError("singular capacitance matrix")

        self.dim = self.n_free + self.n_mem + self.n_gen + 1
        self._kernel_args = None

    def kernel_args(self) -> tuple:
        if self._kernel_args is None:
            self._kernel_args = (
                np.ascontiguousarray(self.free_nodes),
                np.ascontiguousarray(self.clamp_nodes),
                self.clamp_v,
                np.ascontiguousarray(self.mem_term),
                np.ascontiguousarray(self.mem_g),
                np.ascontiguousarray(self.mem_a),
                np.ascontiguousarray(self.mem_dc),
                np.ascontiguousarray(self.mem_sign),
                np.ascontiguousarray(self.node_to_free[self.mem_term]),
                np.ascontiguousarray(self.res_term),
                np.ascontiguousarray(self.res_g),
                np.ascontiguousarray(self.res_a),
                np.ascontiguousarray(self.res_dc),
                np.ascontiguousarray(self.res_rinv),
                np.ascontiguousarray(self.node_to_free[self.res_term]),
                np.ascontiguousarray(self.pair_a),
                np.ascontiguousarray(self.pair_b),
                np.ascontiguousarray(self.pair_rinv),
                np.ascontiguousarray(self.node_to_free[self.pair_a]),
                np.ascontiguousarray(self.node_to_free[self.pair_b]),
                np.ascontiguousarray(self.gen_free),
                np.ascontiguousarray(self.c_inv),
                np.asarray(
                    [
                        self.p_r_on,
                        self.p_dr,
                        self.p_alpha,
                        self.p_gamma,
                        self.p_v_c,
                        self.p_k_s,
                        self.p_k_i,
                        self.p_i_min2,
                        self.p_i_max2,
                        self.p_fd_amp,
                        self.p_fd_b1,
                        self.p_fd_b0,
                    ]
                ),
            )
        return self._kernel_args

    def set_clamp_levels(self, levels: Dict[int, bool]) -> None:
        """Update clamp values in place (node id -> logic level)."""
        for nid, lvl in levels.items():
            where = np.nonzero(self.clamp_nodes == nid)[0]
            if len(where) == 0:
                raise CircuitError(
                    f"node {self.node_names[nid]!r} is not clamped; schedules may only "
                    "switch levels of clamped nodes"
                )
            self.clamp_v[where[0]] = self.params.v_c if lvl else -self.params.v_c


def compile_circuit(circuit: Circuit) -> CompiledSystem:
    return CompiledSystem(circuit)


def _advance(sys, y, t, t_target, dt, cfg: SolverConfig, backend: Optional[str]):
    use_compiled = _compiled is not None if backend is None else backend == "compiled"
    if use_compiled and _compiled is None:
        raise ValueError("compiled backend requested but not built")
    if use_compiled:
        return _compiled.advance(
            *sys.kernel_args(),
            y,
            t,
            t_target,
            dt,
            cfg.rel_tol,
            cfg.abs_tol,
            cfg.dt_min,
            cfg.dt_max,
            cfg.smoothing_eps,
        )
    return kernel_py.advance(
        sys, y, t, t_target, dt, cfg.rel_tol, cfg.abs_tol, cfg.dt_min, cfg.dt_max,
        cfg.smoothing_eps,
    )


def rhs(system: CompiledSystem, state: SimState, eps: float = 0.0) -> SimState:
    """Instantaneous derivative at `state` (a debugging/verification hook)."""
    y = pack_state(system, state)
    out = np.empty_like(y)
    kernel_py.rhs(system, y, out, eps)
    nf, nm, ng = system.n_free, system.n_mem, system.n_gen
    return SimState(
        t=state.t,
        v=out[:nf].copy(),
        x=out[nf : nf + nm].copy(),
        i=out[nf + nm : nf + nm + ng].copy(),
        s=float(out[-1]),
    )


def pack_state(system: CompiledSystem, state: SimState) -> np.ndarray:
    y = np.empty(system.dim)
    nf, nm, ng = system.n_free, system.n_mem, system.n_gen
    y[:nf] = state.v
    y[nf : nf + nm] = state.x
    y[nf + nm : nf + nm + ng] = state.i
    y[-1] = state.s
    return y


def initial_state(system: CompiledSystem, cfg: SolverConfig) -> SimState:
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.x_init
    return SimState(
        t=0.0,
        v=np.zeros(system.n_free),
        x=rng.uniform(lo, hi, system.n_mem),
        i=np.zeros(system.n_gen),
        s=S_INIT,
    )


def step(
    system: CompiledSystem,
    state: SimState,
    dt: float,
    cfg: Optional[SolverConfig] = None,
    backend: Optional[str] = None,
) -> Tuple[SimState, float]:
    """One accepted adaptive step of at most dt. Returns (state, next dt)."""
    cfg = cfg or SolverConfig()
    y = pack_state(system, state)
    t_new, dt_new, status = _advance(
        system, y, state.t, state.t + dt, min(dt, cfg.dt_max), cfg, backend
    )
    if status == kernel_py.STATUS_STIFF:
        raise StiffnessError(
            f"integrator stalled at dt_min={cfg.dt_min:g} near t={t_new:.6g}; "
            "a smoothing_eps > 0 may tame the discontinuity"
        )
    if not np.isfinite(y).all():
        raise NumericalError(f"non-finite state at t={t_new:.6g}", state.t, pack_state(system, state))
    nf, nm, ng = system.n_free, system.n_mem, system.n_gen
    new = SimState(
        t=t_new,
        v=y[:nf].copy(),
        x=y[nf : nf + nm].copy(),
        i=y[nf + nm : nf + nm + ng].copy(),
        s=float(y[-1]),
    )
    return new, dt_new


class EquilibriumTracker:
    """Incremental form of analysis.detect_equilibrium: feed samples in time
    order, fires once every free node has sat within v_band of +/-v_c with a
    stable sign and bounded slew for at least `hold` seconds."""

    def __init__(self, v_c: float, v_band: float = 0.1, deriv_band: float = 1.0, hold: float = 0.05):
        self.v_c = v_c
        self.v_band = v_band
        self.deriv_band = deriv_band
        self.hold = hold
        self.reset()

    def reset(self) -> None:
        self._run_start: Optional[float] = None
        self._signs: Optional[np.ndarray] = None
        self._prev_t: Optional[float] = None
        self._prev_v: Optional[np.ndarray] = None
        self.fired_at: Optional[float] = None
        self.bits: Optional[np.ndarray] = None

    def feed(self, t: float, v_free: np.ndarray) -> bool:
        """Returns True once the hold window is satisfied (and stays True)."""
        if self.fired_at is not None:
            return True
        if self._prev_t is None:
            slope_ok = True
        else:
            dt = t - self._prev_t
            slope_ok = dt > 0 and float(
                np.max(np.abs(v_free - self._prev_v))
            ) / dt < self.deriv_band
        in_band = np.abs(np.abs(v_free) - self.v_c) <= self.v_band
        signs = v_free > 0.0
        ok = bool(in_band.all()) and slope_ok
        if ok and self._run_start is not None and np.array_equal(signs, self._signs):
            if t - self._run_start >= self.hold:
                self.fired_at = self._run_start
                self.bits = signs
        elif ok:
            self._run_start = t
            self._signs = signs
            # a single sample only starts a window; zero-length hold fires at once
            if self.hold <= 0.0:
                self.fired_at = t
                self.bits = signs
        else:
            self._run_start = None
            self._signs = None
        self._prev_t = t
        self._prev_v = v_free.copy()
        return self.fired_at is not None


Schedule = Sequence[Tuple[float, Dict[str, bool]]]


def run(
    circuit_or_system,
    cfg: Optional[SolverConfig] = None,
    schedule: Optional[Schedule] = None,
    x0: Optional[np.ndarray] = None,
    early_stop: bool = True,
    backend: Optional[str] = None,
) -> RunResult:
    """Integrate from the seeded initial state to t_max.

    Equilibrium detection stops the run early unless a clamp schedule is
    given (scheduled runs are analyzed per segment after the fact). x0
    overrides the seeded memristor initial condition.
    """
    cfg = cfg or SolverConfig()
    system = (
        compile_circuit(circuit_or_system)
        if isinstance(circuit_or_system, Circuit)
        else circuit_or_system
    )
    state = initial_state(system, cfg)
    if x0 is not None:
        if np.shape(x0) != (system.n_mem,):
            raise ValueError(f"x0 must have shape ({system.n_mem},)")
        state.x = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    y = pack_state(system, state)

    nf, nm, ng = system.n_free, system.n_mem, system.n_gen
    n_nodes = len(system.node_names)

    # sample grid plus clamp-switch events, all hit exactly
    sample_times: List[float] = []
    if cfg.t_max > 0.0:
        k = 0
        while (tk := k * cfg.sample_dt) < cfg.t_max - 1e-15:
            sample_times.append(tk)
            k += 1
        sample_times.append(cfg.t_max)

    switch_at: Dict[float, Dict[str, bool]] = {}
    if schedule:
        last = -1.0
        for t_s, levels in schedule:
            if t_s < 0.0 or t_s > cfg.t_max:
                raise ValueError(f"schedule time {t_s} outside [0, t_max]")
            if t_s <= last:
                raise ValueError("schedule times must be strictly increasing")
            last = t_s
            switch_at[float(t_s)] = {system.node_names.index(n): lvl for n, lvl in levels.items()}

    events = sorted(set(sample_times) | set(switch_at))
    tracker = EquilibriumTracker(system.params.v_c) if (early_stop and not schedule) else None

    ts: List[float] = []
    vs: List[np.ndarray] = []
    xs: List[np.ndarray] = []
    cs: List[np.ndarray] = []
    ss: List[float] = []
    sample_set = set(sample_times)

    def record(t: float) -> None:
        v_all = np.empty(n_nodes)
        v_all[system.free_nodes] = y[:nf]
        v_all[system.clamp_nodes] = system.clamp_v
        ts.append(t)
        vs.append(v_all)
        xs.append(y[nf : nf + nm].copy())
        cs.append(y[nf + nm : nf + nm + ng].copy())
        ss.append(float(y[-1]))

    outcome = Outcome.MAX_TIME
    t_star: Optional[float] = None
    bits: Optional[Dict[str, bool]] = None
    message = ""
    t = 0.0
    dt = cfg.dt_init

    for ev in events:
        if ev > t:
            t, dt, status = _advance(system, y, t, ev, dt, cfg, backend)
            if status == kernel_py.STATUS_STIFF:
                outcome = Outcome.NUMERICAL_FAILURE
                message = (
                    f"integrator stalled at dt_min={cfg.dt_min:g} near t={t:.6g}; "
                    "a smoothing_eps > 0 may tame the discontinuity"
                )
                break
            if not np.isfinite(y).all():
                outcome = Outcome.NUMERICAL_FAILURE
                message = f"non-finite state at t={t:.6g}"
                break
        if ev in switch_at:
            system.set_clamp_levels(switch_at[ev])
        if ev in sample_set:
            record(ev)
            if tracker is not None and tracker.feed(ev, y[:nf]):
                outcome = Outcome.CONVERGED
                t_star = tracker.fired_at
                bits = {
                    system.node_names[system.free_nodes[j]]: bool(tracker.bits[j])
                    for j in range(nf)
                }
                break

    traj = Trajectory(
        t=np.asarray(ts),
        v=np.asarray(vs).reshape(len(ts), n_nodes),
        x=np.asarray(xs).reshape(len(ts), nm),
        i=np.asarray(cs).reshape(len(ts), ng),
        s=np.asarray(ss),
        node_names=list(system.node_names),
        free_nodes=system.free_nodes.copy(),
    )
    return RunResult(traj, outcome, t_star, bits, message)


def memristor_port_values(
    system: CompiledSystem, v_all: np.ndarray, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """(device voltage, Ohmic current into the terminal) per memristor branch
    at the given node voltages; used by the hysteresis/pinch checks."""
    vg = np.einsum("ij,ij->i", system.mem_a, v_all[system.mem_g]) + system.mem_dc
    vt = v_all[system.mem_term]
    m = system.p_r_on + system.p_dr * x
    return system.mem_sign * (vt - vg), (vg - vt) / m
