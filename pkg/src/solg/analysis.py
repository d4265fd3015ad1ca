"""Post-run analysis: equilibrium and limit-cycle detection, run verdicts,
single-device hysteresis sweeps, and root profiles of the gating dynamics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import devices, gates
from .circuit import assemble
from .devices import ParamSet
from .gates import GateKind
from .solver import (
    EquilibriumTracker,
    Outcome,
    RunResult,
    SolverConfig,
    Trajectory,
    run,
)


def detect_equilibrium(
    traj: Trajectory,
    v_c: float = 1.0,
    v_band: float = 0.1,
    deriv_band: float = 1.0,
    hold: float = 0.05,
    t_start: Optional[float] = None,
    t_end: Optional[float] = None,
) -> Tuple[Optional[float], Optional[Dict[str, bool]]]:
    """Earliest time from which every free node stays within v_band of one of
    the two logic levels, with a fixed sign and a finite-difference slope
    below deriv_band, for at least `hold` seconds. Returns (t_star, bits) or
    (None, None). t_start/t_end restrict the scan (e.g. to one clamp-schedule
    segment)."""
    if traj.n_samples == 0:
        return None, None
    lo = 0 if t_start is None else int(np.searchsorted(traj.t, t_start, side="left"))
    hi = traj.n_samples if t_end is None else int(np.searchsorted(traj.t, t_end, side="right"))
    tracker = EquilibriumTracker(v_c, v_band=v_band, deriv_band=deriv_band, hold=hold)
    v_free = traj.v[:, traj.free_nodes]
    for k in range(lo, hi):
        if tracker.feed(traj.t[k], v_free[k]):
            names = traj.free_names
            bits = {names[j]: bool(tracker.bits[j]) for j in range(len(names))}
            return tracker.fired_at, bits
    return None, None


@dataclass
class CycleInfo:
    node: str
    period: float
    peak_corr: float
    swing: float


def _lagged_correlation(y: np.ndarray) -> np.ndarray:
    """Pearson correlation of y against itself at every positive lag,
    normalized per lag over the overlapping segment, so a clean oscillation
    scores ~1 at its period even when the window holds few cycles."""
    n = len(y)
    raw = np.correlate(y, y, mode="full")[n - 1 :]
    csum = np.concatenate([[0.0], np.cumsum(y)])
    csq = np.concatenate([[0.0], np.cumsum(y * y)])
    lags = np.arange(n)
    m = n - lags  # overlap length per lag
    head_sum = csum[n] - csum[lags]  # y[k:]
    tail_sum = csum[m]  # y[:n-k]
    head_sq = csq[n] - csq[lags]
    tail_sq = csq[m]
    cov = raw - head_sum * tail_sum / np.maximum(m, 1)
    var_h = head_sq - head_sum * head_sum / np.maximum(m, 1)
    var_t = tail_sq - tail_sum * tail_sum / np.maximum(m, 1)
    denom = np.sqrt(np.maximum(var_h, 0.0) * np.maximum(var_t, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = cov / denom
    r[~np.isfinite(r)] = 0.0
    return r


def detect_limit_cycle(
    traj: Trajectory,
    window: float = 0.5,
    min_peak: float = 0.9,
    v_band: float = 0.1,
) -> Optional[CycleInfo]:
    """Look for a sustained oscillation in the trailing `window` seconds of
    any free-node voltage. A node qualifies when its lag correlation, past
    the zero-lag mainlobe, regains min_peak while the signal swings more
    than v_band peak to peak. Returns the strongest qualifying cycle, or
    None. The trajectory must span at least `window`."""
    if traj.n_samples < 16:
        return None
    span = traj.t[-1] - traj.t[0]
    if span < window:
        raise ValueError(f"trajectory spans {span:g} s; need at least window = {window:g}")
    k0 = int(np.searchsorted(traj.t, traj.t[-1] - window, side="left"))
    n = traj.n_samples - k0
    if n < 16:
        return None
    max_lag = n - max(16, n // 8)  # keep a meaningful overlap at every lag
    best: Optional[CycleInfo] = None
    for j, name in zip(traj.free_nodes, traj.free_names):
        y = traj.v[k0:, j]
        swing = float(y.max() - y.min())
        if swing <= v_band:
            continue
        r = _lagged_correlation(y - y.mean())
        # step past the mainlobe: the first non-positive value or local minimum
        start = None
        for k in range(1, min(len(r) - 1, max_lag)):
            if r[k] <= 0.0 or (r[k] < r[k - 1] and r[k] <= r[k + 1]):
                start = k + 1
                break
        if start is None or start >= max_lag:
            continue
        k_peak = start + int(np.argmax(r[start:max_lag]))
        peak = float(r[k_peak])
        if peak < min_peak:
            continue
        period = float(traj.t[k0 + k_peak] - traj.t[k0])
        if best is None or peak > best.peak_corr:
            best = CycleInfo(node=name, period=period, peak_corr=peak, swing=swing)
    return best


def validate_truth_table(
    kind: Union[GateKind, str], in1: bool, in2: bool, out: bool
) -> bool:
    """True when the three logic levels satisfy the gate relation."""
    return (bool(in1), bool(in2), bool(out)) in gates.consistent_assignments(GateKind(kind))


@dataclass
class RunVerdict:
    status: str  # "solved" | "non_convergent" | "failed"
    bits: Optional[Dict[str, bool]]
    t_star: Optional[float]
    oscillatory: bool
    max_abs_i: float
    s_min: float
    s_max: float
    reset_count: int
    message: str = ""

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def make_verdict(
    result: RunResult,
    v_c: float = 1.0,
    v_band: float = 0.1,
    deriv_band: float = 1.0,
    hold: float = 0.05,
    cycle_window: Optional[float] = None,
) -> RunVerdict:
    """Classify a finished run: solved (every free node locked to a logic
    level), non-convergent (time ran out; flagged oscillatory when a limit
    cycle is visible in the tail), or failed (integration broke down)."""
    traj = result.trajectory
    if traj.n_samples:
        max_abs_i = float(np.abs(traj.i).max()) if traj.i.size else 0.0
        s_min = float(traj.s.min())
        s_max = float(traj.s.max())
        falling = (traj.s[:-1] > 0.5) & (traj.s[1:] <= 0.5)
        reset_count = int(np.count_nonzero(falling))
    else:
        max_abs_i, s_min, s_max, reset_count = 0.0, float("nan"), float("nan"), 0
    if result.outcome is Outcome.NUMERICAL_FAILURE:
        return RunVerdict(
            "failed", None, None, False, max_abs_i, s_min, s_max, reset_count,
            result.message,
        )
    t_star, bits = result.t_star, result.bits
    if t_star is None:
        t_star, bits = detect_equilibrium(
            traj, v_c=v_c, v_band=v_band, deriv_band=deriv_band, hold=hold
        )
    if t_star is not None:
        return RunVerdict(
            "solved", bits, t_star, False, max_abs_i, s_min, s_max, reset_count
        )
    cycle = None
    if traj.n_samples:
        span = float(traj.t[-1] - traj.t[0])
        window = 0.5 * span if cycle_window is None else cycle_window
        if 0.0 < window <= span:
            cycle = detect_limit_cycle(traj, window=window, v_band=v_band)
    return RunVerdict(
        "non_convergent", None, None, cycle is not None,
        max_abs_i, s_min, s_max, reset_count,
        f"no equilibrium; dominant cycle {cycle.period:.4g} s on {cycle.node}" if cycle else "no equilibrium",
    )


def relax_gate(
    kind: Union[GateKind, str],
    assignment: Tuple[bool, bool, bool],
    params: Optional[ParamSet] = None,
    t_max: float = 0.5,
    seed: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Clamp all three terminals of one gate at the given levels and let the
    internal memristors relax. Returns (final x, final current into each
    terminal)."""
    params = params or ParamSet()
    kind = GateKind(kind)
    in1, in2, out = assignment
    circuit = assemble(
        [(kind.value, "a", "b", "o")],
        clamps=[("a", bool(in1)), ("b", bool(in2)), ("o", bool(out))],
        params=params,
    )
    cfg = SolverConfig(t_max=t_max, seed=seed)
    result = run(circuit, cfg, early_stop=False)
    x_final = result.trajectory.x[-1]
    gate = circuit.gates[0]
    v = np.asarray(
        [params.v_c if lvl else -params.v_c for lvl in (in1, in2, out)]
    )
    cur = gates.terminal_current(gate.template, v, x_final, params.memristor())
    return x_final, cur


@dataclass
class IVSweep:
    t: np.ndarray
    v: np.ndarray
    i: np.ndarray
    x: np.ndarray

    def loop_area(self) -> float:
        """Absolute area enclosed in the (v, i) plane over the full sweep."""
        return abs(float(np.trapezoid(self.i, self.v)))


def _sine_exact(frac: np.ndarray, amplitude: float) -> np.ndarray:
    """One unit-period sine with exact 0.0 at every half-period boundary."""
    frac = np.mod(frac, 1.0)
    first = frac < 0.5
    out = np.empty_like(frac)
    out[first] = np.sin(np.pi * (2.0 * frac[first])) * amplitude
    out[~first] = -np.sin(np.pi * (2.0 * frac[~first] - 1.0)) * amplitude
    return out


def iv_sweep(
    params: Optional[ParamSet] = None,
    amplitude: float = 1.0,
    frequency: float = 1.0,
    cycles: int = 2,
    steps_per_cycle: int = 20000,
    x0: float = 0.5,
) -> IVSweep:
    """Drive a single memristor with a sinusoidal port voltage and record the
    pinched hysteresis loop. Fixed-step 4th-order integration of the state;
    the port current is v/M(x) at each sample."""
    params = params or ParamSet()
    if amplitude <= 0 or frequency <= 0 or cycles < 1 or steps_per_cycle < 8:
        raise ValueError("need positive drive and at least 8 steps per cycle")
    p = params.memristor()
    n = cycles * steps_per_cycle
    tt = np.arange(n + 1) / (frequency * steps_per_cycle)
    vv = _sine_exact(np.arange(n + 1) / steps_per_cycle, amplitude)
    dt = tt[1] - tt[0]
    xx = np.empty(n + 1)
    xx[0] = x0

    def f(x: float, v: float) -> float:
        return devices.memristor_rate(np.clip(x, 0.0, 1.0), v, p)

    for k in range(n):
        # drive value at the half step, synthesized the same exact way
        vh = _sine_exact(np.asarray([(k + 0.5) / steps_per_cycle]), amplitude)[0]
        x = xx[k]
        v1, v2 = vv[k], vv[k + 1]
        k1 = f(x, v1)
        k2 = f(x + 0.5 * dt * k1, vh)
        k3 = f(x + 0.5 * dt * k2, vh)
        k4 = f(x + dt * k3, v2)
        xx[k + 1] = np.clip(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0.0, 1.0)

    ii = vv / (p.r_on + (p.r_off - p.r_on) * xx)
    return IVSweep(t=tt, v=vv, i=ii, x=xx)


def fs_root_profile(
    params: Optional[ParamSet] = None,
    regime: str = "between",
    span: Tuple[float, float] = (-1.0, 2.0),
    grid: int = 3001,
) -> List[float]:
    """Roots of the gating-state rate over `span` for a synthetic current
    pattern: 'below' (every generator under the low threshold), 'between'
    (at least one in the normal range), 'above' (at least one over the high
    threshold). Bisection on a sign-change scan."""
    params = params or ParamSet()
    if regime == "below":
        i_all = np.asarray([0.0, params.i_min * 0.5])
    elif regime == "between":
        i_all = np.asarray([0.0, 1.0])
    elif regime == "above":
        i_all = np.asarray([0.0, params.i_max * 1.5])
    else:
        raise ValueError(f"regime must be below/between/above, not {regime!r}")

    sb = params.sblock()

    def f(s: float) -> float:
        return devices.f_s(i_all, s, sb)

    ss = np.linspace(span[0], span[1], grid)
    vals = np.asarray([f(s) for s in ss])
    roots: List[float] = []
    for k in range(len(ss) - 1):
        a, b, fa, fb = ss[k], ss[k + 1], vals[k], vals[k + 1]
        if fa == 0.0:
            roots.append(float(a))
            continue
        if fa * fb < 0.0:
            for _ in range(80):
                m = 0.5 * (a + b)
                fm = f(m)
                if fm == 0.0:
                    a = b = m
                    break
                if fa * fm < 0.0:
                    b, fb = m, fm
                else:
                    a, fa = m, fm
            roots.append(0.5 * (a + b))
    if vals[-1] == 0.0:
        roots.append(float(ss[-1]))
    # merge grid-edge duplicates
    merged: List[float] = []
    for r in roots:
        if not merged or abs(r - merged[-1]) > 1e-9:
            merged.append(r)
    return merged
