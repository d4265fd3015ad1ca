import numpy as np
import pytest

from solg.analysis import (
    detect_equilibrium,
    detect_limit_cycle,
    fs_root_profile,
    iv_sweep,
    make_verdict,
    relax_gate,
    validate_truth_table,
)
from solg.devices import ParamSet
from solg.solver import Outcome, RunResult, Trajectory

P = ParamSet()


def synth_traj(t, v_free, s=None, n_gen=1):
    """Single-free-node trajectory from plain arrays."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v_free, dtype=float).reshape(len(t), 1)
    return Trajectory(
        t=t,
        v=v,
        x=np.zeros((len(t), 0)),
        i=np.zeros((len(t), n_gen)),
        s=np.ones(len(t)) if s is None else np.asarray(s, dtype=float),
        node_names=["A"],
        free_nodes=np.array([0]),
    )


# -- equilibrium detection ----------------------------------------------------


def test_equilibrium_constant_fires_at_start():
    t = np.arange(0.0, 0.2, 1e-3)
    t_star, bits = detect_equilibrium(synth_traj(t, np.full_like(t, -0.95)))
    assert t_star == 0.0
    assert bits == {"A": False}


def test_equilibrium_none_for_oscillation():
    t = np.arange(0.0, 1.0, 1e-3)
    v = np.sin(2 * np.pi * t / 0.2)
    t_star, bits = detect_equilibrium(synth_traj(t, v))
    assert t_star is None and bits is None


def test_equilibrium_detects_parking_time():
    t = np.arange(0.0, 1.0, 1e-3)
    # slews from 0 to 1 V during [0.2, 0.3], parked afterwards
    v = np.clip((t - 0.2) * 10.0, 0.0, 1.0)
    t_star, bits = detect_equilibrium(synth_traj(t, v))
    assert t_star == pytest.approx(0.3, abs=5e-3)
    assert bits == {"A": True}


def test_equilibrium_window_restriction():
    t = np.arange(0.0, 1.0, 1e-3)
    v = np.clip((t - 0.2) * 10.0, 0.0, 1.0)
    traj = synth_traj(t, v)
    t_star, _ = detect_equilibrium(traj, t_start=0.5)
    assert t_star == pytest.approx(0.5, abs=5e-3)
    t_star, _ = detect_equilibrium(traj, t_end=0.25)
    assert t_star is None
    t_star, _ = detect_equilibrium(traj, t_start=0.3, t_end=0.4)
    assert t_star == pytest.approx(0.3, abs=5e-3)


def test_equilibrium_empty_trajectory():
    traj = synth_traj(np.array([]), np.array([]))
    assert detect_equilibrium(traj) == (None, None)


# -- limit-cycle detection ----------------------------------------------------


def test_limit_cycle_found_with_period():
    t = np.arange(0.0, 1.0 + 1e-12, 1e-3)
    v = np.sin(2 * np.pi * t / 0.2)
    info = detect_limit_cycle(synth_traj(t, v), window=0.5)
    assert info is not None
    assert info.node == "A"
    assert info.period == pytest.approx(0.2, abs=2e-3)
    assert info.peak_corr > 0.99
    assert info.swing == pytest.approx(2.0, abs=0.01)


def test_limit_cycle_ignores_settled_signal():
    t = np.arange(0.0, 1.0, 1e-3)
    assert detect_limit_cycle(synth_traj(t, np.full_like(t, 0.97)), window=0.5) is None


def test_limit_cycle_ignores_small_ripple():
    t = np.arange(0.0, 1.0, 1e-3)
    v = 0.9 + 0.01 * np.sin(2 * np.pi * t / 0.2)  # swing below the band
    assert detect_limit_cycle(synth_traj(t, v), window=0.5) is None


def test_limit_cycle_needs_span():
    t = np.arange(0.0, 0.3, 1e-3)
    with pytest.raises(ValueError, match="window"):
        detect_limit_cycle(synth_traj(t, np.sin(60 * t)), window=0.5)


def test_limit_cycle_too_few_samples():
    t = np.arange(0.0, 1.0, 0.1)
    assert detect_limit_cycle(synth_traj(t, np.sin(60 * t)), window=0.5) is None


# -- truth tables -------------------------------------------------------------


def test_validate_truth_table_exhaustive():
    ops = {"and": lambda a, b: a and b, "or": lambda a, b: a or b,
           "xor": lambda a, b: a != b}
    for kind, op in ops.items():
        for a in (False, True):
            for b in (False, True):
                for o in (False, True):
                    assert validate_truth_table(kind, a, b, o) == (op(a, b) == o)


# -- verdicts -----------------------------------------------------------------


def test_verdict_failed_passes_message_through():
    traj = synth_traj(np.array([]), np.array([]))
    v = make_verdict(RunResult(traj, Outcome.NUMERICAL_FAILURE, message="boom"))
    assert v.status == "failed"
    assert not v.solved
    assert v.message == "boom"


def test_verdict_solved_from_detection():
    t = np.arange(0.0, 0.5, 1e-3)
    traj = synth_traj(t, np.full_like(t, 0.93))
    v = make_verdict(RunResult(traj, Outcome.MAX_TIME))
    assert v.status == "solved"
    assert v.t_star == 0.0
    assert v.bits == {"A": True}
    assert not v.oscillatory


def test_verdict_oscillatory_with_reset_count():
    t = np.arange(0.0, 1.0 + 1e-12, 1e-3)
    vv = np.sin(2 * np.pi * t / 0.25)
    s = np.where(np.sin(2 * np.pi * t / 0.5) > -0.9, 1.0, 0.1)  # two dips
    v = make_verdict(RunResult(synth_traj(t, vv, s=s), Outcome.MAX_TIME))
    assert v.status == "non_convergent"
    assert v.oscillatory
    assert "cycle" in v.message
    assert v.reset_count == 2
    assert v.s_min == pytest.approx(0.1)
    assert v.s_max == pytest.approx(1.0)


def test_verdict_non_convergent_quiet():
    t = np.arange(0.0, 0.5, 1e-3)
    v = make_verdict(RunResult(synth_traj(t, np.full_like(t, 0.4)), Outcome.MAX_TIME))
    assert v.status == "non_convergent"
    assert not v.oscillatory
    assert v.message == "no equilibrium"


# -- single-gate relaxation ---------------------------------------------------


def test_relax_gate_consistent_quiets_down():
    x, cur = relax_gate("or", (True, False, True), t_max=1.0)
    assert ((x >= 0.0) & (x <= 1.0)).all()
    assert np.abs(cur).max() < 1e-3 * P.v_c / P.r_off


def test_relax_gate_inconsistent_pushes_back():
    _, cur = relax_gate("or", (False, False, True), t_max=1.0)
    v = np.array([-P.v_c, -P.v_c, P.v_c])
    big = np.abs(cur) > 0.1 * P.v_c / P.r_on
    assert big.any()
    assert (np.sign(cur[big]) == -np.sign(v[big])).all()


# -- memristor hysteresis sweep -----------------------------------------------


def test_iv_sweep_pinched_at_origin():
    sw = iv_sweep(cycles=1, steps_per_cycle=4000)
    zeros = sw.v == 0.0
    assert zeros.sum() >= 3  # start, half period, end
    assert (sw.i[zeros] == 0.0).all()
    assert ((sw.x >= 0.0) & (sw.x <= 1.0)).all()
    assert np.abs(sw.i).max() <= 1.0 / P.r_on + 1e-12


def test_iv_sweep_x0_start():
    sw = iv_sweep(cycles=1, steps_per_cycle=4000, x0=0.3)
    assert sw.x[0] == 0.3


def test_iv_sweep_area_peaks_at_state_rate():
    # the lobe area vanishes in both limits: an instantaneously switching
    # resistor at low frequency, a frozen state at high frequency. The state
    # slews at about alpha/M ~ 1e2 per second, so the loop peaks near there.
    a = {
        f: iv_sweep(frequency=f, cycles=1, steps_per_cycle=4000).loop_area()
        for f in (1.0, 10.0, 100.0, 1000.0)
    }
    assert 0.0 < a[1.0] < a[10.0] < a[100.0]
    assert a[1000.0] < 0.01 * a[100.0]


def test_iv_sweep_validation():
    with pytest.raises(ValueError):
        iv_sweep(amplitude=0.0)
    with pytest.raises(ValueError):
        iv_sweep(frequency=-1.0)
    with pytest.raises(ValueError):
        iv_sweep(cycles=0)
    with pytest.raises(ValueError):
        iv_sweep(steps_per_cycle=4)


# -- gating-state root profile ------------------------------------------------


def _real_roots(coeffs):
    rr = np.roots(coeffs)
    return sorted(float(r.real) for r in rr if abs(r.imag) < 1e-12)


def test_fs_roots_below_regime():
    roots = fs_root_profile(regime="below")
    # rate = -k_s * s(s-1)(2s-1) + k_i with k_s = k_i: root of 2s^3-3s^2+s-1
    expect = _real_roots([2.0, -3.0, 1.0, -1.0])
    assert len(roots) == 1 and len(expect) == 1
    assert roots[0] == pytest.approx(expect[0], abs=1e-6)
    assert roots[0] > 1.0


def test_fs_roots_between_regime():
    roots = fs_root_profile(regime="between")
    assert roots == pytest.approx([0.0, 0.5, 1.0], abs=1e-9)


def test_fs_roots_above_regime():
    roots = fs_root_profile(regime="above")
    expect = _real_roots([2.0, -3.0, 1.0, 1.0])
    assert len(roots) == 1 and len(expect) == 1
    assert roots[0] == pytest.approx(expect[0], abs=1e-6)
    assert roots[0] < 0.0


def test_fs_roots_stable_under_grid_refinement():
    for regime in ("below", "between", "above"):
        a = fs_root_profile(regime=regime, grid=3001)
        b = fs_root_profile(regime=regime, grid=6001)
        assert len(a) == len(b)
        assert a == pytest.approx(b, abs=1e-6)


def test_fs_roots_regime_validation():
    with pytest.raises(ValueError, match="regime"):
        fs_root_profile(regime="sideways")
