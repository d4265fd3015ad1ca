"""Behavioral acceptance gate for the whole package.

Nine checks, each printing one `[PASS]`/`[FAIL]` line with its wall time and
budget. They exercise the public surface only: device boxing and pinched
hysteresis, the switch-rate fixed points, per-gate consistency currents,
forward and reverse gate operation, factorization of 4-bit products, the
known non-convergent product, agreement with an independent fixed-step
integration, and byte-level replay determinism.
"""

import json
import sys
import time

import numpy as np
import pytest

from solg import analysis, solver
from solg.circuit import (
    MULTIPLIER_PROBES,
    assemble,
    build_multiplier,
    decode_factors,
)
from solg.cli import main
from solg.devices import ParamSet
from solg.solver import SolverConfig, compile_circuit, initial_state, memristor_port_values

from reference_rk4 import run_reverse_or

PARAMS = ParamSet()
PAIRS = ((False, False), (False, True), (True, False), (True, True))


@pytest.fixture
def report(capsys):
    """One visible pass/fail line per criterion, bypassing output capture."""

    def _report(tag: str, ok: bool, detail: str, t0: float, budget: float) -> str:
        elapsed = time.time() - t0
        line = (f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail} "
                f"({elapsed:.1f}s, budget {budget:.0f}s)")
        with capsys.disabled():
            print(line, file=sys.__stdout__, flush=True)
        assert elapsed < budget, f"over budget: {line}"
        return line

    return _report


def test_accept_state_boxing_and_pinch(report):
    t0 = time.time()
    rng = np.random.default_rng(20260817)
    zero_ports = 0

    for _ in range(8000):
        sweep = analysis.iv_sweep(
            PARAMS,
            amplitude=float(rng.uniform(0.1, 3.0)),
            frequency=float(10 ** rng.uniform(-0.5, 3.5)),
            cycles=1,
            steps_per_cycle=int(rng.integers(8, 64)),
            x0=float(rng.uniform(0.0, 1.0)),
        )
        assert sweep.x.min() >= 0.0 and sweep.x.max() <= 1.0
        at0 = sweep.v == 0.0
        zero_ports += int(at0.sum())
        assert np.all(sweep.i[at0] == 0.0)

    systems = []
    for kind in ("and", "or", "xor"):
        for clamp_nodes in (("O",), ("A", "B"), ("B",), ("A", "B", "O")):
            c = assemble([(kind, "A", "B", "O")],
                         clamps=[(n, False) for n in clamp_nodes])
            systems.append((c, compile_circuit(c)))
    for _ in range(2000):
        circuit, system = systems[int(rng.integers(len(systems)))]
        system.set_clamp_levels({nid: bool(rng.integers(2)) for nid in circuit.clamps})
        cfg = SolverConfig(t_max=float(rng.uniform(0.002, 0.01)),
                           seed=int(rng.integers(1 << 30)))
        traj = solver.run(system, cfg, early_stop=False).trajectory
        assert traj.x.min() >= 0.0 and traj.x.max() <= 1.0
        for j in range(traj.n_samples):
            vm, cur = memristor_port_values(system, traj.v[j], traj.x[j])
            at0 = vm == 0.0
            zero_ports += int(at0.sum())
            assert np.all(cur[at0] == 0.0)

    report("1/9 state boxing and pinch", True,
            f"10000 runs, x within [0,1], {zero_ports} zero-bias ports at zero current",
            t0, 60.0)


def test_accept_switch_rate_root_profile(report):
    t0 = time.time()
    profiles = {}
    ok = True
    for regime in ("below", "between", "above"):
        coarse = analysis.fs_root_profile(PARAMS, regime=regime, grid=3001)
        fine = analysis.fs_root_profile(PARAMS, regime=regime, grid=6001)
        stable = len(coarse) == len(fine) and np.allclose(coarse, fine, atol=1e-6)
        profiles[regime] = coarse
        ok &= stable
    ok &= len(profiles["below"]) == 1 and profiles["below"][0] > 1.0
    ok &= len(profiles["between"]) == 3
    ok &= len(profiles["above"]) == 1 and profiles["above"][0] < 0.0
    detail = "; ".join(
        f"{reg}: {['%.4f' % r for r in roots]}" for reg, roots in profiles.items()
    )
    report("2/9 switch-rate fixed points", ok, detail, t0, 1.0)
    assert ok, profiles


def _truth(kind: str, a: bool, b: bool) -> bool:
    return {"and": a and b, "or": a or b, "xor": a != b}[kind]


def test_accept_consistency_currents(report):
    t0 = time.time()
    quiet = 1e-3 * PARAMS.v_c / PARAMS.r_off
    loud = 0.1 * PARAMS.v_c / PARAMS.r_on
    bad = []
    for kind in ("and", "or", "xor"):
        for code in range(8):
            levels = (bool(code & 4), bool(code & 2), bool(code & 1))
            _, cur = analysis.relax_gate(kind, levels, PARAMS, t_max=1.0)
            v = np.array([PARAMS.v_c if lvl else -PARAMS.v_c for lvl in levels])
            if _truth(kind, *levels[:2]) == levels[2]:
                if not np.abs(cur).max() < quiet:
                    bad.append((kind, levels, "residual", float(np.abs(cur).max())))
            else:
                opposing = (np.abs(cur) > loud) & (np.sign(cur) == -np.sign(v))
                if not opposing.any():
                    bad.append((kind, levels, "no pushback", float(np.abs(cur).max())))
    report("3/9 consistency currents", not bad,
            f"24 clamped assignments, {len(bad)} violations", t0, 120.0)
    assert not bad, bad


def test_accept_direct_or_schedule(report):
    t0 = time.time()
    circuit = assemble([("or", "A", "B", "O")],
                       clamps=[("A", False), ("B", False)], probes=["O"])
    schedule = [(k * 0.5, {"A": a, "B": b}) for k, (a, b) in enumerate(PAIRS) if k > 0]
    fails = []
    for seed in range(20):
        traj = solver.run(circuit, SolverConfig(t_max=2.0, seed=seed),
                          schedule=schedule).trajectory
        v_o = traj.column("O")
        for k, (a, b) in enumerate(PAIRS):
            t_star, _ = analysis.detect_equilibrium(
                traj, v_c=PARAMS.v_c, t_start=k * 0.5, t_end=(k + 1) * 0.5)
            want = PARAMS.v_c if (a or b) else -PARAMS.v_c
            j_end = np.searchsorted(traj.t, (k + 1) * 0.5, side="right") - 1
            level_ok = abs(float(v_o[j_end]) - want) < 0.1
            settle_ok = t_star is not None and t_star - k * 0.5 <= 0.5
            if not (level_ok and settle_ok):
                fails.append((seed, (int(a), int(b)), t_star, float(v_o[j_end])))
    report("4/9 forward OR input sweep", not fails,
            f"20 seeds x 4 input pairs, {len(fails)} segment failures", t0, 300.0)
    assert not fails, fails


def test_accept_reverse_or_solutions(report):
    t0 = time.time()
    counts = {}
    bad = []
    for out_level, allowed in ((True, {(1, 1), (1, -1), (-1, 1)}),
                               (False, {(-1, -1)})):
        circuit = assemble([("or", "A", "B", "O")],
                           clamps=[("O", out_level)], probes=["A", "B"])
        solved = 0
        for seed in range(50):
            result = solver.run(
                circuit, SolverConfig(t_max=3.0, seed=seed, x_init=(0.0, 1.0)))
            verdict = analysis.make_verdict(result, v_c=PARAMS.v_c)
            if not verdict.solved:
                continue
            solved += 1
            pair = (1 if verdict.bits["A"] else -1, 1 if verdict.bits["B"] else -1)
            if pair not in allowed:
                bad.append((out_level, seed, pair))
        counts[out_level] = solved
    ok = not bad and counts[True] >= 40 and counts[False] >= 40
    report("5/9 reverse OR solutions", ok,
            f"solved high {counts[True]}/50, low {counts[False]}/50, "
            f"{len(bad)} off-table assignments", t0, 600.0)
    assert ok, (counts, bad)


def _factor_runs(product: int, seeds: range, t_max: float = 10.0):
    """(solved count, wrong decodes) at factory defaults over the seeds."""
    circuit = build_multiplier(product, PARAMS)
    solved, wrong = 0, []
    for seed in seeds:
        result = solver.run(circuit, SolverConfig(t_max=t_max, seed=seed))
        verdict = analysis.make_verdict(result, v_c=PARAMS.v_c)
        if not verdict.solved:
            continue
        names = result.trajectory.node_names
        volts = [float(result.trajectory.v[-1, names.index(n)])
                 for n in MULTIPLIER_PROBES]
        a, b = decode_factors(volts, v_c=PARAMS.v_c)
        if a * b == product:
            solved += 1
        else:
            wrong.append((seed, (a, b)))
    return solved, wrong


def test_accept_factorization(report):
    t0 = time.time()
    rates = {}
    wrong = {}
    for product in (2, 3, 4, 6, 9):
        solved, bad = _factor_runs(product, range(20))
        rates[product] = solved
        if bad:
            wrong[product] = bad
    pooled = sum(rates.values())
    ok = not wrong and all(n >= 10 for n in rates.values())
    detail = (" ".join(f"{p}:{n}/20" for p, n in sorted(rates.items()))
              + f", pooled {pooled}/100, wrong decodes {sum(map(len, wrong.values()))}")
    report("6/9 factorization", ok, detail, t0, 1800.0)
    assert ok, (rates, wrong)


def test_accept_product_one_limit_cycle(report):
    t0 = time.time()
    circuit = build_multiplier(1, PARAMS)
    cycles = 0
    solved_pairs = []
    for seed in range(20):
        result = solver.run(circuit, SolverConfig(t_max=10.0, seed=seed))
        verdict = analysis.make_verdict(result, v_c=PARAMS.v_c)
        if verdict.status == "non_convergent" and verdict.oscillatory:
            cycles += 1
        elif verdict.solved:
            names = result.trajectory.node_names
            volts = [float(result.trajectory.v[-1, names.index(n)])
                     for n in MULTIPLIER_PROBES]
            solved_pairs.append(decode_factors(volts, v_c=PARAMS.v_c))
    ok = cycles >= 1 and all(pair == (1, 1) for pair in solved_pairs)
    report("7/9 product 1 limit cycle", ok,
            f"{cycles}/20 oscillatory, solved decodes {solved_pairs or 'none'}",
            t0, 900.0)
    assert ok, (cycles, solved_pairs)


def test_accept_adaptive_matches_reference(report):
    t0 = time.time()
    circuit = assemble([("or", "A", "B", "O")],
                       clamps=[("O", True)], probes=["A", "B"])
    system = compile_circuit(circuit)
    worst = 0.0
    for seed in range(5):
        cfg = SolverConfig(t_max=0.5, seed=seed, sample_dt=1e-3)
        x0 = initial_state(system, cfg).x
        traj = solver.run(system, cfg, early_stop=False).trajectory
        t_ref, v_ref = run_reverse_or(x0, out_level=True, t_max=0.5,
                                      dt=1e-7, sample_dt=1e-3)
        assert traj.n_samples == len(t_ref)
        gap = max(
            float(np.abs(traj.column("A") - v_ref[:, 0]).max()),
            float(np.abs(traj.column("B") - v_ref[:, 1]).max()),
        )
        worst = max(worst, gap)
    ok = worst <= 1e-3
    report("8/9 independent integrator agreement", ok,
            f"5 seeds, worst node-voltage gap {worst:.3g} V", t0, 120.0)
    assert ok, worst


def test_accept_replay_determinism(tmp_path, report):
    t0 = time.time()
    net = tmp_path / "net.sl"
    net.write_text("in O 1\nor A B O\nprobe A\nprobe B\n")
    d1, d2, d3 = (str(tmp_path / n) for n in ("d1", "d2", "d3"))
    assert main(["run", str(net), "--full", "--out", d1]) == 0
    assert main(["run", "--replay", f"{d1}/manifest.json", "--out", d2]) == 0
    assert main(["run", "--replay", f"{d2}/manifest.json", "--out", d3]) == 0
    rows = [open(f"{d}/trajectory.csv", "rb").read() for d in (d1, d2, d3)]
    ok = rows[0] == rows[1] == rows[2]
    n_lines = rows[0].count(b"\n")
    report("9/9 replay determinism", ok,
            f"3 invocations, {n_lines} CSV rows byte-identical", t0, 60.0)
    assert ok
