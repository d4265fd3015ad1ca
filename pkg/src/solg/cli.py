"""Command-line front end.

Subcommands:
    run         simulate a netlist file (or replay a manifest)
    gate        one gate, driven forward (inputs clamped) or in reverse
    multiplier  factor a 4-bit product on the two-bit multiplier network
    iv          hysteresis sweep of a single memristor

Exit codes: 0 solved / sweep complete, 2 did not converge, 1 error.

With --out DIR every simulation writes trajectory.csv, summary.txt and
manifest.json; `run --replay manifest.json` reproduces the trajectory file
byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, analysis, solver
from .circuit import (
    MULTIPLIER_PROBES,
    Circuit,
    CircuitError,
    NotConverged,
    decode_factors,
    product_bits,
)
from .devices import ParamSet
from .netlist import Netlist, NetlistError, format_netlist, parse_netlist
from .solver import BACKEND, Outcome, RunResult, SolverConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, like every other error
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_shared(p: argparse.ArgumentParser, tmax: Optional[float]) -> None:
    p.add_argument("--tmax", type=float, default=tmax, help="simulated seconds")
    p.add_argument("--seed", type=int, default=0, help="initial-state seed")
    p.add_argument("--out", metavar="DIR", help="write trajectory.csv, summary.txt, manifest.json")
    p.add_argument("--full", action="store_true",
                   help="record every node, memristor state and generator current")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="override a device parameter (repeatable)")
    p.add_argument("--x-init", metavar="LO,HI", default=None,
                   help="memristor initial-state range (default 0.18,0.22)")
    p.add_argument("--smooth", type=float, default=0.0, metavar="EPS",
                   help="replace step functions with logistic ramps of width EPS")
    p.add_argument("--backend", choices=("python", "compiled"), default=None,
                   help="stepping kernel (default: compiled when built)")


def _build_parser() -> _Parser:
    top = _Parser(prog="solg", description=__doc__.split("\n\n")[0])
    top.add_argument("--version", action="version", version=f"solg {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a netlist file")
    p.add_argument("netlist", nargs="?", help="netlist path")
    p.add_argument("--replay", metavar="MANIFEST", help="re-run a recorded manifest.json")
    _add_shared(p, tmax=3.0)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("gate", help="single-gate run, forward or reverse")
    p.add_argument("kind", choices=("and", "or", "xor"))
    p.add_argument("--mode", choices=("reverse", "direct"), default="reverse",
                   help="reverse: clamp the output, solve for inputs (default); "
                        "direct: clamp the inputs")
    p.add_argument("--out-level", choices=("0", "1"), default="1",
                   help="output clamp level in reverse mode")
    p.add_argument("--clamp", action="append", default=[], metavar="NODE=0|1",
                   help="extra clamp (nodes are A, B, O); in direct mode, giving "
                        "A and B skips the built-in input schedule")
    p.add_argument("--period", type=float, default=0.5,
                   help="seconds per input pair in the direct-mode schedule")
    p.add_argument("--runs", type=int, default=1, help="repeat with seeds seed..seed+runs-1")
    _add_shared(p, tmax=None)
    p.set_defaults(func=_cmd_gate)

    p = sub.add_parser("multiplier", help="factor a product of two 2-bit integers")
    p.add_argument("product", type=int, help="product to factor (1,2,3,4,6,9)")
    p.add_argument("--runs", type=int, default=1, help="repeat with seeds seed..seed+runs-1")
    _add_shared(p, tmax=10.0)
    p.set_defaults(func=_cmd_multiplier)

    p = sub.add_parser("iv", help="single-memristor hysteresis sweep")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--frequency", type=float, default=1.0)
    p.add_argument("--cycles", type=int, default=2)
    p.add_argument("--steps", type=int, default=20000, help="integration steps per cycle")
    p.add_argument("--x0", type=float, default=0.5, help="initial memristor state")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=_cmd_iv)

    return top


def _parse_overrides(items: Sequence[str]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    valid = ParamSet.names()
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--param expects NAME=VALUE, got {item!r}")
        if name not in valid:
            raise ValueError(f"unknown parameter {name!r} (choose from {', '.join(valid)})")
        try:
            out[name] = float(value)
        except ValueError:
            raise ValueError(f"bad numeric value for {name!r}: {value!r}") from None
    return out


def _parse_clamps(items: Sequence[str], allowed: Sequence[str]) -> List[Tuple[str, bool]]:
    out: List[Tuple[str, bool]] = []
    for item in items:
        node, sep, level = item.partition("=")
        if not sep or level not in ("0", "1"):
            raise ValueError(f"--clamp expects NODE=0|1, got {item!r}")
        if node not in allowed:
            raise ValueError(f"unknown gate node {node!r} (choose from {', '.join(allowed)})")
        out.append((node, level == "1"))
    return out


def _build_cfg(args, t_max: float, seed: Optional[int] = None) -> SolverConfig:
    kw = {"t_max": t_max, "seed": args.seed if seed is None else seed,
          "smoothing_eps": args.smooth}
    if args.x_init:
        try:
            lo, hi = (float(tok) for tok in args.x_init.split(","))
        except ValueError:
            raise ValueError(f"--x-init expects LO,HI, got {args.x_init!r}") from None
        kw["x_init"] = (lo, hi)
    return SolverConfig(**kw)


def _effective_backend(args) -> str:
    if args.backend == "compiled" and BACKEND != "compiled":
        raise ValueError("compiled backend requested but the extension is not built")
    return args.backend or BACKEND


Schedule = List[Tuple[float, Dict[str, bool]]]


def _resolved_netlist(nl: Netlist, overrides: Dict[str, float]) -> Tuple[Netlist, ParamSet]:
    """Fold CLI overrides into the netlist and pin every parameter value, so
    the emitted netlist alone reproduces the run."""
    merged = dict(nl.params)
    merged.update(overrides)
    params = ParamSet().replace(**merged)
    full_params = {name: getattr(params, name) for name in ParamSet.names()}
    return Netlist(full_params, list(nl.inputs), list(nl.gates), list(nl.probes)), params


def _simulate(nl: Netlist, cfg: SolverConfig, schedule: Optional[Schedule],
              backend: str) -> Tuple[Circuit, RunResult]:
    circuit = nl.to_circuit()
    result = solver.run(circuit, cfg, schedule=schedule,
                        backend=(backend if backend != BACKEND else None))
    return circuit, result


def _make_manifest(
    command: str,
    netlist_text: str,
    params: ParamSet,
    cfg: SolverConfig,
    schedule: Optional[Schedule],
    probes: List[str],
    full: bool,
    backend: str,
) -> dict:
    cfg_dict = dataclasses.asdict(cfg)
    cfg_dict["x_init"] = list(cfg_dict["x_init"])
    return {
        "tool": "solg",
        "version": __version__,
        "command": command,
        "netlist": netlist_text,
        "netlist_sha256": hashlib.sha256(netlist_text.encode()).hexdigest(),
        "params": dataclasses.asdict(params),
        "solver": cfg_dict,
        "schedule": [[t, dict(levels)] for t, levels in schedule] if schedule else None,
        "probes": probes,
        "full": full,
        "backend": backend,
    }


def _csv_text(traj: solver.Trajectory, probes: Sequence[str], full: bool) -> str:
    names = traj.node_names
    if full:
        v_cols = list(range(len(names)))
    else:
        v_cols = [names.index(p) for p in probes]
    header = ["t"] + [f"v:{names[j]}" for j in v_cols]
    if full:
        header += [f"x:{k}" for k in range(traj.x.shape[1])]
        header += [f"i:{names[traj.free_nodes[g]]}" for g in range(traj.i.shape[1])]
        header += ["s"]
    lines = [",".join(header)]
    for k in range(traj.n_samples):
        row = [repr(float(traj.t[k]))]
        row += [repr(float(traj.v[k, j])) for j in v_cols]
        if full:
            row += [repr(float(val)) for val in traj.x[k]]
            row += [repr(float(val)) for val in traj.i[k]]
            row.append(repr(float(traj.s[k])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _summary_text(pairs: Sequence[Tuple[str, object]]) -> str:
    def fmt(v: object) -> str:
        if isinstance(v, bool):
            return "1" if v else "0"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    return "".join(f"{k}={fmt(v)}\n" for k, v in pairs)


def _verdict_summary(verdict: analysis.RunVerdict, result: RunResult) -> List[Tuple[str, object]]:
    pairs: List[Tuple[str, object]] = [
        ("status", verdict.status),
        ("outcome", result.outcome.value),
        ("t_star", "" if verdict.t_star is None else verdict.t_star),
        ("oscillatory", verdict.oscillatory),
        ("max_abs_i", verdict.max_abs_i),
        ("s_min", verdict.s_min),
        ("s_max", verdict.s_max),
        ("reset_count", verdict.reset_count),
    ]
    if verdict.bits:
        pairs += [(f"bit:{n}", lvl) for n, lvl in sorted(verdict.bits.items())]
    if verdict.message:
        pairs.append(("message", verdict.message))
    return pairs


def _write_sim(
    outdir: str,
    command: str,
    nl: Netlist,
    circuit: Circuit,
    cfg: SolverConfig,
    schedule: Optional[Schedule],
    full: bool,
    backend: str,
    result: RunResult,
    summary_pairs: Sequence[Tuple[str, object]],
) -> None:
    probes = list(circuit.probes) or list(circuit.node_names)
    manifest = _make_manifest(command, format_netlist(nl), circuit.params, cfg,
                              schedule, probes, full, backend)
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "trajectory.csv"), "w") as fh:
        fh.write(_csv_text(result.trajectory, probes, full))
    with open(os.path.join(outdir, "summary.txt"), "w") as fh:
        fh.write(_summary_text(summary_pairs))
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _simulate_and_write(
    command: str,
    nl: Netlist,
    cfg: SolverConfig,
    schedule: Optional[Schedule],
    full: bool,
    backend: str,
    outdir: Optional[str],
    extra_summary: Sequence[Tuple[str, object]] = (),
) -> Tuple[RunResult, analysis.RunVerdict]:
    circuit, result = _simulate(nl, cfg, schedule, backend)
    verdict = analysis.make_verdict(result, v_c=circuit.params.v_c)
    if outdir:
        pairs = list(_verdict_summary(verdict, result)) + list(extra_summary)
        _write_sim(outdir, command, nl, circuit, cfg, schedule, full, backend,
                   result, pairs)
    return result, verdict


def _exit_code(verdict: analysis.RunVerdict) -> int:
    if verdict.status == "solved":
        return 0
    if verdict.status == "failed":
        return 1
    return 2


def _print_verdict(verdict: analysis.RunVerdict) -> None:
    if verdict.status == "solved":
        bits = " ".join(f"{n}={1 if lvl else 0}" for n, lvl in sorted(verdict.bits.items()))
        print(f"solved t*={verdict.t_star:.6g} {bits}".rstrip())
    elif verdict.status == "non_convergent":
        tag = " (limit cycle)" if verdict.oscillatory else ""
        print(f"did not converge{tag}: {verdict.message}")
    else:
        print(f"integration failed: {verdict.message}")


def _cmd_run(args) -> int:
    if bool(args.netlist) == bool(args.replay):
        raise ValueError("run needs a netlist path or --replay MANIFEST, not both")
    if args.replay:
        with open(args.replay) as fh:
            manifest = json.load(fh)
        text = manifest["netlist"]
        digest = hashlib.sha256(text.encode()).hexdigest()
        if digest != manifest["netlist_sha256"]:
            raise ValueError("manifest netlist does not match its recorded sha256")
        nl = parse_netlist(text)
        cfg_dict = dict(manifest["solver"])
        cfg_dict["x_init"] = tuple(cfg_dict["x_init"])
        cfg = SolverConfig(**cfg_dict)
        schedule = (
            [(float(t), {n: bool(l) for n, l in levels.items()})
             for t, levels in manifest["schedule"]]
            if manifest.get("schedule")
            else None
        )
        backend = manifest.get("backend", BACKEND)
        if backend == "compiled" and BACKEND != "compiled":
            raise ValueError("manifest was recorded with the compiled backend, which is not built")
        result, verdict = _simulate_and_write(
            manifest.get("command", "run"), nl, cfg, schedule,
            bool(manifest.get("full")), backend, args.out,
        )
    else:
        with open(args.netlist) as fh:
            nl = parse_netlist(fh.read())
        nl, _ = _resolved_netlist(nl, _parse_overrides(args.param))
        cfg = _build_cfg(args, args.tmax)
        result, verdict = _simulate_and_write(
            "run", nl, cfg, None, args.full, _effective_backend(args), args.out,
        )
    _print_verdict(verdict)
    return _exit_code(verdict)


_GATE_NODES = ("A", "B", "O")

_DIRECT_PAIRS = ((False, False), (False, True), (True, False), (True, True))


def _gate_truth(kind: str, a: bool, b: bool) -> bool:
    if kind == "and":
        return a and b
    if kind == "or":
        return a or b
    return a != b


def _check_gate_bits(kind: str, clamps: Dict[str, bool], bits: Optional[Dict[str, bool]]) -> bool:
    if bits is None:
        return False
    levels = dict(clamps)
    levels.update(bits)
    return _gate_truth(kind, levels["A"], levels["B"]) == levels["O"]


def _run_dir(out: Optional[str], k: int, runs: int) -> Optional[str]:
    if out is None:
        return None
    return out if runs == 1 else os.path.join(out, f"run_{k:03d}")


def _cmd_gate(args) -> int:
    overrides = _parse_overrides(args.param)
    clamps = _parse_clamps(args.clamp, _GATE_NODES)
    if args.runs < 1:
        raise ValueError("--runs must be at least 1")
    backend = _effective_backend(args)

    if args.mode == "reverse":
        clamp_nodes = [n for n, _ in clamps]
        if "O" not in clamp_nodes:
            clamps = [("O", args.out_level == "1")] + clamps
        nl = Netlist({}, clamps, [(args.kind, "A", "B", "O")],
                     [n for n in ("A", "B") if n not in clamp_nodes])
        nl, _ = _resolved_netlist(nl, overrides)
        t_max = 3.0 if args.tmax is None else args.tmax
        solved = 0
        code = 2
        for k in range(args.runs):
            cfg = _build_cfg(args, t_max, seed=args.seed + k)
            result, verdict = _simulate_and_write(
                "gate", nl, cfg, None, args.full, backend,
                _run_dir(args.out, k, args.runs),
            )
            ok = verdict.solved and _check_gate_bits(args.kind, dict(nl.inputs), verdict.bits)
            if verdict.solved and not ok:
                verdict.status = "non_convergent"
                verdict.message = "settled on an assignment that violates the gate relation"
            solved += ok
            print(f"run {k} seed={cfg.seed}: ", end="")
            _print_verdict(verdict)
            if verdict.status == "failed":
                code = 1
        if solved:
            code = 0
        print(f"solved {solved}/{args.runs}")
        return code

    # direct mode
    clamp_map = dict(clamps)
    if "O" in clamp_map:
        raise ValueError("direct mode leaves the output free; clamp A and B only")
    if clamp_map and set(clamp_map) != {"A", "B"}:
        raise ValueError("direct mode with explicit clamps needs both A and B")

    if clamp_map:
        nl = Netlist({}, [("A", clamp_map["A"]), ("B", clamp_map["B"])],
                     [(args.kind, "A", "B", "O")], ["O"])
        nl, _ = _resolved_netlist(nl, overrides)
        t_max = 3.0 if args.tmax is None else args.tmax
        cfg = _build_cfg(args, t_max)
        result, verdict = _simulate_and_write("gate", nl, cfg, None, args.full,
                                              backend, args.out)
        want = _gate_truth(args.kind, clamp_map["A"], clamp_map["B"])
        ok = verdict.solved and verdict.bits.get("O") == want
        if verdict.solved and not ok:
            verdict.status = "non_convergent"
            verdict.message = f"output settled at the wrong level (expected {int(want)})"
        _print_verdict(verdict)
        return _exit_code(verdict)

    # no explicit clamps: sweep all four input pairs in one scheduled run
    if args.period <= 0:
        raise ValueError("--period must be positive")
    period = args.period
    a0, b0 = _DIRECT_PAIRS[0]
    nl = Netlist({}, [("A", a0), ("B", b0)], [(args.kind, "A", "B", "O")], ["O"])
    nl, params = _resolved_netlist(nl, overrides)
    schedule: Schedule = [
        (k * period, {"A": a, "B": b}) for k, (a, b) in enumerate(_DIRECT_PAIRS) if k > 0
    ]
    cfg = _build_cfg(args, 4.0 * period)
    circuit, result = _simulate(nl, cfg, schedule, backend)
    if result.outcome is Outcome.NUMERICAL_FAILURE:
        print(f"integration failed: {result.message}")
        return 1
    all_ok = True
    extra: List[Tuple[str, object]] = []
    for k, (a, b) in enumerate(_DIRECT_PAIRS):
        t_star, bits = analysis.detect_equilibrium(
            result.trajectory, v_c=params.v_c, t_start=k * period, t_end=(k + 1) * period
        )
        want = _gate_truth(args.kind, a, b)
        ok = t_star is not None and bits.get("O") == want
        all_ok &= ok
        settle = "" if t_star is None else f" settled at t={t_star:.4g}"
        got = "?" if bits is None else str(int(bits.get("O", False)))
        print(f"A={int(a)} B={int(b)}: O={got} want {int(want)}{settle} {'ok' if ok else 'FAIL'}")
        extra.append((f"segment:{int(a)}{int(b)}", "ok" if ok else "fail"))
    if args.out:
        verdict = analysis.make_verdict(result, v_c=params.v_c)
        pairs = list(_verdict_summary(verdict, result)) + extra
        _write_sim(args.out, "gate", nl, circuit, cfg, schedule, args.full,
                   backend, result, pairs)
    return 0 if all_ok else 2


def _cmd_multiplier(args) -> int:
    if args.runs < 1:
        raise ValueError("--runs must be at least 1")
    overrides = _parse_overrides(args.param)
    p3, p2, p1, p0 = product_bits(args.product)
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
    nl = Netlist({}, [("P0", p0), ("P1", p1), ("P2", p2), ("P3", p3)],
                 gate_specs, list(MULTIPLIER_PROBES))
    nl, params = _resolved_netlist(nl, overrides)
    backend = _effective_backend(args)
    solved = 0
    code = 2
    for k in range(args.runs):
        cfg = _build_cfg(args, args.tmax, seed=args.seed + k)
        extra: List[Tuple[str, object]] = []
        result, verdict = _simulate_and_write(
            "multiplier", nl, cfg, None, args.full, backend,
            _run_dir(args.out, k, args.runs),
        )
        print(f"run {k} seed={cfg.seed}: ", end="")
        if verdict.solved:
            v_last = result.trajectory.v[-1]
            names = result.trajectory.node_names
            volts = [float(v_last[names.index(n)]) for n in MULTIPLIER_PROBES]
            try:
                a, b = decode_factors(volts, v_c=params.v_c)
            except NotConverged as exc:
                print(f"settled but unreadable: {exc}")
                continue
            ok = a * b == args.product
            solved += ok
            print(f"solved t*={verdict.t_star:.6g} {a} x {b} = {a * b}"
                  f"{' ok' if ok else ' WRONG'}")
        else:
            _print_verdict(verdict)
            if verdict.status == "failed":
                code = 1
    if solved:
        code = 0
    print(f"factored {solved}/{args.runs}")
    return code


def _cmd_iv(args) -> int:
    overrides = _parse_overrides(args.param)
    params = ParamSet().replace(**overrides)
    sweep = analysis.iv_sweep(
        params,
        amplitude=args.amplitude,
        frequency=args.frequency,
        cycles=args.cycles,
        steps_per_cycle=args.steps,
        x0=args.x0,
    )
    area = sweep.loop_area()
    print(f"loop area {area:.6g} V*A, state range [{sweep.x.min():.4f}, {sweep.x.max():.4f}], "
          f"peak current {np.abs(sweep.i).max():.6g} A")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        lines = ["t,v,i,x"]
        for k in range(len(sweep.t)):
            lines.append(",".join(repr(float(c[k])) for c in (sweep.t, sweep.v, sweep.i, sweep.x)))
        with open(os.path.join(args.out, "iv.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        with open(os.path.join(args.out, "summary.txt"), "w") as fh:
            fh.write(_summary_text([
                ("loop_area", area),
                ("x_min", float(sweep.x.min())),
                ("x_max", float(sweep.x.max())),
                ("i_peak", float(np.abs(sweep.i).max())),
            ]))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NetlistError, CircuitError, NotConverged, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
