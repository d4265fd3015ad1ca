"""Wall-time comparison of the compiled stepping kernel and the pure-python
fallback on identical work.

Both backends integrate the same seeded initial state over the same span with
early stopping disabled, so the step counts match and the ratio is a clean
kernel speedup. Run with `python3 benchmarks/backend_compare.py`.
"""

import time

from solg import solver
from solg.circuit import assemble, build_multiplier
from solg.solver import BACKEND, SolverConfig


def _case_reverse_or():
    return assemble([("or", "A", "B", "O")], clamps=[("O", True)], probes=["A", "B"])


CASES = [
    ("reverse OR gate", _case_reverse_or(), 0.5),
    ("4-bit multiplier", build_multiplier(6), 0.5),
]


def _time(circuit, t_max: float, backend: str, repeats: int) -> float:
    cfg = SolverConfig(t_max=t_max, seed=0)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        solver.run(circuit, cfg, early_stop=False, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    if BACKEND != "compiled":
        print("compiled extension not built; timing the python kernel only")
    header = f"{'case':<18} {'states':>6} {'span':>6} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, circuit, t_max in CASES:
        py = _time(circuit, t_max, "python", repeats=1)
        if BACKEND == "compiled":
            cy = _time(circuit, t_max, "compiled", repeats=3)
            ratio = f"{py / cy:7.1f}x"
            cy_s = f"{cy:9.4f}s"
        else:
            ratio, cy_s = "      -", "        -"
        print(f"{name:<18} {circuit.n_states:>6} {t_max:>5.1f}s "
              f"{py:9.4f}s {cy_s} {ratio}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
