"""Numpy fallback stepping kernel.

Semantics twin of the compiled kernel in _stepper.pyx: same right-hand side,
same embedded 3(2) pair, same acceptance rule, same post-step state clamp.
Selected automatically when the extension is missing, or explicitly via
SOLG_BACKEND=python.
"""

from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_STIFF = 1

# embedded pair tableau: third-order solution plus second-order error estimate
_B1, _B2, _B3 = 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0
_E1, _E2, _E3, _E4 = -5.0 / 72.0, 1.0 / 12.0, 1.0 / 9.0, -1.0 / 8.0
_SAFETY = 0.9
_GROW_MAX = 5.0
_GROW_MIN = 0.2
_MAX_REJECTS_AT_FLOOR = 40


def _smooth_theta(z: np.ndarray | float, eps: float):
    a = np.clip(np.asarray(z) / eps, -40.0, 40.0)
    return 1.0 / (1.0 + np.exp(-a))


def rhs(sys, y: np.ndarray, out: np.ndarray, eps: float) -> None:
    """Time derivative of the packed state [v_free, x, i, s] into `out`."""
    nf, nm, ng = sys.n_free, sys.n_mem, sys.n_gen
    v = y[:nf]
    x = y[nf : nf + nm]
    cur = y[nf + nm : nf + nm + ng]
    s = y[-1]

    v_all = sys.scratch_v_all
    v_all[sys.free_nodes] = v
    v_all[sys.clamp_nodes] = sys.clamp_v

    current_in = np.zeros(nf)

    if nm:
        vg = np.einsum("ij,ij->i", sys.mem_a, v_all[sys.mem_g]) + sys.mem_dc
        vt = v_all[sys.mem_term]
        m = sys.p_r_on + sys.p_dr * x
        i_mem = (vg - vt) / m
        vm = sys.mem_sign * (vt - vg)
        if eps > 0.0:
            h = _smooth_theta(x, eps) * _smooth_theta(vm, eps) + _smooth_theta(
                1.0 - x, eps
            ) * _smooth_theta(-vm, eps)
        else:
            h = ((x > 0.0) & (vm > 0.0)).astype(float) + ((x < 1.0) & (vm < 0.0))
        out[nf : nf + nm] = -sys.p_alpha * h * vm / m
        np.add.at(current_in, sys.mem_free_tgt, i_mem[sys.mem_free_sel])

    if sys.n_res:
        vg = np.einsum("ij,ij->i", sys.res_a, v_all[sys.res_g]) + sys.res_dc
        i_res = (vg - v_all[sys.res_term]) * sys.res_rinv
        np.add.at(current_in, sys.res_free_tgt, i_res[sys.res_free_sel])

    if sys.n_pair:
        i_ab = (v_all[sys.pair_a] - v_all[sys.pair_b]) * sys.pair_rinv
        np.add.at(current_in, sys.pair_a_tgt, -i_ab[sys.pair_a_sel])
        np.add.at(current_in, sys.pair_b_tgt, i_ab[sys.pair_b_sel])

    if ng:
        np.subtract.at(current_in, sys.gen_free, cur)  # generators draw current

    out[:nf] = sys.c_inv @ current_in

    if eps > 0.0:
        gate_on = float(_smooth_theta(s - 0.5, eps))
        gate_off = float(_smooth_theta(0.5 - s, eps))
    else:
        gate_on = 1.0 if s > 0.5 else 0.0
        gate_off = 1.0 if s < 0.5 else 0.0

    if ng:
        vgen = v[sys.gen_free]
        fd = sys.p_fd_amp * (
            np.arctan(sys.p_fd_b1 * (vgen + sys.p_v_c))
            + np.arctan(sys.p_fd_b0 * vgen)
            + np.arctan(sys.p_fd_b1 * (vgen - sys.p_v_c))
        )
        out[nf + nm : nf + nm + ng] = gate_on * fd - sys.p_gamma * gate_off * cur

    ii = cur * cur
    if eps > 0.0:
        below = float(np.prod(_smooth_theta(sys.p_i_min2 - ii, eps)))
        above = float(np.prod(_smooth_theta(sys.p_i_max2 - ii, eps)))
    else:
        below = 1.0 if np.all(ii < sys.p_i_min2) else 0.0
        above = 1.0 if np.all(ii < sys.p_i_max2) else 0.0
    out[-1] = -sys.p_k_s * s * (s - 1.0) * (2.0 * s - 1.0) - sys.p_k_i * (
        1.0 - below - above
    )


def advance(sys, y, t, t_target, dt, rel_tol, abs_tol, dt_min, dt_max, eps):
    """Integrate y in place from t to t_target. Returns (t, dt, status)."""
    n = y.shape[0]
    nf, nm = sys.n_free, sys.n_mem
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    y_try = np.empty(n)
    rejects_at_floor = 0

    while t < t_target:
        dt = min(dt, t_target - t)
        rhs(sys, y, k1, eps)
        y_try[:] = y + (0.5 * dt) * k1
        rhs(sys, y_try, k2, eps)
        y_try[:] = y + (0.75 * dt) * k2
        rhs(sys, y_try, k3, eps)
        y_try[:] = y + dt * (_B1 * k1 + _B2 * k2 + _B3 * k3)
        rhs(sys, y_try, k4, eps)

        err = dt * (_E1 * k1 + _E2 * k2 + _E3 * k3 + _E4 * k4)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_try))
        with np.errstate(invalid="ignore", over="ignore"):
            err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        finite = np.isfinite(y_try).all() and np.isfinite(err_norm)

        if finite and err_norm <= 1.0:
            t = t_target if t_target - t <= dt * (1.0 + 1e-12) else t + dt
            y[:] = y_try
            if nm:
                np.clip(y[nf : nf + nm], 0.0, 1.0, out=y[nf : nf + nm])
            rejects_at_floor = 0
            if err_norm > 0.0:
                factor = min(_GROW_MAX, max(_GROW_MIN, _SAFETY * err_norm ** (-1.0 / 3.0)))
            else:
                factor = _GROW_MAX
            dt = min(dt_max, dt * factor)
        else:
            if dt <= dt_min * (1.0 + 1e-12):
                rejects_at_floor += 1
                if rejects_at_floor > _MAX_REJECTS_AT_FLOOR:
                    return t, dt, STATUS_STIFF
            dt = max(dt_min, 0.5 * dt)

    return t, dt, STATUS_OK
