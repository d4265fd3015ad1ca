# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernel.

Semantics twin of kernel_py: same right-hand side, same embedded 3(2) pair,
same acceptance rule, same post-step state clamp. Operates on the flat array
form produced by CompiledSystem.kernel_args().
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan, exp, fabs, isfinite, sqrt

cnp.import_array()

STATUS_OK = 0
STATUS_STIFF = 1

cdef int _ST_OK = 0
cdef int _ST_STIFF = 1

cdef double B1 = 2.0 / 9.0
cdef double B2 = 1.0 / 3.0
cdef double B3 = 4.0 / 9.0
cdef double E1 = -5.0 / 72.0
cdef double E2 = 1.0 / 12.0
cdef double E3 = 1.0 / 9.0
cdef double E4 = -1.0 / 8.0
cdef double SAFETY = 0.9
cdef double GROW_MAX = 5.0
cdef double GROW_MIN = 0.2
cdef int MAX_REJECTS_AT_FLOOR = 40


cdef inline double _theta_eps(double z, double eps) noexcept nogil:
    cdef double a = z / eps
    if a > 40.0:
        a = 40.0
    elif a < -40.0:
        a = -40.0
    return 1.0 / (1.0 + exp(-a))


cdef class _Sys:
    cdef cnp.int64_t[::1] free_nodes, clamp_nodes, mem_term, mem_tf
    cdef cnp.int64_t[::1] res_term, res_tf, pair_a, pair_b, pair_a_tf, pair_b_tf
    cdef cnp.int64_t[::1] gen_free
    cdef cnp.int64_t[:, ::1] mem_g, res_g
    cdef double[::1] clamp_v, mem_dc, mem_sign, res_dc, res_rinv, pair_rinv
    cdef double[:, ::1] mem_a, res_a, c_inv
    cdef double r_on, dr, alpha, gamma, v_c, k_s, k_i, i_min2, i_max2
    cdef double fd_amp, fd_b1, fd_b0
    cdef double[::1] v_all, cur
    cdef int nf, nc, nm, nr, npair, ng

    def __init__(self, free_nodes, clamp_nodes, clamp_v, mem_term, mem_g, mem_a,
                 mem_dc, mem_sign, mem_tf, res_term, res_g, res_a, res_dc,
                 res_rinv, res_tf, pair_a, pair_b, pair_rinv, pair_a_tf,
                 pair_b_tf, gen_free, c_inv, scalars):
        self.free_nodes = free_nodes
        self.clamp_nodes = clamp_nodes
        self.clamp_v = clamp_v
        self.mem_term = mem_term
        self.mem_g = mem_g
        self.mem_a = mem_a
        self.mem_dc = mem_dc
        self.mem_sign = mem_sign
        self.mem_tf = mem_tf
        self.res_term = res_term
        self.res_g = res_g
        self.res_a = res_a
        self.res_dc = res_dc
        self.res_rinv = res_rinv
        self.res_tf = res_tf
        self.pair_a = pair_a
        self.pair_b = pair_b
        self.pair_rinv = pair_rinv
        self.pair_a_tf = pair_a_tf
        self.pair_b_tf = pair_b_tf
        self.gen_free = gen_free
        self.c_inv = c_inv
        self.r_on = scalars[0]
        self.dr = scalars[1]
        self.alpha = scalars[2]
        self.gamma = scalars[3]
        self.v_c = scalars[4]
        self.k_s = scalars[5]
        self.k_i = scalars[6]
        self.i_min2 = scalars[7]
        self.i_max2 = scalars[8]
        self.fd_amp = scalars[9]
        self.fd_b1 = scalars[10]
        self.fd_b0 = scalars[11]
        self.nf = <int> free_nodes.shape[0]
        self.nc = <int> clamp_nodes.shape[0]
        self.nm = <int> mem_term.shape[0]
        self.nr = <int> res_term.shape[0]
        self.npair = <int> pair_a.shape[0]
        self.ng = <int> gen_free.shape[0]
        self.v_all = np.zeros(self.nf + self.nc)
        self.cur = np.zeros(self.nf)

    cdef void rhs(self, double[::1] y, double[::1] out, double eps) noexcept nogil:
        cdef int nf = self.nf, nm = self.nm, ng = self.ng
        cdef int b, j, k, tf
        cdef double vg, vt, x, m, vm, h, acc, s, ii2
        cdef double gate_on, gate_off, vgen, fd, below, above

        for j in range(nf):
            self.v_all[self.free_nodes[j]] = y[j]
        for j in range(self.nc):
            self.v_all[self.clamp_nodes[j]] = self.clamp_v[j]
        for j in range(nf):
            self.cur[j] = 0.0

        for b in range(nm):
            vg = (self.mem_a[b, 0] * self.v_all[self.mem_g[b, 0]]
                  + self.mem_a[b, 1] * self.v_all[self.mem_g[b, 1]]
                  + self.mem_a[b, 2] * self.v_all[self.mem_g[b, 2]]
                  + self.mem_dc[b])
            vt = self.v_all[self.mem_term[b]]
            x = y[nf + b]
            m = self.r_on + self.dr * x
            vm = self.mem_sign[b] * (vt - vg)
            if eps > 0.0:
                h = (_theta_eps(x, eps) * _theta_eps(vm, eps)
                     + _theta_eps(1.0 - x, eps) * _theta_eps(-vm, eps))
            else:
                h = 0.0
                if x > 0.0 and vm > 0.0:
                    h += 1.0
                if x < 1.0 and vm < 0.0:
                    h += 1.0
            out[nf + b] = -self.alpha * h * vm / m
            tf = <int> self.mem_tf[b]
            if tf >= 0:
                self.cur[tf] += (vg - vt) / m

        for b in range(self.nr):
            vg = (self.res_a[b, 0] * self.v_all[self.res_g[b, 0]]
                  + self.res_a[b, 1] * self.v_all[self.res_g[b, 1]]
                  + self.res_a[b, 2] * self.v_all[self.res_g[b, 2]]
                  + self.res_dc[b])
            tf = <int> self.res_tf[b]
            if tf >= 0:
                self.cur[tf] += (vg - self.v_all[self.res_term[b]]) * self.res_rinv[b]

        for b in range(self.npair):
            vm = (self.v_all[self.pair_a[b]] - self.v_all[self.pair_b[b]]) * self.pair_rinv[b]
            tf = <int> self.pair_a_tf[b]
            if tf >= 0:
                self.cur[tf] -= vm
            tf = <int> self.pair_b_tf[b]
            if tf >= 0:
                self.cur[tf] += vm

        for j in range(ng):
            self.cur[self.gen_free[j]] -= y[nf + nm + j]

        for j in range(nf):
            acc = 0.0
            for k in range(nf):
                acc += self.c_inv[j, k] * self.cur[k]
            out[j] = acc

        s = y[nf + nm + ng]
        if eps > 0.0:
            gate_on = _theta_eps(s - 0.5, eps)
            gate_off = _theta_eps(0.5 - s, eps)
        else:
            gate_on = 1.0 if s > 0.5 else 0.0
            gate_off = 1.0 if s < 0.5 else 0.0

        for j in range(ng):
            vgen = y[self.gen_free[j]]
            fd = self.fd_amp * (atan(self.fd_b1 * (vgen + self.v_c))
                                + atan(self.fd_b0 * vgen)
                                + atan(self.fd_b1 * (vgen - self.v_c)))
            out[nf + nm + j] = gate_on * fd - self.gamma * gate_off * y[nf + nm + j]

        below = 1.0
        above = 1.0
        if eps > 0.0:
            for j in range(ng):
                ii2 = y[nf + nm + j] * y[nf + nm + j]
                below *= _theta_eps(self.i_min2 - ii2, eps)
                above *= _theta_eps(self.i_max2 - ii2, eps)
        else:
            for j in range(ng):
                ii2 = y[nf + nm + j] * y[nf + nm + j]
                if ii2 >= self.i_min2:
                    below = 0.0
                if ii2 >= self.i_max2:
                    above = 0.0
        out[nf + nm + ng] = (-self.k_s * s * (s - 1.0) * (2.0 * s - 1.0)
                             - self.k_i * (1.0 - below - above))


def advance(free_nodes, clamp_nodes, clamp_v, mem_term, mem_g, mem_a, mem_dc,
            mem_sign, mem_tf, res_term, res_g, res_a, res_dc, res_rinv, res_tf,
            pair_a, pair_b, pair_rinv, pair_a_tf, pair_b_tf, gen_free, c_inv,
            scalars, double[::1] y, double t, double t_target, double dt,
            double rel_tol, double abs_tol, double dt_min, double dt_max,
            double eps):
    """Integrate y in place from t to t_target. Returns (t, dt, status)."""
    cdef _Sys S = _Sys(free_nodes, clamp_nodes, clamp_v, mem_term, mem_g, mem_a,
                       mem_dc, mem_sign, mem_tf, res_term, res_g, res_a, res_dc,
                       res_rinv, res_tf, pair_a, pair_b, pair_rinv, pair_a_tf,
                       pair_b_tf, gen_free, c_inv, scalars)
    cdef int n = <int> y.shape[0]
    cdef int nf = S.nf, nm = S.nm
    cdef double[::1] k1 = np.empty(n)
    cdef double[::1] k2 = np.empty(n)
    cdef double[::1] k3 = np.empty(n)
    cdef double[::1] k4 = np.empty(n)
    cdef double[::1] y_try = np.empty(n)
    cdef int rejects_at_floor = 0
    cdef int j
    cdef int status = _ST_OK
    cdef double e, sc, r, acc, err_norm, factor
    cdef bint finite

    with nogil:
        while t < t_target:
            if dt > t_target - t:
                dt = t_target - t
            S.rhs(y, k1, eps)
            for j in range(n):
                y_try[j] = y[j] + (0.5 * dt) * k1[j]
            S.rhs(y_try, k2, eps)
            for j in range(n):
                y_try[j] = y[j] + (0.75 * dt) * k2[j]
            S.rhs(y_try, k3, eps)
            for j in range(n):
                y_try[j] = y[j] + dt * (B1 * k1[j] + B2 * k2[j] + B3 * k3[j])
            S.rhs(y_try, k4, eps)

            acc = 0.0
            finite = True
            for j in range(n):
                e = dt * (E1 * k1[j] + E2 * k2[j] + E3 * k3[j] + E4 * k4[j])
                sc = fabs(y[j])
                if fabs(y_try[j]) > sc:
                    sc = fabs(y_try[j])
                sc = abs_tol + rel_tol * sc
                r = e / sc
                acc += r * r
                if not isfinite(y_try[j]):
                    finite = False
            err_norm = sqrt(acc / n)

            if finite and isfinite(err_norm) and err_norm <= 1.0:
                if t_target - t <= dt * (1.0 + 1e-12):
                    t = t_target
                else:
                    t = t + dt
                for j in range(n):
                    y[j] = y_try[j]
                for j in range(nf, nf + nm):
                    if y[j] < 0.0:
                        y[j] = 0.0
                    elif y[j] > 1.0:
                        y[j] = 1.0
                rejects_at_floor = 0
                if err_norm > 0.0:
                    factor = SAFETY * err_norm ** (-1.0 / 3.0)
                    if factor > GROW_MAX:
                        factor = GROW_MAX
                    elif factor < GROW_MIN:
                        factor = GROW_MIN
                else:
                    factor = GROW_MAX
                dt = dt * factor
                if dt > dt_max:
                    dt = dt_max
            else:
                if dt <= dt_min * (1.0 + 1e-12):
                    rejects_at_floor += 1
                    if rejects_at_floor > MAX_REJECTS_AT_FLOOR:
                        status = _ST_STIFF
                        break
                if 0.5 * dt > dt_min:
                    dt = 0.5 * dt
                else:
                    dt = dt_min

    return t, dt, status
