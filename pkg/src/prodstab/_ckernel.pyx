# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time loop: upwind transport, queue coupling, control law and
Lyapunov monitor fused into one pass per step.

Mirrors ``prodstab._pykernel.run_loop`` (same signature, same outputs).
"""
import numpy as np
from libc.math cimport exp, sqrt, isfinite

cdef enum:
    LAW_LINEAR = 1
    LAW_MIXED = 2

OK = -1


def run_loop(double[:, ::1] f, double[::1] q, double[::1] v, double[::1] mu,
             double[::1] ratio, double tau, Py_ssize_t K,
             double[:, ::1] cell_w, double[::1] qc, double[::1] qrate,
             double[::1] w_in, double[::1] w_out,
             int law, double kappa, double[::1] u_open, double eps,
             double[::1] V, double[::1] V1, double[::1] V2, double[::1] u_out,
             double[::1] res, double[::1] S2_out, double[::1] Z2_out,
             double[:, ::1] qs, double[:, ::1] fout,
             signed char[:, ::1] qclamp, signed char[::1] uclamp):
    cdef Py_ssize_t m = f.shape[0]
    cdef Py_ssize_t N = f.shape[1]
    cdef double[::1] out = np.empty(m)
    cdef double[::1] g_in = np.empty(m)
    cdef double[::1] g_out = np.empty(m)
    cdef double[::1] qw = np.empty(m)
    cdef double[::1] qz = np.empty(m)
    cdef Py_ssize_t k, e, j
    cdef double t, s, s1, s2, x, d, u, y, r, qn
    cdef double mu1 = mu[0]
    cdef bint empty

    for k in range(K):
        t = k * tau
        for e in range(m):
            qw[e] = qc[e] * exp(-qrate[e] * t)
        s1 = 0.0
        for e in range(m):
            for j in range(N):
                x = f[e, j]
                s1 += x * x * cell_w[e, j]
        s2 = 0.0
        for e in range(m):
            s2 += q[e] * q[e] * qw[e]
        V1[k] = s1
        V2[k] = s2
        V[k] = s1 + s2
        for e in range(m):
            qs[k, e] = q[e]
            out[e] = f[e, N - 1]
            fout[k, e] = out[e]
        if k == K - 1:
            break

        # queue coupling, time-k data only
        for e in range(1, m):
            g_in[e] = out[e - 1]
            if q[e] > 0.0:
                if eps == 0.0:
                    g_out[e] = mu[e]
                else:
                    g_out[e] = min(mu[e], q[e] / eps)
            else:
                g_out[e] = min(out[e - 1], mu[e])
        for e in range(m):
            qz[e] = qw[e] * exp(-qrate[e] * tau)

        if law == LAW_LINEAR:
            u = kappa * out[m - 1]
        elif law == LAW_MIXED:
            empty = True
            for e in range(1, m):
                if q[e] != 0.0:
                    empty = False
                    break
            if empty:
                u = kappa * out[m - 1]
            else:
                y = 0.0
                for e in range(m):
                    y += v[e] * out[e] * out[e] * w_out[e]
                s = 0.0
                for e in range(1, m):
                    s += v[e] * g_out[e] * g_out[e] * w_in[e]
                y -= s
                s = 0.0
                for e in range(1, m):
                    d = g_in[e] - g_out[e]
                    s += (2.0 * q[e] * d + tau * d * d) * qz[e]
                y -= s
                y = y / (v[0] * w_in[0])
                u = sqrt(y) if y > 0.0 else 0.0
        else:
            u = u_open[k]
        if u < 0.0:
            u = 0.0
            uclamp[k] = 1
        elif u > mu1:
            u = mu1
            uclamp[k] = 1
        u_out[k] = u
        g_in[0] = u
        g_out[0] = u

        # stability residual S2 + Z2
        s = 0.0
        for e in range(m):
            s += v[e] * (g_out[e] * g_out[e] * w_in[e] - out[e] * out[e] * w_out[e])
        S2_out[k] = s
        s = 0.0
        for e in range(m):
            d = g_in[e] - g_out[e]
            s += (2.0 * q[e] * d + tau * d * d) * qz[e]
        Z2_out[k] = s
        res[k] = S2_out[k] + Z2_out[k]

        # upwind transport, in place from the right
        for e in range(m):
            r = ratio[e]
            s = 1.0 - r
            for j in range(N - 1, 0, -1):
                f[e, j] = s * f[e, j] + r * f[e, j - 1]
            f[e, 0] = s * f[e, 0] + r * g_out[e]
        for e in range(m):
            for j in range(N):
                if not isfinite(f[e, j]):
                    return 0, k + 1, e, j

        # explicit Euler queues, clamped at zero
        for e in range(m):
            qn = q[e] + tau * (g_in[e] - g_out[e])
            if qn < 0.0:
                qn = 0.0
                qclamp[k, e] = 1
            if not isfinite(qn):
                return 0, k + 1, e, -1
            q[e] = qn
    return OK, K - 1, -1, -1
