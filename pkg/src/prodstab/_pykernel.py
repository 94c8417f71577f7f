"""Pure-Python (numpy) time loop; fallback for the compiled kernel.

Same signature and output layout as ``_ckernel.run_loop``. Built from the
array helpers of the discretization, feedback and lyapunov modules so the
two kernels share no code.
"""
import math

import numpy as np

from .discretization import queue_outflows, queue_update, upwind
from .feedback import LAW_LINEAR, LAW_MIXED, mixed_bound
from .lyapunov import residual_terms

OK = -1


def run_loop(f, q, v, mu, ratio, tau, K, cell_w, qc, qrate, w_in, w_out,
             law, kappa, u_open, eps,
             V, V1, V2, u_out, res, S2_out, Z2_out, qs, fout, qclamp, uclamp):
    """Advance ``f``/``q`` in place for ``K - 1`` steps, filling the outputs.

    Returns ``(status, k, e, j)``; ``status == OK`` on success, otherwise
    the first non-finite value is at time ``k``, processor ``e`` (0-based),
    cell ``j`` (``-1`` for a queue).
    """
    m = f.shape[0]
    mu1 = mu[0]
    f_cur = f.copy()
    q_cur = q.copy()
    for k in range(K):
        t = k * tau
        qw = qc * np.exp(-qrate * t)
        v1 = float(np.sum(f_cur * f_cur * cell_w))
        v2 = float(np.sum(q_cur * q_cur * qw))
        V1[k] = v1
        V2[k] = v2
        V[k] = v1 + v2
        qs[k] = q_cur
        out = f_cur[:, -1].copy()
        fout[k] = out
        if k == K - 1:
            break

        g_out = queue_outflows(out, q_cur, mu, eps)
        g_in = np.empty(m)
        g_in[1:] = out[:-1]
        qz = qw * np.exp(-qrate * tau)

        if law == LAW_LINEAR:
            u = kappa * out[m - 1]
        elif law == LAW_MIXED:
            if np.all(q_cur[1:] == 0.0):
                u = kappa * out[m - 1]
            else:
                u = math.sqrt(max(mixed_bound(out, q_cur, g_in, g_out, v, w_in, w_out, qz, tau), 0.0))
        else:
            u = u_open[k]
        if u < 0.0:
            u = 0.0
            uclamp[k] = 1
        elif u > mu1:
            u = mu1
            uclamp[k] = 1
        u_out[k] = u
        g_out[0] = u
        g_in[0] = u

        s2, z2 = residual_terms(g_out, out, q_cur, g_in, g_out, v, w_in, w_out, qz, tau)
        S2_out[k] = s2
        Z2_out[k] = z2
        res[k] = s2 + z2

        f_cur = upwind(f_cur, g_out, ratio)
        q_cur, clamped = queue_update(q_cur, g_in, g_out, tau)
        qclamp[k] = clamped

        if not (np.isfinite(f_cur).all() and np.isfinite(q_cur).all()):
            bad = np.argwhere(~np.isfinite(f_cur))
            if len(bad):
                return 0, k + 1, int(bad[0][0]), int(bad[0][1])
            return 0, k + 1, int(np.argwhere(~np.isfinite(q_cur))[0][0]), -1
    f[...] = f_cur
    q[...] = q_cur
    return OK, K - 1, -1, -1
