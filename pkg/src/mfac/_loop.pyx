# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled closed-loop kernel for the built-in plant families.

Runs the estimator update, reset safeguard, control law and plant step in
one C loop, mirroring the Python engine operation for operation.  The
wrapper in ``mfac.simulation`` prepares all arrays and decodes the status.
"""

import numpy as np

from libc.math cimport cos, fabs, isfinite, sin, sqrt


cdef int _cholesky(double[:, ::1] a, double[:, ::1] l, int n) noexcept nogil:
    # lower-triangular factor of a symmetric positive-definite matrix
    cdef int i, j, k
    cdef double s
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= l[i, k] * l[j, k]
            if i == j:
                if s <= 0.0:
                    return 1
                l[i, i] = sqrt(s)
            else:
                l[i, j] = s / l[j, j]
    return 0


cdef void _chol_solve(double[:, ::1] l, double[::1] b, double[::1] x,
                      double[::1] work, int n) noexcept nogil:
    # solve (L L^T) x = b
    cdef int i, k
    cdef double s
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= l[i, k] * work[k]
        work[i] = s / l[i, i]
    for i in range(n - 1, -1, -1):
        s = work[i]
        for k in range(i + 1, n):
            s -= l[k, i] * x[k]
        x[i] = s / l[i, i]


cdef double _sq_spectral_norm(double[:, ::1] gram, double[::1] v,
                              double[::1] w, int n) noexcept nogil:
    # largest eigenvalue of a symmetric PSD matrix (power iteration)
    cdef int i, j, it
    cdef double norm, lam, lam_prev, total
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += fabs(gram[i, j])
    if total == 0.0:
        return 0.0
    for i in range(n):
        v[i] = 1.0
    lam_prev = 0.0
    for it in range(200):
        for i in range(n):
            w[i] = 0.0
            for j in range(n):
                w[i] += gram[i, j] * v[j]
        norm = 0.0
        for i in range(n):
            norm += w[i] * w[i]
        norm = sqrt(norm)
        if norm == 0.0:
            # iterate hit the null space; restart from a coordinate vector
            for i in range(n):
                v[i] = 0.0
            v[it % n] = 1.0
            continue
        lam = norm
        for i in range(n):
            v[i] = w[i] / norm
        if fabs(lam - lam_prev) <= 1e-15 * (1.0 + lam):
            return lam
        lam_prev = lam
    return lam_prev


def run_loop(int plant_kind,
             double[:, ::1] a_stack, double[:, ::1] b_stack,
             int typo_fix, int cross_den,
             double[:, ::1] y_known, double[:, ::1] u_known,
             double[:, ::1] ref,
             int first_step, int horizon,
             int m, int l_y, int l_u,
             double[:, ::1] phi_init,
             double mu, double eta, int reset_enabled, double reset_eps,
             double lam, double[::1] rho, int variant, int norm_kind,
             double diverge_limit,
             double[:, ::1] out_y, double[:, ::1] out_u,
             double[:, ::1] out_du, double[:, ::1] out_phi,
             double[::1] out_norm):
    """Run the closed loop; return 0 or the absolute step of divergence."""
    cdef int nb = l_y + l_u
    cdef int reg_len = m * nb
    cdef int n_a = a_stack.shape[0] // m if a_stack.shape[0] else 0
    cdef int n_b = b_stack.shape[0] // m if b_stack.shape[0] else 0

    y_buf = np.zeros((horizon + 2, m))
    u_buf = np.zeros((horizon + 2, m))
    cdef double[:, ::1] y_all = y_buf
    cdef double[:, ::1] u_all = u_buf
    cdef double[:, ::1] phi = np.zeros((m, reg_len))
    cdef double[::1] dl_prev = np.zeros(reg_len)
    cdef double[::1] dy_now = np.zeros(m)
    cdef double[::1] innov = np.zeros(m)
    cdef double[::1] bracket = np.zeros(m)
    cdef double[::1] du = np.zeros(m)
    cdef double[::1] y_next = np.zeros(m)
    cdef double[:, ::1] gram = np.zeros((m, m))
    cdef double[:, ::1] lfac = np.zeros((m, m))
    cdef double[::1] rhs = np.zeros(m)
    cdef double[::1] work = np.zeros(m)
    cdef double[::1] pv = np.zeros(m)
    cdef double[::1] pw = np.zeros(m)

    cdef int i, j, k, r, c, row, key0, idx
    cdef double nsq, coef, s, norm, denom, rho_key
    cdef double y1_0, y1_1, y1_2, y2_0, y2_1, y2_2
    cdef double u1_0, u1_1, u1_2, u2_0, u2_1, u2_2, half_sum, den

    for i in range(y_known.shape[0]):
        for c in range(m):
            y_all[i + 1, c] = y_known[i, c]
    for i in range(u_known.shape[0]):
        for c in range(m):
            u_all[i + 1, c] = u_known[i, c]
    for r in range(m):
        for c in range(reg_len):
            phi[r, c] = phi_init[r, c]

    key0 = l_y * m
    rho_key = rho[l_y]

    for i in range(first_step, horizon + 1):
        row = i - first_step
        for c in range(m):
            dy_now[c] = y_all[i, c] - y_all[i - 1, c]

        # regressor at i-1: output increments then input increments
        for k in range(l_y):
            idx = i - 1 - k
            for c in range(m):
                dl_prev[k * m + c] = (y_all[idx, c] - y_all[idx - 1, c]) if idx >= 2 else 0.0
        for k in range(l_u):
            idx = i - 1 - k
            for c in range(m):
                dl_prev[(l_y + k) * m + c] = (u_all[idx, c] - u_all[idx - 1, c]) if idx >= 2 else 0.0

        nsq = 0.0
        for c in range(reg_len):
            nsq += dl_prev[c] * dl_prev[c]
        if nsq > 0.0:
            for r in range(m):
                s = dy_now[r]
                for c in range(reg_len):
                    s -= phi[r, c] * dl_prev[c]
                innov[r] = s
            coef = eta / (mu + nsq)
            for r in range(m):
                for c in range(reg_len):
                    phi[r, c] += coef * innov[r] * dl_prev[c]

        if reset_enabled:
            s = 0.0
            for r in range(m):
                for c in range(m):
                    s += phi[r, key0 + c] * phi[r, key0 + c]
            k = 0
            if sqrt(nsq) <= reset_eps or sqrt(s) <= reset_eps:
                k = 1
            else:
                for j in range(m):
                    if phi[j, key0 + j] * phi_init[j, key0 + j] < 0.0:
                        k = 1
                        break
            if k:
                for r in range(m):
                    for c in range(reg_len):
                        phi[r, c] = phi_init[r, c]

        # bracket: reference error minus predicted history contributions
        for r in range(m):
            bracket[r] = rho_key * (ref[i + 1, r] - y_all[i, r])
        for k in range(l_y):
            idx = i - k
            if idx >= 2:
                for r in range(m):
                    s = 0.0
                    for c in range(m):
                        s += phi[r, k * m + c] * (y_all[idx, c] - y_all[idx - 1, c])
                    bracket[r] -= rho[k] * s
        for j in range(l_y + 1, nb):
            idx = i - (j - l_y)
            if idx >= 2:
                for r in range(m):
                    s = 0.0
                    for c in range(m):
                        s += phi[r, j * m + c] * (u_all[idx, c] - u_all[idx - 1, c])
                    bracket[r] -= rho[j] * s

        # gram = key^T key (+ lam I for the proposed solve)
        for r in range(m):
            for c in range(m):
                s = 0.0
                for j in range(m):
                    s += phi[j, key0 + r] * phi[j, key0 + c]
                gram[r, c] = s

        if variant == 0:
            for r in range(m):
                gram[r, r] += lam
                s = 0.0
                for j in range(m):
                    s += phi[j, key0 + r] * bracket[j]
                rhs[r] = s
            if _cholesky(gram, lfac, m):
                out_norm[0] = -1.0
                return i
            _chol_solve(lfac, rhs, du, work, m)
        else:
            if norm_kind == 0:
                denom = lam + _sq_spectral_norm(gram, pv, pw, m)
            else:
                s = 0.0
                for r in range(m):
                    s += gram[r, r]
                denom = lam + s
            for r in range(m):
                s = 0.0
                for j in range(m):
                    s += phi[j, key0 + r] * bracket[j]
                du[r] = s / denom

        for c in range(m):
            u_all[i, c] = u_all[i - 1, c] + du[c]

        for c in range(m):
            out_y[row, c] = y_all[i, c]
            out_u[row, c] = u_all[i, c]
            out_du[row, c] = du[c]
        for r in range(m):
            for c in range(reg_len):
                out_phi[row, r * reg_len + c] = phi[r, c]

        # plant step
        if plant_kind == 0:
            y1_0 = y_all[i, 0]
            y1_1 = y_all[i - 1, 0]
            y1_2 = y_all[i - 2, 0] if i >= 3 else 0.0
            y2_0 = y_all[i, 1]
            y2_1 = y_all[i - 1, 1]
            y2_2 = y_all[i - 2, 1] if i >= 3 else 0.0
            u1_0 = u_all[i, 0]
            u1_1 = u_all[i - 1, 0]
            u1_2 = u_all[i - 2, 0] if i >= 3 else 0.0
            u2_0 = u_all[i, 1]
            u2_1 = u_all[i - 1, 1]
            u2_2 = u_all[i - 2, 1] if i >= 3 else 0.0
            half_sum = 0.5 * (y1_0 + y1_1)
            y_next[0] = ((2.5 * y1_0 * y1_1 + 0.09 * u1_0 * u1_1)
                         / (1.0 + y1_0 * y1_0 + y1_1 * y1_1)
                         + 1.2 * u1_0 + 1.6 * u1_2 + 0.09 * u1_0 * u2_1
                         + 0.5 * u2_0 + 0.7 * sin(half_sum) * cos(half_sum))
            if cross_den:
                den = 1.0 + y1_0 * y1_0 + y1_1 * y1_1 + y1_2 * y1_2
            else:
                den = 1.0 + y2_0 * y2_0 + y2_1 * y2_1 + y2_2 * y2_2
            y_next[1] = (5.0 * y2_0 * y2_1 / den
                         + u2_0 + 1.1 * u2_1
                         + (1.4 * u2_2 if typo_fix else 1.4 * u2_0)
                         + 0.5 * u1_0)
        else:
            for r in range(m):
                y_next[r] = 0.0
            for k in range(n_a):
                idx = i - k
                if idx >= 1:
                    for r in range(m):
                        s = 0.0
                        for c in range(m):
                            s += a_stack[k * m + r, c] * y_all[idx, c]
                        y_next[r] += s
            for k in range(n_b):
                idx = i - k
                if idx >= 1:
                    for r in range(m):
                        s = 0.0
                        for c in range(m):
                            s += b_stack[k * m + r, c] * u_all[idx, c]
                        y_next[r] += s

        norm = 0.0
        for c in range(m):
            norm += y_next[c] * y_next[c]
        norm = sqrt(norm)
        if not isfinite(norm) or norm > diverge_limit:
            out_norm[0] = norm
            return i + 1
        for c in range(m):
            y_all[i + 1, c] = y_next[c]

    return 0
