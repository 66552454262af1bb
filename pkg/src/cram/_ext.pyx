# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: local-linear weights and backfitting sweeps.

Same signatures and semantics as ``cram._fallback``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, isfinite, INFINITY
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dsyev

cnp.import_array()

cdef int GAUSSIAN = 0
cdef double DEGENERATE_DET = 1e-12


def local_linear_weights(double[::1] x, double[::1] x_eval, double bandwidth, int kernel):
    cdef Py_ssize_t n = x.shape[0], m = x_eval.shape[0], i, l
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((m, n))
    cdef double[:, ::1] W = out
    cdef double[::1] k = np.empty(n)
    cdef double x0, d, u2, umin, s0, s1, s2, det, inv_h2 = 1.0 / (bandwidth * bandwidth)
    for i in range(m):
        x0 = x_eval[i]
        if kernel == GAUSSIAN:
            umin = INFINITY
            for l in range(n):
                d = x[l] - x0
                u2 = d * d * inv_h2
                if u2 < umin:
                    umin = u2
            for l in range(n):
                d = x[l] - x0
                k[l] = exp(-0.5 * (d * d * inv_h2 - umin))
        else:
            for l in range(n):
                d = x[l] - x0
                u2 = 1.0 - d * d * inv_h2
                k[l] = u2 if u2 > 0.0 else 0.0
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        for l in range(n):
            d = x[l] - x0
            s0 += k[l]
            s1 += k[l] * d
            s2 += k[l] * d * d
        if s0 <= 0.0:
            return np.zeros((m, n)), int(i)
        det = s0 * s2 - s1 * s1
        if det <= DEGENERATE_DET * s0 * s2:
            for l in range(n):
                W[i, l] = k[l] / s0
        else:
            for l in range(n):
                d = x[l] - x0
                W[i, l] = k[l] * (s2 - d * s1) / det
    return out, -1


cdef void _smooth(double[:, ::1] S, double[:, ::1] Z, double[:, ::1] P) noexcept nogil:
    # row-major P = S Z computed as column-major P^T = Z^T S^T
    cdef int n = <int>S.shape[0], q = <int>Z.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char tr = b'N'
    dgemm(&tr, &tr, &q, &n, &n, &one, &Z[0, 0], &q, &S[0, 0], &n, &zero, &P[0, 0], &q)


cdef int _eig(double[:, ::1] G, double[::1] vals, double[:, ::1] vecs,
              double[::1] work, int lwork) noexcept nogil:
    """Eigen-decompose symmetric G (q x q); vals descending, vecs[:, k] the k-th vector."""
    cdef int q = <int>G.shape[0], info = 0, a, k
    cdef char jobz = b'V', uplo = b'U'
    cdef double tmp
    # copy into vecs (symmetric, so layout order does not matter)
    for a in range(q):
        for k in range(q):
            vecs[a, k] = 0.5 * (G[a, k] + G[k, a])
    dsyev(&jobz, &uplo, &q, &vecs[0, 0], &q, &vals[0], &work[0], &lwork, &info)
    # LAPACK wrote eigenvectors as columns of a column-major array: vecs[k, a]
    # holds component a of vector k. Transpose and reverse to descending.
    for a in range(q):
        for k in range(a + 1, q):
            tmp = vecs[a, k]
            vecs[a, k] = vecs[k, a]
            vecs[k, a] = tmp
    for k in range(q // 2):
        tmp = vals[k]
        vals[k] = vals[q - 1 - k]
        vals[q - 1 - k] = tmp
        for a in range(q):
            tmp = vecs[a, k]
            vecs[a, k] = vecs[a, q - 1 - k]
            vecs[a, q - 1 - k] = tmp
    for k in range(q):
        if vals[k] < 0.0:
            vals[k] = 0.0
    return info


cdef void _transform(double[:, ::1] U, double[::1] tau, double lam, double rank_tol,
                     double[::1] f, double[:, ::1] T) noexcept nogil:
    cdef Py_ssize_t q = U.shape[0], a, b, k
    cdef double top, r, acc
    if lam == 0.0:
        for a in range(q):
            for b in range(q):
                T[a, b] = 1.0 if a == b else 0.0
        return
    top = sqrt(tau[0])
    for k in range(q):
        f[k] = 0.0
        if top > 0.0:
            r = sqrt(tau[k])
            if r > rank_tol * top:
                f[k] = 1.0 - lam / r
                if f[k] < 0.0:
                    f[k] = 0.0
    for a in range(q):
        for b in range(q):
            acc = 0.0
            for k in range(q):
                acc = acc + U[a, k] * f[k] * U[b, k]
            T[a, b] = acc


cdef void _gram_add(double[:, ::1] A, double[:, ::1] G, double scale) noexcept nogil:
    cdef Py_ssize_t n = A.shape[0], q = A.shape[1], i, a, b
    for i in range(n):
        for a in range(q):
            for b in range(a, q):
                G[a, b] += scale * A[i, a] * A[i, b]
    for a in range(q):
        for b in range(a):
            G[a, b] = G[b, a]


cdef void _apply_center(double[:, ::1] A, double[:, ::1] T, double[:, ::1] out,
                        double[::1] mu) noexcept nogil:
    """out = A T, then subtract the column means (returned in mu)."""
    cdef Py_ssize_t n = A.shape[0], q = A.shape[1], i, a, b
    cdef double acc
    for b in range(q):
        mu[b] = 0.0
    for i in range(n):
        for b in range(q):
            acc = 0.0
            for a in range(q):
                acc = acc + A[i, a] * T[a, b]
            out[i, b] = acc
            mu[b] += acc
    for b in range(q):
        mu[b] /= n
    for i in range(n):
        for b in range(q):
            out[i, b] -= mu[b]


cdef double _nuclear(double[:, ::1] A, double[:, ::1] G, double[::1] vals, double[:, ::1] vecs,
                     double[::1] work, int lwork, double n) noexcept nogil:
    cdef Py_ssize_t q = A.shape[1], a, b
    cdef double s = 0.0
    for a in range(q):
        for b in range(q):
            G[a, b] = 0.0
    _gram_add(A, G, 1.0 / n)
    _eig(G, vals, vecs, work, lwork)
    for a in range(q):
        s += sqrt(vals[a])
    return s


def run_sweeps(double[:, :, ::1] S, double[:, ::1] Y, double[:, :, ::1] M, double[::1] lam,
               int joint, double rank_tol, double tol, int max_sweeps,
               double[:, :, ::1] Z, double[:, :, ::1] U, double[:, ::1] tau,
               double[:, :, ::1] post, double[:, ::1] offset, double[::1] objective_trace):
    cdef Py_ssize_t p = M.shape[0], n = M.shape[1], q = M.shape[2]
    cdef Py_ssize_t sweep, j, k, i, a, b
    cdef int lwork = 8 * <int>q + 8, sweeps = 0, converged = 0
    cdef double nn = <double>n, change = INFINITY, d, dn, on, acc, fit, pen
    cdef double[:, :, ::1] old = np.empty((p, n, q))
    cdef double[:, ::1] total = np.empty((n, q))
    cdef double[:, ::1] Pj = np.empty((n, q))
    cdef double[:, ::1] newM = np.empty((n, q))
    cdef double[:, ::1] G = np.empty((q, q))
    cdef double[:, ::1] vecs = np.empty((q, q))
    cdef double[:, ::1] T = np.empty((q, q))
    cdef double[:, ::1] tmpq = np.empty((q, q))
    cdef double[::1] vals = np.empty(q)
    cdef double[::1] f = np.empty(q)
    cdef double[::1] mu = np.empty(q)
    cdef double[::1] tmpv = np.empty(q)
    cdef double[::1] work = np.empty(lwork)
    cdef bint bad

    with nogil:
        for sweep in range(max_sweeps):
            memcpy(&old[0, 0, 0], &M[0, 0, 0], p * n * q * sizeof(double))
            for i in range(n):
                for b in range(q):
                    acc = 0.0
                    for k in range(p):
                        acc = acc + M[k, i, b]
                    total[i, b] = acc
            for j in range(p):
                bad = False
                for i in range(n):
                    for b in range(q):
                        Z[j, i, b] = Y[i, b] - (total[i, b] - M[j, i, b])
                        if not isfinite(Z[j, i, b]):
                            bad = True
                _smooth(S[j], Z[j], Pj)
                for i in range(n):
                    for b in range(q):
                        if not isfinite(Pj[i, b]):
                            bad = True
                if bad:
                    with gil:
                        return -(sweep + 1), int(j), np.nan
                for a in range(q):
                    for b in range(q):
                        G[a, b] = 0.0
                _gram_add(Pj, G, 1.0 / nn)
                if joint:
                    for k in range(p):
                        if k != j:
                            _gram_add(M[k], G, 1.0 / nn)
                _eig(G, vals, vecs, work, lwork)
                _transform(vecs, vals, lam[0] if joint else lam[j], rank_tol, f, T)
                for a in range(q):
                    tau[j, a] = vals[a]
                    for b in range(q):
                        U[j, a, b] = vecs[a, b]
                if joint:
                    for i in range(n):
                        for b in range(q):
                            total[i, b] = 0.0
                    for k in range(p):
                        if k == j:
                            _apply_center(Pj, T, M[k], mu)
                            for a in range(q):
                                offset[k, a] = mu[a]
                                for b in range(q):
                                    post[k, a, b] = 1.0 if a == b else 0.0
                        else:
                            _apply_center(M[k], T, newM, mu)
                            memcpy(&M[k, 0, 0], &newM[0, 0], n * q * sizeof(double))
                            # post <- post T ; offset <- offset T + mu
                            for a in range(q):
                                for b in range(q):
                                    acc = 0.0
                                    for i in range(q):
                                        acc = acc + post[k, a, i] * T[i, b]
                                    tmpq[a, b] = acc
                            for b in range(q):
                                acc = 0.0
                                for a in range(q):
                                    acc = acc + offset[k, a] * T[a, b]
                                tmpv[b] = acc + mu[b]
                            for a in range(q):
                                offset[k, a] = tmpv[a]
                                for b in range(q):
                                    post[k, a, b] = tmpq[a, b]
                        for i in range(n):
                            for b in range(q):
                                total[i, b] += M[k, i, b]
                else:
                    _apply_center(Pj, T, newM, mu)
                    for i in range(n):
                        for b in range(q):
                            total[i, b] += newM[i, b] - M[j, i, b]
                            M[j, i, b] = newM[i, b]
                    for a in range(q):
                        offset[j, a] = mu[a]
            sweeps = <int>sweep + 1
            # objective after this sweep
            fit = 0.0
            for i in range(n):
                for b in range(q):
                    d = Y[i, b] - total[i, b]
                    fit += d * d
            fit = 0.5 * fit / nn
            pen = 0.0
            if joint:
                if lam[0] != 0.0:
                    for a in range(q):
                        for b in range(q):
                            G[a, b] = 0.0
                    for k in range(p):
                        _gram_add(M[k], G, 1.0 / nn)
                    _eig(G, vals, vecs, work, lwork)
                    for a in range(q):
                        pen += sqrt(vals[a])
                    pen *= lam[0]
            else:
                for k in range(p):
                    if lam[k] != 0.0:
                        pen += lam[k] * _nuclear(M[k], G, vals, vecs, work, lwork, nn)
            objective_trace[sweep] = fit + pen
            change = 0.0
            for k in range(p):
                dn = 0.0
                on = 0.0
                for i in range(n):
                    for b in range(q):
                        d = M[k, i, b] - old[k, i, b]
                        dn += d * d
                        on += old[k, i, b] * old[k, i, b]
                d = sqrt(dn) / (1.0 + sqrt(on))
                if d > change:
                    change = d
            if change < tol:
                converged = 1
                break
    return sweeps, converged, change
