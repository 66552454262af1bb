"""Pure-numpy versions of the hot kernels.

Signatures match ``cram._ext`` exactly; :mod:`cram._backend` picks one of the
two at import time.
"""

import numpy as np

GAUSSIAN = 0
EPANECHNIKOV = 1

# local-linear determinant below this fraction of S0*S2 -> local-constant row
DEGENERATE_DET = 1e-12


def local_linear_weights(x, x_eval, bandwidth, kernel):
    """Local-linear weight rows for every point of ``x_eval``.

    Returns ``(W, bad)`` where ``W`` has shape (len(x_eval), len(x)) and
    ``bad`` is the first row whose kernel mass is zero, or -1.
    """
    x = np.ascontiguousarray(x, dtype=float)
    x_eval = np.ascontiguousarray(x_eval, dtype=float)
    d = x[None, :] - x_eval[:, None]
    u2 = (d / bandwidth) ** 2
    if kernel == GAUSSIAN:
        # weights are invariant to a per-row factor; shifting avoids underflow
        k = np.exp(-0.5 * (u2 - u2.min(axis=1, keepdims=True)))
    else:
        k = np.maximum(0.0, 1.0 - u2)
    s0 = k.sum(axis=1)
    bad = np.flatnonzero(s0 <= 0.0)
    if bad.size:
        return np.zeros_like(d), int(bad[0])
    s1 = (k * d).sum(axis=1)
    s2 = (k * d * d).sum(axis=1)
    det = s0 * s2 - s1 * s1
    local_const = det <= DEGENERATE_DET * s0 * s2
    det_safe = np.where(local_const, 1.0, det)
    w = k * (s2[:, None] - d * s1[:, None]) / det_safe[:, None]
    if local_const.any():
        w[local_const] = k[local_const] / s0[local_const, None]
    return w, -1


def _gram_eig(P, n):
    g = P.T @ P / n
    vals, vecs = np.linalg.eigh(0.5 * (g + g.T))
    return np.clip(vals[::-1], 0.0, None), vecs[:, ::-1]


def _transform(U, tau, lam, rank_tol):
    q = U.shape[0]
    if lam == 0:
        return np.eye(q)
    root = np.sqrt(tau)
    top = root[0]
    f = np.zeros(q)
    if top > 0:
        keep = root > rank_tol * top
        f[keep] = np.maximum(0.0, 1.0 - lam / root[keep])
    return (U * f) @ U.T


def _nuclear(A, n):
    # via the q x q Gram, matching the compiled kernel
    return np.sqrt(_gram_eig(A, n)[0]).sum()


def _objective(Y, M, lam, joint, n):
    fit = Y - M.sum(axis=0)
    val = 0.5 * np.sum(fit * fit) / n
    if joint:
        if lam != 0:
            val += lam * _nuclear(M.reshape(-1, M.shape[2]), n)
    else:
        for j in range(M.shape[0]):
            if lam[j] != 0:
                val += lam[j] * _nuclear(M[j], n)
    return val


def run_sweeps(S, Y, M, lam, joint, rank_tol, tol, max_sweeps,
               Z, U, tau, post, offset, objective_trace):
    """Gauss-Seidel backfitting sweeps, updating ``M`` in place.

    Parameters
    ----------
    S : (p, n, n) smoother matrices.
    Y : (n, q) centered responses.
    M : (p, n, q) components; the warm start on entry, the fit on exit.
    lam : (p,) thresholds; for the joint penalty only ``lam[0]`` is used.
    Z, U, tau, post, offset : outputs describing, per coordinate, the last
        update that produced ``M[j]``, so that
        ``M[j] == S[j] @ Z[j] @ T(U[j], tau[j]) @ post[j] - offset[j]``.
    objective_trace : (max_sweeps,) filled with the objective after each sweep.

    Returns
    -------
    (sweeps_run, converged, last_change)
    """
    p, n, q = M.shape
    change = np.inf
    sweeps = 0
    converged = False
    for sweep in range(max_sweeps):
        old = M.copy()
        total = M.sum(axis=0)
        for j in range(p):
            Zj = Y - (total - M[j])
            Pj = S[j] @ Zj
            if not (np.all(np.isfinite(Zj)) and np.all(np.isfinite(Pj))):
                return -(sweep + 1), j, np.nan
            if joint:
                stack = M.copy()
                stack[j] = Pj
                vals, vecs = _gram_eig(stack.reshape(-1, q), n)
                T = _transform(vecs, vals, lam[0], rank_tol)
                total = np.zeros((n, q))
                for k in range(p):
                    new = stack[k] @ T
                    mu = new.mean(axis=0)
                    new -= mu
                    if k == j:
                        post[k] = np.eye(q)
                        offset[k] = mu
                    else:
                        post[k] = post[k] @ T
                        offset[k] = offset[k] @ T + mu
                    M[k] = new
                    total += new
                Z[j] = Zj
                U[j] = vecs
                tau[j] = vals
            else:
                vals, vecs = _gram_eig(Pj, n)
                T = _transform(vecs, vals, lam[j], rank_tol)
                new = Pj @ T
                mu = new.mean(axis=0)
                new -= mu
                total += new - M[j]
                M[j] = new
                Z[j] = Zj
                U[j] = vecs
                tau[j] = vals
                offset[j] = mu
        sweeps = sweep + 1
        objective_trace[sweep] = _objective(Y, M, lam[0] if joint else lam, joint, n)
        change = 0.0
        for j in range(p):
            d = np.linalg.norm(M[j] - old[j]) / (1.0 + np.linalg.norm(old[j]))
            change = max(change, d)
        if change < tol:
            converged = True
            break
    return sweeps, int(converged), change
