"""Hot numeric kernels: numba @njit loop variants and pure-numpy fallbacks.

Three kernel families dominate runtime:
  * scatter_gamma      mollified slip-rate accumulation onto the grid
  * flow_substep       per-node multiplicative midpoint step of the plastic ODE
  * elastic_energy_grad  hexahedral energy/gradient assembly

`backend.USE_NUMBA` (env DISLO_NUMBA) picks the variant at import time.
Both variants implement identical arithmetic; only accumulation order differs.
"""

import numpy as np

from . import backend

# [6/6] Pade coefficients of exp
_PADE6 = np.array([1.0, 1.0 / 2.0, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0,
                   1.0 / 15840.0, 1.0 / 665280.0])


# ---------------------------------------------------------------------------
# numpy variants


def _inv3_batch(A):
    det = (A[..., 0, 0] * (A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1])
           - A[..., 0, 1] * (A[..., 1, 0] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 0])
           + A[..., 0, 2] * (A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0]))
    adj = np.empty_like(A)
    adj[..., 0, 0] = A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1]
    adj[..., 0, 1] = A[..., 0, 2] * A[..., 2, 1] - A[..., 0, 1] * A[..., 2, 2]
    adj[..., 0, 2] = A[..., 0, 1] * A[..., 1, 2] - A[..., 0, 2] * A[..., 1, 1]
    adj[..., 1, 0] = A[..., 1, 2] * A[..., 2, 0] - A[..., 1, 0] * A[..., 2, 2]
    adj[..., 1, 1] = A[..., 0, 0] * A[..., 2, 2] - A[..., 0, 2] * A[..., 2, 0]
    adj[..., 1, 2] = A[..., 0, 2] * A[..., 1, 0] - A[..., 0, 0] * A[..., 1, 2]
    adj[..., 2, 0] = A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0]
    adj[..., 2, 1] = A[..., 0, 1] * A[..., 2, 0] - A[..., 0, 0] * A[..., 2, 1]
    adj[..., 2, 2] = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    return adj / det[..., None, None]


def _det3_batch(A):
    return (A[..., 0, 0] * (A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1])
            - A[..., 0, 1] * (A[..., 1, 0] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 0])
            + A[..., 0, 2] * (A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0]))


def _cof3_batch(A):
    c = np.empty_like(A)
    c[..., 0, 0] = A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1]
    c[..., 0, 1] = A[..., 1, 2] * A[..., 2, 0] - A[..., 1, 0] * A[..., 2, 2]
    c[..., 0, 2] = A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0]
    c[..., 1, 0] = A[..., 0, 2] * A[..., 2, 1] - A[..., 0, 1] * A[..., 2, 2]
    c[..., 1, 1] = A[..., 0, 0] * A[..., 2, 2] - A[..., 0, 2] * A[..., 2, 0]
    c[..., 1, 2] = A[..., 0, 1] * A[..., 2, 0] - A[..., 0, 0] * A[..., 2, 1]
    c[..., 2, 0] = A[..., 0, 1] * A[..., 1, 2] - A[..., 0, 2] * A[..., 1, 1]
    c[..., 2, 1] = A[..., 0, 2] * A[..., 1, 0] - A[..., 0, 0] * A[..., 1, 2]
    c[..., 2, 2] = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    return c


def _expm3_batch(B):
    """Scaling-and-squaring Pade(6) exponential of a (..., 3, 3) batch.

    Terminates exactly on nilpotent inputs (shear generators)."""
    norms = np.sqrt((B * B).sum(axis=(-2, -1)))
    nmax = float(norms.max()) if norms.size else 0.0
    s = 0
    theta = 0.25
    while nmax > theta and s < 60:
        nmax *= 0.5
        s += 1
    A = B / (2.0 ** s)
    eye = np.zeros_like(A)
    eye[..., 0, 0] = eye[..., 1, 1] = eye[..., 2, 2] = 1.0
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (_PADE6[1] * eye + _PADE6[3] * A2 + _PADE6[5] * A4)
    V = _PADE6[0] * eye + _PADE6[2] * A2 + _PADE6[4] * A4 + _PADE6[6] * A6
    R = _inv3_batch(V - U) @ (V + U)
    for _ in range(s):
        R = R @ R
    return R


def _scatter_gamma_numpy(samples_x, samples_w, rho, c, h, n_cells, out):
    """Accumulate c*(1-r^2/rho^2)^4 * w onto grid nodes within rho of each sample."""
    n = n_cells
    rho2 = rho * rho
    for sidx in range(samples_x.shape[0]):
        X = samples_x[sidx]
        w = samples_w[sidx]
        i0 = max(0, int(np.ceil((X[0] - rho) / h)))
        j0 = max(0, int(np.ceil((X[1] - rho) / h)))
        k0 = max(0, int(np.ceil((X[2] - rho) / h)))
        i1 = min(n, int(np.floor((X[0] + rho) / h)))
        j1 = min(n, int(np.floor((X[1] + rho) / h)))
        k1 = min(n, int(np.floor((X[2] + rho) / h)))
        if i1 < i0 or j1 < j0 or k1 < k0:
            continue
        xi = np.arange(i0, i1 + 1) * h - X[0]
        yj = np.arange(j0, j1 + 1) * h - X[1]
        zk = np.arange(k0, k1 + 1) * h - X[2]
        r2 = (xi[:, None, None] ** 2 + yj[None, :, None] ** 2
              + zk[None, None, :] ** 2)
        mask = r2 < rho2
        eta = np.where(mask, c * (1.0 - r2 / rho2) ** 4, 0.0)
        out[i0:i1 + 1, j0:j1 + 1, k0:k1 + 1, :] += eta[..., None] * w


def _drift_numpy(g_all, bvecs, P):
    """D = sum_rep b x proj_{<P^-1 b>perp}[g_rep] at every node (nnodes, 3, 3)."""
    Pinv = _inv3_batch(P)
    D = np.zeros_like(P)
    for r in range(bvecs.shape[0]):
        b = bvecs[r]
        n = Pinv @ b                     # (nnodes, 3)
        g = g_all[r]
        nn = (n * n).sum(axis=1)
        coef = (g * n).sum(axis=1) / nn
        proj = g - coef[:, None] * n
        D += b[None, :, None] * proj[:, None, :]
    return D


def _flow_substep_numpy(P, g_all, bvecs, dt):
    D1 = _drift_numpy(g_all, bvecs, P)
    B1 = _inv3_batch(P) @ D1
    res = float(np.abs(B1[:, 0, 0] + B1[:, 1, 1] + B1[:, 2, 2]).max())
    Ppred = P @ _expm3_batch(0.5 * dt * B1)
    D2 = _drift_numpy(g_all, bvecs, Ppred)
    B2 = _inv3_batch(Ppred) @ D2
    res = max(res, float(np.abs(B2[:, 0, 0] + B2[:, 1, 1] + B2[:, 2, 2]).max()))
    return P @ _expm3_batch(dt * B2), res


def _elastic_energy_grad_numpy(y, conn, gradN, N, detJ, Pinv_q, r, det_floor,
                               fvals, want_grad):
    ye = y[conn]                                   # (ne, 8, 3)
    F = np.einsum('eai,qak->eqik', ye, gradN)      # grad y at qp
    E = F @ Pinv_q
    dets = _det3_batch(E)
    min_det = float(dets.min())
    grad = np.zeros_like(y)
    if min_det <= det_floor:
        return np.inf, grad, min_det
    n2 = (E * E).sum(axis=(-2, -1))
    dens = n2 ** (r / 2.0) + 1.0 / dets
    energy = float(dens.sum()) * detJ
    yq = np.einsum('eai,qa->eqi', ye, N)
    energy -= float((fvals * yq).sum()) * detJ
    if want_grad:
        cofE = _cof3_batch(E)
        dWdE = (r * n2 ** (r / 2.0 - 1.0))[..., None, None] * E \
            - cofE / (dets ** 2)[..., None, None]
        dWdF = dWdE @ np.swapaxes(Pinv_q, -1, -2)
        ge = np.einsum('eqik,qak->eai', dWdF, gradN) * detJ
        ge -= np.einsum('eqi,qa->eai', fvals, N) * detJ
        np.add.at(grad, conn, ge)
    return energy, grad, min_det


# ---------------------------------------------------------------------------
# numba variants

if backend.USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _inv3(A, out):
        det = (A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
               - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
               + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]))
        out[0, 0] = (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1]) / det
        out[0, 1] = (A[0, 2] * A[2, 1] - A[0, 1] * A[2, 2]) / det
        out[0, 2] = (A[0, 1] * A[1, 2] - A[0, 2] * A[1, 1]) / det
        out[1, 0] = (A[1, 2] * A[2, 0] - A[1, 0] * A[2, 2]) / det
        out[1, 1] = (A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]) / det
        out[1, 2] = (A[0, 2] * A[1, 0] - A[0, 0] * A[1, 2]) / det
        out[2, 0] = (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]) / det
        out[2, 1] = (A[0, 1] * A[2, 0] - A[0, 0] * A[2, 1]) / det
        out[2, 2] = (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]) / det

    @njit(cache=True, inline="always")
    def _mm3(A, B, out):
        for i in range(3):
            a0 = A[i, 0]
            a1 = A[i, 1]
            a2 = A[i, 2]
            out[i, 0] = a0 * B[0, 0] + a1 * B[1, 0] + a2 * B[2, 0]
            out[i, 1] = a0 * B[0, 1] + a1 * B[1, 1] + a2 * B[2, 1]
            out[i, 2] = a0 * B[0, 2] + a1 * B[1, 2] + a2 * B[2, 2]

    @njit(cache=True)
    def _expm3_into(B, pade, out, A, A2, A4, A6, U, V, W, T):
        norm = 0.0
        for i in range(3):
            for j in range(3):
                norm += B[i, j] * B[i, j]
        norm = np.sqrt(norm)
        s = 0
        while norm > 0.25 and s < 60:
            norm *= 0.5
            s += 1
        scale = 1.0 / 2.0 ** s
        for i in range(3):
            for j in range(3):
                A[i, j] = B[i, j] * scale
        _mm3(A, A, A2)
        _mm3(A2, A2, A4)
        _mm3(A2, A4, A6)
        for i in range(3):
            for j in range(3):
                T[i, j] = pade[3] * A2[i, j] + pade[5] * A4[i, j]
            T[i, i] += pade[1]
        _mm3(A, T, U)
        for i in range(3):
            for j in range(3):
                V[i, j] = pade[2] * A2[i, j] + pade[4] * A4[i, j] + pade[6] * A6[i, j]
            V[i, i] += pade[0]
        for i in range(3):
            for j in range(3):
                W[i, j] = V[i, j] - U[i, j]
                T[i, j] = V[i, j] + U[i, j]
        _inv3(W, A)          # A reused as (V - U)^-1
        _mm3(A, T, out)
        for _ in range(s):
            for i in range(3):
                for j in range(3):
                    T[i, j] = out[i, j]
            _mm3(T, T, out)

    @njit(cache=True)
    def _drift_node(g_node, bvecs, Pinv, out):
        for i in range(3):
            for j in range(3):
                out[i, j] = 0.0
        for rr in range(bvecs.shape[0]):
            b = bvecs[rr]
            n0 = Pinv[0, 0] * b[0] + Pinv[0, 1] * b[1] + Pinv[0, 2] * b[2]
            n1 = Pinv[1, 0] * b[0] + Pinv[1, 1] * b[1] + Pinv[1, 2] * b[2]
            n2 = Pinv[2, 0] * b[0] + Pinv[2, 1] * b[1] + Pinv[2, 2] * b[2]
            nn = n0 * n0 + n1 * n1 + n2 * n2
            g0 = g_node[rr, 0]
            g1 = g_node[rr, 1]
            g2 = g_node[rr, 2]
            coef = (g0 * n0 + g1 * n1 + g2 * n2) / nn
            p0 = g0 - coef * n0
            p1 = g1 - coef * n1
            p2 = g2 - coef * n2
            out[0, 0] += b[0] * p0
            out[0, 1] += b[0] * p1
            out[0, 2] += b[0] * p2
            out[1, 0] += b[1] * p0
            out[1, 1] += b[1] * p1
            out[1, 2] += b[1] * p2
            out[2, 0] += b[2] * p0
            out[2, 1] += b[2] * p1
            out[2, 2] += b[2] * p2

    @njit(cache=True)
    def _flow_substep_numba(P, g_all, bvecs, dt, pade):
        nnodes = P.shape[0]
        out = np.empty_like(P)
        g_node = np.empty((bvecs.shape[0], 3))
        Pinv = np.empty((3, 3))
        D = np.empty((3, 3))
        B = np.empty((3, 3))
        E = np.empty((3, 3))
        Ppred = np.empty((3, 3))
        # expm scratch
        sA = np.empty((3, 3))
        sA2 = np.empty((3, 3))
        sA4 = np.empty((3, 3))
        sA6 = np.empty((3, 3))
        sU = np.empty((3, 3))
        sV = np.empty((3, 3))
        sW = np.empty((3, 3))
        sT = np.empty((3, 3))
        res = 0.0
        for nd in range(nnodes):
            R = P[nd]
            for rr in range(bvecs.shape[0]):
                for c in range(3):
                    g_node[rr, c] = g_all[rr, nd, c]
            _inv3(R, Pinv)
            _drift_node(g_node, bvecs, Pinv, D)
            _mm3(Pinv, D, B)
            tr = abs(B[0, 0] + B[1, 1] + B[2, 2])
            if tr > res:
                res = tr
            for i in range(3):
                for j in range(3):
                    B[i, j] *= 0.5 * dt
            _expm3_into(B, pade, E, sA, sA2, sA4, sA6, sU, sV, sW, sT)
            _mm3(R, E, Ppred)
            _inv3(Ppred, Pinv)
            _drift_node(g_node, bvecs, Pinv, D)
            _mm3(Pinv, D, B)
            tr = abs(B[0, 0] + B[1, 1] + B[2, 2])
            if tr > res:
                res = tr
            for i in range(3):
                for j in range(3):
                    B[i, j] *= dt
            _expm3_into(B, pade, E, sA, sA2, sA4, sA6, sU, sV, sW, sT)
            _mm3(R, E, out[nd])
        return out, res

    @njit(cache=True)
    def _scatter_gamma_numba(samples_x, samples_w, rho, c, h, n_cells, out):
        rho2 = rho * rho
        for sidx in range(samples_x.shape[0]):
            X0 = samples_x[sidx, 0]
            X1 = samples_x[sidx, 1]
            X2 = samples_x[sidx, 2]
            i0 = max(0, int(np.ceil((X0 - rho) / h)))
            j0 = max(0, int(np.ceil((X1 - rho) / h)))
            k0 = max(0, int(np.ceil((X2 - rho) / h)))
            i1 = min(n_cells, int(np.floor((X0 + rho) / h)))
            j1 = min(n_cells, int(np.floor((X1 + rho) / h)))
            k1 = min(n_cells, int(np.floor((X2 + rho) / h)))
            for i in range(i0, i1 + 1):
                dx = i * h - X0
                for j in range(j0, j1 + 1):
                    dy = j * h - X1
                    for k in range(k0, k1 + 1):
                        dz = k * h - X2
                        r2 = dx * dx + dy * dy + dz * dz
                        if r2 < rho2:
                            u = 1.0 - r2 / rho2
                            eta = c * u * u * u * u
                            out[i, j, k, 0] += eta * samples_w[sidx, 0]
                            out[i, j, k, 1] += eta * samples_w[sidx, 1]
                            out[i, j, k, 2] += eta * samples_w[sidx, 2]

    @njit(cache=True)
    def _elastic_energy_grad_numba(y, conn, gradN, N, detJ, Pinv_q, r, det_floor,
                                   fvals, want_grad):
        ne = conn.shape[0]
        nq = gradN.shape[0]
        grad = np.zeros_like(y)
        energy = 0.0
        min_det = 1e300
        F = np.empty((3, 3))
        E = np.empty((3, 3))
        cofE = np.empty((3, 3))
        dWdE = np.empty((3, 3))
        dWdF = np.empty((3, 3))
        for e in range(ne):
            for q in range(nq):
                for i in range(3):
                    for k in range(3):
                        acc = 0.0
                        for a in range(8):
                            acc += y[conn[e, a], i] * gradN[q, a, k]
                        F[i, k] = acc
                Pi = Pinv_q[e, q]
                for i in range(3):
                    for k in range(3):
                        E[i, k] = (F[i, 0] * Pi[0, k] + F[i, 1] * Pi[1, k]
                                   + F[i, 2] * Pi[2, k])
                det = (E[0, 0] * (E[1, 1] * E[2, 2] - E[1, 2] * E[2, 1])
                       - E[0, 1] * (E[1, 0] * E[2, 2] - E[1, 2] * E[2, 0])
                       + E[0, 2] * (E[1, 0] * E[2, 1] - E[1, 1] * E[2, 0]))
                if det < min_det:
                    min_det = det
                if det <= det_floor:
                    return np.inf, grad, min_det
                n2 = 0.0
                for i in range(3):
                    for k in range(3):
                        n2 += E[i, k] * E[i, k]
                energy += n2 ** (r / 2.0) + 1.0 / det
                # load pairing at this quadrature point
                for i in range(3):
                    yq = 0.0
                    for a in range(8):
                        yq += y[conn[e, a], i] * N[q, a]
                    energy -= fvals[e, q, i] * yq
                if want_grad:
                    cofE[0, 0] = E[1, 1] * E[2, 2] - E[1, 2] * E[2, 1]
                    cofE[0, 1] = E[1, 2] * E[2, 0] - E[1, 0] * E[2, 2]
                    cofE[0, 2] = E[1, 0] * E[2, 1] - E[1, 1] * E[2, 0]
                    cofE[1, 0] = E[0, 2] * E[2, 1] - E[0, 1] * E[2, 2]
                    cofE[1, 1] = E[0, 0] * E[2, 2] - E[0, 2] * E[2, 0]
                    cofE[1, 2] = E[0, 1] * E[2, 0] - E[0, 0] * E[2, 1]
                    cofE[2, 0] = E[0, 1] * E[1, 2] - E[0, 2] * E[1, 1]
                    cofE[2, 1] = E[0, 2] * E[1, 0] - E[0, 0] * E[1, 2]
                    cofE[2, 2] = E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]
                    coef = r * n2 ** (r / 2.0 - 1.0)
                    idet2 = 1.0 / (det * det)
                    for i in range(3):
                        for k in range(3):
                            dWdE[i, k] = coef * E[i, k] - idet2 * cofE[i, k]
                    for i in range(3):
                        for kk in range(3):
                            acc = 0.0
                            for k in range(3):
                                acc += dWdE[i, k] * Pi[kk, k]
                            dWdF[i, kk] = acc
                    for a in range(8):
                        na = conn[e, a]
                        for i in range(3):
                            gval = 0.0
                            for k in range(3):
                                gval += dWdF[i, k] * gradN[q, a, k]
                            grad[na, i] += (gval - fvals[e, q, i] * N[q, a]) * detJ
        return energy * detJ, grad, min_det

    def flow_substep(P, g_all, bvecs, dt):
        return _flow_substep_numba(P, g_all, bvecs, float(dt), _PADE6)

    scatter_gamma = _scatter_gamma_numba

    def elastic_energy_grad(y, conn, gradN, N, detJ, Pinv_q, r, det_floor,
                            fvals, want_grad=True):
        return _elastic_energy_grad_numba(y, conn, gradN, N, float(detJ), Pinv_q,
                                          float(r), float(det_floor), fvals,
                                          want_grad)

else:

    def flow_substep(P, g_all, bvecs, dt):
        return _flow_substep_numpy(P, g_all, bvecs, float(dt))

    scatter_gamma = _scatter_gamma_numpy

    def elastic_energy_grad(y, conn, gradN, N, detJ, Pinv_q, r, det_floor,
                            fvals, want_grad=True):
        return _elastic_energy_grad_numpy(y, conn, gradN, N, float(detJ), Pinv_q,
                                          float(r), float(det_floor), fvals,
                                          want_grad)


def expm3(B):
    """Matrix exponential of one 3x3 generator (scaling-and-squaring Pade(6))."""
    return _expm3_batch(np.asarray(B, dtype=float)[None])[0]
