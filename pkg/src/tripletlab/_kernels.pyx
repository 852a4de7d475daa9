# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver kernels; mirrors ``_fallback`` routine for routine."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log, fabs, INFINITY, isfinite

cnp.import_array()

DEF OBJ_HAUS = 0
DEF OBJ_SUP = 1
DEF OBJ_ISO = 2


cdef inline double _dist(const double[:, ::1] A, Py_ssize_t i,
                         const double[:, ::1] B, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t d
    cdef double s = 0.0, t
    for d in range(A.shape[1]):
        t = A[i, d] - B[j, d]
        s += t * t
    return sqrt(s)


cdef inline void _push(double[:, ::1] G, const double[:, ::1] Y, Py_ssize_t k,
                       Py_ssize_t l, double dist, double g) noexcept nogil:
    # d/dY of ||Y_k - Y_l|| scaled by g; zero-length pairs contribute nothing
    cdef Py_ssize_t d
    cdef double u
    if dist <= 0.0 or g == 0.0:
        return
    for d in range(Y.shape[1]):
        u = g * (Y[k, d] - Y[l, d]) / dist
        G[k, d] += u
        G[l, d] -= u


cdef void _pair_dists(const double[:, ::1] Y, double[:, ::1] D) noexcept nogil:
    cdef Py_ssize_t N = Y.shape[0], k, l
    cdef double v
    for k in range(N):
        D[k, k] = 0.0
        for l in range(k + 1, N):
            v = _dist(Y, k, Y, l)
            D[k, l] = v
            D[l, k] = v


cdef double _violation(const double[:, ::1] D, const long[::1] lab) noexcept nogil:
    cdef Py_ssize_t N = D.shape[0], a, j
    cdef double far, near, worst = -INFINITY
    for a in range(N):
        far = -INFINITY
        near = INFINITY
        for j in range(N):
            if j == a:
                continue
            if lab[j] == lab[a]:
                if D[a, j] > far:
                    far = D[a, j]
            elif D[a, j] < near:
                near = D[a, j]
        if far > -INFINITY and near < INFINITY and far - near > worst:
            worst = far - near
    return worst if worst > 0.0 else 0.0


cdef double _hard(const double[:, ::1] X, const double[:, ::1] Y, const long[::1] lab,
                  const double[:, ::1] DX, const double[:, ::1] DY, int kind) noexcept nogil:
    cdef Py_ssize_t N = Y.shape[0], a, b
    cdef double v, m, worst = 0.0
    if kind == OBJ_SUP:
        for a in range(N):
            v = _dist(X, a, Y, a)
            if v > worst:
                worst = v
    elif kind == OBJ_ISO:
        for a in range(N):
            for b in range(a + 1, N):
                v = fabs(DX[a, b] - DY[a, b])
                if v > worst:
                    worst = v
    else:
        # a as input point against output points of its class, then b the other way
        for a in range(N):
            m = INFINITY
            for b in range(N):
                if lab[b] == lab[a]:
                    v = _dist(X, a, Y, b)
                    if v < m:
                        m = v
            if m > worst:
                worst = m
        for b in range(N):
            m = INFINITY
            for a in range(N):
                if lab[a] == lab[b]:
                    v = _dist(X, a, Y, b)
                    if v < m:
                        m = v
            if m > worst:
                worst = m
    return worst


cdef double _smooth(const double[:, ::1] X, const double[:, ::1] Y, const long[::1] lab,
                    const double[:, ::1] DX, const double[:, ::1] DY, double[:, ::1] C,
                    double[::1] h, double[::1] S, int kind, double T, double w,
                    double[:, ::1] G) noexcept nogil:
    cdef Py_ssize_t N = Y.shape[0], n = Y.shape[1], a, b, d, j
    cdef double m, z, s, v, e1, e2, g, fo, fp, far, near, sp, sn, mp, mn, u
    for a in range(N):
        for d in range(n):
            G[a, d] = 0.0

    # objective
    if kind == OBJ_SUP:
        m = 0.0
        for a in range(N):
            h[a] = _dist(X, a, Y, a)
            if h[a] > m:
                m = h[a]
        z = 0.0
        for a in range(N):
            z += exp((h[a] - m) / T)
        fo = m + T * log(z)
        for a in range(N):
            g = exp((h[a] - m) / T) / z
            if h[a] > 0.0:
                for d in range(n):
                    G[a, d] += g * (Y[a, d] - X[a, d]) / h[a]
    elif kind == OBJ_ISO:
        m = 0.0
        for a in range(N):
            for b in range(a + 1, N):
                v = fabs(DY[a, b] - DX[a, b])
                if v > m:
                    m = v
        z = 0.0
        for a in range(N):
            for b in range(a + 1, N):
                v = DY[a, b] - DX[a, b]
                z += exp((v - m) / T) + exp((-v - m) / T)
        fo = m + T * log(z)
        for a in range(N):
            for b in range(a + 1, N):
                v = DY[a, b] - DX[a, b]
                g = (exp((v - m) / T) - exp((-v - m) / T)) / z
                _push(G, Y, a, b, DY[a, b], g)
    else:
        for a in range(N):
            for b in range(N):
                if lab[a] == lab[b]:
                    C[a, b] = _dist(X, a, Y, b)
        # h[0:N]: soft-min over b for input point a; h[N:2N]: over a for output point b
        for a in range(N):
            mn = INFINITY
            for b in range(N):
                if lab[b] == lab[a] and C[a, b] < mn:
                    mn = C[a, b]
            s = 0.0
            for b in range(N):
                if lab[b] == lab[a]:
                    s += exp(-(C[a, b] - mn) / T)
            h[a] = mn - T * log(s)
            S[a] = s
            S[N + a] = mn
        for b in range(N):
            mn = INFINITY
            for a in range(N):
                if lab[a] == lab[b] and C[a, b] < mn:
                    mn = C[a, b]
            s = 0.0
            for a in range(N):
                if lab[a] == lab[b]:
                    s += exp(-(C[a, b] - mn) / T)
            h[N + b] = mn - T * log(s)
            S[2 * N + b] = s
            S[3 * N + b] = mn
        m = -INFINITY
        for j in range(2 * N):
            if h[j] > m:
                m = h[j]
        z = 0.0
        for j in range(2 * N):
            z += exp((h[j] - m) / T)
        fo = m + T * log(z)
        for a in range(N):
            e1 = exp((h[a] - m) / T) / z
            for b in range(N):
                if lab[a] != lab[b]:
                    continue
                e2 = exp((h[N + b] - m) / T) / z
                g = (e1 * exp(-(C[a, b] - S[N + a]) / T) / S[a]
                     + e2 * exp(-(C[a, b] - S[3 * N + b]) / T) / S[2 * N + b])
                if C[a, b] > 0.0 and g != 0.0:
                    for d in range(n):
                        G[b, d] += g * (Y[b, d] - X[a, d]) / C[a, b]

    # penalty: T log(1 + sum over triplets exp(signed_loss / T)), factored per anchor
    fp = -INFINITY
    for a in range(N):
        far = -INFINITY
        near = INFINITY
        for j in range(N):
            if j == a:
                continue
            if lab[j] == lab[a]:
                if DY[a, j] > far:
                    far = DY[a, j]
            elif DY[a, j] < near:
                near = DY[a, j]
        if far == -INFINITY or near == INFINITY:
            h[a] = -INFINITY
            continue
        sp = 0.0
        sn = 0.0
        for j in range(N):
            if j == a:
                continue
            if lab[j] == lab[a]:
                sp += exp((DY[a, j] - far) / T)
            else:
                sn += exp(-(DY[a, j] - near) / T)
        S[a] = sp
        S[N + a] = sn
        S[2 * N + a] = far
        S[3 * N + a] = near
        h[a] = (far - near) / T + log(sp) + log(sn)
        if h[a] > fp:
            fp = h[a]
    if fp == -INFINITY:
        return fo
    mp = fp if fp > 0.0 else 0.0
    z = exp(-mp)
    for a in range(N):
        if h[a] > -INFINITY:
            z += exp(h[a] - mp)
    fp = T * (mp + log(z))
    for a in range(N):
        if h[a] == -INFINITY:
            continue
        u = w * exp(h[a] - mp) / z
        for j in range(N):
            if j == a:
                continue
            if lab[j] == lab[a]:
                g = u * exp((DY[a, j] - S[2 * N + a]) / T) / S[a]
            else:
                g = -u * exp(-(DY[a, j] - S[3 * N + a]) / T) / S[N + a]
            _push(G, Y, a, j, DY[a, j], g)
    return fo + w * fp


def _prep(X, Y, labels):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    lab = np.ascontiguousarray(labels, dtype=np.int64).astype(np.dtype("l"), copy=False)
    return X, Y, lab


def hard_violation(Y, labels):
    """max(0, hardest signed triplet loss) of ``Y``; 0 when no triplet exists."""
    _, Yc, lab = _prep(Y, Y, labels)
    N = Yc.shape[0]
    D = np.empty((N, N))
    _pair_dists(Yc, D)
    return _violation(D, lab)


def hard_objective(X, Y, labels, int kind):
    """Exact (non-smoothed) objective of ``Y`` against ``X``."""
    if kind not in (OBJ_HAUS, OBJ_SUP, OBJ_ISO):
        raise ValueError(f"unknown objective kind {kind}")
    Xc, Yc, lab = _prep(X, Y, labels)
    N = Yc.shape[0]
    DX = np.empty((N, N))
    DY = np.empty((N, N))
    _pair_dists(Xc, DX)
    _pair_dists(Yc, DY)
    return _hard(Xc, Yc, lab, DX, DY, kind)


def smooth_value_grad(X, Y, labels, int kind, double temperature, double penalty_weight):
    """Smoothed penalized objective and its gradient with respect to ``Y``."""
    if kind not in (OBJ_HAUS, OBJ_SUP, OBJ_ISO):
        raise ValueError(f"unknown objective kind {kind}")
    Xc, Yc, lab = _prep(X, Y, labels)
    N, n = Yc.shape[0], Yc.shape[1]
    DX = np.empty((N, N))
    DY = np.empty((N, N))
    C = np.zeros((N, N))
    h = np.empty(2 * N)
    S = np.empty(4 * N)
    G = np.zeros((N, n))
    _pair_dists(Xc, DX)
    _pair_dists(Yc, DY)
    f = _smooth(Xc, Yc, lab, DX, DY, C, h, S, kind, temperature, penalty_weight, G)
    return f, G


def descend(X, Y0, labels, int kind, temperatures, weights, int iters_per_stage,
            double step, double decay, double momentum, double tol):
    """Annealed heavy-ball descent on the smoothed penalized objective.

    Returns ``(Y, iterations, best_feasible_Y, best_feasible_objective)``.
    """
    Xc, Yc, lab = _prep(X, Y0, labels)
    Yc = Yc.copy()
    cdef Py_ssize_t N = Yc.shape[0], n = Yc.shape[1], i, d, stage
    cdef double[:, ::1] Xv = Xc
    cdef double[:, ::1] Yv = Yc
    cdef long[::1] lv = lab
    DX_a = np.empty((N, N))
    DY_a = np.empty((N, N))
    cdef double[:, ::1] DX = DX_a
    cdef double[:, ::1] DY = DY_a
    cdef double[:, ::1] C = np.zeros((N, N))
    cdef double[::1] h = np.empty(2 * N)
    cdef double[::1] S = np.empty(4 * N)
    cdef double[:, ::1] G = np.zeros((N, n))
    cdef double[:, ::1] V = np.zeros((N, n))
    best_a = np.empty((N, n))
    cdef double[:, ::1] B = best_a
    cdef double best = INFINITY, f, prev, lr = step, T, w, hv
    cdef int it = 0, found = 0, k, ok = 1
    cdef double[::1] Ts = np.ascontiguousarray(temperatures, dtype=np.float64)
    cdef double[::1] Ws = np.ascontiguousarray(weights, dtype=np.float64)
    cdef int stages = Ts.shape[0]
    _pair_dists(Xv, DX)
    with nogil:
        for stage in range(stages):
            T = Ts[stage]
            w = Ws[stage]
            lr = step * T / Ts[0]
            for i in range(N):
                for d in range(n):
                    V[i, d] = 0.0
            prev = INFINITY
            for k in range(iters_per_stage):
                _pair_dists(Yv, DY)
                f = _smooth(Xv, Yv, lv, DX, DY, C, h, S, kind, T, w, G)
                ok = isfinite(f)
                for i in range(N):
                    for d in range(n):
                        if not isfinite(G[i, d]):
                            ok = 0
                if not ok:
                    break
                for i in range(N):
                    for d in range(n):
                        V[i, d] = momentum * V[i, d] - lr * G[i, d]
                        Yv[i, d] += V[i, d]
                lr *= decay
                it += 1
                _pair_dists(Yv, DY)
                if _violation(DY, lv) == 0.0:
                    hv = _hard(Xv, Yv, lv, DX, DY, kind)
                    if hv < best:
                        best = hv
                        found = 1
                        for i in range(N):
                            for d in range(n):
                                B[i, d] = Yv[i, d]
                if fabs(prev - f) <= tol * (fabs(f) if fabs(f) > 1.0 else 1.0):
                    break
                prev = f
            if not ok:
                break
    if not ok:
        return None, it, (best_a if found else None), best
    return Yc, it, (best_a if found else None), best
