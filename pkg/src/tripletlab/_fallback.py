"""Pure numpy implementations of the solver kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the extension is tested against. All routines work on
``float64`` arrays: ``X`` is the fixed input embedding, ``Y`` the free
configuration, both ``(N, n)``; ``labels`` are integer class codes
``0..c-1``.
"""

import numpy as np

OBJ_HAUS = 0
OBJ_SUP = 1
OBJ_ISO = 2


def _lse(z, axis=None):
    """Stable log-sum-exp, also returning the softmax weights."""
    m = np.max(z, axis=axis, keepdims=True)
    e = np.exp(z - m)
    s = np.sum(e, axis=axis, keepdims=True)
    out = np.log(s) + m
    w = e / s
    if axis is None:
        return float(out.reshape(())), w
    return np.squeeze(out, axis=axis), w


def _diffs(Y):
    diff = Y[:, None, :] - Y[None, :, :]
    D = np.sqrt(np.sum(diff * diff, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        U = np.where(D[..., None] > 0, diff / D[..., None], 0.0)
    return D, U


def _masks(labels):
    same = labels[:, None] == labels[None, :]
    other = ~same
    np.fill_diagonal(same, False)
    return same, other


def hard_violation(Y, labels):
    """max(0, hardest signed triplet loss) of ``Y``; 0 when no triplet exists."""
    D, _ = _diffs(Y)
    same, other = _masks(labels)
    anchors = same.any(axis=1) & other.any(axis=1)
    if not anchors.any():
        return 0.0
    far_pos = np.where(same, D, -np.inf).max(axis=1)
    near_neg = np.where(other, D, np.inf).min(axis=1)
    return max(0.0, float(np.max((far_pos - near_neg)[anchors])))


def hard_objective(X, Y, labels, kind):
    """Exact (non-smoothed) objective of ``Y`` against ``X``."""
    if kind == OBJ_SUP:
        return float(np.max(np.sqrt(np.sum((X - Y) ** 2, axis=1))))
    if kind == OBJ_ISO:
        DX, _ = _diffs(X)
        DY, _ = _diffs(Y)
        return float(np.max(np.abs(DX - DY)))
    if kind == OBJ_HAUS:
        worst = 0.0
        for c in np.unique(labels):
            idx = np.flatnonzero(labels == c)
            diff = X[idx][:, None, :] - Y[idx][None, :, :]
            C = np.sqrt(np.sum(diff * diff, axis=-1))
            worst = max(worst, float(C.min(axis=1).max()), float(C.min(axis=0).max()))
        return worst
    raise ValueError(f"unknown objective kind {kind}")


def _smooth_objective(X, Y, labels, kind, T):
    N = Y.shape[0]
    G = np.zeros_like(Y)
    if kind == OBJ_SUP:
        diff = Y - X
        r = np.sqrt(np.sum(diff * diff, axis=1))
        val, w = _lse(r / T)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(r[:, None] > 0, diff / r[:, None], 0.0)
        G += w[:, None] * u
        return T * val, G
    if kind == OBJ_ISO:
        DX, _ = _diffs(X)
        DY, U = _diffs(Y)
        iu = np.triu_indices(N, 1)
        delta = (DY - DX)[iu]
        val, w = _lse(np.concatenate([delta, -delta]) / T)
        m = delta.size
        g = w[:m] - w[m:]
        Gd = np.zeros((N, N))
        Gd[iu] = g
        Gd = Gd + Gd.T
        G += np.einsum("kl,kld->kd", Gd, U)
        return T * val, G
    if kind == OBJ_HAUS:
        blocks = []
        for c in np.unique(labels):
            idx = np.flatnonzero(labels == c)
            diff = X[idx][:, None, :] - Y[idx][None, :, :]
            C = np.sqrt(np.sum(diff * diff, axis=-1))
            with np.errstate(invalid="ignore", divide="ignore"):
                # d C_ab / d Y_b
                V = np.where(C[..., None] > 0, -diff / C[..., None], 0.0)
            # soft-min over b for each a, and over a for each b
            h1, w1 = _lse(-C / T, axis=1)
            h2, w2 = _lse(-C / T, axis=0)
            blocks.append((idx, V, -T * h1, w1, -T * h2, w2))
        terms = np.concatenate([np.concatenate([b[2], b[4]]) for b in blocks])
        val, w = _lse(terms / T)
        pos = 0
        for idx, V, h1, w1, h2, w2 in blocks:
            k = idx.size
            wa = w[pos:pos + k]
            wb = w[pos + k:pos + 2 * k]
            pos += 2 * k
            dC = wa[:, None] * w1 + wb[None, :] * w2
            G[idx] += np.einsum("ab,abd->bd", dC, V)
        return T * val, G
    raise ValueError(f"unknown objective kind {kind}")


def _smooth_penalty(Y, labels, T):
    """T * log(1 + sum over triplets exp(signed_loss / T)), in O(N^2)."""
    N = Y.shape[0]
    D, U = _diffs(Y)
    same, other = _masks(labels)
    anchors = np.flatnonzero(same.any(axis=1) & other.any(axis=1))
    G = np.zeros_like(Y)
    if anchors.size == 0:
        return 0.0, G
    Z = D[anchors] / T
    lp, wp = _lse(np.where(same[anchors], Z, -np.inf), axis=1)
    ln, wn = _lse(np.where(other[anchors], -Z, -np.inf), axis=1)
    S = lp + ln
    val, pi = _lse(np.concatenate([[0.0], S]))
    pi = pi[1:]
    Gd = np.zeros((N, N))
    Gd[anchors] = pi[:, None] * (wp - wn)
    Gd = Gd + Gd.T
    G += np.einsum("kl,kld->kd", Gd, U)
    return T * val, G


def smooth_value_grad(X, Y, labels, kind, temperature, penalty_weight):
    """Smoothed penalized objective and its gradient with respect to ``Y``."""
    fo, go = _smooth_objective(X, Y, labels, kind, temperature)
    fp, gp = _smooth_penalty(Y, labels, temperature)
    return fo + penalty_weight * fp, go + penalty_weight * gp


def descend(X, Y0, labels, kind, temperatures, weights, iters_per_stage,
            step, decay, momentum, tol):
    """Annealed heavy-ball descent on the smoothed penalized objective.

    Each stage restarts the momentum with step ``step * T / T_0``, decayed
    by ``decay`` per iteration. Returns ``(Y, iterations, best_feasible_Y, best_feasible_objective)``;
    the best feasible iterate is tracked by exact evaluation and is ``None``
    if no iterate was exactly feasible.
    """
    Y = np.array(Y0, dtype=float, copy=True)
    V = np.zeros_like(Y)
    best_Y = None
    best = np.inf
    it = 0
    for T, w in zip(temperatures, weights):
        # the smoothed gradient is ~1/T-Lipschitz, so the step follows T
        lr = step * T / temperatures[0]
        V[:] = 0.0
        prev = np.inf
        for _ in range(iters_per_stage):
            f, g = smooth_value_grad(X, Y, labels, kind, T, w)
            if not np.isfinite(f) or not np.all(np.isfinite(g)):
                return None, it, best_Y, best
            V = momentum * V - lr * g
            Y = Y + V
            lr *= decay
            it += 1
            if hard_violation(Y, labels) == 0.0:
                h = hard_objective(X, Y, labels, kind)
                if h < best:
                    best = h
                    best_Y = Y.copy()
            if abs(prev - f) <= tol * max(1.0, abs(f)):
                break
            prev = f
    return Y, it, best_Y, best
