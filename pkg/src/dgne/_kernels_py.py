"""Numpy implementation of the decentralized round (fallback backend)."""
import numpy as np


def decentralized_step(est, v, lam, lam_prev, W, C, M, c, A, owner, offsets,
                       alpha, beta, gamma):
    """One synchronous round for an affine game ``F(x) = M x + c``.

    ``est`` is ``(N, n)`` (row i = player i's copy of the profile), ``v``,
    ``lam`` and ``lam_prev`` are ``(N, m)``. ``owner[k]`` is the player that
    owns coordinate ``k`` and ``offsets`` the block boundaries. Returns
    ``(est_next, v_next, lam_next)``. Inputs are not modified.
    """
    n = est.shape[1]
    cols = np.arange(n)
    x_old = est[owner, cols]
    mixed = W @ est
    own_rows = est[owner]
    grad = np.einsum("kj,kj->k", M, own_rows) + c
    dual_push = np.einsum("rk,kr->k", A, lam[owner])
    x_new = mixed[owner, cols] - alpha * (grad + dual_push)
    mixed[owner, cols] = x_new
    a_dx = np.add.reduceat(A * (x_new - x_old), offsets[:-1], axis=1).T
    delta = lam - lam_prev
    v_new = v - gamma * (C @ v) - C @ delta + delta + beta * a_dx
    return mixed, v_new, np.maximum(v_new, 0.0)
