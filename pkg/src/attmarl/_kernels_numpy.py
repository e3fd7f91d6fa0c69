"""Pure-numpy reference implementations of the hot numeric kernels.

Every function here has a jitted twin in ``_kernels_numba`` with the same
signature and semantics. Shapes follow two conventions: plain batches are
``(B, n)`` row-major, head stacks are ``(K, B, d)`` so each head slice stays
contiguous.
"""

import numpy as np

NAME = "numpy"


def affine(x, w, b):
    return x @ w + b


def affine_relu(x, w, b):
    return np.maximum(x @ w + b, 0.0)


def affine_tanh(x, w, b):
    return np.tanh(x @ w + b)


def affine_bwd(x, w, gy, need_gx):
    gx = gy @ w.T if need_gx else np.empty((0, 0))
    return gx, x.T @ gy, gy.sum(axis=0)


def affine_relu_bwd(x, w, y, gy, need_gx):
    gz = gy * (y > 0)
    return affine_bwd(x, w, gz, need_gx)


def affine_tanh_bwd(x, w, y, gy, need_gx):
    gz = gy * (1.0 - y * y)
    return affine_bwd(x, w, gz, need_gx)


def softmax_rows(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_bwd(y, gy):
    return y * (gy - (y * gy).sum(axis=1, keepdims=True))


def heads_mlp(x, w1, b1, w2, b2):
    """K two-layer nets (relu hidden, linear out) on a shared input.

    x: (B, n); w1: (K, n, h); b1: (K, h); w2: (K, h, d); b2: (K, d).
    Returns (out (K, B, d), hidden (K, B, h)); hidden is the bwd cache.
    Batched matmuls keep this on the BLAS path.
    """
    hid = np.maximum(np.matmul(x[None, :, :], w1) + b1[:, None, :], 0.0)
    out = np.matmul(hid, w2) + b2[:, None, :]
    return out, hid


def heads_mlp_bwd(x, w1, w2, hid, gy):
    gw2 = np.matmul(hid.transpose(0, 2, 1), gy)
    gb2 = gy.sum(axis=1)
    gh = np.matmul(gy, w2.transpose(0, 2, 1))
    gh *= hid > 0
    gw1 = np.matmul(x.T[None, :, :], gh)
    gb1 = gh.sum(axis=1)
    gx = np.matmul(gh, w1.transpose(0, 2, 1)).sum(axis=0)
    return gx, gw1, gb1, gw2, gb2


def attn_scores(h, q):
    """Row-wise dot scores between a query h (B, d) and heads q (K, B, d)."""
    return np.einsum("bd,kbd->bk", h, q)


def attn_scores_bwd(h, q, gs):
    gh = np.einsum("bk,kbd->bd", gs, q)
    gq = gs.T[:, :, None] * h[None, :, :]
    return gh, gq


def weighted_sum(w, q):
    """Convex combination of heads: w (B, K), q (K, B, d) -> (B, d)."""
    return np.einsum("bk,kbd->bd", w, q)


def weighted_sum_bwd(w, q, gy):
    gw = np.einsum("bd,kbd->bk", gy, q)
    gq = w.T[:, :, None] * gy[None, :, :]
    return gw, gq


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """One in-place Adam step on flat parameter/gradient arrays."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def lerp_inplace(dst, src, tau):
    """dst <- tau*src + (1-tau)*dst, elementwise."""
    dst[:] = tau * src + (1.0 - tau) * dst
