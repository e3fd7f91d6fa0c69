"""Jitted twins of ``_kernels_numpy``; same signatures, fused inner loops.

Matmuls go through np.dot (BLAS); bias/activation/elementwise work is fused
into explicit loops to avoid temporary arrays. All kernels are cached on disk
so spawned worker processes skip recompilation.
"""

import numpy as np
from numba import njit

NAME = "numba"

_JIT = dict(cache=True, fastmath=False, nogil=True)


@njit(**_JIT)
def affine(x, w, b):
    y = np.dot(x, w)
    for i in range(y.shape[0]):
        for j in range(y.shape[1]):
            y[i, j] += b[j]
    return y


@njit(**_JIT)
def affine_relu(x, w, b):
    y = np.dot(x, w)
    for i in range(y.shape[0]):
        for j in range(y.shape[1]):
            v = y[i, j] + b[j]
            y[i, j] = v if v > 0.0 else 0.0
    return y


@njit(**_JIT)
def affine_tanh(x, w, b):
    y = np.dot(x, w)
    for i in range(y.shape[0]):
        for j in range(y.shape[1]):
            y[i, j] = np.tanh(y[i, j] + b[j])
    return y


@njit(**_JIT)
def affine_bwd(x, w, gy, need_gx):
    if need_gx:
        gx = np.dot(gy, w.T)
    else:
        gx = np.empty((0, 0))
    gw = np.dot(x.T, gy)
    gb = np.zeros(gy.shape[1])
    for i in range(gy.shape[0]):
        for j in range(gy.shape[1]):
            gb[j] += gy[i, j]
    return gx, gw, gb


@njit(**_JIT)
def affine_relu_bwd(x, w, y, gy, need_gx):
    gz = np.empty_like(gy)
    for i in range(gy.shape[0]):
        for j in range(gy.shape[1]):
            gz[i, j] = gy[i, j] if y[i, j] > 0.0 else 0.0
    return affine_bwd(x, w, gz, need_gx)


@njit(**_JIT)
def affine_tanh_bwd(x, w, y, gy, need_gx):
    gz = np.empty_like(gy)
    for i in range(gy.shape[0]):
        for j in range(gy.shape[1]):
            gz[i, j] = gy[i, j] * (1.0 - y[i, j] * y[i, j])
    return affine_bwd(x, w, gz, need_gx)


@njit(**_JIT)
def softmax_rows(z):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        m = z[i, 0]
        for j in range(1, z.shape[1]):
            if z[i, j] > m:
                m = z[i, j]
        s = 0.0
        for j in range(z.shape[1]):
            e = np.exp(z[i, j] - m)
            out[i, j] = e
            s += e
        for j in range(z.shape[1]):
            out[i, j] /= s
    return out


@njit(**_JIT)
def softmax_rows_bwd(y, gy):
    gz = np.empty_like(y)
    for i in range(y.shape[0]):
        s = 0.0
        for j in range(y.shape[1]):
            s += y[i, j] * gy[i, j]
        for j in range(y.shape[1]):
            gz[i, j] = y[i, j] * (gy[i, j] - s)
    return gz


@njit(**_JIT)
def heads_mlp(x, w1, b1, w2, b2):
    k, _, h = w1.shape
    b, d = x.shape[0], w2.shape[2]
    hid = np.empty((k, b, h))
    out = np.empty((k, b, d))
    for kk in range(k):
        z = np.dot(x, w1[kk])
        for i in range(b):
            for j in range(h):
                v = z[i, j] + b1[kk, j]
                hid[kk, i, j] = v if v > 0.0 else 0.0
        y = np.dot(hid[kk], w2[kk])
        for i in range(b):
            for j in range(d):
                out[kk, i, j] = y[i, j] + b2[kk, j]
    return out, hid


@njit(**_JIT)
def heads_mlp_bwd(x, w1, w2, hid, gy):
    k = w1.shape[0]
    gx = np.zeros_like(x)
    gw1 = np.empty_like(w1)
    gb1 = np.empty((k, w1.shape[2]))
    gw2 = np.empty_like(w2)
    gb2 = np.empty((k, w2.shape[2]))
    for kk in range(k):
        gyk = gy[kk]
        gw2[kk] = np.dot(hid[kk].T, gyk)
        for j in range(gyk.shape[1]):
            s = 0.0
            for i in range(gyk.shape[0]):
                s += gyk[i, j]
            gb2[kk, j] = s
        gh = np.dot(gyk, w2[kk].T)
        for i in range(gh.shape[0]):
            for j in range(gh.shape[1]):
                if hid[kk, i, j] <= 0.0:
                    gh[i, j] = 0.0
        gw1[kk] = np.dot(x.T, gh)
        for j in range(gh.shape[1]):
            s = 0.0
            for i in range(gh.shape[0]):
                s += gh[i, j]
            gb1[kk, j] = s
        gx += np.dot(gh, w1[kk].T)
    return gx, gw1, gb1, gw2, gb2


@njit(**_JIT)
def attn_scores(h, q):
    k, b, d = q.shape
    s = np.empty((b, k))
    for kk in range(k):
        for i in range(b):
            acc = 0.0
            for j in range(d):
                acc += h[i, j] * q[kk, i, j]
            s[i, kk] = acc
    return s


@njit(**_JIT)
def attn_scores_bwd(h, q, gs):
    k, b, d = q.shape
    gh = np.zeros_like(h)
    gq = np.empty_like(q)
    for kk in range(k):
        for i in range(b):
            g = gs[i, kk]
            for j in range(d):
                gh[i, j] += g * q[kk, i, j]
                gq[kk, i, j] = g * h[i, j]
    return gh, gq


@njit(**_JIT)
def weighted_sum(w, q):
    k, b, d = q.shape
    c = np.zeros((b, d))
    for kk in range(k):
        for i in range(b):
            wk = w[i, kk]
            for j in range(d):
                c[i, j] += wk * q[kk, i, j]
    return c


@njit(**_JIT)
def weighted_sum_bwd(w, q, gy):
    k, b, d = q.shape
    gw = np.empty((b, k))
    gq = np.empty_like(q)
    for kk in range(k):
        for i in range(b):
            acc = 0.0
            for j in range(d):
                acc += gy[i, j] * q[kk, i, j]
                gq[kk, i, j] = w[i, kk] * gy[i, j]
            gw[i, kk] = acc
    return gw, gq


@njit(**_JIT)
def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i in range(p.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


@njit(**_JIT)
def lerp_inplace(dst, src, tau):
    for i in range(dst.shape[0]):
        dst[i] = tau * src[i] + (1.0 - tau) * dst[i]
