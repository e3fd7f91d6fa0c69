"""The jitted kernels must agree with the pure-numpy reference."""

import numpy as np
import numpy.testing as npt
import pytest

from attmarl import _kernels_numpy as KP

KN = pytest.importorskip("attmarl._kernels_numba")

RNG = np.random.default_rng(99)
B, N, H, D, KH = 7, 9, 6, 5, 4


def rand(*shape):
    return RNG.standard_normal(shape)


@pytest.mark.parametrize("act", ["affine", "affine_relu", "affine_tanh"])
def test_affine_forward_parity(act):
    x, w, b = rand(B, N), rand(N, H), rand(H)
    npt.assert_allclose(getattr(KN, act)(x, w, b), getattr(KP, act)(x, w, b),
                        rtol=0, atol=1e-12)


@pytest.mark.parametrize("need_gx", [True, False])
def test_affine_backward_parity(need_gx):
    x, w, gy = rand(B, N), rand(N, H), rand(B, H)
    for fn_n, fn_p, y in [
        ("affine_bwd", "affine_bwd", None),
        ("affine_relu_bwd", "affine_relu_bwd", np.maximum(rand(B, H), 0)),
        ("affine_tanh_bwd", "affine_tanh_bwd", np.tanh(rand(B, H))),
    ]:
        args = (x, w) + (() if y is None else (y,)) + (gy, need_gx)
        out_n = getattr(KN, fn_n)(*args)
        out_p = getattr(KP, fn_p)(*args)
        for a, b_ in list(zip(out_n, out_p))[0 if need_gx else 1:]:
            npt.assert_allclose(a, b_, rtol=0, atol=1e-12)


def test_softmax_rows_parity():
    z = rand(B, KH) * 20
    yn, yp = KN.softmax_rows(z), KP.softmax_rows(z)
    npt.assert_allclose(yn, yp, rtol=0, atol=1e-14)
    gy = rand(B, KH)
    npt.assert_allclose(KN.softmax_rows_bwd(yp, gy), KP.softmax_rows_bwd(yp, gy),
                        rtol=0, atol=1e-14)


def test_heads_mlp_parity():
    x = rand(B, N)
    w1, b1 = rand(KH, N, H), rand(KH, H)
    w2, b2 = rand(KH, H, D), rand(KH, D)
    yn, hn = KN.heads_mlp(x, w1, b1, w2, b2)
    yp, hp = KP.heads_mlp(x, w1, b1, w2, b2)
    npt.assert_allclose(yn, yp, rtol=0, atol=1e-12)
    npt.assert_allclose(hn, hp, rtol=0, atol=1e-12)
    gy = rand(KH, B, D)
    for a, b_ in zip(KN.heads_mlp_bwd(x, w1, w2, hp, gy),
                     KP.heads_mlp_bwd(x, w1, w2, hp, gy)):
        npt.assert_allclose(a, b_, rtol=0, atol=1e-12)


def test_attention_kernels_parity():
    h, q = rand(B, D), rand(KH, B, D)
    npt.assert_allclose(KN.attn_scores(h, q), KP.attn_scores(h, q),
                        rtol=0, atol=1e-13)
    gs = rand(B, KH)
    for a, b_ in zip(KN.attn_scores_bwd(h, q, gs), KP.attn_scores_bwd(h, q, gs)):
        npt.assert_allclose(a, b_, rtol=0, atol=1e-13)
    w = KP.softmax_rows(rand(B, KH))
    npt.assert_allclose(KN.weighted_sum(w, q), KP.weighted_sum(w, q),
                        rtol=0, atol=1e-13)
    gy = rand(B, D)
    for a, b_ in zip(KN.weighted_sum_bwd(w, q, gy), KP.weighted_sum_bwd(w, q, gy)):
        npt.assert_allclose(a, b_, rtol=0, atol=1e-13)


def test_adam_and_lerp_parity():
    p0, g = rand(40), rand(40)
    m0, v0 = np.abs(rand(40)) * 0.1, np.abs(rand(40)) * 0.1
    pn, mn, vn = p0.copy(), m0.copy(), v0.copy()
    pp, mp_, vp = p0.copy(), m0.copy(), v0.copy()
    KN.adam_update(pn, g, mn, vn, 3, 0.01, 0.9, 0.999, 1e-8)
    KP.adam_update(pp, g, mp_, vp, 3, 0.01, 0.9, 0.999, 1e-8)
    npt.assert_allclose(pn, pp, rtol=0, atol=1e-15)
    npt.assert_allclose(mn, mp_, rtol=0, atol=1e-15)
    npt.assert_allclose(vn, vp, rtol=0, atol=1e-15)

    dn, dp = rand(30), None
    dp = dn.copy()
    src = rand(30)
    KN.lerp_inplace(dn, src, 0.001)
    KP.lerp_inplace(dp, src, 0.001)
    npt.assert_allclose(dn, dp, rtol=0, atol=0)
