"""Tape correctness: hand oracles for the composites, finite differences for
everything else, and the error contracts the model relies on."""
import math

import numpy as np
import pytest

from mupt import autodiff as ad
from mupt.rng import SeededRng


def _fd_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g


def _check_unary(op, x, tol=1e-6):
    leaf = ad.Var(x.copy())
    loss = ad.reduce_sum(ad.mul(op(leaf), ad.Var(np.cos(x) + 2.0)))
    got = ad.reverse_grad(loss, {"x": leaf})["x"]
    want = _fd_grad(lambda v: float(np.sum((np.cos(x) + 2.0) * ad.val(op(ad.Var(v))))), x)
    np.testing.assert_allclose(got, want, rtol=tol, atol=tol)


def test_elementwise_grads_match_finite_differences():
    rng = SeededRng(0)
    x = np.asarray(rng.uniform(0.2, 1.8, (3, 4)))
    _check_unary(ad.exp, x)
    _check_unary(ad.log, x)
    _check_unary(ad.sqrt, x)
    _check_unary(ad.square, x)
    _check_unary(ad.neg, x)


def test_arithmetic_operators_and_broadcasting():
    a = ad.Var(np.arange(6, dtype=float).reshape(2, 3))
    b = ad.Var(np.ones(3) * 2.0)
    out = (a + b) * b - a / 2.0 + 1.5
    np.testing.assert_allclose(
        ad.val(out), (np.arange(6).reshape(2, 3) + 2.0) * 2.0
        - np.arange(6).reshape(2, 3) / 2.0 + 1.5)
    grads = ad.reverse_grad(ad.reduce_sum(out), {"a": a, "b": b})
    np.testing.assert_allclose(grads["a"], np.full((2, 3), 1.5))
    # d/db sum((a+b)*b) = sum over rows of (a + 2b)
    np.testing.assert_allclose(grads["b"], (np.arange(6).reshape(2, 3)
                                            + 4.0).sum(axis=0))


def test_matmul_batched_grad():
    rng = SeededRng(1)
    a = np.asarray(rng.normal((2, 3, 4), 1.0))
    b = np.asarray(rng.normal((4, 5), 1.0))
    va, vb = ad.Var(a.copy()), ad.Var(b.copy())
    w = np.asarray(rng.normal((2, 3, 5), 1.0))
    loss = ad.reduce_sum(ad.mul(ad.matmul(va, vb), ad.Var(w)))
    grads = ad.reverse_grad(loss, {"a": va, "b": vb})
    np.testing.assert_allclose(grads["a"], w @ b.T, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(grads["b"], sum(a[k].T @ w[k] for k in range(2)),
                               rtol=1e-12, atol=1e-12)


def test_take_and_take_along_scatter_add():
    table = ad.Var(np.arange(10, dtype=float).reshape(5, 2))
    idx = np.array([1, 3, 1])
    out = ad.take(table, idx)
    np.testing.assert_allclose(ad.val(out), np.arange(10).reshape(5, 2)[idx])
    g = ad.reverse_grad(ad.reduce_sum(out), {"t": table})["t"]
    want = np.zeros((5, 2))
    np.add.at(want, idx, 1.0)   # repeated rows accumulate
    np.testing.assert_allclose(g, want)


def test_logsumexp_matches_numpy_and_grad_is_softmax():
    x = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    v = ad.Var(x.copy())
    out = ad.logsumexp(v, axis=-1)
    want = np.log(np.exp(x).sum(axis=-1))
    np.testing.assert_allclose(ad.val(out), want, rtol=1e-14)
    g = ad.reverse_grad(ad.reduce_sum(out), {"x": v})["x"]
    np.testing.assert_allclose(g, np.exp(x - want[:, None]), rtol=1e-12)


def test_softmax_rows_oracle_quarters():
    # logits [ln1, ln3] put exactly 1/4 and 3/4 of the mass
    out = ad.softmax_rows(np.array([[0.0, math.log(3.0)]]))
    np.testing.assert_allclose(out, [[0.25, 0.75]], rtol=1e-14)


def test_softmax_rows_shift_invariance_and_argmax():
    rng = SeededRng(2)
    x = np.asarray(rng.normal((6, 9), 2.0))
    a = ad.softmax_rows(x)
    b = ad.softmax_rows(x + 123.456)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
    assert (a.argmax(axis=-1) == x.argmax(axis=-1)).all()
    np.testing.assert_allclose(a.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_softmax_rows_mask_zeroes_and_degenerate_row_raises():
    x = np.zeros((2, 3))
    mask = np.array([[True, False, True], [True, True, True]])
    out = ad.softmax_rows(x, mask)
    np.testing.assert_allclose(out[0], [0.5, 0.0, 0.5])
    assert out[0, 1] == 0.0
    with pytest.raises(ValueError, match="degenerate distribution support"):
        ad.softmax_rows(x, np.zeros((2, 3), dtype=bool))


def test_rms_norm_oracle():
    # rms([3,4]) = sqrt(12.5); zero eps makes the oracle exact
    out = ad.rms_norm(np.array([[3.0, 4.0]]), np.array([1.0, 1.0]), eps=0.0)
    np.testing.assert_allclose(out, np.array([[3.0, 4.0]]) / math.sqrt(12.5),
                               rtol=1e-15)
    gained = ad.rms_norm(np.array([[3.0, 4.0]]), np.array([2.0, 0.5]), eps=0.0)
    np.testing.assert_allclose(gained, out * np.array([2.0, 0.5]), rtol=1e-15)


def test_reverse_grad_returns_exact_zeros_for_untouched_params():
    x = ad.Var(np.ones(3))
    unused = ad.Var(np.ones(4))
    loss = ad.reduce_sum(ad.square(x))
    grads = ad.reverse_grad(loss, {"x": x, "unused": unused})
    np.testing.assert_allclose(grads["x"], 2.0 * np.ones(3))
    assert grads["unused"].shape == (4,)
    assert (grads["unused"] == 0.0).all()


def test_finite_diff_check_passes_on_smooth_composite():
    rng = SeededRng(3)
    w0 = np.asarray(rng.normal((4, 3), 0.5))
    b0 = np.asarray(rng.normal((3,), 0.5))

    def loss_fn(params):
        h = ad.matmul(params["w"], ad.swapaxes(params["w"], 0, 1))
        z = ad.reduce_sum(ad.softmax_rows(h), axis=0)
        return ad.reduce_sum(ad.mul(ad.exp(ad.reduce_mean(params["b"])), ad.reduce_sum(z)))

    report = ad.finite_diff_check(loss_fn, {"w": w0, "b": b0})
    assert report.passed, report.worst_coord
    assert report.worst_ratio <= 1.0


def test_finite_diff_check_detects_wrong_gradient():
    # a function of discrete structure: argmax breaks differentiability,
    # so the tape's gradient (through the smooth branch) disagrees with fd
    x0 = np.array([1.0, 1.0 + 1e-7])

    def loss_fn(params):
        v = params["x"]
        return ad.reduce_sum(ad.mul(v, ad.Var(np.array([0.0, 1.0])))) \
            + ad.reduce_sum(ad.mul(v, ad.Var(np.array([1e4, 0.0])))) * 0.0

    # gradient of the second term is exactly 0 on the tape, and fd agrees;
    # corrupt instead by lying about the loss via non-determinism
    calls = []

    def lying_loss(params):
        calls.append(0)
        jitter = 1e-3 if len(calls) > 1 else 0.0
        return ad.reduce_sum(ad.mul(params["x"], ad.Var(np.array([1.0, 1.0 + jitter]))))

    with pytest.raises(ValueError, match="deterministic"):
        ad.finite_diff_check(lying_loss, {"x": x0})
