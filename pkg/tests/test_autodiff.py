import math

import numpy as np
import pytest

from contrastnli import autodiff as ad
from contrastnli.gradcheck import check_gradients, numeric_gradient, relative_errors


def tensor(data):
    return ad.parameter(np.asarray(data, dtype=np.float64))


# ---------------------------------------------------------------------------
# matmul
# ---------------------------------------------------------------------------

def test_matmul_identity():
    a = tensor([[1.0, 2.0], [3.0, 4.0]])
    out = ad.matmul(ad.constant(np.eye(2)), a)
    assert np.array_equal(out.data, a.data)


def test_matmul_orthogonal_pick():
    out = ad.matmul(tensor([[1.0, 0.0]]), tensor([[0.0], [5.0]]))
    assert np.array_equal(out.data, [[0.0]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ad.ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        ad.matmul(tensor(np.ones((2, 3))), tensor(np.ones((2, 3))))


def test_matmul_grad_closed_form_and_fd():
    rng = np.random.default_rng(0)
    a = tensor(rng.normal(size=(3, 4)))
    b = tensor(rng.normal(size=(4, 2)))
    loss = ad.sum_all(ad.matmul(a, b))
    ad.backward(loss)
    assert np.allclose(a.grad, np.ones((3, 2)) @ b.data.T, atol=1e-12)

    numeric = numeric_gradient(
        lambda: float((a.data @ b.data).sum()), a, h=1e-6)
    assert relative_errors(a.grad, numeric).max() < 1e-5


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------

def test_softmax_symmetry():
    out = ad.softmax_rows(tensor([[0.0, 0.0]]))
    assert np.allclose(out.data, [[0.5, 0.5]], atol=1e-15)


def test_softmax_large_logit_stable():
    out = ad.softmax_rows(tensor([[1000.0, 0.0]]))
    assert np.isfinite(out.data).all()
    assert out.data[0, 0] == pytest.approx(1.0)
    assert out.data[0, 1] == pytest.approx(0.0, abs=1e-300)


def test_softmax_log_ratios():
    out = ad.softmax_rows(tensor([[math.log(1), math.log(2), math.log(3)]]))
    assert np.allclose(out.data, [[1 / 6, 2 / 6, 3 / 6]], atol=1e-15)


def test_softmax_rows_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(1)
    x = rng.normal(scale=5.0, size=(6, 9))
    out = ad.softmax_rows(ad.constant(x))
    assert np.abs(out.data.sum(axis=1) - 1.0).max() <= 1e-12
    shifted = ad.softmax_rows(ad.constant(x + 123.456))
    assert np.allclose(out.data, shifted.data, atol=1e-12)


def test_softmax_nan_rejected():
    with pytest.raises(ad.NumericError):
        ad.softmax_rows(tensor([[np.nan, 0.0]]))


# ---------------------------------------------------------------------------
# layer norm
# ---------------------------------------------------------------------------

def test_layer_norm_two_point_row():
    out = ad.layer_norm(tensor([[1.0, 3.0]]), tensor([1.0, 1.0]), tensor([0.0, 0.0]))
    assert np.allclose(out.data, [[-1.0, 1.0]], atol=1e-4)


def test_layer_norm_constant_row():
    out = ad.layer_norm(tensor([[5.0, 5.0, 5.0]]), tensor(np.ones(3)), tensor(np.zeros(3)))
    assert np.array_equal(out.data, np.zeros((1, 3)))


def test_layer_norm_standardizes_rows():
    rng = np.random.default_rng(2)
    # rows with large variance keep the eps perturbation below 1e-9
    x = rng.normal(scale=300.0, size=(5, 16))
    out = ad.layer_norm(ad.constant(x), ad.constant(np.ones(16)), ad.constant(np.zeros(16)))
    assert np.abs(out.data.mean(axis=1)).max() < 1e-9
    assert np.abs(out.data.var(axis=1) - 1.0).max() < 1e-9


def test_layer_norm_gamma_scaling():
    rng = np.random.default_rng(3)
    x = ad.constant(rng.normal(size=(4, 8)))
    gamma = rng.normal(size=8)
    beta = np.zeros(8)
    once = ad.layer_norm(x, ad.constant(gamma), ad.constant(beta))
    twice = ad.layer_norm(x, ad.constant(2.0 * gamma), ad.constant(beta))
    assert np.array_equal(twice.data, 2.0 * once.data)


def test_layer_norm_gradient_fd():
    rng = np.random.default_rng(4)
    x = tensor(rng.normal(size=(3, 5)))
    gamma = tensor(rng.normal(size=5))
    beta = tensor(rng.normal(size=5))

    def build():
        return ad.sum_all(ad.tanh(ad.layer_norm(x, gamma, beta)))

    report = check_gradients(build, [("x", x), ("gamma", gamma), ("beta", beta)])
    assert max(report.values()) < 1e-5


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def test_relu_values_and_grad():
    x = tensor([[-1.0, 2.0]])
    out = ad.relu(x)
    assert np.array_equal(out.data, [[0.0, 2.0]])
    ad.backward(ad.sum_all(out))
    assert np.array_equal(x.grad, [[0.0, 1.0]])


def test_relu_grad_at_zero_is_zero():
    x = tensor([[0.0]])
    ad.backward(ad.sum_all(ad.relu(x)))
    assert np.array_equal(x.grad, [[0.0]])


def test_tanh_zero():
    assert ad.tanh(tensor([[0.0]])).data[0, 0] == 0.0


def test_elementwise_product():
    out = ad.mul(tensor([1.0, 2.0]), tensor([3.0, 4.0]))
    assert np.array_equal(out.data, [3.0, 8.0])


def test_elementwise_shape_mismatch():
    with pytest.raises(ad.ShapeError):
        ad.add(tensor([1.0, 2.0]), tensor([1.0, 2.0, 3.0]))


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def test_pool_single_row_collapse():
    x = tensor([[2.0, 7.0]])
    assert np.array_equal(ad.pool(x, "mean").data, [2.0, 7.0])
    assert np.array_equal(ad.pool(x, "max").data, [2.0, 7.0])


def test_pool_mean():
    assert np.array_equal(ad.pool(tensor([[0.0, 0.0], [2.0, 4.0]]), "mean").data, [1.0, 2.0])


def test_pool_max():
    assert np.array_equal(ad.pool(tensor([[0.0, 9.0], [8.0, 1.0]]), "max").data, [8.0, 9.0])


def test_pool_empty_rejected():
    with pytest.raises(ValueError, match="empty"):
        ad.pool(tensor(np.zeros((0, 3))), "max")


def test_max_pool_tie_routes_to_first_row():
    x = tensor([[1.0, 5.0], [1.0, 3.0]])
    ad.backward(ad.sum_all(ad.pool(x, "max")))
    assert np.array_equal(x.grad, [[1.0, 1.0], [0.0, 0.0]])


# ---------------------------------------------------------------------------
# cosine similarity
# ---------------------------------------------------------------------------

def test_cosine_orthogonal():
    assert ad.cosine_sim(tensor([1.0, 0.0]), tensor([0.0, 1.0])).item() == 0.0


def test_cosine_scale_invariant():
    assert ad.cosine_sim(tensor([2.0, 0.0]), tensor([5.0, 0.0])).item() == pytest.approx(1.0)


def test_cosine_closed_form():
    got = ad.cosine_sim(tensor([1.0, 1.0]), tensor([1.0, 0.0])).item()
    assert got == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-15)


def test_cosine_zero_norm_rejected():
    with pytest.raises(ad.NumericError):
        ad.cosine_sim(tensor([0.0, 0.0]), tensor([1.0, 0.0]))


# ---------------------------------------------------------------------------
# backward mechanics
# ---------------------------------------------------------------------------

def test_backward_sum_grads_ones():
    x = tensor([1.0, 2.0, 3.0])
    loss = ad.sum_all(x)
    ad.backward(loss)
    assert np.array_equal(x.grad, [1.0, 1.0, 1.0])
    assert loss.grad == 1.0


def test_backward_square():
    x = tensor(3.0)
    ad.backward(ad.mul(x, x))
    assert x.grad == 6.0


def test_backward_fanout_accumulates():
    x = tensor([2.0])
    y = ad.add(x, x)
    z = ad.add(y, x)
    ad.backward(ad.sum_all(z))
    assert np.array_equal(x.grad, [3.0])


def test_backward_requires_scalar():
    with pytest.raises(ad.ShapeError):
        ad.backward(tensor([1.0, 2.0]))


def test_backward_twice_rejected():
    x = tensor(2.0)
    loss = ad.mul(x, x)
    ad.backward(loss)
    with pytest.raises(RuntimeError):
        ad.backward(loss)


def test_no_grad_suppresses_graph():
    x = tensor([1.0, 2.0])
    with ad.no_grad():
        y = ad.scale(x, 3.0)
    assert y.op is None and not y.requires_grad


def test_ops_deterministic():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4))
    r1 = ad.matmul(ad.softmax_rows(ad.constant(a)), ad.constant(b)).data
    r2 = ad.matmul(ad.softmax_rows(ad.constant(a)), ad.constant(b)).data
    assert np.array_equal(r1, r2)


# ---------------------------------------------------------------------------
# finite-difference sweep over every differentiable op
# ---------------------------------------------------------------------------

def _fd_case(build, params):
    report = check_gradients(build, params)
    worst = max(report.values())
    assert worst < 1e-5, report


def test_fd_all_ops():
    rng = np.random.default_rng(6)
    a = tensor(rng.normal(size=(3, 4)))
    b = tensor(rng.normal(size=(3, 4)))
    m = tensor(rng.normal(size=(4, 3)))
    v = tensor(rng.normal(size=4))
    u = tensor(rng.normal(size=4))
    gamma = tensor(rng.normal(size=4))
    beta = tensor(rng.normal(size=4))
    w = tensor(rng.normal(size=(2, 4)))
    p = tensor(rng.normal(size=2))
    table = tensor(rng.normal(size=(5, 4)))

    cases = {
        "add": (lambda: ad.sum_all(ad.add(a, b)), [("a", a), ("b", b)]),
        "sub": (lambda: ad.sum_all(ad.tanh(ad.sub(a, b))), [("a", a), ("b", b)]),
        "mul": (lambda: ad.sum_all(ad.mul(a, b)), [("a", a), ("b", b)]),
        "div": (lambda: ad.sum_all(ad.div(a, ad.exp(b))), [("a", a), ("b", b)]),
        "scale": (lambda: ad.sum_all(ad.scale(a, -1.7)), [("a", a)]),
        "add_bias": (lambda: ad.sum_all(ad.tanh(ad.add_bias(a, v))), [("a", a), ("v", v)]),
        "relu": (lambda: ad.sum_all(ad.relu(a)), [("a", a)]),
        "tanh": (lambda: ad.sum_all(ad.tanh(a)), [("a", a)]),
        "exp": (lambda: ad.sum_all(ad.exp(a)), [("a", a)]),
        "log": (lambda: ad.sum_all(ad.log(ad.exp(a))), [("a", a)]),
        "matmul": (lambda: ad.sum_all(ad.tanh(ad.matmul(a, m))), [("a", a), ("m", m)]),
        "transpose": (lambda: ad.sum_all(ad.tanh(ad.transpose(a))), [("a", a)]),
        "softmax": (lambda: ad.sum_all(ad.mul(ad.softmax_rows(a), b)), [("a", a)]),
        "log_softmax": (lambda: ad.sum_all(ad.mul(ad.log_softmax_rows(a), b)), [("a", a)]),
        "layer_norm": (lambda: ad.sum_all(ad.tanh(ad.layer_norm(a, gamma, beta))),
                       [("a", a), ("gamma", gamma), ("beta", beta)]),
        "mean_rows": (lambda: ad.sum_all(ad.tanh(ad.mean_rows(a))), [("a", a)]),
        "max_rows": (lambda: ad.sum_all(ad.tanh(ad.max_rows(a))), [("a", a)]),
        "sum_rows": (lambda: ad.sum_all(ad.tanh(ad.sum_rows(a))), [("a", a)]),
        "normalize_rows": (lambda: ad.sum_all(ad.tanh(ad.normalize_rows(a))), [("a", a)]),
        "cosine_sim": (lambda: ad.cosine_sim(u, v), [("u", u), ("v", v)]),
        "concat": (lambda: ad.sum_all(ad.tanh(ad.concat([u, v]))), [("u", u), ("v", v)]),
        "concat_cols": (lambda: ad.sum_all(ad.tanh(ad.concat_cols([a, b]))),
                        [("a", a), ("b", b)]),
        "stack_rows": (lambda: ad.sum_all(ad.tanh(ad.stack_rows([u, v]))),
                       [("u", u), ("v", v)]),
        "embed_rows": (lambda: ad.sum_all(ad.tanh(ad.embed_rows(table, [0, 2, 2, 4]))),
                       [("table", table)]),
        "coattention": (lambda: ad.sum_all(ad.tanh(ad.coattention_scores(w, p, a, b))),
                        [("w", w), ("p", p), ("a", a), ("b", b)]),
    }
    for name, (build, params) in cases.items():
        _fd_case(build, params)


def test_embed_rows_out_of_range():
    table = tensor(np.ones((3, 2)))
    with pytest.raises(IndexError):
        ad.embed_rows(table, [0, 3])
