import numpy as np
import pytest

from agglab import tensor as T


def test_matmul_identity():
    a = T.Tensor(np.eye(2))
    b = T.Tensor([[1.0, 2.0], [3.0, 4.0]])
    out = T.matmul(a, b)
    assert np.array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])


def test_matmul_sum_as_rank_one():
    ones = T.Tensor([[1.0, 1.0]])
    col = T.Tensor([[1.0], [2.0]])
    assert T.matmul(ones, col).data[0, 0] == 3.0


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
        T.matmul(T.Tensor(np.zeros((2, 3))), T.Tensor(np.zeros((2, 3))))


def test_matmul_gradient_vs_finite_differences():
    rng = np.random.default_rng(0)
    tape = T.Tape()
    a = tape.param(rng.standard_normal((3, 4)))
    b = T.Tensor(rng.standard_normal((4, 2)))

    def f():
        t = T.Tape()
        t.watch(a)
        return T.sum_all(T.matmul(a, b))

    assert T.finite_diff_check(f, a) < 1e-6


def test_activations_values():
    x = T.Tensor([[-1.0, 0.0, 2.0]])
    assert np.array_equal(T.activation(x, "relu").data, [[0.0, 0.0, 2.0]])
    assert T.activation(T.Tensor([[0.0]]), "tanh").data[0, 0] == 0.0
    lk = T.activation(x, "leakyrelu", alpha=0.2)
    assert np.allclose(lk.data, [[-0.2, 0.0, 2.0]])
    sg = T.activation(T.Tensor([[0.0]]), "sigmoid")
    assert sg.data[0, 0] == 0.5


def test_activation_unknown_kind():
    with pytest.raises(ValueError, match="unknown activation"):
        T.activation(T.Tensor([[1.0]]), "swish")


@pytest.mark.parametrize("kind", ["tanh", "sigmoid", "leakyrelu"])
def test_activation_gradients(kind):
    rng = np.random.default_rng(7)
    x = T.Tensor(rng.standard_normal((1, 5)) + 0.1)  # nudge off relu-family kinks

    def f():
        t = T.Tape()
        t.watch(x)
        return T.sum_all(T.activation(x, kind))

    assert T.finite_diff_check(f, x) < 1e-6


def test_softmax_rows_symmetry_and_stability():
    out = T.softmax_rows(T.Tensor([[0.0, 0.0]]))
    assert np.allclose(out.data, [[0.5, 0.5]])
    big = T.softmax_rows(T.Tensor([[1000.0, 0.0]]))
    assert np.isfinite(big.data).all()
    assert big.data[0, 0] > 1.0 - 1e-12


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-1e3, 1e3, size=(4, 7))
        out = T.softmax_rows(T.Tensor(x))
        assert np.all(np.abs(out.data.sum(axis=1) - 1.0) < 1e-12)


def test_softmax_rows_gradient():
    rng = np.random.default_rng(11)
    x = T.Tensor(rng.standard_normal((3, 4)))
    w = rng.standard_normal((3, 4))  # non-uniform weighting to exercise the jacobian

    def f():
        t = T.Tape()
        t.watch(x)
        return T.sum_all(T.elementwise_mul(T.softmax_rows(x), T.Tensor(w)))

    assert T.finite_diff_check(f, x) < 1e-6


def test_vec_stack_is_column_major():
    x = T.Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(T.vec_stack(x).data.ravel(), [1.0, 3.0, 2.0, 4.0])
    col = T.Tensor([[5.0], [6.0], [7.0]])
    assert np.array_equal(T.vec_stack(col).data.ravel(), [5.0, 6.0, 7.0])


def test_vec_stack_roundtrip_bitwise():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 5))
    back = T.vec_unstack(T.vec_stack(T.Tensor(x)), 3, 5)
    assert back.data.tobytes() == x.tobytes()


def test_outer_examples():
    out = T.outer(T.Tensor([[1.0], [0.0]]), T.Tensor([[5.0], [6.0]]))
    assert np.array_equal(out.data, [[5.0, 6.0], [0.0, 0.0]])
    z = T.outer(T.Tensor(np.zeros((2, 1))), T.Tensor([[5.0], [6.0]]))
    assert np.array_equal(z.data, np.zeros((2, 2)))
    rng = np.random.default_rng(1)
    r = T.outer(T.Tensor(rng.standard_normal((4, 1))), T.Tensor(rng.standard_normal((3, 1))))
    assert np.linalg.matrix_rank(r.data) == 1


def test_combinators():
    out = T.concat([T.Tensor([[1.0]]), T.Tensor([[2.0], [3.0]])], axis=0)
    assert np.array_equal(out.data.ravel(), [1.0, 2.0, 3.0])
    em = T.elementwise_mul(T.Tensor([[1.0, 2.0]]), T.Tensor([[3.0, 4.0]]))
    assert np.array_equal(em.data, [[3.0, 8.0]])
    sr = T.sum_rows(T.Tensor(np.ones((3, 2))))
    assert np.array_equal(sr.data, [[3.0, 3.0]])


def test_backward_linear_loss():
    tape = T.Tape()
    w = tape.param(np.array([[1.0, 2.0], [3.0, 4.0]]))
    x = T.Tensor([[5.0], [6.0]])
    loss = T.sum_all(T.matmul(w, x))
    tape.backward(loss)
    # d(sum Wx)/dW = 1-vector outer x
    assert np.array_equal(w.grad, [[5.0, 6.0], [5.0, 6.0]])


def test_backward_tanh_analytic():
    tape = T.Tape()
    x = tape.param(np.array([[0.3, -0.7, 1.1]]))
    loss = T.sum_all(T.activation(x, "tanh"))
    tape.backward(loss)
    assert np.allclose(x.grad, 1.0 - np.tanh(x.data) ** 2, atol=1e-15)


def test_backward_requires_scalar():
    tape = T.Tape()
    x = tape.param(np.ones((2, 2)))
    y = T.scale(x, 2.0)
    with pytest.raises(ValueError, match="scalar"):
        tape.backward(y)


def test_backward_deterministic_after_zeroing():
    rng = np.random.default_rng(9)
    tape = T.Tape()
    w = tape.param(rng.standard_normal((3, 3)))
    x = T.Tensor(rng.standard_normal((3, 1)))

    def run():
        w.zero_grad()
        t = T.Tape()
        t.watch(w)
        loss = T.sum_all(T.activation(T.matmul(w, x), "tanh"))
        t.backward(loss)
        return w.grad.copy()

    g1, g2 = run(), run()
    assert np.array_equal(g1, g2)


def test_mixing_tapes_rejected():
    t1, t2 = T.Tape(), T.Tape()
    a = t1.param(np.ones((2, 2)))
    b = t2.param(np.ones((2, 2)))
    with pytest.raises(ValueError, match="different tapes"):
        T.add(a, b)


def test_gather_scatter_roundtrip_gradients():
    rng = np.random.default_rng(13)
    h = T.Tensor(rng.standard_normal((5, 3)))
    idx = np.array([0, 0, 2, 4, 4, 4])

    def f():
        t = T.Tape()
        t.watch(h)
        g = T.gather_rows(h, idx)
        s = T.scatter_add_rows(g, np.array([0, 1, 1, 2, 0, 2]), 3)
        return T.sum_all(T.activation(s, "tanh"))

    assert T.finite_diff_check(f, h) < 1e-6


def test_segment_softmax_normalizes_per_segment():
    logits = T.Tensor(np.array([[1.0], [2.0], [3.0], [0.5]]))
    seg = np.array([0, 0, 1, 1])
    y = T.segment_softmax(logits, seg, 2)
    assert abs(y.data[0, 0] + y.data[1, 0] - 1.0) < 1e-12
    assert abs(y.data[2, 0] + y.data[3, 0] - 1.0) < 1e-12


def test_segment_softmax_gradient():
    rng = np.random.default_rng(17)
    logits = T.Tensor(rng.standard_normal((6, 2)))
    seg = np.array([0, 0, 0, 1, 1, 2])
    w = rng.standard_normal((6, 2))

    def f():
        t = T.Tape()
        t.watch(logits)
        y = T.segment_softmax(logits, seg, 3)
        return T.sum_all(T.elementwise_mul(y, T.Tensor(w)))

    assert T.finite_diff_check(f, logits) < 1e-6


def test_expand_outer_matches_per_row_vec_of_outer():
    rng = np.random.default_rng(19)
    c = rng.standard_normal((4, 3))
    h = rng.standard_normal((4, 5))
    out = T.expand_outer(T.Tensor(c), T.Tensor(h))
    for e in range(4):
        expected = np.outer(c[e], h[e]).reshape(-1, order="F")
        assert np.array_equal(out.data[e], expected)


def test_expand_outer_gradient():
    rng = np.random.default_rng(23)
    c = T.Tensor(rng.standard_normal((3, 2)))
    h = rng.standard_normal((3, 4))
    w = rng.standard_normal((3, 8))

    def f():
        t = T.Tape()
        t.watch(c)
        return T.sum_all(T.elementwise_mul(T.expand_outer(c, T.Tensor(h)), T.Tensor(w)))

    assert T.finite_diff_check(f, c) < 1e-6


def test_matmul_associativity():
    rng = np.random.default_rng(29)
    for _ in range(10):
        a, b, c = (rng.standard_normal(s) for s in [(3, 4), (4, 5), (5, 2)])
        left = (a @ b) @ c
        right = a @ (b @ c)
        assert np.max(np.abs(left - right)) < 1e-10


def test_finite_diff_check_quadratic_is_tight():
    rng = np.random.default_rng(31)
    theta = T.Tensor(rng.standard_normal((4, 1)))

    def f():
        t = T.Tape()
        t.watch(theta)
        return T.sum_all(T.elementwise_mul(theta, theta))

    assert T.finite_diff_check(f, theta) < 1e-9


def test_finite_diff_check_mlp():
    rng = np.random.default_rng(37)
    w1 = T.Tensor(rng.standard_normal((4, 3)))
    w2 = T.Tensor(rng.standard_normal((1, 4)))
    x = rng.standard_normal((3, 1))

    def f():
        t = T.Tape()
        t.watch(w1)
        t.watch(w2)
        hidden = T.activation(T.matmul(w1, T.Tensor(x)), "tanh")
        return T.sum_all(T.matmul(w2, hidden))

    assert T.finite_diff_check(f, w1) < 1e-6
    assert T.finite_diff_check(f, w2) < 1e-6


def test_finite_diff_eps_bounds():
    theta = T.Tensor(np.ones((1, 1)))
    with pytest.raises(ValueError, match="eps"):
        T.finite_diff_check(lambda: None, theta, eps=1e-2)


def test_no_nan_on_finite_inputs():
    rng = np.random.default_rng(41)
    for _ in range(50):
        x = T.Tensor(rng.uniform(-100, 100, size=(3, 4)))
        for kind in ["tanh", "relu", "leakyrelu", "sigmoid"]:
            assert np.isfinite(T.activation(x, kind).data).all()
        assert np.isfinite(T.softmax_rows(x).data).all()


def _random_differentiable_graph(rng, x):
    """Random composite expression exercising every differentiable op."""
    m, n = x.data.shape
    w = T.Tensor(rng.standard_normal((n, 3)))
    idx = rng.integers(0, m, size=m + 2)
    seg = np.sort(rng.integers(0, 2, size=m + 2))
    parts = [
        T.matmul(x, w),
        T.activation(x, "tanh"),
        T.activation(x, "sigmoid"),
        T.activation(T.add(x, T.Tensor(np.full((m, n), 0.05))), "leakyrelu"),
        T.softmax_rows(x),
        T.elementwise_mul(x, x),
        T.add_bias(x, T.Tensor(rng.standard_normal((1, n)))),
        T.scatter_add_rows(T.gather_rows(x, idx), seg, 2),
        T.segment_softmax(T.gather_rows(x, idx), seg, 2),
        T.expand_outer(x, x),
        T.vec_stack(x),
        T.transpose(x),
        T.slice_rows(x, 0, m - 1),
        T.sum_rows(x),
        T.mean_rows(x),
        T.sub(T.scale(x, 1.7), x),
        T.outer(T.slice_rows(T.vec_stack(x), 0, 2),
                T.slice_rows(T.vec_stack(x), 2, 4)),
        T.concat([x, x], axis=1),
        T.abs_(T.add(x, T.Tensor(np.full((m, n), 0.11)))),
        T.log(T.add(T.elementwise_mul(x, x), T.Tensor(np.full((m, n), 1.0)))),
    ]
    pick = rng.integers(0, len(parts), size=3)
    total = None
    for i in pick:
        s = T.sum_all(parts[i])
        total = s if total is None else T.add(total, s)
    return total


def test_gradients_match_finite_differences_100_trials():
    # every differentiable op, random compositions, rel err < 1e-6
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(100):
        m, n = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        data = rng.standard_normal((m, n))
        data[np.abs(data) < 0.05] += 0.2  # keep off relu/abs kinks
        x = T.Tensor(data)
        seed = int(rng.integers(0, 2**31))  # freeze the expression per trial

        def f():
            tape = T.Tape()
            tape.watch(x)
            return _random_differentiable_graph(np.random.default_rng(seed), x)

        worst = max(worst, T.finite_diff_check(f, x))
    assert worst < 1e-6, worst
