import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from skelgan import autodiff as ad
from skelgan.autodiff import Tensor


def central_diff(f, x, eps=1e-6):
    """Independent oracle: plain numpy central differences of a scalar function."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = g.reshape(-1)
    for i in range(x.size):
        hi = x.copy().reshape(-1)
        lo = x.copy().reshape(-1)
        hi[i] += eps
        lo[i] -= eps
        flat[i] = (f(hi.reshape(x.shape)) - f(lo.reshape(x.shape))) / (2 * eps)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


class TestMatmul:
    def test_identity(self):
        out = ad.matmul(Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([[3.0], [4.0]]))
        np.testing.assert_array_equal(out.data, [[3.0], [4.0]])

    def test_hand_computed(self):
        out = ad.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        np.testing.assert_array_equal(out.data, [[11.0]])

    def test_shape_error_names_shapes(self):
        with pytest.raises(ad.DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(3, 4))
        B = rng.normal(size=(4, 2))
        W = rng.normal(size=(3, 2))  # fixed weighting so the loss is not symmetric

        a, b = Tensor(A, requires_grad=True), Tensor(B, requires_grad=True)
        ad.sum(ad.mul(ad.matmul(a, b), W)).backward()

        ga = central_diff(lambda x: np.sum((x @ B) * W), A)
        gb = central_diff(lambda x: np.sum((A @ x) * W), B)
        assert rel_err(a.grad, ga) < 1e-6
        assert rel_err(b.grad, gb) < 1e-6


class TestElementwise:
    def test_add(self):
        np.testing.assert_array_equal(ad.add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0])).data, [4.0, 6.0])

    def test_square(self):
        np.testing.assert_array_equal(ad.square(Tensor([3.0, -2.0])).data, [9.0, 4.0])

    def test_log_gradient(self):
        x = Tensor(2.0, requires_grad=True)
        ad.log(x).backward()
        assert abs(x.grad - 0.5) < 1e-9

    def test_log_domain_error(self):
        with pytest.raises(ad.DomainError):
            ad.log(Tensor([1.0, 0.0]))

    def test_shape_mismatch(self):
        with pytest.raises(ad.DimensionError):
            ad.add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_scalar_broadcast(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        k = Tensor(3.0, requires_grad=True)
        ad.sum(ad.mul(x, k)).backward()
        np.testing.assert_array_equal(x.grad, [3.0, 3.0])
        assert k.grad == pytest.approx(3.0)

    def test_sub_neg_scale(self):
        x = Tensor([1.0, -2.0], requires_grad=True)
        ad.sum(ad.scale(ad.neg(ad.sub(x, 1.0)), 2.0)).backward()
        np.testing.assert_array_equal(x.grad, [-2.0, -2.0])


class TestActivations:
    def test_relu(self):
        np.testing.assert_array_equal(ad.relu(Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])

    def test_relu_subgradient_at_zero(self):
        x = Tensor([0.0], requires_grad=True)
        ad.sum(ad.relu(x)).backward()
        assert x.grad[0] == 0.0

    def test_sigmoid_zero(self):
        assert ad.sigmoid(Tensor(0.0)).item() == 0.5

    def test_tanh_gradient_at_zero(self):
        x = Tensor(0.0, requires_grad=True)
        ad.tanh(x).backward()
        assert abs(x.grad - 1.0) < 1e-12

    def test_linear_is_identity(self):
        x = Tensor([1.5, -2.0])
        np.testing.assert_array_equal(ad.activation("linear", x).data, x.data)

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            ad.activation("gelu", Tensor([1.0]))

    def test_sigmoid_extremes_finite(self):
        y = ad.sigmoid(Tensor([-800.0, 800.0])).data
        assert np.all(np.isfinite(y))
        np.testing.assert_allclose(y, [0.0, 1.0], atol=1e-300)

    def test_log_sigmoid_matches_logaddexp_and_stays_finite(self):
        x = np.linspace(-20, 20, 41)
        np.testing.assert_allclose(ad.log_sigmoid(Tensor(x)).data, -np.logaddexp(0.0, -x), rtol=1e-12)
        assert np.isfinite(ad.log_sigmoid(Tensor(-1000.0)).item())


class TestConcatReduce:
    def test_concat_values(self):
        np.testing.assert_array_equal(ad.concat([Tensor([1.0, 2.0]), Tensor([3.0])]).data, [1.0, 2.0, 3.0])

    def test_concat_length_additivity(self):
        out = ad.concat([Tensor(np.zeros(16)), Tensor(np.zeros(8)), Tensor(np.zeros(3))])
        assert out.shape == (27,)

    def test_concat_gradient_all_ones(self):
        a = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        b = Tensor([4.0], requires_grad=True)
        ad.sum(ad.concat([a, b])).backward()
        np.testing.assert_array_equal(a.grad, np.ones(3))

    def test_concat_extent_mismatch(self):
        with pytest.raises(ad.DimensionError):
            ad.concat([Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3)))], axis=1)

    def test_mean(self):
        assert ad.mean(Tensor([2.0, 4.0])).item() == 3.0

    def test_sum_axis0(self):
        np.testing.assert_array_equal(ad.sum(Tensor([[1.0, 2.0], [3.0, 4.0]]), axis=0).data, [4.0, 6.0])

    def test_mean_gradient(self):
        x = Tensor(np.arange(5.0), requires_grad=True)
        ad.mean(x).backward()
        np.testing.assert_allclose(x.grad, np.full(5, 0.2))

    def test_mean_axis_gradient(self):
        x = Tensor(np.ones((2, 4)), requires_grad=True)
        ad.sum(ad.mean(x, axis=1)).backward()
        np.testing.assert_allclose(x.grad, np.full((2, 4), 0.25))

    def test_axis_out_of_range(self):
        with pytest.raises(ad.DimensionError):
            ad.sum(Tensor([1.0, 2.0]), axis=1)


class TestBackward:
    def test_sum(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        ad.sum(x).backward()
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_square_scalar(self):
        x = Tensor(3.0, requires_grad=True)
        ad.square(x).backward()
        assert x.grad == 6.0

    def test_non_scalar_rejected(self):
        with pytest.raises(ValueError):
            ad.backward(Tensor([1.0, 2.0], requires_grad=True))

    def test_accumulates(self):
        x = Tensor([1.0, -2.0], requires_grad=True)
        loss = ad.sum(ad.square(x))
        loss.backward()
        first = x.grad.copy()
        loss.backward()
        np.testing.assert_array_equal(x.grad, 2 * first)

    def test_shared_subexpression(self):
        x = Tensor(2.0, requires_grad=True)
        y = ad.mul(x, x)
        ad.add(y, y).backward()
        assert x.grad == pytest.approx(8.0)

    def test_two_layer_mlp_against_numpy_oracle(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(5, 4))
        W1, b1 = rng.normal(size=(4, 6)), rng.normal(size=6)
        W2, b2 = rng.normal(size=(6, 1)), rng.normal(size=1)

        def numpy_loss(W1, b1, W2, b2):
            h = np.tanh(X @ W1 + b1)
            return np.mean((1 / (1 + np.exp(-(h @ W2 + b2)))) ** 2)

        params = [Tensor(p, requires_grad=True) for p in (W1, b1, W2, b2)]
        h = ad.tanh(ad.linear(Tensor(X), params[0], params[1]))
        loss = ad.mean(ad.square(ad.sigmoid(ad.linear(h, params[2], params[3]))))
        loss.backward()
        assert loss.item() == pytest.approx(numpy_loss(W1, b1, W2, b2), rel=1e-12)

        raw = [W1, b1, W2, b2]
        for i, p in enumerate(params):
            def f(v, i=i):
                args = list(raw)
                args[i] = v
                return numpy_loss(*args)

            assert rel_err(p.grad, central_diff(f, raw[i])) < 1e-4


class TestGradCheck:
    def test_sum_is_exact(self):
        assert ad.grad_check(ad.sum, np.random.default_rng(0).normal(size=7)) < 1e-10

    def test_sigmoid_matmul(self):
        W = Tensor(np.random.default_rng(1).normal(size=(3, 2)))
        x = np.random.default_rng(2).normal(size=(4, 3))
        assert ad.grad_check(lambda t: ad.sum(ad.sigmoid(ad.matmul(t, W))), x, eps=1e-5) < 1e-5

    def test_relu_kink_is_unreliable(self):
        # at exactly 0 the subgradient is 0 but the central difference sees 0.5
        assert ad.grad_check(lambda t: ad.sum(ad.relu(t)), np.zeros(1)) == pytest.approx(0.5)


class TestStructure:
    def test_concat_take_round_trip(self):
        a, b = np.arange(6.0).reshape(2, 3), np.arange(4.0).reshape(2, 2)
        joined = ad.concat([Tensor(a), Tensor(b)], axis=1)
        np.testing.assert_array_equal(ad.take(joined, 0, 3, axis=1).data, a)
        np.testing.assert_array_equal(ad.take(joined, 3, 5, axis=1).data, b)

    def test_take_gradient(self):
        x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
        ad.sum(ad.take(x, 1, 3, axis=0)).backward()
        np.testing.assert_array_equal(x.grad, [[0, 0], [1, 1], [1, 1]])

    def test_reshape_gradient(self):
        assert ad.grad_check(lambda t: ad.sum(ad.square(ad.reshape(t, (6,)))), np.arange(6.0).reshape(2, 3)) < 1e-8

    def test_detach_stops_gradient(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        ad.sum(ad.mul(x.detach(), x)).backward()
        np.testing.assert_array_equal(x.grad, [1.0, 2.0])

    def test_forward_deterministic(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2))
        y1 = ad.tanh(ad.matmul(Tensor(a), Tensor(b))).data
        y2 = ad.tanh(ad.matmul(Tensor(a), Tensor(b))).data
        assert y1.tobytes() == y2.tobytes()


# ---------------------------------------------------------------- properties

_finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
_vec = arrays(np.float64, st.integers(1, 6), elements=_finite)

UNARY = {
    "square": ad.square,
    "neg": ad.neg,
    "tanh": ad.tanh,
    "sigmoid": ad.sigmoid,
    "log_sigmoid": ad.log_sigmoid,
    "scale": lambda t: ad.scale(t, -1.7),
    "mean": ad.mean,
}


@pytest.mark.parametrize("name", sorted(UNARY))
@settings(max_examples=150, deadline=None)
@given(x=_vec)
def test_unary_gradients(name, x):
    op = UNARY[name]
    assert ad.grad_check(lambda t: ad.sum(ad.mul(op(t), 1.3)), x) < 1e-4


@settings(max_examples=150, deadline=None)
@given(x=arrays(np.float64, st.integers(1, 6), elements=st.floats(0.1, 5)))
def test_log_gradient_property(x):
    assert ad.grad_check(lambda t: ad.sum(ad.log(t)), x) < 1e-4


@settings(max_examples=150, deadline=None)
@given(x=arrays(np.float64, st.integers(1, 6), elements=_finite.filter(lambda v: abs(v) > 1e-3)))
def test_relu_gradient_away_from_kink(x):
    assert ad.grad_check(lambda t: ad.sum(ad.square(ad.relu(t))), x) < 1e-4


@settings(max_examples=100, deadline=None)
@given(
    a=arrays(np.float64, (3, 4), elements=_finite),
    b=arrays(np.float64, (4, 2), elements=_finite),
)
def test_binary_gradients(a, b):
    B = Tensor(b)
    assert ad.grad_check(lambda t: ad.sum(ad.square(ad.matmul(t, B))), a) < 1e-4
    other = Tensor(a * 0.5 + 1.0)
    assert ad.grad_check(lambda t: ad.sum(ad.mul(ad.sub(t, other), ad.add(t, other))), a) < 1e-4
    assert ad.grad_check(lambda t: ad.sum(ad.square(ad.concat([t, other], axis=1))), a) < 1e-4


@settings(max_examples=100, deadline=None)
@given(x=arrays(np.float64, (3, 4), elements=_finite))
def test_accumulation_is_additive(x):
    t = Tensor(x, requires_grad=True)
    loss = ad.sum(ad.tanh(t))
    loss.backward()
    once = t.grad.copy()
    loss.backward()
    np.testing.assert_allclose(t.grad, 2 * once, rtol=0, atol=0)


@settings(max_examples=100, deadline=None)
@given(parts=st.lists(arrays(np.float64, st.tuples(st.just(2), st.integers(1, 4)), elements=_finite), min_size=1, max_size=4))
def test_concat_slice_round_trip(parts):
    joined = ad.concat([Tensor(p) for p in parts], axis=1)
    start = 0
    for p in parts:
        np.testing.assert_array_equal(ad.take(joined, start, start + p.shape[1], axis=1).data, p)
        start += p.shape[1]


@pytest.mark.parametrize("name", sorted(UNARY) + ["relu", "log"])
def test_thousand_random_points(name):
    rng = np.random.default_rng(11)
    if name == "log":
        x, op = rng.uniform(0.05, 5, size=1000), ad.log
    elif name == "relu":
        x = rng.uniform(-3, 3, size=1000)
        x = x[np.abs(x) > 1e-3]
        op = ad.relu
    else:
        x, op = rng.uniform(-3, 3, size=1000), UNARY[name]
    assert ad.grad_check(lambda t: ad.sum(ad.mul(op(t), 0.7)), x) < 1e-4
