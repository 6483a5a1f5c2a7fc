import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stsn.errors import ContractError, ShapeError
from stsn.gradcheck import finite_difference_check
from stsn.tensor import Tensor, concat, matmul, no_grad, precision, stack, where


def leaf(a):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=True)


def test_square_gradient():
    with precision(np.float64):
        x = leaf(3.0)
        (x * x).backward()
    assert x.grad == pytest.approx(6.0)


def test_linear_sum_gives_column_sums():
    a = np.arange(12.0).reshape(3, 4)
    with precision(np.float64):
        x = leaf(np.ones(4))
        (Tensor(a) @ x).sum().backward()
    np.testing.assert_allclose(x.grad, a.sum(axis=0))


def test_fan_in_accumulates():
    with precision(np.float64):
        x = leaf(2.0)
        y = x * 3.0 + x * x + x
        y.backward()
    assert x.grad == pytest.approx(3.0 + 4.0 + 1.0)


def test_non_scalar_root_rejected():
    x = leaf(np.ones(3))
    with pytest.raises(ContractError):
        (x * 2).backward()


def test_root_without_grad_rejected():
    with pytest.raises(ContractError):
        Tensor(np.ones(())).backward()


def test_default_dtype_is_float32():
    assert Tensor([1.0, 2.0]).dtype == np.float32
    with precision(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * 2).sum()
    assert not y.requires_grad


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


# "modest" inputs: away from zero, where central differences of odd
# functions carry truncation error comparable to the true gradient
MODEST = st.floats(0.1, 2.0) | st.floats(-2.0, -0.1)

UNARY = {
    "exp": lambda t: t.exp(),
    "log": lambda t: (t * t + 1.0).log(),
    "sqrt": lambda t: (t * t + 0.5).sqrt(),
    "tanh": lambda t: t.tanh(),
    "sigmoid": lambda t: t.sigmoid(),
    "pow": lambda t: t**3,
    "div": lambda t: 1.0 / (t * t + 1.0),
    "mean": lambda t: t.mean(axis=0, keepdims=True) * t,
    "transpose": lambda t: t.transpose(1, 0) * np.arange(6.0).reshape(3, 2),
    "getitem": lambda t: t[1:, ::2] * 2.0,
    "fancy": lambda t: t[[0, 0, 1]],
    "broadcast": lambda t: t[:1].broadcast_to((4, 3)),
    "concat": lambda t: concat([t, t * 2.0], axis=1),
    "stack": lambda t: stack([t, t.tanh()], axis=0),
    "where": lambda t: where(np.array([[True, False, True]] * 2), t, t * t),
}


@pytest.mark.parametrize("name", sorted(UNARY))
@given(x=arrays(np.float64, (2, 3), elements=MODEST))
def test_primitive_gradients(name, x):
    with precision(np.float64):
        t = leaf(x)
        w = np.linspace(0.5, 1.5, UNARY[name](t).size)  # no cancellation to an exact zero
        err = finite_difference_check(lambda: (UNARY[name](t) * w.reshape(UNARY[name](t).shape)).sum(), t, step=1e-6)
    assert err < 1e-3


def test_relu_gradient_away_from_kink():
    with precision(np.float64):
        t = leaf([[-1.5, 0.7], [0.3, -0.2]])
        err = finite_difference_check(lambda: (t.relu() * t).sum(), t, step=1e-6)
    assert err < 1e-6


@given(
    a=arrays(np.float64, (3, 4), elements=MODEST),
    b=arrays(np.float64, (4,), elements=MODEST),
)
def test_broadcast_binary_gradients(a, b):
    with precision(np.float64):
        ta, tb = leaf(a), leaf(b)
        for fn in (lambda: (ta * tb + ta - tb).sum(), lambda: (ta / (tb * tb + 1.0)).sum(), lambda: (ta @ tb).sum()):
            assert finite_difference_check(fn, tb, step=1e-6) < 1e-3
            assert finite_difference_check(fn, ta, step=1e-6) < 1e-3


def test_backward_is_deterministic():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 7)).astype(np.float32)

    def run():
        t = Tensor(x, requires_grad=True)
        ((t @ t.T).tanh().sum(axis=0) * (t.sum(axis=1) ** 2)).sum().backward()
        return t.grad

    assert np.array_equal(run(), run())
