import numpy as np
import pytest

from attnseg.numerics import ShapeError, grad_check, logsumexp, matmul, sigmoid, softmax


def test_matmul_identity():
    a = np.array([[2.0, 3.0], [4.0, 5.0]])
    assert np.array_equal(matmul(np.eye(2), a), a)


def test_matmul_zero():
    z = np.zeros((3, 2))
    b = np.arange(8.0).reshape(2, 4)
    assert np.array_equal(matmul(z, b), np.zeros((3, 4)))


def test_matmul_small_case():
    out = matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
    assert out.shape == (1, 1)
    assert out[0, 0] == 11.0


def test_matmul_mismatch_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(np.zeros((2, 3)), np.zeros((2, 2)))


def test_matmul_rejects_non_2d():
    with pytest.raises(ShapeError):
        matmul(np.zeros(3), np.zeros((3, 2)))


def test_matmul_associativity_random_chains():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 5))
        c = rng.normal(size=(5, 2))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        denom = np.maximum(np.abs(left), 1.0)
        assert np.max(np.abs(left - right) / denom) < 1e-9


def test_softmax_symmetry():
    assert np.allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5], atol=0, rtol=0)


def test_softmax_singleton():
    for x in (-1000.0, -3.2, 0.0, 7.5, 1000.0):
        out = softmax(np.array([x]))
        assert np.array_equal(out, [1.0])


def test_softmax_large_values_no_overflow():
    out = softmax(np.array([1000.0, 1000.0]))
    assert np.all(np.isfinite(out))
    assert np.array_equal(out, [0.5, 0.5])


def test_softmax_empty_returns_empty():
    out = softmax(np.array([]))
    assert out.shape == (0,)


def test_softmax_random_sums_to_one():
    rng = np.random.default_rng(1)
    for _ in range(200):
        v = rng.uniform(-1e6, 1e6, size=rng.integers(1, 12))
        out = softmax(v)
        assert np.all(out >= 0)
        assert abs(out.sum() - 1.0) < 1e-12


def test_logsumexp_singleton():
    assert logsumexp(np.array([3.7])) == 3.7


def test_logsumexp_pair():
    assert abs(logsumexp(np.array([0.0, 0.0])) - np.log(2.0)) < 1e-15


def test_logsumexp_large_values():
    out = logsumexp(np.array([1000.0, 1000.0]))
    assert np.isfinite(out)
    assert abs(out - (1000.0 + np.log(2.0))) < 1e-12


def test_logsumexp_empty_errors():
    with pytest.raises(ValueError):
        logsumexp(np.array([]))


def test_logsumexp_bounds():
    rng = np.random.default_rng(2)
    for _ in range(200):
        v = rng.normal(scale=10.0, size=rng.integers(1, 9))
        out = logsumexp(v)
        assert out >= np.max(v)
        assert out <= np.max(v) + np.log(v.size) + 1e-15


def test_logsumexp_all_minus_inf():
    assert logsumexp(np.array([-np.inf, -np.inf])) == -np.inf


def test_logsumexp_ignores_minus_inf_entries():
    v = np.array([-np.inf, 1.0, 2.0])
    expected = logsumexp(np.array([1.0, 2.0]))
    assert logsumexp(v) == expected


def test_sigmoid_saturates_cleanly():
    out = sigmoid(np.array([-800.0, 0.0, 800.0]))
    assert out[0] == 0.0
    assert out[1] == 0.5
    assert out[2] == 1.0


def test_grad_check_quadratic():
    f = lambda x: float(x[0] ** 2)
    err = grad_check(f, np.array([6.0]), np.array([3.0]))
    assert err < 1e-8


def test_grad_check_linear():
    f = lambda x: float(np.sum(x))
    point = np.array([0.3, -1.2, 4.0])
    err = grad_check(f, np.ones(3), point)
    assert err < 1e-10


def test_grad_check_detects_wrong_gradient():
    f = lambda x: float(x[0] ** 2)
    err = grad_check(f, np.array([5.0]), np.array([3.0]))
    assert err > 1e-2


def test_grad_check_non_finite_names_coordinate():
    def f(x):
        return float("nan") if x[1] != 0.0 else 0.0

    with pytest.raises(ValueError, match="coordinate 1"):
        grad_check(f, np.zeros(2), np.zeros(2))


def test_grad_check_rejects_bad_step():
    with pytest.raises(ValueError):
        grad_check(lambda x: 0.0, np.zeros(1), np.zeros(1), step=0.0)


def test_grad_check_shape_mismatch():
    with pytest.raises(ShapeError):
        grad_check(lambda x: 0.0, np.zeros(2), np.zeros(3))
