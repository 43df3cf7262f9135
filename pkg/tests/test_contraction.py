import numpy as np
import pytest

from fpgw.contraction import (Loss, contract, contract_transposed, decompose, loss_value,
                              naive_contract, tensor_max)
from fpgw.errors import ShapeError


def _symmetric(rng, n):
    A = rng.uniform(0.0, 2.0, size=(n, n))
    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, 0.0)
    return A


def test_squared_loss_matches_naive_sum():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n, m = rng.integers(1, 9, size=2)
        Cx, Cy = _symmetric(rng, n), _symmetric(rng, m)
        plan = rng.uniform(0.0, 1.0, size=(n, m))
        fast = contract(Loss.SQUARED_DIFFERENCE, Cx, Cy, plan)
        slow = naive_contract(Loss.SQUARED_DIFFERENCE, Cx, Cy, plan)
        assert np.max(np.abs(fast - slow)) <= 1e-10 * max(1.0, np.max(np.abs(slow)))


def test_absolute_loss_falls_back_to_naive():
    rng = np.random.default_rng(2)
    Cx, Cy = _symmetric(rng, 3), _symmetric(rng, 4)
    plan = rng.uniform(size=(3, 4))
    assert not decompose(Loss.ABSOLUTE_DIFFERENCE).decomposable
    np.testing.assert_allclose(contract(Loss.ABSOLUTE_DIFFERENCE, Cx, Cy, plan),
                               naive_contract(Loss.ABSOLUTE_DIFFERENCE, Cx, Cy, plan))


def test_transposed_contraction_on_asymmetric_structures():
    rng = np.random.default_rng(3)
    Cx = rng.uniform(size=(3, 3))
    Cy = rng.uniform(size=(2, 2))
    plan = rng.uniform(size=(3, 2))
    np.testing.assert_allclose(
        contract_transposed(Loss.SQUARED_DIFFERENCE, Cx, Cy, plan),
        naive_contract(Loss.SQUARED_DIFFERENCE, Cx, Cy, plan, transpose=True), atol=1e-12)


def test_zero_plan_contracts_to_zero():
    rng = np.random.default_rng(4)
    out = contract(Loss.SQUARED_DIFFERENCE, _symmetric(rng, 3), _symmetric(rng, 2),
                   np.zeros((3, 2)))
    assert np.all(out == 0.0)


def test_tensor_max_matches_brute_force():
    rng = np.random.default_rng(5)
    Cx, Cy = _symmetric(rng, 4), _symmetric(rng, 3)
    for loss in Loss:
        brute = np.max(loss_value(loss, Cx[:, :, None, None], Cy[None, None, :, :]))
        assert tensor_max(loss, Cx, Cy) == pytest.approx(brute)


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        contract(Loss.SQUARED_DIFFERENCE, np.zeros((2, 2)), np.zeros((3, 3)), np.zeros((3, 2)))
    with pytest.raises(ShapeError):
        contract(Loss.SQUARED_DIFFERENCE, np.zeros((2, 3)), np.zeros((3, 3)), np.zeros((2, 3)))


@pytest.mark.parametrize('loss', [Loss.SQUARED_DIFFERENCE, Loss.ABSOLUTE_DIFFERENCE])
def test_contraction_is_bilinear_in_the_plan(loss):
    rng = np.random.default_rng(11)
    Cx, Cy = _symmetric(rng, 4), _symmetric(rng, 3)
    first, second = rng.uniform(size=(4, 3)), rng.uniform(size=(4, 3))
    a, b = 0.7, -1.3
    combined = contract(loss, Cx, Cy, a * first + b * second)
    expected = a * contract(loss, Cx, Cy, first) + b * contract(loss, Cx, Cy, second)
    np.testing.assert_allclose(combined, expected, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize('loss', [Loss.SQUARED_DIFFERENCE, Loss.ABSOLUTE_DIFFERENCE])
def test_contraction_adjoint_identity(loss):
    rng = np.random.default_rng(12)
    Cx, Cy = _symmetric(rng, 3), _symmetric(rng, 5)
    gamma, pi = rng.uniform(size=(3, 5)), rng.uniform(size=(3, 5))
    left = np.sum(contract(loss, Cx, Cy, gamma) * pi)
    right = np.sum(gamma * contract(loss, Cx, Cy, pi))
    assert left == pytest.approx(right, rel=1e-10)

    # asymmetric structures pair M with its transpose
    Ax, Ay = rng.uniform(size=(3, 3)), rng.uniform(size=(5, 5))
    left = np.sum(contract(loss, Ax, Ay, gamma) * pi)
    right = np.sum(gamma * contract_transposed(loss, Ax, Ay, pi))
    assert left == pytest.approx(right, rel=1e-10)
