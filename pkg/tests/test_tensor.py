import math

import numpy as np
import pytest

from optbench.tensor import (
    ShapeMismatchError,
    Tensor,
    absolute,
    add,
    elem_max_scalar,
    fill,
    hadamard,
    hadamard_exp,
    maximum,
    ones_like,
    scale,
    sigmoid,
    sqrt,
    square,
    sub,
    tensor,
    zeros,
    zeros_like,
)


def test_tensor_buffer_length_must_match_shape():
    with pytest.raises(ValueError):
        Tensor((2, 2), np.zeros(3))


def test_tensor_infers_shape_from_nested_values():
    t = tensor([[1.0, 2.0], [3.0, 4.0]])
    assert t.shape == (2, 2)
    assert t.tolist() == [1.0, 2.0, 3.0, 4.0]


def test_factories():
    assert zeros((3,)).tolist() == [0.0, 0.0, 0.0]
    assert fill((2,), 2.5).tolist() == [2.5, 2.5]
    base = tensor([1.0, 2.0])
    assert zeros_like(base).tolist() == [0.0, 0.0]
    assert ones_like(base).tolist() == [1.0, 1.0]


def test_hadamard_identity_element():
    out = hadamard(tensor([1.0, 2.0, 3.0]), tensor([1.0, 1.0, 1.0]))
    assert out.tolist() == [1.0, 2.0, 3.0]


def test_hadamard_forced_by_definition():
    assert hadamard(tensor([2.0, 3.0]), tensor([4.0, 5.0])).tolist() == [8.0, 15.0]


def test_hadamard_zero_and_sign():
    assert hadamard(tensor([0.0, -1.0]), tensor([7.0, 7.0])).tolist() == [0.0, -7.0]


def test_hadamard_shape_mismatch_reports_both_shapes():
    with pytest.raises(ShapeMismatchError) as exc:
        hadamard(tensor([1.0, 2.0]), tensor([1.0, 2.0, 3.0]))
    assert "(2,)" in str(exc.value) and "(3,)" in str(exc.value)


def test_hadamard_commutative_exactly():
    rng = np.random.default_rng(11)
    a = tensor(rng.standard_normal(64))
    b = tensor(rng.standard_normal(64))
    assert np.array_equal(hadamard(a, b).data, hadamard(b, a).data)


def test_hadamard_associative_within_one_ulp():
    rng = np.random.default_rng(12)
    a = tensor(rng.standard_normal(64))
    b = tensor(rng.standard_normal(64))
    c = tensor(rng.standard_normal(64))
    left = hadamard(hadamard(a, b), c).data
    right = hadamard(a, hadamard(b, c)).data
    np.testing.assert_allclose(left, right, rtol=3e-16, atol=0.0)


def test_hadamard_exp_of_zeros_is_exactly_ones():
    assert hadamard_exp(zeros((4,))).tolist() == [1.0, 1.0, 1.0, 1.0]


def test_hadamard_exp_unit_values():
    assert hadamard_exp(tensor([1.0])).item() == pytest.approx(math.e, abs=1e-15)
    assert hadamard_exp(tensor([-1.0])).item() == pytest.approx(1.0 / math.e, abs=1e-15)


def test_sigmoid_symmetry_point():
    assert sigmoid(tensor([0.0])).item() == 0.5


def test_sigmoid_against_scalar_recomputation():
    for x in (1.0, 4.0, -2.5, 0.3):
        expected = 1.0 / (1.0 + math.exp(-x))
        assert sigmoid(tensor([x])).item() == pytest.approx(expected, abs=1e-15)


def test_sigmoid_outputs_strictly_inside_unit_interval():
    rng = np.random.default_rng(13)
    out = sigmoid(tensor(8.0 * rng.standard_normal(200))).data
    assert np.all(out > 0.0) and np.all(out < 1.0)


def test_sigmoid_mirror_sums_to_one():
    rng = np.random.default_rng(14)
    x = tensor(6.0 * rng.standard_normal(200))
    total = sigmoid(x).data + sigmoid(-x).data
    np.testing.assert_allclose(total, 1.0, atol=1e-15)


def test_elem_max_scalar():
    assert elem_max_scalar(tensor([1.0, 5.0, 3.0])) == 5.0
    assert elem_max_scalar(tensor([-2.0, -7.0])) == -2.0
    assert elem_max_scalar(tensor([0.0, 0.0, 0.0])) == 0.0


def test_elem_max_scalar_rejects_empty():
    with pytest.raises(ValueError):
        elem_max_scalar(Tensor((0,), np.zeros(0)))


def test_maximum_dominates_both_operands():
    rng = np.random.default_rng(15)
    a = tensor(rng.standard_normal(100))
    b = tensor(rng.standard_normal(100))
    out = maximum(a, b).data
    assert np.all(out >= a.data) and np.all(out >= b.data)


def test_plumbing_ops():
    a = tensor([1.0, -2.0, 3.0])
    b = tensor([0.5, 0.5, 0.5])
    assert add(a, b).tolist() == [1.5, -1.5, 3.5]
    assert sub(a, b).tolist() == [0.5, -2.5, 2.5]
    assert scale(a, 2.0).tolist() == [2.0, -4.0, 6.0]
    assert absolute(a).tolist() == [1.0, 2.0, 3.0]
    assert square(a).tolist() == [1.0, 4.0, 9.0]
    assert sqrt(tensor([4.0, 9.0])).tolist() == [2.0, 3.0]


def test_operators_match_named_ops():
    a = tensor([1.0, 2.0])
    b = tensor([3.0, 4.0])
    assert (a + b).tolist() == add(a, b).tolist()
    assert (a - b).tolist() == sub(a, b).tolist()
    assert (a * b).tolist() == hadamard(a, b).tolist()
    assert (2.0 * a).tolist() == scale(a, 2.0).tolist()
    assert (a / 2.0).tolist() == [0.5, 1.0]
    assert (a + 1.0).tolist() == [2.0, 3.0]
    assert (-a).tolist() == [-1.0, -2.0]
    assert abs(tensor([-3.0])).item() == 3.0


def test_operations_do_not_mutate_operands():
    a = tensor([1.0, 2.0])
    b = tensor([3.0, 4.0])
    hadamard(a, b)
    add(a, b)
    scale(a, 7.0)
    assert a.tolist() == [1.0, 2.0] and b.tolist() == [3.0, 4.0]


def test_finite_inputs_give_finite_outputs():
    rng = np.random.default_rng(16)
    a = tensor(rng.standard_normal(50))
    b = tensor(rng.standard_normal(50))
    for out in (add(a, b), sub(a, b), hadamard(a, b), absolute(a), square(a), sigmoid(a)):
        assert np.all(np.isfinite(out.data))
