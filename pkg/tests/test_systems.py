import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invarion.systems import (
    CircleSystem,
    ControlWord,
    LinearSystem,
    ProductSystem,
    join_product_word,
    product,
    split_product_word,
    step,
    trajectory,
    trajectory_values,
    uniform_controls,
)


def u0_index(levels=33):
    # index of control value 0 in the symmetric uniform grid
    return (levels - 1) // 2


def test_step_linear_doubling():
    sys1 = LinearSystem([[2.0]], [[1.0]], uniform_controls(-1, 1, 33))
    assert step(sys1, [0.25], u0_index()) == pytest.approx([0.5])


def test_step_circle_multiplier():
    sys1 = CircleSystem(2, uniform_controls(-1, 1, 33))
    assert step(sys1, [0.75], u0_index()) == pytest.approx([0.5])


def test_step_product_componentwise():
    circ = CircleSystem(2, uniform_controls(-1, 1, 33))
    prod = product([circ, circ])
    u = prod.join_index((u0_index(), u0_index()))
    assert step(prod, [0.75, 0.75], u) == pytest.approx([0.5, 0.5])


def test_trajectory_fixed_point():
    sys1 = LinearSystem([[2.0]], [[1.0]], uniform_controls(-1, 1, 33))
    out = trajectory(sys1, [0.0], ControlWord((u0_index(),) * 3))
    assert np.array_equal(out, np.zeros((4, 1)))


def test_trajectory_doubling_mod_one():
    sys1 = CircleSystem(2, uniform_controls(-1, 1, 33))
    out = trajectory(sys1, [0.3], ControlWord((u0_index(), u0_index())))
    assert out[:, 0] == pytest.approx([0.3, 0.6, 0.2])


def test_trajectory_shear_hand_check():
    # x' = [[1,1],[0,1]] x + [0,1]^T u with u = 1: straight-line evaluation
    sys1 = LinearSystem([[1.0, 1.0], [0.0, 1.0]], [[0.0], [1.0]], [[0.0], [1.0]])
    out = trajectory(sys1, [1.0, 0.0], ControlWord((1,)))
    by_hand = np.array([[1.0, 0.0], [1.0 * 1 + 1.0 * 0 + 0, 0 + 1.0 * 0 + 1.0]])
    assert np.array_equal(out, by_hand)


def test_product_single_component_identity():
    sys1 = LinearSystem([[2.0]], [[1.0]], uniform_controls(-1, 1, 5))
    prod = product([sys1])
    w = ControlWord((0, 3, 4))
    assert np.array_equal(trajectory(prod, [0.1], w), trajectory(sys1, [0.1], w))


def test_product_state_dim():
    sys1 = LinearSystem([[2.0]], [[1.0]], uniform_controls(-1, 1, 5))
    assert product([sys1, sys1]).state_dim == 2


def test_product_trajectory_matches_componentwise():
    rng = np.random.default_rng(0)
    a = LinearSystem([[1.5]], [[1.0]], uniform_controls(-1, 1, 7))
    b = CircleSystem(3, uniform_controls(-1, 1, 5))
    prod = product([a, b])
    word = ControlWord(tuple(int(v) for v in rng.integers(0, prod.alphabet_size, 5)))
    x0 = np.array([0.2, 0.8])
    joint = trajectory(prod, x0, word)
    wa, wb = split_product_word(prod, word)
    assert np.array_equal(joint[:, :1], trajectory(a, x0[:1], wa))
    assert np.array_equal(joint[:, 1:], trajectory(b, x0[1:], wb))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_product_projection_commutes(seed, tau):
    rng = np.random.default_rng(seed)
    a = LinearSystem([[rng.uniform(0.5, 2.0)]], [[1.0]], uniform_controls(-1, 1, 5))
    b = CircleSystem(2, uniform_controls(-1, 1, 9))
    prod = product([a, b])
    word = ControlWord(tuple(int(v) for v in rng.integers(0, prod.alphabet_size, tau)))
    x0 = np.array([rng.uniform(-1, 1), rng.uniform(0, 1)])
    joint = trajectory(prod, x0, word)
    for i, (comp, sub) in enumerate(zip(prod.components, split_product_word(prod, word))):
        sl = prod.component_slice(i)
        assert np.array_equal(joint[:, sl], trajectory(comp, x0[sl], sub))


def test_word_roundtrip_through_product():
    a = LinearSystem([[1.0]], [[1.0]], uniform_controls(-1, 1, 3))
    b = CircleSystem(2, uniform_controls(-1, 1, 5))
    prod = product([a, b])
    word = ControlWord((0, 7, 14, 9))
    parts = split_product_word(prod, word)
    assert join_product_word(prod, parts) == word


def test_circle_outputs_in_unit_interval():
    sys1 = CircleSystem(-2, uniform_controls(-1, 1, 9))
    x = np.linspace(0, 0.999, 50).reshape(-1, 1)
    for u in range(9):
        x = sys1.step_batch(x, u)
        assert np.all((x >= 0) & (x < 1))


def test_dimension_mismatch_is_input_error():
    sys1 = LinearSystem([[2.0]], [[1.0]], uniform_controls(-1, 1, 5))
    with pytest.raises(ValueError):
        step(sys1, [0.1, 0.2], 0)
    with pytest.raises(ValueError):
        step(sys1, [0.1], 99)


def test_invalid_systems_rejected():
    with pytest.raises(ValueError):
        CircleSystem(1, uniform_controls(-1, 1, 3))
    with pytest.raises(ValueError):
        LinearSystem([[1.0, 0.0]], [[1.0]], uniform_controls(-1, 1, 3))
    with pytest.raises(ValueError):
        ProductSystem(())
    with pytest.raises(ValueError):
        ControlWord(())


def test_trajectory_values_matches_index_trajectory():
    sys1 = LinearSystem([[1.5]], [[1.0]], uniform_controls(-1, 1, 5))
    word = ControlWord((0, 2, 4))
    by_index = trajectory(sys1, [0.3], word)
    values = sys1.controls[list(word.entries)]
    assert np.array_equal(trajectory_values(sys1, [0.3], values), by_index)
