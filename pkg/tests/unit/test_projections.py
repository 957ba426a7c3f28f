"""
Unit tests for the box projection, the multiplier update and the stationarity measure.
"""
import numpy as np
import pytest

from src.attacks.projections import c_update, project_box, project_c, stationarity


def test_project_box_examples():
    np.testing.assert_array_equal(project_box(np.zeros(3), np.full(3, 0.5), 0.1), np.zeros(3))
    assert project_box(np.array([0.5]), np.array([0.95]), 0.1)[0] == pytest.approx(0.05)
    assert project_box(np.array([-2.0]), np.array([0.3]), 1.0)[0] == pytest.approx(-0.3)


def test_project_box_keeps_both_constraints(rng):
    x = rng.uniform(size=200)
    delta = project_box(rng.normal(scale=2.0, size=200), x, 0.25)
    assert np.all(np.abs(delta) <= 0.25)
    assert np.all((x + delta >= 0.0) & (x + delta <= 1.0))


def test_project_box_is_exact_on_rounding_boundaries():
    x = np.array([0.1, 0.7, 0.2])
    delta = project_box(np.full(3, 0.5), x, 0.3)
    assert np.max(np.abs(delta)) <= 0.3
    assert np.all(x + delta <= 1.0)
    np.testing.assert_array_equal(project_box(np.full(3, -0.5), x, 0.3), [-0.1, -0.3, -0.2])


@pytest.mark.parametrize("epsilon", [0.1, 0.3, 1.0 / 3.0, 0.7])
def test_project_box_never_overshoots_on_a_fine_grid(epsilon):
    x = np.linspace(0.0, 1.0, 1001)
    for target in (-1.0, 1.0):
        delta = project_box(np.full_like(x, target), x, epsilon)
        assert np.all(np.abs(delta) <= epsilon)
        assert np.all((x + delta >= 0.0) & (x + delta <= 1.0))


def test_project_box_is_idempotent(rng):
    x = rng.uniform(size=50)
    once = project_box(rng.normal(size=50), x, 0.3)
    np.testing.assert_array_equal(project_box(once, x, 0.3), once)


@pytest.mark.parametrize(
    "c, t, beta, fplus, expected",
    [(0.0, 3, 0.1, 0.0, 0.0), (1.0, 1, 0.1, 2.0, 1.1), (2.0, 16, 0.1, 0.0, 1.9)],
)
def test_c_update_examples(c, t, beta, fplus, expected):
    assert c_update(c, t, beta, fplus) == pytest.approx(expected)


def test_c_update_clamps_and_rejects_t_zero():
    assert c_update(5.0, 1, 0.5, 100.0, c_max=10.0) == 10.0
    assert c_update(1.0, 1, 2.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        c_update(1.0, 0, 0.1, 0.0)


def test_project_c():
    assert project_c(-1.0, 5.0) == 0.0
    assert project_c(7.0, 5.0) == 5.0
    assert project_c(2.5, 5.0) == 2.5


def test_stationarity_is_zero_at_an_interior_stationary_point():
    x = np.full(4, 0.5)
    assert stationarity(np.zeros(4), 0.0, np.zeros(4), 0.0, 0.5, x) == 0.0


def test_stationarity_counts_both_residuals():
    x = np.full(2, 0.5)
    grad = np.array([0.1, -0.2])
    value = stationarity(np.zeros(2), 1.0, grad, 0.5, 0.5, x)
    assert value == pytest.approx(0.1**2 + 0.2**2 + 0.5**2)


def test_stationarity_ignores_gradients_pointing_out_of_the_box():
    x = np.array([1.0])
    assert stationarity(np.zeros(1), 0.0, np.array([-3.0]), 0.0, 0.5, x) == 0.0
