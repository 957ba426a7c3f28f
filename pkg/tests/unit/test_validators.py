"""
Unit tests for adversarial-example re-verification and seed derivation.
"""
import numpy as np
import pytest

from src.core.config import TrainConfig
from src.utils import seeding
from src.validation.validators import FeasibilityError, ensure_feasible, validate_data, verify_adversarial_example


def error_types(errors):
    return {e.type for e in errors}


def test_feasible_example_passes():
    x = np.array([0.2, 0.9])
    ok, errors = verify_adversarial_example(x, np.array([0.1, 0.1]), 0.1, -0.5)
    assert ok and errors == []


def test_each_constraint_is_reported():
    x = np.array([0.2, 0.95])
    ok, errors = verify_adversarial_example(x, np.array([-0.3, 0.1]), 0.2, 0.1)
    assert not ok
    assert error_types(errors) == {"box_violation", "linf_violation", "criterion_violation"}


def test_boundary_values_are_feasible():
    x = np.array([0.0, 1.0])
    ok, _ = verify_adversarial_example(x, np.zeros(2), 0.5, 0.0)
    assert ok


def test_one_ulp_past_epsilon_is_rejected():
    x = np.array([0.2])
    ok, errors = verify_adversarial_example(x, np.array([np.nextafter(0.3, 1.0)]), 0.3, -1.0)
    assert not ok and error_types(errors) == {"linf_violation"}
    ok, _ = verify_adversarial_example(x, np.array([np.nextafter(0.3, 1.0)]), 0.3, -1.0, tol=1e-12)
    assert ok


def test_callable_criterion_sees_the_perturbed_sample():
    seen = []

    def criterion(x_adv):
        seen.append(x_adv.copy())
        return float(x_adv[0] - 0.5)

    ok, _ = verify_adversarial_example(np.array([0.6]), np.array([-0.2]), 0.3, criterion)
    assert ok
    np.testing.assert_allclose(seen[0], [0.4])


def test_shape_and_non_finite_criterion():
    ok, errors = verify_adversarial_example(np.zeros(2), np.zeros(3), 1.0, -1.0)
    assert not ok and error_types(errors) == {"shape_mismatch"}
    ok, errors = verify_adversarial_example(np.zeros(2), np.zeros(2), 1.0, float("nan"))
    assert not ok and error_types(errors) == {"criterion_violation"}


def test_ensure_feasible_raises_with_details():
    with pytest.raises(FeasibilityError) as exc:
        ensure_feasible(np.zeros(1), np.array([0.5]), 0.1, -1.0, sample_id=4)
    assert exc.value.details["sample_id"] == 4
    assert "linf_violation" in str(exc.value)


def test_validate_data_collects_errors():
    ok, errors = validate_data({"epochs": -1, "batch_size": 0}, TrainConfig)
    assert not ok
    assert {e.loc for e in errors} == {("epochs",), ("batch_size",)}
    assert validate_data({"epochs": 2}, TrainConfig) == (True, [])


# --- Seed streams ---


def test_named_streams_are_reproducible_and_independent():
    a = seeding.stream(7, "attack", 3).uniform(size=4)
    np.testing.assert_array_equal(a, seeding.stream(7, "attack", 3).uniform(size=4))
    assert not np.array_equal(a, seeding.stream(7, "attack", 4).uniform(size=4))
    assert not np.array_equal(a, seeding.stream(8, "attack", 3).uniform(size=4))
    assert not np.array_equal(a, seeding.stream(7, "mine", 3).uniform(size=4))


def test_derived_seeds():
    seed = seeding.derive_seed(0, seeding.MODEL_INIT)
    assert seed == seeding.derive_seed(0, seeding.MODEL_INIT)
    assert 0 <= seed < 2**32
    assert seed != seeding.derive_seed(0, seeding.RETRAIN_INIT)
    assert seeding.attack_stream_name(5) == "attack:5"
    assert seeding.mine_stream_name(5) == "mine:5"
