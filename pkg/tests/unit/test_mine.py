"""
Unit tests for per-sample MINE: views, the DV bound, ascent steps and the delta gradient.
"""
import math
from collections import Counter

import numpy as np
import pytest

from src.core.config import CalibrationConfig, MineConfig
from src.mine.calibration import estimate_mi
from src.mine.estimator import PairBatch, create_estimator, dv_bound, dv_objective, mi_gradient_wrt_delta, mi_value, mine_update
from src.mine.sampling import compress, conv_features, make_projection_bank
from src.models.network import ModelState, zero_model
from src.models.specs import LayerSpec, ModelSpec
from src.persistence.datasets import synth_gaussian_pairs
from src.tensor import Tensor, finite_diff_check
from src.tensor import functional as F
from src.utils.errors import ConfigurationError, FeatureExtractionError, ShapeMismatchError


def pointwise_conv_model(shape=(1, 4, 4)) -> ModelState:
    spec = ModelSpec(
        kind="conv-ae",
        input_shape=list(shape),
        layers=[LayerSpec(kind="conv2d", filters=shape[0], kernel=1), LayerSpec(kind="sigmoid")],
    )
    model = zero_model(spec)
    model.params[0][...] = np.eye(shape[0]).reshape(shape[0], shape[0], 1, 1)
    return model


# --- Views ---


def test_projection_bank_is_deterministic():
    a, b = make_projection_bank(5, d=12, d_prime=3, k=4), make_projection_bank(5, d=12, d_prime=3, k=4)
    np.testing.assert_array_equal(a.matrices, b.matrices)
    assert a.matrix(2).shape == (3, 12)


def test_projection_bank_entry_statistics():
    bank = make_projection_bank(17, d=100, d_prime=20, k=500)
    entries = bank.matrices.ravel()
    assert entries.size == 1_000_000
    sigma = 1.0 / 20
    assert abs(entries.mean()) <= 4 * sigma / math.sqrt(entries.size)
    assert entries.std() == pytest.approx(sigma, rel=0.01)


def test_projection_bank_rejects_non_positive_dimensions():
    with pytest.raises(ConfigurationError):
        make_projection_bank(0, d=0, d_prime=2, k=1)


def test_compress_examples():
    bank = make_projection_bank(3, d=3, d_prime=2, k=1)
    np.testing.assert_array_equal(compress(bank, np.zeros(3)).values, np.zeros((1, 2)))
    x = np.array([0.2, 0.7, 0.1])
    np.testing.assert_allclose(compress(bank, x).values[0], bank.matrix(0) @ x)


def test_compress_rejects_wrong_size():
    bank = make_projection_bank(3, d=3, d_prime=2, k=2)
    with pytest.raises(ShapeMismatchError):
        compress(bank, np.zeros(4))


def test_identity_conv_features_reproduce_the_input(rng):
    model = pointwise_conv_model()
    x = rng.uniform(size=(1, 4, 4))
    np.testing.assert_allclose(conv_features(model, x).values, x.reshape(1, 16))


def test_conv_features_need_a_leading_conv(dense_ae):
    with pytest.raises(FeatureExtractionError):
        conv_features(dense_ae, np.zeros((1, 4, 4)))


def test_estimator_picks_conv_scheme_for_conv_models(conv_ae, dense_ae):
    auto = MineConfig(scheme="auto", k=4, d_prime=2, hidden=[4])
    assert create_estimator((1, 8, 8), auto, 0, feature_model=conv_ae).scheme == "conv"
    assert create_estimator((1, 4, 4), auto, 0, feature_model=dense_ae).scheme == "random"
    conv = MineConfig(scheme="conv", k=4, d_prime=2, hidden=[4])
    assert create_estimator((1, 4, 4), conv, 0, feature_model=dense_ae).scheme == "random"


# --- DV bound ---


def test_dv_bound_examples():
    assert dv_bound([2.0, 2.0, 2.0], [2.0, 2.0, 2.0]).item() == pytest.approx(0.0, abs=1e-15)
    assert dv_bound([0.7], [-0.4]).item() == pytest.approx(1.1)
    assert dv_bound([1.0, 1.0], [0.0, math.log(3.0)]).item() == pytest.approx(1.0 - math.log(2.0))


def test_pair_batch_validates_permutation():
    u = Tensor(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        PairBatch(u, u, np.array([0, 0, 1]))
    with pytest.raises(ShapeMismatchError):
        PairBatch(u, Tensor(np.zeros((2, 2))), np.array([0, 1, 2]))


def test_constant_statistics_network_gives_zero_bound(small_mine):
    est = create_estimator((1, 4, 4), small_mine, seed=0)
    for p in est.net.params:
        p[...] = 0.0
    x = np.full((1, 4, 4), 0.4)
    assert mi_value(est, x, x + 0.1) == pytest.approx(0.0, abs=1e-15)
    _, grad = mi_gradient_wrt_delta(est, x, np.full_like(x, 0.1))
    np.testing.assert_array_equal(grad, np.zeros_like(x))


# --- Ascent ---


def test_zero_steps_leave_the_estimator_unchanged(small_mine, rng):
    est = create_estimator((1, 4, 4), small_mine, seed=2)
    before = [p.copy() for p in est.net.params]
    x = rng.uniform(size=(1, 4, 4))
    _, value = mine_update(est, x, x, steps=0)
    for a, b in zip(before, est.net.params):
        np.testing.assert_array_equal(a, b)
    assert value == pytest.approx(mi_value(est, x, x))


def test_mine_update_rejects_bad_arguments(small_mine):
    est = create_estimator((1, 4, 4), small_mine, seed=2)
    with pytest.raises(ValueError):
        mine_update(est, np.zeros((1, 4, 4)), np.zeros((1, 4, 4)), steps=-1)
    with pytest.raises(ShapeMismatchError):
        mine_update(est, np.zeros((1, 4, 4)), np.zeros((1, 2, 2)))


def test_ascent_raises_the_bound_for_identical_pairs(rng):
    cfg = MineConfig(scheme="random", k=32, d_prime=4, hidden=[16], lr=1e-2, inner_steps=1)
    est = create_estimator((1, 4, 4), cfg, seed=4)
    x = rng.uniform(size=(1, 4, 4))
    _, start = mine_update(est, x, x, steps=0)
    _, end = mine_update(est, x, x, steps=200)
    assert end > start
    assert len(est.history) == 2


def test_estimator_is_deterministic(small_mine, rng):
    x = rng.uniform(size=(1, 4, 4))
    values = []
    for _ in range(2):
        est = create_estimator((1, 4, 4), small_mine, seed=9, shuffle_seed=10)
        values.append(mine_update(est, x, x + 0.05, steps=5)[1])
    assert values[0] == values[1]


@pytest.mark.parametrize("seed", range(3))
def test_delta_gradient_matches_finite_differences(seed):
    # a linear statistics network keeps the DV bound smooth in delta
    cfg = MineConfig(scheme="random", k=16, d_prime=4, hidden=[], lr=1e-2, inner_steps=3)
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=16)
    est = create_estimator((16,), cfg, seed=seed)
    mine_update(est, x, x + rng.uniform(-0.1, 0.1, size=16))

    def fn(delta):
        return dv_objective(est.net, PairBatch(est.views(Tensor(x)), est.views(F.add(Tensor(x), delta)), est.perm))

    point = rng.uniform(-0.1, 0.1, size=16)
    report = finite_diff_check(fn, point)
    assert report.passed, f"max relative error {report.max_rel_error:.2e}"
    value, grad = mi_gradient_wrt_delta(est, x, point)
    np.testing.assert_allclose(grad, report.analytic)
    assert value == pytest.approx(fn(Tensor(point)).item())


def test_delta_gradient_ignores_a_constant_shift_of_the_statistics_network(small_mine, rng):
    est = create_estimator((1, 4, 4), small_mine, seed=6)
    x = rng.uniform(size=(1, 4, 4))
    delta = rng.uniform(-0.1, 0.1, size=(1, 4, 4))
    mine_update(est, x, x + delta, steps=5)
    value, grad = mi_gradient_wrt_delta(est, x, delta)

    est.net.params[-1][...] += 3.0
    shifted_value, shifted_grad = mi_gradient_wrt_delta(est, x, delta)
    assert shifted_value == pytest.approx(value, abs=1e-10)
    np.testing.assert_allclose(shifted_grad, grad, rtol=1e-8, atol=1e-12)


class RecordingGenerator:
    """Delegates to a numpy Generator and keeps every permutation it hands out."""

    def __init__(self, rng):
        self.rng = rng
        self.drawn = []

    def permutation(self, k):
        perm = self.rng.permutation(k)
        self.drawn.append(tuple(perm.tolist()))
        return perm


def test_shuffle_permutations_are_uniform():
    """Chi-square over 10^4 ascent steps at K = 5; 157.8 is the 0.99 quantile for 119 degrees of freedom."""
    cfg = MineConfig(scheme="random", k=5, d_prime=2, hidden=[4], lr=1e-4, inner_steps=1)
    est = create_estimator((4,), cfg, seed=0, shuffle_seed=11)
    est.rng = RecordingGenerator(est.rng)
    x = np.linspace(0.1, 0.9, 4)
    mine_update(est, x, x, steps=10_000)

    counts = Counter(est.rng.drawn)
    assert len(counts) == math.factorial(5)
    expected = 10_000 / math.factorial(5)
    chi_square = sum((n - expected) ** 2 / expected for n in counts.values())
    assert chi_square <= 157.8


# --- Calibration ---


def test_calibration_result_reports_analytic_value():
    pairs = synth_gaussian_pairs(0.5, 1, 64, seed=0)
    cfg = CalibrationConfig(rho=0.5, dim=1, n=64, steps=5, batch_size=16, hidden=[8])
    result = estimate_mi(pairs, cfg, seed=1)
    assert result.analytic == pytest.approx(-0.5 * math.log(1 - 0.25))
    assert result.steps == 5
    assert math.isfinite(result.estimate)


@pytest.mark.slow
def test_independent_partner_scores_below_identical_partner(rng):
    cfg = MineConfig(scheme="random", k=100, d_prime=8, hidden=[32, 32], lr=1e-3, inner_steps=1)
    x = rng.uniform(size=(1, 8, 8))
    noise = rng.uniform(size=(1, 8, 8))
    same = mine_update(create_estimator(x.shape, cfg, seed=1, shuffle_seed=2), x, x, steps=500)[1]
    independent = mine_update(create_estimator(x.shape, cfg, seed=1, shuffle_seed=2), x, noise, steps=500)[1]
    assert independent <= same


@pytest.mark.slow
def test_gaussian_calibration_within_twenty_percent():
    cfg = CalibrationConfig()
    pairs = synth_gaussian_pairs(cfg.rho, cfg.dim, cfg.n, seed=0)
    result = estimate_mi(pairs, cfg, seed=1)
    assert result.relative_error <= 0.2
