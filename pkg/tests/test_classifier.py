import math

import numpy as np
import pytest

from relex import autodiff as ad
from relex.autodiff import Tensor
from relex.classifier import (
    OutputParams,
    init_output,
    l2_penalty,
    logits,
    loss,
    nll_from_logits,
    predict_proba,
)


class TestPredictProba:
    def test_zero_params_uniform(self):
        params = OutputParams(weight=Tensor(np.zeros((19, 6))), bias=Tensor(np.zeros(19)))
        probs = predict_proba(Tensor(np.ones(6)), params)
        np.testing.assert_allclose(probs, 1.0 / 19, atol=1e-12)
        np.testing.assert_allclose(probs.sum(), 1.0, atol=1e-6)

    def test_dominant_bias_wins(self):
        bias = np.full(19, -10.0)
        bias[0] = 10.0
        params = OutputParams(weight=Tensor(np.zeros((19, 4))), bias=Tensor(bias))
        probs = predict_proba(Tensor(np.zeros(4)), params)
        assert np.argmax(probs) == 0
        assert probs[0] > 0.999

    def test_three_class_oracle(self):
        # oracle: direct exponential computation
        rng = ad.Rng(1)
        params = init_output(3, 4, rng)
        z = Tensor(rng.normal(4))
        scores = params.weight.values @ z.values + params.bias.values
        expected = np.exp(scores) / np.exp(scores).sum()
        np.testing.assert_allclose(predict_proba(z, params), expected, atol=1e-10)


class TestLoss:
    def test_perfect_prediction_zero(self):
        probs = np.zeros((1, 19))
        probs[0, 4] = 1.0
        assert loss(probs, [4]) == 0.0

    def test_uniform_nineteen_class(self):
        probs = np.full((1, 19), 1.0 / 19)
        value = loss(probs, [3])
        assert abs(value - math.log(19)) < 1e-12
        assert abs(value - 2.9444) < 1e-4

    def test_l2_adds_exactly_lambda_w_squared(self):
        probs = np.zeros((1, 5))
        probs[0, 0] = 1.0
        w = Tensor(np.zeros((3, 3)))
        w.values[1, 2] = 2.0
        lam = 0.01
        assert loss(probs, [0], [w], lam) == pytest.approx(lam * 4.0, abs=1e-15)

    def test_label_out_of_range(self):
        probs = np.full((1, 4), 0.25)
        with pytest.raises(ValueError):
            loss(probs, [4])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            loss(np.full((2, 3), 1 / 3), [0])


class TestNllFromLogits:
    def test_matches_probability_path(self):
        rng = ad.Rng(2)
        scores = Tensor(rng.normal(7), requires_grad=True)
        label = 3
        nll = nll_from_logits(scores, label)
        probs = np.exp(scores.values) / np.exp(scores.values).sum()
        np.testing.assert_allclose(nll.item(), -math.log(probs[label]), atol=1e-12)

    def test_stable_for_huge_logits(self):
        scores = Tensor(np.array([1e4, -1e4, 0.0]))
        value = nll_from_logits(scores, 0).item()
        assert np.isfinite(value)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert np.isfinite(nll_from_logits(scores, 1).item())

    def test_gradient(self):
        rng = ad.Rng(3)
        scores = Tensor(rng.normal(5), requires_grad=True)
        report = ad.finite_diff_check(lambda t: nll_from_logits(t, 2), scores, h=1e-6, tol=1e-6)
        assert report.passed

    def test_bad_label(self):
        with pytest.raises(ValueError):
            nll_from_logits(Tensor(np.zeros(3)), 3)


class TestL2Penalty:
    def test_gradient_is_two_lambda_theta(self):
        rng = ad.Rng(4)
        w = Tensor(rng.normal((3, 4)), requires_grad=True)
        lam = 0.05
        term = l2_penalty([w], lam)
        ad.backward(term)
        np.testing.assert_allclose(w.grad, 2 * lam * w.values, atol=1e-12)
        assert ad.finite_diff_check(
            lambda t: l2_penalty([t], lam), w, h=1e-6, tol=1e-6
        ).passed

    def test_zero_lambda_is_none(self):
        assert l2_penalty([Tensor(np.ones(3))], 0.0) is None

    def test_sums_over_parameters(self):
        a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        b = Tensor(np.array([3.0]), requires_grad=True)
        assert l2_penalty([a, b], 1.0).item() == pytest.approx(14.0)


class TestLogitsLayer:
    def test_gradients(self):
        rng = ad.Rng(5)
        params = init_output(4, 6, rng)
        z = Tensor(rng.normal(6), requires_grad=True)
        for name, theta in [("weight", params.weight), ("bias", params.bias), ("z", z)]:
            report = ad.finite_diff_check(
                lambda t: nll_from_logits(logits(z, params), 1), theta,
                h=1e-6, tol=1e-6, name=name,
            )
            assert report.passed, name
