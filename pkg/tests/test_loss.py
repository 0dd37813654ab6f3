import numpy as np
import pytest

from popcast.autodiff import Tensor, backward
from popcast.errors import ConfigError, ShapeError
from popcast.loss import (
    LossWeights,
    anneal,
    cgl,
    discrete_diff,
    laplacian_remainder,
    peak_l1,
    smooth_l1,
)
from tests.test_autodiff import fd_gradient, rel_err


def loop_laplacian(rows):
    """Brute-force sum |first diffs| + |second diffs|, averaged over rows."""
    total = 0.0
    for row in rows:
        d1 = [b - a for a, b in zip(row, row[1:])]
        d2 = [b - a for a, b in zip(d1, d1[1:])]
        total += sum(abs(v) for v in d1) + sum(abs(v) for v in d2)
    return total / len(rows)


def loop_smooth_l1(pred, truth, beta=0.1):
    vals = []
    for p, t in zip(np.ravel(pred), np.ravel(truth)):
        z = abs(p - t)
        vals.append(0.5 * z * z / beta if z < beta else z - 0.5 * beta)
    return sum(vals) / len(vals)


class TestAnneal:
    def test_endpoints_and_midpoint(self):
        assert anneal(0, 10) == (1.0, 1.0, 1.0)
        assert anneal(10, 10) == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)
        assert anneal(5, 10) == pytest.approx((0.5, 0.5, 0.5), abs=1e-15)

    def test_monotone_nonincreasing(self):
        ws = [anneal(e, 40)[0] for e in range(41)]
        assert all(b <= a + 1e-15 for a, b in zip(ws, ws[1:]))

    def test_floor(self):
        assert anneal(10, 10, floor=0.2)[0] == pytest.approx(0.2)
        assert anneal(0, 10, floor=0.2)[0] == pytest.approx(1.0)

    def test_past_horizon_clamps_with_warning(self):
        with pytest.warns(UserWarning, match="horizon"):
            assert anneal(11, 10) == (0.0, 0.0, 0.0)

    def test_bad_args(self):
        with pytest.raises(ConfigError):
            anneal(0, 0)
        with pytest.raises(ConfigError):
            anneal(-1, 10)
        with pytest.raises(ConfigError):
            anneal(0, 10, floor=1.5)


class TestLossWeights:
    def test_at_epoch(self):
        w = LossWeights.at_epoch(0, 100)
        assert (w.lambda1, w.lambda2, w.alpha) == (1.0, 1.0, 1.0)
        assert w.epsilon == 1e-6
        assert w.beta == 0.1

    def test_validation(self):
        with pytest.raises(ConfigError):
            LossWeights(lambda1=1.5, lambda2=0.0, alpha=0.0)
        with pytest.raises(ConfigError):
            LossWeights(lambda1=0.5, lambda2=0.5, alpha=0.5, beta=0.0)


class TestSmoothL1:
    def test_zero_at_equality(self):
        x = np.random.default_rng(0).normal(size=(3, 5))
        assert float(smooth_l1(x, x).data) == 0.0

    def test_quadratic_branch(self):
        assert float(smooth_l1(np.array([[0.05]]), np.array([[0.0]])).data) == pytest.approx(
            0.0125
        )

    def test_linear_branch(self):
        assert float(smooth_l1(np.array([[1.0]]), np.array([[0.0]])).data) == pytest.approx(
            0.95
        )

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        p = rng.normal(scale=0.2, size=(4, 7))
        t = rng.normal(scale=0.2, size=(4, 7))
        assert float(smooth_l1(p, t).data) == pytest.approx(loop_smooth_l1(p, t), abs=1e-12)


class TestDiscreteDiff:
    def test_constant_series(self):
        x = np.full((2, 6), 3.5)
        assert not discrete_diff(x, 1).data.any()
        assert not discrete_diff(x, 2).data.any()

    def test_linear_series_second_order_zero(self):
        x = np.arange(12, dtype=float).reshape(2, 6) * 0.7
        assert discrete_diff(x, 2).data == pytest.approx(np.zeros((2, 4)), abs=1e-12)

    def test_known_values(self):
        x = np.array([[1.0, 3.0, 2.0, 5.0]])
        assert discrete_diff(x, 1).data.tolist() == [[2.0, -1.0, 3.0]]
        assert discrete_diff(x, 2).data.tolist() == [[-3.0, 4.0]]

    def test_too_short(self):
        with pytest.raises(ShapeError):
            discrete_diff(np.zeros((2, 1)), 1)
        with pytest.raises(ShapeError):
            discrete_diff(np.zeros((2, 2)), 2)

    def test_gradient_flows(self):
        x = np.random.default_rng(2).normal(size=(2, 5))

        def build(leaf):
            d = discrete_diff(leaf, 2)
            return smooth_l1(d, Tensor(np.zeros(d.shape)))

        leaf = Tensor(x.copy())
        out = build(leaf)
        backward(out)
        numeric = fd_gradient(lambda: float(build(Tensor(x)).data), x)
        assert rel_err(leaf.grad, numeric) < 1e-6


class TestPeakL1:
    def test_agreement(self):
        x = np.random.default_rng(3).normal(size=(4, 6))
        assert peak_l1(x, x) == 0.0

    def test_disagreement_is_two(self):
        p = np.array([[0.0, 1.0, 0.0]])
        t = np.array([[1.0, 0.0, 0.0]])
        assert peak_l1(p, t) == 2.0

    def test_batch_mean(self):
        p = np.eye(4)
        t = np.eye(4)
        t[2] = np.roll(t[2], 1)  # one sample's peak moves
        assert peak_l1(p, t) == pytest.approx(0.5)

    def test_first_index_wins_ties(self):
        p = np.array([[1.0, 1.0, 0.0]])  # argmax -> 0
        t = np.array([[1.0, 0.5, 0.0]])
        assert peak_l1(p, t) == 0.0
        t2 = np.array([[0.0, 1.0, 1.0]])  # argmax -> 1
        assert peak_l1(p, t2) == 2.0


class TestLaplacianRemainder:
    def test_constant_is_zero(self):
        assert float(laplacian_remainder(np.full((3, 7), 2.0)).data) == 0.0

    def test_linear_slope(self):
        m = 0.6
        x = np.tile(np.arange(5) * m, (2, 1))
        assert float(laplacian_remainder(x).data) == pytest.approx(4 * abs(m), abs=1e-12)

    def test_matches_loop_oracle(self):
        x = np.random.default_rng(4).normal(size=(5, 9))
        assert float(laplacian_remainder(x).data) == pytest.approx(
            loop_laplacian(x.tolist()), abs=1e-12
        )

    def test_too_short(self):
        with pytest.raises(ShapeError):
            laplacian_remainder(np.zeros((2, 2)))


class TestCgl:
    def weights(self, l1=1.0, l2=1.0, a=1.0):
        return LossWeights(lambda1=l1, lambda2=l2, alpha=a)

    def test_constant_equal_curves_all_zero(self):
        x = np.full((3, 8), 1.25)
        report = cgl(x, x, self.weights())
        assert report.total_value == 0.0
        assert report.base == report.d1 == report.d2 == report.peak == 0.0
        assert report.laplacian == 0.0

    def test_equal_nonconstant_leaves_only_regularizer(self):
        rng = np.random.default_rng(5)
        x = np.cumsum(np.abs(rng.normal(size=(4, 10))), axis=1)
        report = cgl(x, x, self.weights())
        assert report.base == report.d1 == report.d2 == report.peak == 0.0
        assert report.laplacian > 0
        assert report.total_value == pytest.approx(1e-6 * report.laplacian, rel=1e-12)

    def test_total_assembles_from_components(self):
        rng = np.random.default_rng(6)
        p = rng.normal(size=(6, 12))
        t = rng.normal(size=(6, 12))
        w = LossWeights(lambda1=0.7, lambda2=0.3, alpha=0.9)
        report = cgl(p, t, w)
        assembled = (
            report.base
            + w.lambda1 * report.d1
            + w.lambda2 * report.d2
            + w.alpha * report.peak
            + w.epsilon * report.laplacian
        )
        assert abs(report.total_value - assembled) < 1e-9

    def test_components_match_independent_oracles(self):
        rng = np.random.default_rng(7)
        p = rng.normal(size=(3, 9))
        t = rng.normal(size=(3, 9))
        report = cgl(p, t, self.weights())
        assert report.base == pytest.approx(loop_smooth_l1(p, t), abs=1e-12)
        assert report.laplacian == pytest.approx(loop_laplacian(p.tolist()), abs=1e-12)
        d1p, d1t = np.diff(p, axis=1), np.diff(t, axis=1)
        assert report.d1 == pytest.approx(loop_smooth_l1(d1p, d1t), abs=1e-12)

    def test_nonnegative(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            p = rng.normal(size=(2, 6))
            t = rng.normal(size=(2, 6))
            assert cgl(p, t, self.weights()).total_value >= 0.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        p0 = rng.normal(size=(3, 8))
        t = rng.normal(size=(3, 8))
        w = LossWeights(lambda1=0.8, lambda2=0.5, alpha=0.6)

        pred = Tensor(p0.copy())
        report = cgl(pred, t, w)
        backward(report.total)
        numeric = fd_gradient(lambda: cgl(Tensor(p0), t, w).total_value, p0)
        assert rel_err(pred.grad, numeric) < 1e-4

    def test_peak_term_carries_no_gradient(self):
        # two alpha values, same gradient
        rng = np.random.default_rng(10)
        p0 = rng.normal(size=(2, 7))
        t = rng.normal(size=(2, 7))
        grads = []
        for a in (0.0, 1.0):
            pred = Tensor(p0.copy())
            report = cgl(pred, t, LossWeights(lambda1=0.5, lambda2=0.5, alpha=a))
            backward(report.total)
            grads.append(pred.grad.copy())
        assert np.array_equal(grads[0], grads[1])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            cgl(np.zeros((2, 5)), np.zeros((2, 6)), self.weights())
