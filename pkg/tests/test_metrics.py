import math

import numpy as np
import pytest

from ofdma_diffusion import metrics


def ssim_reference(x, y, window=8, peak=2.0):
    """Brute-force per-window SSIM, written independently of the library."""
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    h, w = x.shape
    vals = []
    for i in range(h - window + 1):
        for j in range(w - window + 1):
            a = x[i:i + window, j:j + window].ravel()
            b = y[i:i + window, j:j + window].ravel()
            ua, ub = a.mean(), b.mean()
            va = np.mean((a - ua) ** 2)
            vb = np.mean((b - ub) ** 2)
            cab = np.mean((a - ua) * (b - ub))
            vals.append((2 * ua * ub + c1) * (2 * cab + c2)
                        / ((ua**2 + ub**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


class TestPsnr:
    def test_identical_is_inf(self, rng):
        x = rng.normal(size=(8, 8))
        assert metrics.psnr(x, x) == math.inf

    def test_constant_offset_closed_form(self):
        x = np.zeros((16, 16))
        y = x + 0.1
        assert metrics.psnr(x, y, peak=2.0) == pytest.approx(
            10 * math.log10(4 / 0.01), abs=1e-9)

    def test_second_implementation_oracle(self, rng):
        x = rng.uniform(-1, 1, size=(16, 16))
        y = rng.uniform(-1, 1, size=(16, 16))
        reference = 20 * math.log10(2.0) - 10 * math.log10(np.mean((x - y) ** 2))
        assert metrics.psnr(x, y, peak=2.0) == pytest.approx(reference, abs=1e-9)

    def test_strictly_decreasing_in_mse(self, rng):
        x = np.zeros((8, 8))
        values = [metrics.psnr(x, x + d) for d in (0.01, 0.02, 0.04)]
        assert values[0] > values[1] > values[2]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            metrics.psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_self_similarity(self, rng):
        x = rng.uniform(-1, 1, size=(16, 16))
        assert metrics.ssim(x, x) == 1.0

    def test_anticorrelated_negative(self):
        x = np.indices((16, 16)).sum(axis=0) % 2.0
        assert metrics.ssim(x, 1.0 - x, peak=1.0) < 0

    def test_matches_brute_force_reference(self, rng):
        x = rng.uniform(-1, 1, size=(16, 16))
        y = np.clip(x + rng.normal(0, 0.3, size=(16, 16)), -1, 1)
        assert metrics.ssim(x, y) == pytest.approx(ssim_reference(x, y), abs=1e-9)

    def test_symmetry(self, rng):
        x = rng.uniform(-1, 1, size=(12, 12))
        y = rng.uniform(-1, 1, size=(12, 12))
        assert metrics.ssim(x, y) == pytest.approx(metrics.ssim(y, x), abs=1e-10)

    def test_too_small_image(self):
        with pytest.raises(ValueError):
            metrics.ssim(np.zeros((4, 4)), np.zeros((4, 4)), window=8)


class TestFrechet:
    def test_identical_zero(self, rng):
        mu = rng.normal(size=3)
        a = rng.normal(size=(3, 3))
        cov = a @ a.T
        assert metrics.frechet_gaussian(mu, cov, mu, cov) == pytest.approx(0, abs=1e-9)

    def test_one_dimensional_closed_form(self):
        # (mu_r - mu_g)^2 + (sigma_r - sigma_g)^2 = 1 + (1-2)^2 = 2
        val = metrics.frechet_gaussian([0.0], [[1.0]], [1.0], [[4.0]])
        assert val == pytest.approx(2.0, abs=1e-9)

    def test_diagonal_closed_form(self, rng):
        d = 4
        mu_r, mu_g = rng.normal(size=d), rng.normal(size=d)
        lr, lg = rng.uniform(0.1, 2, size=d), rng.uniform(0.1, 2, size=d)
        expect = np.sum((mu_r - mu_g) ** 2) + np.sum((np.sqrt(lr) - np.sqrt(lg)) ** 2)
        val = metrics.frechet_gaussian(mu_r, np.diag(lr), mu_g, np.diag(lg))
        assert val == pytest.approx(expect, abs=1e-9)

    def test_symmetry(self, rng):
        d = 3
        mu_r, mu_g = rng.normal(size=d), rng.normal(size=d)
        a, b = rng.normal(size=(d, d)), rng.normal(size=(d, d))
        cr, cg = a @ a.T, b @ b.T
        v1 = metrics.frechet_gaussian(mu_r, cr, mu_g, cg)
        v2 = metrics.frechet_gaussian(mu_g, cg, mu_r, cr)
        assert v1 == pytest.approx(v2, abs=1e-10)

    def test_equal_covariance_reduces_to_mean_distance(self, rng):
        d = 3
        a = rng.normal(size=(d, d))
        cov = a @ a.T
        mu_r, mu_g = rng.normal(size=d), rng.normal(size=d)
        val = metrics.frechet_gaussian(mu_r, cov, mu_g, cov)
        assert val == pytest.approx(np.sum((mu_r - mu_g) ** 2), abs=1e-8)

    def test_asymmetric_input_rejected(self):
        bad = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError):
            metrics.frechet_gaussian(np.zeros(2), bad, np.zeros(2), np.eye(2))


class TestFeatureStats:
    def test_identical_samples_zero_cov(self):
        mu, cov = metrics.feature_stats([np.ones(3), np.ones(3)])
        np.testing.assert_array_equal(mu, np.ones(3))
        np.testing.assert_array_equal(cov, np.zeros((3, 3)))

    def test_two_point_hand_computation(self):
        mu, cov = metrics.feature_stats([np.array([0.0, 0.0]), np.array([2.0, 0.0])])
        np.testing.assert_array_equal(mu, [1.0, 0.0])
        np.testing.assert_array_equal(cov, [[2.0, 0.0], [0.0, 0.0]])

    def test_standard_normal_monte_carlo(self, rng):
        samples = rng.standard_normal(size=(10_000, 2))
        mu, cov = metrics.feature_stats(list(samples))
        assert np.all(np.abs(mu) < 0.05)
        assert np.all(np.abs(np.diag(cov) - 1.0) < 0.05)

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError):
            metrics.feature_stats([np.ones(3)])

    def test_patch_mean_features(self):
        img = np.arange(64, dtype=float).reshape(8, 8)
        feats = metrics.patch_mean_features(4)(img)
        assert feats.shape == (4,)
        assert feats[0] == pytest.approx(img[:4, :4].mean())
