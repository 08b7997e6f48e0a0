import math

import numpy as np
import pytest

from ofdma_diffusion import modem


def qam16_gray_ber(snr_db):
    """Exact closed-form Gray-coded 16QAM bit error rate over AWGN.

    Per-axis 4-PAM with Gray labels: the MSB errs with (Q(a/s)+Q(3a/s))/2
    and the LSB with Q(a/s) + Q(3a/s)/2 - Q(5a/s)/2, where a = sqrt(Es/10)
    and s = sqrt(N0/2), giving a^2/s^2 = (Es/N0)/5.  Averaging the two:
    BER = 3/4 Q(x) + 1/2 Q(3x) - 1/4 Q(5x) with x = sqrt((Es/N0)/5).
    """
    gamma = 10.0 ** (snr_db / 10.0)
    x = math.sqrt(gamma / 5.0)
    q = lambda v: 0.5 * math.erfc(v / math.sqrt(2.0))
    return 0.75 * q(x) + 0.5 * q(3 * x) - 0.25 * q(5 * x)


class TestQuantize:
    def test_lower_boundary(self):
        bits, sat = modem.quantize(np.array([-1.0]))
        assert sat == 0
        x = modem.dequantize(bits)
        assert abs(x[0] - (-1.0)) <= 2 / 256

    def test_mid_level(self):
        bits, _ = modem.quantize(np.array([0.0]))
        x = modem.dequantize(bits)
        assert abs(x[0]) <= 1 / 256

    def test_exhaustive_level_scan(self):
        # Every reconstruction level round-trips exactly; everything else
        # lands within half a step of its level center.
        centers = -1.0 + (np.arange(256) + 0.5) * (2 / 256)
        bits, sat = modem.quantize(centers)
        assert sat == 0
        np.testing.assert_array_equal(modem.dequantize(bits), centers)

    def test_random_round_trip_bound(self, rng):
        x = rng.uniform(-1, 1, size=10_000)
        bits, _ = modem.quantize(x)
        assert np.max(np.abs(modem.dequantize(bits) - x)) <= 2 / 256

    def test_saturation_counter(self):
        bits, sat = modem.quantize(np.array([-1.5, 0.0, 2.0, 1.0]))
        assert sat == 2
        x = modem.dequantize(bits)
        assert abs(x[0] - (-1.0)) <= 2 / 256 and abs(x[2] - 1.0) <= 2 / 256


class TestQam:
    def test_all_patterns_distinct_unit_energy(self):
        bits = np.array([[(p >> b) & 1 for b in (3, 2, 1, 0)]
                         for p in range(16)]).ravel()
        symbols = modem.modulate(bits)
        assert len(set(np.round(symbols, 12).tolist())) == 16
        assert abs(np.mean(np.abs(symbols) ** 2) - 1.0) < 1e-12

    def test_round_trip_all_patterns(self):
        bits = np.array([[(p >> b) & 1 for b in (3, 2, 1, 0)]
                         for p in range(16)]).ravel()
        np.testing.assert_array_equal(modem.demodulate(modem.modulate(bits)), bits)

    def test_gray_property_adjacent_levels(self):
        # Walking one level along either axis flips exactly one bit.
        for axis_bits in range(3):
            a = modem._GRAY_ENCODE[axis_bits]
            b = modem._GRAY_ENCODE[axis_bits + 1]
            assert bin(a ^ b).count("1") == 1

    def test_non_multiple_of_four(self):
        with pytest.raises(ValueError):
            modem.modulate(np.zeros(6, dtype=int))

    def test_monte_carlo_ber_vs_closed_form(self, rng):
        bits = rng.integers(0, 2, size=1_000_000)
        rx = modem.demodulate(modem.awgn(modem.modulate(bits), 10.0, rng))
        measured = modem.ber(bits, rx)
        expected = qam16_gray_ber(10.0)
        assert abs(measured - expected) / expected < 0.10

    def test_ber_monotone_over_paper_grid(self, rng):
        bits = rng.integers(0, 2, size=1_000_000)
        tx = modem.modulate(bits)
        bers = [modem.ber(bits, modem.demodulate(modem.awgn(tx, snr, rng)))
                for snr in (-10, -5, 0, 5, 10)]
        assert all(b1 >= b2 for b1, b2 in zip(bers, bers[1:]))


class TestAwgn:
    def test_infinite_snr_unchanged(self, rng):
        s = modem.modulate(rng.integers(0, 2, size=400))
        np.testing.assert_array_equal(modem.awgn(s, math.inf), s)

    @pytest.mark.parametrize("snr_db,ratio", [(0.0, 1.0), (10.0, 0.1)])
    def test_noise_power(self, rng, snr_db, ratio):
        s = modem.modulate(rng.integers(0, 2, size=400_000))
        es = np.mean(np.abs(s) ** 2)
        noise = modem.awgn(s, snr_db, rng) - s
        measured = np.mean(np.abs(noise) ** 2)
        assert abs(measured - ratio * es) < 0.02 * ratio * es


class TestBer:
    def test_identical(self):
        assert modem.ber(np.ones(100), np.ones(100)) == 0.0

    def test_complemented(self):
        assert modem.ber(np.zeros(100), np.ones(100)) == 1.0

    def test_single_flip(self):
        tx = np.zeros(1000, dtype=int)
        rx = tx.copy()
        rx[123] = 1
        assert modem.ber(tx, rx) == 0.001

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            modem.ber(np.zeros(3), np.zeros(4))


class TestPixelPath:
    def test_noiseless_end_to_end_bound(self, rng):
        x = rng.uniform(-1, 1, size=2048)
        symbols, _ = modem.pixels_to_symbols(x)
        rx = modem.symbols_to_pixels(symbols)
        assert np.max(np.abs(rx - x)) <= 2 / 256

    def test_constellation_energy_statistic(self, rng):
        s = modem.modulate(rng.integers(0, 2, size=400_000))
        assert abs(np.mean(np.abs(s) ** 2) - 1.0) < 0.01


class TestCalibration:
    def test_noiseless_quantization_floor(self):
        assert modem.pixel_residual_sigma(math.inf) <= 2 / 256

    def test_monotone_in_snr(self):
        sigmas = [modem.pixel_residual_sigma(snr, seed=7)
                  for snr in (10, 5, 0, -5, -10)]
        assert sigmas[0] > 0
        assert all(a < b for a, b in zip(sigmas, sigmas[1:]))

    def test_deterministic(self):
        assert (modem.pixel_residual_sigma(0.0, seed=3)
                == modem.pixel_residual_sigma(0.0, seed=3))

    def test_empty_block_rejected(self):
        with pytest.raises(ValueError):
            modem.pixel_residual_sigma(0.0, n_pixels=0)
