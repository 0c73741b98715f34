"""Tests for the downlink model primitives: constellations, channels, noise, detection."""

import numpy as np
import pytest

from ciblp.model import (
    ChannelBlock,
    Constellation,
    NoiseModel,
    detect,
    receive,
    sample_channel,
    sample_symbols,
)


def naive_receive(H, W, s, z):
    """Elementwise triple-loop oracle for y = H W s + z."""
    K, Nt = H.shape
    y = np.zeros(K, dtype=complex)
    for k in range(K):
        for t in range(Nt):
            acc = 0j
            for j in range(s.shape[0]):
                acc += W[t, j] * s[j]
            y[k] += H[k, t] * acc
        y[k] += z[k]
    return y


class TestConstellation:
    @pytest.mark.parametrize("order", [2, 4, 8, 16])
    def test_points_unit_magnitude_and_sorted(self, order):
        c = Constellation(order)
        assert len(c.points) == order
        assert np.allclose(np.abs(c.points), 1.0, atol=1e-12)
        phases = np.angle(c.points) % (2 * np.pi)
        assert np.all(np.diff(phases) > 0)
        assert len(np.unique(np.round(phases, 12))) == order

    @pytest.mark.parametrize("order", [4, 8, 16])
    def test_boundaries_bisect_adjacent_points(self, order):
        # boundary m sits at angle 2*pi*m/M, midway between points m-1 and m
        c = Constellation(order)
        ang = (2 * np.arange(order) + 1) * np.pi / order
        assert np.allclose(np.angle(c.points) % (2 * np.pi), ang, atol=1e-12)
        mid = 0.5 * (ang[:-1] + ang[1:])
        assert np.allclose(mid % (2 * np.pi), 2 * np.pi * np.arange(1, order) / order)

    def test_half_angle(self):
        assert Constellation(8).half_angle == pytest.approx(np.pi / 8)

    @pytest.mark.parametrize("order", [0, 1, 3, 5, 32])
    def test_unsupported_order_rejected(self, order):
        with pytest.raises(ValueError):
            Constellation(order)


class TestSampleChannel:
    def test_deterministic_under_fixed_seed(self):
        a = sample_channel(np.random.default_rng(42), 2, 2)
        b = sample_channel(np.random.default_rng(42), 2, 2)
        assert a.entries.shape == (2, 2)
        assert np.array_equal(a.entries, b.entries)

    def test_unit_entry_variance(self):
        # 1000 blocks of 10x10 = 1e5 entries; mean |h|^2 within 2% of 1
        rng = np.random.default_rng(1)
        acc = 0.0
        for _ in range(1000):
            acc += np.mean(np.abs(sample_channel(rng, 10, 10).entries) ** 2)
        assert abs(acc / 1000 - 1.0) < 0.02

    def test_zero_dimensions_rejected(self):
        with pytest.raises(ValueError):
            sample_channel(np.random.default_rng(0), 0, 4)
        with pytest.raises(ValueError):
            sample_channel(np.random.default_rng(0), 4, 0)

    def test_entries_immutable(self):
        h = sample_channel(np.random.default_rng(3), 2, 3)
        with pytest.raises((ValueError, RuntimeError)):
            h.entries[0, 0] = 0


class TestSampleSymbols:
    def test_support(self):
        c = Constellation(2)
        blk = sample_symbols(np.random.default_rng(7), 1, 1, c)
        assert blk.symbols.shape == (1, 1)
        assert np.min(np.abs(blk.symbols[0, 0] - c.points)) < 1e-12

    def test_determinism(self):
        c = Constellation(8)
        a = sample_symbols(np.random.default_rng(7), 10, 8, c)
        b = sample_symbols(np.random.default_rng(7), 10, 8, c)
        assert np.array_equal(a.symbols, b.symbols)
        assert np.array_equal(a.indices, b.indices)

    def test_uniform_frequencies(self):
        # 1250 blocks of 10x8 = 1e5 draws; per-point frequency within 3 sigma of 1/8
        c = Constellation(8)
        rng = np.random.default_rng(7)
        counts = np.zeros(8)
        for _ in range(1250):
            idx = sample_symbols(rng, 10, 8, c).indices
            counts += np.bincount(idx.ravel(), minlength=8)
        n = counts.sum()
        p = 1.0 / 8.0
        sigma = np.sqrt(p * (1 - p) / n)
        assert np.all(np.abs(counts / n - p) < 3 * sigma + 1e-12)

    def test_symbols_match_indices(self):
        c = Constellation(4)
        blk = sample_symbols(np.random.default_rng(0), 3, 5, c)
        assert np.allclose(blk.symbols, c.points[blk.indices])
        assert blk.block_length == 5


class TestReceive:
    def test_identity_chain(self):
        y = receive(ChannelBlock(np.eye(2, dtype=complex)), np.eye(2, dtype=complex),
                    np.array([1, 1j]), np.zeros(2, dtype=complex))
        assert np.allclose(y, [1, 1j], atol=1e-15)

    def test_zero_precoder_passes_noise(self):
        rng = np.random.default_rng(5)
        H = sample_channel(rng, 3, 4)
        z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        y = receive(H, np.zeros((4, 3), dtype=complex), np.ones(3, dtype=complex), z)
        assert np.allclose(y, z, atol=1e-15)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(11)
        H = sample_channel(rng, 3, 3)
        W = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        s = Constellation(8).points[rng.integers(0, 8, 3)]
        z = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        assert np.allclose(receive(H, W, s, z), naive_receive(H.entries, W, s, z), atol=1e-12)

    def test_linear_in_symbols_and_noise(self):
        rng = np.random.default_rng(12)
        H = sample_channel(rng, 2, 2)
        W = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        s1, s2 = rng.standard_normal(2) + 0j, rng.standard_normal(2) + 0j
        z1, z2 = rng.standard_normal(2) + 0j, rng.standard_normal(2) + 0j
        lhs = receive(H, W, s1 + s2, z1 + z2)
        rhs = receive(H, W, s1, z1) + receive(H, W, s2, z2)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            receive(ChannelBlock(np.eye(2, dtype=complex)), np.eye(3, dtype=complex),
                    np.ones(3, dtype=complex), np.zeros(2, dtype=complex))


class TestDetect:
    @pytest.mark.parametrize("order", [2, 4, 8, 16])
    def test_noiseless_self_detection(self, order):
        c = Constellation(order)
        for m in range(order):
            assert detect(c.points[m], c) == m

    @pytest.mark.parametrize("order", [2, 4, 8, 16])
    def test_scale_invariance(self, order):
        c = Constellation(order)
        for m in range(order):
            assert detect(2.5 * c.points[m], c) == m

    def test_random_scale_invariance(self):
        c = Constellation(8)
        rng = np.random.default_rng(21)
        y = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        scales = rng.uniform(0.01, 100.0, 100)
        assert np.array_equal(detect(y, c), detect(scales * y, c))

    def test_boundary_goes_to_lower_index(self):
        c = Constellation(8)
        # boundary between points 0 and 1 is at angle 2*pi/8
        assert detect(np.exp(2j * np.pi / 8), c) == 0
        # boundary between points 7 and 0 is at angle 0
        assert detect(1.0 + 0j, c) == 0
        # boundary between points 1 and 2 is at angle pi/2
        assert detect(1j, c) == 1

    def test_zero_input_deterministic(self):
        c = Constellation(8)
        assert detect(0j, c) == detect(0j, c) == 0

    def test_array_input(self):
        c = Constellation(4)
        y = c.points[np.array([[0, 1], [2, 3]])]
        assert np.array_equal(detect(y, c), [[0, 1], [2, 3]])


class TestNoiseModel:
    def test_snr_consistency(self):
        nm = NoiseModel.from_snr_db(30.0)
        assert nm.variance == pytest.approx(1e-3)
        assert nm.snr_db == pytest.approx(30.0, abs=1e-9)

    def test_roundtrip(self):
        nm = NoiseModel(variance=0.25, power_budget=1.0)
        assert nm.snr_db == pytest.approx(10 * np.log10(4.0), abs=1e-9)

    def test_invalid(self):
        with pytest.raises(ValueError):
            NoiseModel(variance=0.0)
        with pytest.raises(ValueError):
            NoiseModel(variance=1.0, power_budget=-1.0)
