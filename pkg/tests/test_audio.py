import math

import numpy as np
import pytest

from tgif.audio import (
    AudioClip,
    clamp_db,
    convolve_rir,
    gain_for_ratio,
    input_sdr,
    power,
    si_sdr,
    si_sdr_improvement,
)
from tgif.errors import (
    BadInputError,
    EmptySignalError,
    OrthogonalEstimateError,
    RateMismatchError,
    SilentSourceError,
)


def clip(samples, sr=16000):
    return AudioClip(np.asarray(samples, dtype=np.float64), sr)


class TestAudioClip:
    def test_rejects_nan(self):
        with pytest.raises(BadInputError):
            clip([0.0, float("nan")])

    def test_rejects_stereo(self):
        with pytest.raises(BadInputError):
            AudioClip(np.zeros((2, 10)), 16000)

    def test_duration(self):
        assert clip(np.zeros(32000)).duration_s == 2.0


class TestPower:
    def test_zero_signal(self):
        assert power(clip([0, 0, 0])) == 0.0

    def test_unit_square_wave(self):
        assert power(clip([1, -1, 1, -1])) == 1.0

    def test_single_spike(self):
        assert power(clip([3, 0, 0, 0])) == 2.25

    def test_empty_raises(self):
        with pytest.raises(EmptySignalError):
            power(clip([]))


class TestConvolveRir:
    def test_impulse_identity(self):
        x = clip(np.random.default_rng(0).standard_normal(100))
        out = convolve_rir(x, clip([1.0]))
        np.testing.assert_allclose(out.samples, x.samples, atol=1e-12)

    def test_one_sample_delay_truncated(self):
        out = convolve_rir(clip([1, 2, 3]), clip([0, 1]))
        np.testing.assert_allclose(out.samples, [0, 1, 2], atol=1e-12)

    def test_matches_direct_convolution_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(64)
        h = rng.standard_normal(8)
        # brute-force O(T*L) convolution, truncated to len(x)
        expected = np.zeros(64)
        for n in range(64):
            for k in range(8):
                if 0 <= n - k < 64:
                    expected[n] += h[k] * x[n - k]
        out = convolve_rir(clip(x), clip(h))
        assert np.max(np.abs(out.samples - expected)) < 1e-10

    def test_linearity(self):
        rng = np.random.default_rng(8)
        a, b = rng.standard_normal(50), rng.standard_normal(50)
        h = rng.standard_normal(6)
        lhs = convolve_rir(clip(a + b), clip(h)).samples
        rhs = convolve_rir(clip(a), clip(h)).samples + convolve_rir(clip(b), clip(h)).samples
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_rate_mismatch(self):
        with pytest.raises(RateMismatchError):
            convolve_rir(clip([1, 2]), clip([1.0], sr=8000))


class TestGainForRatio:
    def test_closed_form_unity(self):
        ref = clip([2, 2, 2, 2])      # power 4
        adj = clip([1, -1, 1, -1])    # power 1
        g = gain_for_ratio(ref, adj, 10 * math.log10(4))
        assert g == pytest.approx(1.0, abs=1e-12)

    def test_closed_form_half(self):
        ref = clip([1, 1, 1, 1])      # power 1
        adj = clip([2, 2, -2, -2])    # power 4
        assert gain_for_ratio(ref, adj, 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_equal_powers_zero_db(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(256)
        b = rng.standard_normal(256)
        b *= math.sqrt(np.mean(a**2) / np.mean(b**2))
        assert gain_for_ratio(clip(a), clip(b), 0.0) == pytest.approx(1.0, abs=1e-9)

    def test_postcondition_exact(self):
        rng = np.random.default_rng(4)
        ref = clip(rng.standard_normal(500))
        adj = clip(rng.standard_normal(500))
        for ratio in (-17.3, 0.0, 4.4, 25.0):
            g = gain_for_ratio(ref, adj, ratio)
            measured = 10 * math.log10(power(ref) / power(adj.scaled(g)))
            assert measured == pytest.approx(ratio, abs=1e-9)

    def test_silent_source(self):
        with pytest.raises(SilentSourceError):
            gain_for_ratio(clip([0, 0]), clip([1, 1]), 0.0)
        with pytest.raises(SilentSourceError):
            gain_for_ratio(clip([1, 1]), clip([0, 0]), 0.0)


class TestSiSdr:
    def test_perfect_reconstruction(self):
        x = clip(np.random.default_rng(0).standard_normal(64))
        assert si_sdr(x, x) == math.inf

    def test_scale_and_sign_invariance_sentinel(self):
        x = clip(np.random.default_rng(1).standard_normal(64))
        assert si_sdr(x.scaled(-0.5), x) == math.inf

    def test_hand_computed(self):
        assert si_sdr(clip([1, 1]), clip([1, 0])) == pytest.approx(0.0, abs=1e-12)

    def test_scale_invariance_both_sides(self):
        rng = np.random.default_rng(2)
        ref = clip(rng.standard_normal(400))
        est = clip(ref.samples + 0.3 * rng.standard_normal(400))
        base = si_sdr(est, ref)
        for c in (-3.0, 0.1, 10.0):
            assert si_sdr(est.scaled(c), ref) == pytest.approx(base, abs=1e-6)
            assert si_sdr(est, ref.scaled(c)) == pytest.approx(base, abs=1e-6)

    def test_orthogonal_estimate(self):
        with pytest.raises(OrthogonalEstimateError):
            si_sdr(clip([0, 1]), clip([1, 0]))

    def test_silent_reference(self):
        with pytest.raises(SilentSourceError):
            si_sdr(clip([1, 1]), clip([0, 0]))

    def test_length_mismatch(self):
        with pytest.raises(BadInputError):
            si_sdr(clip([1, 2, 3]), clip([1, 2]))


class TestSiSdrImprovement:
    def test_identity_system_is_zero(self):
        rng = np.random.default_rng(5)
        ref = clip(rng.standard_normal(128))
        mix = clip(ref.samples + rng.standard_normal(128))
        assert si_sdr_improvement(mix, mix, ref) == 0.0

    def test_arithmetic(self):
        rng = np.random.default_rng(6)
        ref = clip(rng.standard_normal(256))
        mix = clip(ref.samples + 0.8 * rng.standard_normal(256))
        est = clip(ref.samples + 0.1 * rng.standard_normal(256))
        expected = si_sdr(est, ref) - si_sdr(mix, ref)
        assert si_sdr_improvement(est, mix, ref) == pytest.approx(expected, abs=1e-9)

    def test_perfect_estimate_improvement_infinite(self):
        rng = np.random.default_rng(9)
        ref = clip(rng.standard_normal(64))
        mix = clip(ref.samples + rng.standard_normal(64))
        assert si_sdr_improvement(ref, mix, ref) == math.inf


class TestInputSdr:
    def test_clean_mixture(self):
        x = clip(np.random.default_rng(0).standard_normal(64))
        assert input_sdr(x, x) == math.inf

    def test_closed_form(self):
        s = clip([2, 0, 0, 0])           # energy 4
        x = clip([2, 1, 0, 0])           # distortion energy 1
        assert input_sdr(x, s) == pytest.approx(10 * math.log10(4), abs=1e-9)

    def test_equal_power_distortion(self):
        rng = np.random.default_rng(11)
        s = rng.standard_normal(300)
        d = rng.standard_normal(300)
        d *= math.sqrt(np.dot(s, s) / np.dot(d, d))
        assert input_sdr(clip(s + d), clip(s)) == pytest.approx(0.0, abs=1e-9)

    def test_not_scale_invariant(self):
        rng = np.random.default_rng(12)
        s = clip(rng.standard_normal(100))
        x = clip(s.samples + 0.5 * rng.standard_normal(100))
        assert input_sdr(x.scaled(2.0), s) != pytest.approx(input_sdr(x, s), abs=1e-3)

    def test_silent_target(self):
        with pytest.raises(SilentSourceError):
            input_sdr(clip([1, 1]), clip([0, 0]))


class TestClampDb:
    def test_clamps_infinities(self):
        assert clamp_db(math.inf) == 60.0
        assert clamp_db(-math.inf) == -60.0

    def test_passes_finite(self):
        assert clamp_db(12.5) == 12.5

    def test_custom_limit(self):
        assert clamp_db(100.0, limit=20.0) == 20.0
