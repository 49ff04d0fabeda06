import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from srpedge import simroom
from srpedge.geometry import MicArray, build_grid, default_array, tdoa_table
from srpedge.signal import AudioClip, FrameSpec
from srpedge.srp import SrpConfig, srp_sequence


def delay_by_xcorr(a, b):
    n = len(a) + len(b)
    r = np.fft.irfft(np.fft.rfft(b, n) * np.conj(np.fft.rfft(a, n)), n)
    lag = int(np.argmax(r))
    return lag if lag < n // 2 else lag - n


class TestFarField:
    def test_sixteen_sample_delay(self):
        arr = MicArray(np.array([[0.343, 0, 0], [0.0, 0, 0]]))
        dry = simroom.white_noise(4000, 1)
        clip = simroom.anechoic_far_field(np.array([1.0, 0, 0]), dry, arr, 16000)
        # a wave arriving from +x reaches the mic at x=0.343 first
        assert delay_by_xcorr(clip.samples[0], clip.samples[1]) == 16

    def test_orthogonal_direction(self):
        arr = MicArray(np.array([[0.1, 0, 0], [-0.1, 0, 0], [0, 0.1, 0]]))
        clip = simroom.anechoic_far_field(np.array([0, 0, 1.0]), simroom.white_noise(512), arr, 16000)
        assert_allclose(clip.samples[0], clip.samples[1], atol=1e-12)
        assert_allclose(clip.samples[0], clip.samples[2], atol=1e-12)

    def test_integer_delay_is_exact_shift(self):
        arr = MicArray(np.array([[0.343 / 4, 0, 0], [0.0, 0, 0]]))
        dry = simroom.white_noise(600, 2)
        s = simroom.anechoic_far_field(np.array([-1.0, 0, 0]), dry, arr, 16000).samples
        assert_allclose(s[0, 4:], dry[:-4], atol=1e-9)

    def test_non_unit_direction(self):
        with pytest.raises(ValueError):
            simroom.anechoic_far_field(np.array([1.0, 1.0, 0]), np.ones(8), default_array(), 16000)

    @pytest.mark.parametrize("method", ["td", "lc", "lc-edge"])
    def test_srp_peaks_at_direction_cell(self, method):
        arr = default_array()
        grid = build_grid(8, 16)
        cfg = SrpConfig(arr, grid, method=method)
        rng = np.random.default_rng(7)
        for _ in range(4):
            cell = rng.integers(0, 8), rng.integers(0, 16)
            u = grid.directions[cell[0] * 16 + cell[1]]
            clip = simroom.anechoic_far_field(u, simroom.white_noise(4096 + 512, 11), arr, 16000)
            frame = srp_sequence(AudioClip(clip.samples[:, 256 : 256 + 4096], 16000), method, cfg)[0]
            assert frame.argmax == tuple(int(c) for c in cell)


class TestIsm:
    def scene(self, **kw):
        arr = MicArray(np.array([[0.05, 0, 0], [-0.05, 0, 0]]))
        base = dict(room=(6, 5, 3), segments=[(0, (4.5, 3.5, 1.5))], array=arr, array_center=(2.0, 2.0, 1.5))
        base.update(kw)
        return simroom.Scene(**base)

    def test_anechoic_single_tap(self):
        arr = MicArray(np.array([[0.05, 0, 0], [-0.05, 0, 0]]))
        # 3.43 m gives exactly 160 samples at 16 kHz
        sc = simroom.Scene((8, 6, 4), [(0, (5.43, 3.0, 2.0))], arr, (1.95, 3.0, 2.0))
        h = simroom.ism_rir(sc, sc.mic_positions[0], max_order=0, length=400).taps[0]
        assert sc.beta == 0.0
        assert np.argmax(h) == 160
        assert h[160] == pytest.approx(1.0 / (4 * math.pi * 3.43), rel=1e-12)
        h[160] = 0.0
        assert np.abs(h).max() < 1e-12

    def test_beta_zero_ignores_order(self):
        sc = self.scene(beta=0.0)
        a = simroom.ism_rir(sc, sc.mic_positions[0], max_order=0, length=600).taps
        b = simroom.ism_rir(sc, sc.mic_positions[0], max_order=3, length=600).taps
        assert_allclose(a, b, atol=1e-15)

    def test_similarity_scaling(self):
        room, src, mic = np.array([5.0, 4.0, 3.0]), np.array([3.7, 2.9, 1.3]), np.array([1.2, 1.0, 1.6])
        peaks = []
        for s in (1, 2):
            h = simroom.ism_rir_point(s * room, s * src, s * mic, 0.0, 16000, 0, 800)
            peaks.append(np.argmax(h))
        d = np.linalg.norm(src - mic) / 343 * 16000
        assert peaks[0] == round(d)
        assert abs(peaks[1] - 2 * d) <= 0.5

    def test_direct_path_timing_random_scenes(self):
        rng = np.random.default_rng(2025)
        worst = 0
        for _ in range(1000):
            room = rng.uniform([3, 3, 2.5], [9, 8, 4])
            src = rng.uniform(0.1 * room, 0.9 * room)
            mic = rng.uniform(0.1 * room, 0.9 * room)
            d = np.linalg.norm(src - mic) / 343 * 16000
            h = simroom.ism_rir_point(room, src, mic, 0.0, 16000, 0, int(d) + 100)
            worst = max(worst, abs(int(np.argmax(np.abs(h))) - round(d)))
        assert worst <= 1

    def test_negative_order(self):
        sc = self.scene()
        with pytest.raises(ValueError):
            simroom.ism_rir(sc, sc.mic_positions[0], max_order=-1)

    def test_image_count(self):
        imgs, gains = simroom.image_sources((5, 4, 3), np.array([1.0, 1.0, 1.0]), 2, 0.5)
        # lattice points with |i|+|j|+|k| <= 2 in three dimensions
        assert len(imgs) == 25
        assert sorted(set(np.round(gains, 12))) == [0.25, 0.5, 1.0]

    def test_reverberant_energy_decays(self):
        sc = self.scene(t60=0.3)
        h = simroom.ism_rir(sc, sc.mic_positions[0]).taps[0]
        q = len(h) // 4
        e = [np.sum(h[i * q : (i + 1) * q] ** 2) for i in range(4)]
        assert np.all(np.isfinite(h))
        assert e[0] > e[1] > e[2] > e[3] > 0

    def test_sabine_beta(self):
        # alpha = 0.161 * 60 / (94 * 0.5)
        alpha = 0.161 * 60 / (2 * (20 + 12 + 15) * 0.5)
        assert simroom.sabine_beta((5, 4, 3), 0.5) == pytest.approx(math.sqrt(1 - alpha))
        assert simroom.sabine_beta((5, 4, 3), 0.0) == 0.0
        with pytest.raises(ValueError):
            simroom.sabine_beta((5, 4, 3), 0.05)

    def test_schroeder_on_exponential(self):
        fs = 16000
        t = np.arange(fs) / fs
        h = np.random.default_rng(0).standard_normal(fs) * 10 ** (-3 * t / 0.4)
        assert simroom.schroeder_t60(h, fs) == pytest.approx(0.4, rel=0.05)

    @pytest.mark.xfail(strict=True, reason="uniform specular walls with Sabine-derived beta decay slower than the Sabine target")
    @pytest.mark.parametrize("room", [(5, 4, 3), (6, 5, 3), (7, 5, 3)])
    def test_t60_within_20_percent(self, room):
        arr = MicArray(np.array([[0.05, 0, 0], [-0.05, 0, 0]]))
        sc = simroom.Scene(room, [(0, (1.2, 1.1, 1.4))], arr, (room[0] * 0.6, room[1] * 0.6, room[2] * 0.5), t60=0.5)
        h = simroom.ism_rir(sc, sc.mic_positions[0]).taps[0]
        assert simroom.schroeder_t60(h, 16000) == pytest.approx(0.5, rel=0.2)

    def test_t60_bias_is_bounded(self):
        """Measured decay is longer than the target by a bounded factor."""
        arr = MicArray(np.array([[0.05, 0, 0], [-0.05, 0, 0]]))
        sc = simroom.Scene((5, 4, 3), [(0, (1.2, 1.1, 1.4))], arr, (3.0, 2.4, 1.5), t60=0.5)
        ratio = simroom.schroeder_t60(simroom.ism_rir(sc, sc.mic_positions[0]).taps[0], 16000) / 0.5
        assert 1.0 < ratio < 1.5


class TestScene:
    arr = MicArray(np.array([[0.05, 0, 0], [-0.05, 0, 0]]))

    def test_margin(self):
        with pytest.raises(ValueError, match="margin"):
            simroom.Scene((6, 5, 3), [(0, (0.2, 3.0, 1.5))], self.arr, (3.0, 2.5, 1.5))

    def test_min_distance(self):
        with pytest.raises(ValueError, match="far field"):
            simroom.Scene((6, 5, 3), [(0, (3.5, 2.5, 1.5))], self.arr, (3.0, 2.5, 1.5))

    def test_first_segment_at_zero(self):
        with pytest.raises(ValueError):
            simroom.Scene((6, 5, 3), [(0.5, (5.0, 2.5, 1.5))], self.arr, (3.0, 2.5, 1.5))

    def test_render_deterministic(self):
        sc = simroom.Scene((6, 5, 3), [(0, (5.0, 4.0, 1.5)), (0.1, (1.0, 4.0, 1.5))], self.arr, (3.0, 2.5, 1.5),
                           t60=0.2, snr_db=20, seed=3)
        dry = simroom.white_noise(3200, 5)
        a, b = simroom.render(sc, dry), simroom.render(sc, dry)
        assert a.samples.tobytes() == b.samples.tobytes()

    def test_crossfade_partition(self):
        g = simroom._segment_gains([0.0, 0.05, 0.1], 3200, 16000)
        assert_allclose(g.sum(axis=0), 1.0)
        assert g[0, 0] == 1.0 and g[2, -1] == 1.0
        ramp = np.nonzero((g[0] > 0) & (g[0] < 1))[0]
        assert len(ramp) <= int(simroom.CROSSFADE_S * 16000)

    def test_frame_truth_follows_segments(self):
        sc = simroom.Scene((6, 5, 3), [(0, (5.0, 2.5, 1.5)), (1.0, (3.0, 4.5, 1.5))], self.arr, (3.0, 2.5, 1.5))
        rows = simroom.frame_truth(sc, 8, FrameSpec())
        assert_allclose(rows[0, 1:], [0.0, 0.0], atol=1e-9)
        assert_allclose(rows[-1, 1:], [0.0, 90.0], atol=1e-9)

    def test_ism_agrees_with_far_field(self):
        arr = default_array()
        grid = build_grid(8, 16)
        cfg = SrpConfig(arr, grid)
        rng = np.random.default_rng(12)
        dry = simroom.white_noise(6000, 4)
        for _ in range(5):
            center = np.array([4.0, 4.0, 2.0])
            u = rng.standard_normal(3)
            u /= np.linalg.norm(u)
            src = center + rng.uniform(2.0, 3.0) * u
            src = np.clip(src, [0.9, 0.9, 0.5], [7.1, 7.1, 3.5])
            sc = simroom.Scene((8, 8, 4), [(0, src)], arr, center)
            ism = simroom.render(sc, dry).samples[:, 1000:5096]
            ff = simroom.anechoic_far_field(sc.doa_at(0), dry, arr, 16000).samples[:, 1000:5096]
            a = srp_sequence(AudioClip(ism, 16000), "lc-edge", cfg)[0].argmax
            b = srp_sequence(AudioClip(ff, 16000), "lc-edge", cfg)[0].argmax
            assert a == b


class TestNoise:
    clean = AudioClip(np.random.default_rng(1).standard_normal((4, 8000)) * 0.3, 16000)

    @pytest.mark.parametrize("snr", [-5.0, 0.0, 5.0, 17.5, 30.0])
    def test_snr_accuracy(self, snr):
        noisy = simroom.mix_at_snr(self.clean, snr, seed=9)
        assert abs(simroom.measured_snr_db(self.clean, noisy) - snr) <= 0.1

    def test_zero_db_power(self):
        noisy = simroom.mix_at_snr(self.clean, 0.0, seed=2)
        pn = np.mean((noisy.samples - self.clean.samples) ** 2)
        assert pn == pytest.approx(np.mean(self.clean.samples**2), rel=0.02)

    def test_infinite_snr(self):
        out = simroom.mix_at_snr(self.clean, math.inf)
        assert np.array_equal(out.samples, self.clean.samples)
        assert out.samples is not self.clean.samples

    def test_seeded(self):
        a = simroom.mix_at_snr(self.clean, 10, seed=4).samples
        b = simroom.mix_at_snr(self.clean, 10, seed=4).samples
        assert a.tobytes() == b.tobytes()

    def test_zero_power(self):
        with pytest.raises(ValueError):
            simroom.mix_at_snr(AudioClip(np.zeros((2, 100)), 16000), 10)
