"""Fusion metric tests.

The windowed index is verified against a direct single-window formula
evaluation (sample statistics, so the two implementations share no
code path); the fused-image scores are exercised on identity, noise and
degenerate inputs.
"""

import numpy as np
import pytest

from imgfuse.errors import MetricInputError
from imgfuse.images import ImageTensor
from imgfuse.metrics import (
    PeConstants, evaluate_pair, pe_fusion, piella_q, q0_fusion, uiqi_window,
)


def oracle_uiqi(x, y):
    """Straight formula with sample (n-1) statistics; factors cancel so the
    value matches the population-statistic implementation."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    mx, my = x.mean(), y.mean()
    vx = x.var(ddof=1)
    vy = y.var(ddof=1)
    vxy = np.cov(x, y, ddof=1)[0, 1]
    return 4 * vxy * mx * my / ((vx + vy) * (mx * mx + my * my))


def edge_image(h=64, w=64, seed=0):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    img = 0.25 + 0.5 * ((xx // 8 + yy // 8) % 2)
    img = img + 0.1 * np.sin(xx * 0.7) + 0.05 * rng.random((h, w))
    return ImageTensor(np.clip(img, 0, 1)[:, :, None].astype(np.float32))


class TestUiqiWindow:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(0)
        x = rng.random((8, 8))
        assert uiqi_window(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.random((8, 8))
            y = rng.random((8, 8))
            assert uiqi_window(x, y) == pytest.approx(oracle_uiqi(x, y), rel=1e-10)

    def test_zero_mean_scaled_pair_falls_back_to_structure_term(self):
        # luminance term degenerate: both means exactly zero, y = c x
        # (the fallback is the exact-zero contract; near-zero means keep
        # the full formula, which tends continuously to the squared term)
        x = np.array([-1.0] * 32 + [1.0] * 32).reshape(8, 8)
        c = 0.5
        got = uiqi_window(x, c * x)
        assert got == pytest.approx(2 * c / (1 + c * c), rel=1e-12)

    def test_identical_flat_windows_score_one(self):
        z = np.zeros((4, 4))
        assert uiqi_window(z, z) == 1.0

    def test_flat_nonzero_pair_uses_luminance_term(self):
        a = np.full((4, 4), 0.25)
        b = np.full((4, 4), 0.75)
        expected = 2 * 0.25 * 0.75 / (0.25 ** 2 + 0.75 ** 2)
        assert uiqi_window(a, b) == pytest.approx(expected, rel=1e-12)

    def test_window_shape_mismatch_rejected(self):
        with pytest.raises(MetricInputError):
            uiqi_window(np.zeros((8, 8)), np.zeros((8, 4)))


class TestQ0:
    def test_identical_triple_scores_one(self):
        img = edge_image(seed=2)
        assert q0_fusion(img, img, img) == pytest.approx(1.0, abs=1e-9)

    def test_uncorrelated_noise_scores_near_zero(self):
        rng = np.random.default_rng(3)
        i0 = edge_image(seed=4)
        i1 = edge_image(seed=5)
        noise = ImageTensor(rng.random((64, 64, 1)).astype(np.float32))
        assert abs(q0_fusion(i0, i1, noise)) < 0.1

    def test_matches_windowed_oracle(self):
        # mean over all stride-1 8x8 windows of the direct formula
        rng = np.random.default_rng(6)
        a = rng.random((16, 16))
        b = rng.random((16, 16))
        f = 0.5 * (a + b)
        expected = []
        for i in range(9):
            for j in range(9):
                wa = a[i:i + 8, j:j + 8]
                wb = b[i:i + 8, j:j + 8]
                wf = f[i:i + 8, j:j + 8]
                expected.append(0.5 * (oracle_uiqi(wa, wf) + oracle_uiqi(wb, wf)))
        # raw-plane API sidesteps the 32x32 image minimum for the small case
        got = q0_fusion(a, b, f)
        assert got == pytest.approx(np.mean(expected), rel=1e-9)

    def test_colour_refused_without_flag(self):
        rgb = ImageTensor(np.random.default_rng(7).random((32, 32, 3)).astype(np.float32))
        with pytest.raises(MetricInputError):
            q0_fusion(rgb, rgb, rgb)
        assert q0_fusion(rgb, rgb, rgb, allow_colour_luma=True) == pytest.approx(1.0, abs=1e-9)


class TestPe:
    def test_identical_edge_rich_triple_near_one(self):
        img = edge_image(seed=8)
        assert pe_fusion(img, img, img) >= 0.95

    def test_constant_fused_scores_zero(self):
        i0 = edge_image(seed=9)
        i1 = edge_image(seed=10)
        flat = ImageTensor(np.full((64, 64, 1), 0.5, dtype=np.float32))
        assert pe_fusion(i0, i1, flat) < 1e-3

    def test_range_on_random_triples(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            imgs = [ImageTensor(rng.random((32, 32, 1)).astype(np.float32)) for _ in range(3)]
            value = pe_fusion(*imgs)
            assert 0.0 <= value <= 1.0

    def test_noise_strictly_decreases_preservation(self):
        rng = np.random.default_rng(12)
        i0 = edge_image(seed=13)
        i1 = edge_image(seed=14)
        fused = ImageTensor((0.5 * i0.pixels + 0.5 * i1.pixels).astype(np.float32))
        clean = pe_fusion(i0, i1, fused)
        noise = rng.normal(scale=0.05, size=fused.pixels.shape)
        noisy = ImageTensor(np.clip(fused.pixels + noise, 0, 1).astype(np.float32))
        assert pe_fusion(i0, i1, noisy) < clean

    def test_flat_inputs_score_zero(self):
        flat = ImageTensor(np.full((32, 32, 1), 0.5, dtype=np.float32))
        assert pe_fusion(flat, flat, flat) == 0.0

    def test_constants_are_configurable(self):
        i0 = edge_image(seed=15)
        i1 = edge_image(seed=16)
        fused = ImageTensor((0.5 * i0.pixels + 0.5 * i1.pixels).astype(np.float32))
        soft = PeConstants(kappa_g=5.0, kappa_a=5.0)
        assert pe_fusion(i0, i1, fused, constants=soft) != pe_fusion(i0, i1, fused)


class TestPiella:
    def test_identical_triple_scores_one(self):
        img = edge_image(seed=17)
        assert piella_q(img, img, img) == pytest.approx(1.0, abs=1e-9)

    def test_single_sided_saliency_uses_that_input(self):
        # i1 flat everywhere: every kept window must weight i0 fully
        rng = np.random.default_rng(18)
        a = rng.random((16, 16))
        flat = np.full((16, 16), 0.5)
        f = 0.7 * a + 0.3 * flat
        expected = []
        for i in range(9):
            for j in range(9):
                expected.append(oracle_uiqi(a[i:i + 8, j:j + 8], f[i:i + 8, j:j + 8]))
        assert piella_q(a, flat, f) == pytest.approx(np.mean(expected), rel=1e-9)

    def test_all_flat_inputs_rejected(self):
        flat = np.full((16, 16), 0.5)
        with pytest.raises(MetricInputError):
            piella_q(flat, flat, flat)


class TestSymmetryAndReport:
    def test_all_metrics_symmetric_under_swap(self):
        rng = np.random.default_rng(19)
        for _ in range(5):
            i0 = ImageTensor(rng.random((48, 48, 1)).astype(np.float32))
            i1 = ImageTensor(rng.random((48, 48, 1)).astype(np.float32))
            f = ImageTensor((0.5 * i0.pixels + 0.5 * i1.pixels).astype(np.float32))
            assert abs(q0_fusion(i0, i1, f) - q0_fusion(i1, i0, f)) < 1e-12
            assert abs(pe_fusion(i0, i1, f) - pe_fusion(i1, i0, f)) < 1e-12
            assert abs(piella_q(i0, i1, f) - piella_q(i1, i0, f)) < 1e-12

    def test_size_mismatch_rejected(self):
        a = ImageTensor(np.zeros((32, 32, 1), dtype=np.float32))
        b = ImageTensor(np.zeros((32, 40, 1), dtype=np.float32))
        with pytest.raises(MetricInputError):
            q0_fusion(a, b, a)

    def test_report_bundles_all_three(self):
        img = edge_image(seed=20)
        report = evaluate_pair(img, img, img, pair_id="self")
        assert report.pair_id == "self"
        assert report.q0 == pytest.approx(1.0, abs=1e-9)
        assert report.q == pytest.approx(1.0, abs=1e-9)
        assert report.pe >= 0.95
        assert -1.0 <= report.q0 <= 1.0 and 0.0 <= report.pe <= 1.0 and -1.0 <= report.q <= 1.0
