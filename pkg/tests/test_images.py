"""Image container and file IO tests."""

import numpy as np
import pytest

from imgfuse.errors import ImageError
from imgfuse.images import ImageTensor, load_image, mean_image, psnr, save_image


class TestImageTensor:
    def test_grayscale_2d_promoted_to_channel_axis(self):
        img = ImageTensor(np.zeros((40, 40)))
        assert img.pixels.shape == (40, 40, 1)
        assert img.colour_space == "grayscale"
        assert img.is_grayscale

    def test_rgb_inferred(self):
        img = ImageTensor(np.zeros((40, 40, 3)))
        assert img.colour_space == "RGB"

    def test_out_of_range_rejected(self):
        with pytest.raises(ImageError):
            ImageTensor(np.full((40, 40, 1), 1.5))
        with pytest.raises(ImageError):
            ImageTensor(np.full((40, 40, 1), -0.1))

    def test_non_finite_rejected(self):
        bad = np.zeros((40, 40, 1))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ImageError):
            ImageTensor(bad)

    def test_too_small_rejected(self):
        with pytest.raises(ImageError):
            ImageTensor(np.zeros((16, 16, 1)))

    def test_bad_channel_count_rejected(self):
        with pytest.raises(ImageError):
            ImageTensor(np.zeros((40, 40, 4)))

    def test_plane_requires_grayscale(self):
        with pytest.raises(ImageError):
            ImageTensor(np.zeros((40, 40, 3))).plane()


class TestFileRoundTrip:
    def test_png_round_trip_is_exact_for_8bit_values(self, tmp_path):
        rng = np.random.default_rng(0)
        quant = rng.integers(0, 256, size=(48, 48, 1)).astype(np.float32) / 255.0
        img = ImageTensor(quant)
        path = tmp_path / "x.png"
        save_image(img, path)
        back = load_image(path)
        np.testing.assert_array_equal(back.pixels, img.pixels)

    def test_round_half_up_on_write(self, tmp_path):
        # 0.5/255 sits exactly between 0 and 1 in 8-bit units: half-up -> 1
        img = ImageTensor(np.full((32, 32, 1), 0.5 / 255.0, dtype=np.float32))
        path = tmp_path / "h.png"
        save_image(img, path)
        assert load_image(path).pixels[0, 0, 0] == pytest.approx(1.0 / 255.0)

    def test_rgb_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        quant = rng.integers(0, 256, size=(40, 40, 3)).astype(np.float32) / 255.0
        path = tmp_path / "c.png"
        save_image(ImageTensor(quant), path)
        back = load_image(path)
        assert back.colour_space == "RGB"
        np.testing.assert_array_equal(back.pixels, quant)

    def test_missing_file_raises_image_error(self, tmp_path):
        with pytest.raises(ImageError):
            load_image(tmp_path / "absent.png")

    def test_corrupt_file_raises_image_error(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"not an image")
        with pytest.raises(ImageError):
            load_image(path)


class TestHelpers:
    def test_mean_image(self):
        a = ImageTensor(np.full((32, 32, 1), 0.2, dtype=np.float32))
        b = ImageTensor(np.full((32, 32, 1), 0.6, dtype=np.float32))
        m = mean_image(a, b)
        np.testing.assert_allclose(m.pixels, 0.4, atol=1e-7)

    def test_psnr_identity_infinite(self):
        a = ImageTensor(np.random.default_rng(2).random((32, 32, 1)).astype(np.float32))
        assert psnr(a, a) == float("inf")

    def test_psnr_known_value(self):
        a = ImageTensor(np.zeros((32, 32, 1), dtype=np.float32))
        b = ImageTensor(np.full((32, 32, 1), 0.1, dtype=np.float32))
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-4)
