"""Image container and 8-bit PNG/JPEG input/output.

Images are stored as float32 arrays of shape (H, W, C) with values in
[0, 1].  C is 1 for grayscale and 3 for RGB.  Files are read by dividing
by 255 and written by multiplying by 255 with round-half-up.
"""

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from imgfuse.errors import ImageError

MIN_SIDE = 32  # network minimum; smaller inputs cannot reach the coarse taps


@dataclass
class ImageTensor:
    """An image in [0, 1] storage range with colour-space metadata."""

    pixels: np.ndarray
    colour_space: str = field(default="")

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ImageError(f"expected H x W x C with C in {{1, 3}}, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ImageError("image contains non-finite values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ImageError(
                f"pixel values outside [0, 1]: min={px.min():.4g} max={px.max():.4g}"
            )
        h, w = px.shape[:2]
        if h < MIN_SIDE or w < MIN_SIDE:
            raise ImageError(f"image {h}x{w} is below the {MIN_SIDE}x{MIN_SIDE} minimum")
        inferred = "grayscale" if px.shape[2] == 1 else "RGB"
        if not self.colour_space:
            self.colour_space = inferred
        elif self.colour_space != inferred:
            raise ImageError(
                f"colour_space {self.colour_space!r} inconsistent with {px.shape[2]} channels"
            )
        self.pixels = px

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def channels(self):
        return self.pixels.shape[2]

    @property
    def is_grayscale(self):
        return self.channels == 1

    def plane(self) -> np.ndarray:
        """The single channel as a 2-D array; grayscale images only."""
        if not self.is_grayscale:
            raise ImageError("plane() is defined for grayscale images only")
        return self.pixels[:, :, 0]


def load_image(path) -> ImageTensor:
    """Read an 8-bit PNG or JPEG file into the [0, 1] range.

    Grayscale files stay single channel; palette and alpha variants are
    converted to RGB.
    """
    try:
        with Image.open(path) as im:
            if im.mode in ("L", "I;16", "I"):
                im = im.convert("L")
            elif im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise ImageError(f"no such image file: {path}") from None
    except (OSError, ValueError) as exc:
        raise ImageError(f"cannot read image {path}: {exc}") from exc
    return ImageTensor(arr)


def save_image(image: ImageTensor, path) -> None:
    """Write an image as 8-bit PNG/JPEG, round-half-up quantisation."""
    px = np.clip(image.pixels, 0.0, 1.0).astype(np.float64)
    # np.round is half-to-even; the file contract is half-up
    quant = np.floor(px * 255.0 + 0.5).astype(np.uint8)
    if quant.shape[2] == 1:
        Image.fromarray(quant[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(quant, mode="RGB").save(path)


def mean_image(a: ImageTensor, b: ImageTensor) -> ImageTensor:
    """Pixelwise mean of two images of identical shape and colour space."""
    if a.pixels.shape != b.pixels.shape:
        raise ImageError(f"shape mismatch: {a.pixels.shape} vs {b.pixels.shape}")
    return ImageTensor(0.5 * a.pixels + 0.5 * b.pixels, colour_space=a.colour_space)


def psnr(a: ImageTensor, b: ImageTensor) -> float:
    """Peak signal-to-noise ratio in dB over the [0, 1] range."""
    if a.pixels.shape != b.pixels.shape:
        raise ImageError(f"shape mismatch: {a.pixels.shape} vs {b.pixels.shape}")
    mse = float(np.mean((a.pixels.astype(np.float64) - b.pixels.astype(np.float64)) ** 2))
    if mse == 0.0:
        return float("inf")
    return -10.0 * np.log10(mse)
