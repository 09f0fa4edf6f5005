"""Synthetic test scenes and registered fusion pairs.

Real benchmark pairs are often licence-encumbered, so the bench corpus
can be regenerated locally: edge-rich procedural scenes, split into
multi-focus pairs by complementary defocus, plus visually distinct pairs
for classification checks.  Everything is seeded and deterministic.
"""

import numpy as np
from scipy.ndimage import gaussian_filter

from imgfuse.images import ImageTensor, save_image


def make_scene(size: int = 96, seed: int = 0, colour: bool = False) -> ImageTensor:
    """Procedural scene with smooth background, shapes and fine texture."""
    rng = np.random.default_rng(seed)
    base = gaussian_filter(rng.standard_normal((size, size)), sigma=size / 8.0)
    base = (base - base.min()) / (base.max() - base.min() + 1e-12)
    img = 0.25 + 0.4 * base

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    for _ in range(6):
        kind = rng.integers(0, 3)
        cx, cy = rng.uniform(0.15, 0.85, size=2) * size
        r = rng.uniform(0.06, 0.22) * size
        level = rng.uniform(0.0, 1.0)
        if kind == 0:  # disc
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        elif kind == 1:  # rectangle
            w, h = rng.uniform(0.5, 1.5) * r, rng.uniform(0.5, 1.5) * r
            mask = (np.abs(xx - cx) <= w) & (np.abs(yy - cy) <= h)
        else:  # ring
            d2 = (xx - cx) ** 2 + (yy - cy) ** 2
            mask = (d2 <= r * r) & (d2 >= (0.6 * r) ** 2)
        img = np.where(mask, level, img)

    # fine sinusoidal texture so defocus is measurable everywhere
    fx, fy = rng.uniform(0.15, 0.45, size=2)
    phase = rng.uniform(0, 2 * np.pi)
    img = img + 0.08 * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    img = np.clip(img, 0.0, 1.0)

    if colour:
        shade = gaussian_filter(rng.standard_normal((size, size, 3)), sigma=(size / 6, size / 6, 0))
        shade = 0.2 * (shade - shade.min()) / (shade.max() - shade.min() + 1e-12)
        img = np.clip(img[:, :, None] * (0.8 + shade), 0.0, 1.0)
        return ImageTensor(img.astype(np.float32))
    return ImageTensor(img[:, :, None].astype(np.float32))


def make_multifocus_pair(scene: ImageTensor, blur_sigma: float = 3.0,
                         axis: str = "vertical"):
    """Complementary defocus split of one scene into a registered pair.

    The first image is sharp on one side of the scene and defocused on
    the other; the second image is the complement.  The transition is a
    smooth band so neither image has an artificial hard seam.
    """
    px = scene.pixels.astype(np.float64)
    h, w = px.shape[:2]
    blurred = np.stack(
        [gaussian_filter(px[:, :, c], sigma=blur_sigma) for c in range(px.shape[2])], axis=2
    )
    coord = np.mgrid[0:h, 0:w][1 if axis == "vertical" else 0].astype(np.float64)
    span = w if axis == "vertical" else h
    m = 1.0 / (1.0 + np.exp((coord - span / 2.0) / (span / 24.0)))
    m = m[:, :, None]
    a = m * px + (1.0 - m) * blurred
    b = (1.0 - m) * px + m * blurred
    cs = scene.colour_space
    return (ImageTensor(np.clip(a, 0, 1).astype(np.float32), colour_space=cs),
            ImageTensor(np.clip(b, 0, 1).astype(np.float32), colour_space=cs))


def make_distinct_pair(size: int = 96, seed: int = 0):
    """Two structurally different scenes of the same size (registered grid)."""
    return make_scene(size, seed=1000 + 2 * seed), make_scene(size, seed=1001 + 2 * seed)


def write_corpus(out_dir, n_pairs: int = 4, size: int = 96, seed: int = 0,
                 blur_sigma: float = 3.0, colour_pairs: int = 0):
    """Write `<pair>_a.png` / `<pair>_b.png` multi-focus pairs.

    Returns the list of pair names.  The first ``colour_pairs`` pairs are
    RGB, the rest grayscale (metrics run on the grayscale ones).
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    names = []
    for i in range(n_pairs):
        colour = i < colour_pairs
        scene = make_scene(size, seed=seed + i, colour=colour)
        axis = "vertical" if i % 2 == 0 else "horizontal"
        a, b = make_multifocus_pair(scene, blur_sigma=blur_sigma, axis=axis)
        name = f"pair{i:02d}"
        save_image(a, os.path.join(out_dir, f"{name}_a.png"))
        save_image(b, os.path.join(out_dir, f"{name}_b.png"))
        names.append(name)
    return names
