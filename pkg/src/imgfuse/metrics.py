"""No-reference fusion quality metrics over single-channel images.

Three scores:

* ``q0_fusion``  - sliding-window universal image quality index of the
  fused image against each input, averaged evenly.
* ``pe_fusion``  - Sobel edge strength/orientation preservation with the
  original sigmoidal transfer constants, weighted by input edge strength.
* ``piella_q``   - windowed UIQI weighted by the inputs' local variance
  (salient windows count more).

All metrics operate on [0, 1] grayscale images.  Colour images are
refused unless luma conversion is explicitly requested, since these
indices are defined for single-channel content.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve

from imgfuse.errors import MetricInputError
from imgfuse.images import ImageTensor

DEFAULT_WINDOW = 8

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)

_LUMA = (0.299, 0.587, 0.114)


@dataclass
class PeConstants:
    """Sigmoid constants of the edge preservation metric (published values)."""

    gamma_g: float = 0.9994
    kappa_g: float = 15.0
    sigma_g: float = 0.5
    gamma_a: float = 0.9879
    kappa_a: float = 22.0
    sigma_a: float = 0.8
    weight_exponent: float = 1.0


@dataclass
class MetricReport:
    q0: float
    pe: float
    q: float
    window_size: int = DEFAULT_WINDOW
    pair_id: str = ""


def _as_plane(image, allow_colour_luma=False) -> np.ndarray:
    if isinstance(image, ImageTensor):
        if image.channels == 3:
            if not allow_colour_luma:
                raise MetricInputError(
                    "metrics are defined for single-channel images; pass "
                    "allow_colour_luma=True (CLI: --luma) to score the luma plane"
                )
            px = image.pixels.astype(np.float64)
            return px[:, :, 0] * _LUMA[0] + px[:, :, 1] * _LUMA[1] + px[:, :, 2] * _LUMA[2]
        return image.plane().astype(np.float64)
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise MetricInputError(f"expected a 2-D plane, got shape {arr.shape}")
    return arr


def _check_triple(i0, i1, fused, allow_colour_luma):
    a = _as_plane(i0, allow_colour_luma)
    b = _as_plane(i1, allow_colour_luma)
    f = _as_plane(fused, allow_colour_luma)
    if a.shape != b.shape or a.shape != f.shape:
        raise MetricInputError(
            f"images must share a size: {a.shape}, {b.shape}, {f.shape}"
        )
    return a, b, f


def uiqi_window(x, y) -> float:
    """Universal image quality index of two equal-size windows.

    4 cov(x,y) mean(x) mean(y) / ((var(x)+var(y)) (mean(x)^2+mean(y)^2)),
    guarded when either denominator factor vanishes: a flat pair falls
    back to the surviving luminance or structure term, and two identical
    flat windows score 1.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size == 0:
        raise MetricInputError(f"windows must match and be nonempty: {x.shape} vs {y.shape}")
    mx, my = x.mean(), y.mean()
    vx = max((x * x).mean() - mx * mx, 0.0)
    vy = max((y * y).mean() - my * my, 0.0)
    vxy = (x * y).mean() - mx * my
    d1 = vx + vy
    d2 = mx * mx + my * my
    if d1 == 0.0 and d2 == 0.0:
        return 1.0 if np.array_equal(x, y) else 0.0
    if d1 == 0.0:
        return 2.0 * mx * my / d2
    if d2 == 0.0:
        return 2.0 * vxy / d1
    return 4.0 * vxy * mx * my / (d1 * d2)


def _box_sums(img: np.ndarray, w: int) -> np.ndarray:
    """Sums over every w x w window at stride 1 (valid positions only)."""
    s = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=s[1:, 1:])
    return s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]


def _window_stats(a: np.ndarray, b: np.ndarray, w: int):
    """Per-window means, variances and covariance of two planes.

    Variances are clamped at zero: cancellation in the moment difference
    can leave a near-flat window at -1e-18, which must not flip the
    degenerate-denominator guards.
    """
    n = float(w * w)
    mu_a = _box_sums(a, w) / n
    mu_b = _box_sums(b, w) / n
    var_a = np.maximum(_box_sums(a * a, w) / n - mu_a * mu_a, 0.0)
    var_b = np.maximum(_box_sums(b * b, w) / n - mu_b * mu_b, 0.0)
    cov = _box_sums(a * b, w) / n - mu_a * mu_b
    return mu_a, mu_b, var_a, var_b, cov


def _uiqi_map(a: np.ndarray, b: np.ndarray, w: int) -> np.ndarray:
    """UIQI of every w x w window of two nonnegative planes."""
    mu_a, mu_b, var_a, var_b, cov = _window_stats(a, b, w)
    d1 = var_a + var_b
    d2 = mu_a * mu_a + mu_b * mu_b
    q = np.ones_like(d1)  # both-flat windows of a nonnegative image are all-zero pairs
    lum_only = (d1 == 0.0) & (d2 != 0.0)
    np.divide(2.0 * mu_a * mu_b, d2, out=q, where=lum_only)
    struct_only = (d2 == 0.0) & (d1 != 0.0)
    np.divide(2.0 * cov, d1, out=q, where=struct_only)
    full = (d1 != 0.0) & (d2 != 0.0)
    np.divide(4.0 * cov * mu_a * mu_b, d1 * d2, out=q, where=full)
    return q


def _require_window(shape, w):
    if w < 2:
        raise MetricInputError("window size must be >= 2")
    if shape[0] < w or shape[1] < w:
        raise MetricInputError(f"image {shape} smaller than the {w}x{w} window")


def q0_fusion(i0, i1, fused, window: int = DEFAULT_WINDOW,
              allow_colour_luma: bool = False) -> float:
    """Even-weighted windowed UIQI of the fused image against both inputs."""
    a, b, f = _check_triple(i0, i1, fused, allow_colour_luma)
    _require_window(a.shape, window)
    qa = _uiqi_map(a, f, window)
    qb = _uiqi_map(b, f, window)
    return float(np.mean(0.5 * (qa + qb)))


def piella_q(i0, i1, fused, window: int = DEFAULT_WINDOW,
             allow_colour_luma: bool = False) -> float:
    """Saliency-weighted windowed UIQI; saliency is local input variance.

    Per window the two UIQI scores are combined with weights
    s0/(s0+s1) and s1/(s0+s1); windows where both saliencies vanish are
    skipped.
    """
    a, b, f = _check_triple(i0, i1, fused, allow_colour_luma)
    _require_window(a.shape, window)
    _, _, s0, s1, _ = _window_stats(a, b, window)
    total = s0 + s1
    keep = total > 0.0
    if not np.any(keep):
        raise MetricInputError("both inputs are flat everywhere; saliency undefined")
    qa = _uiqi_map(a, f, window)
    qb = _uiqi_map(b, f, window)
    lam0 = np.divide(s0, total, out=np.zeros_like(s0), where=keep)
    lam1 = np.divide(s1, total, out=np.zeros_like(s1), where=keep)
    return float(np.mean((lam0 * qa + lam1 * qb)[keep]))


def _sobel(img: np.ndarray):
    gx = convolve(img, _SOBEL_X, mode="reflect")
    gy = convolve(img, _SOBEL_Y, mode="reflect")
    g = np.sqrt(gx * gx + gy * gy)
    alpha = np.arctan(gy / np.where(gx == 0.0, 1e-12, gx))
    return g, alpha


def _sigmoid(x, gamma, kappa, sigma):
    return gamma / (1.0 + np.exp(-kappa * (x - sigma)))


def _edge_preservation(g_in, a_in, g_f, a_f, k: PeConstants):
    """Per-pixel preservation of one input's edges in the fused image."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(
            g_in > g_f,
            np.divide(g_f, g_in, out=np.zeros_like(g_f), where=g_in != 0.0),
            np.divide(g_in, g_f, out=np.zeros_like(g_in), where=g_f != 0.0),
        )
    angle = 1.0 - np.abs(a_in - a_f) * (2.0 / np.pi)
    qg = _sigmoid(ratio, k.gamma_g, k.kappa_g, k.sigma_g)
    qa = _sigmoid(angle, k.gamma_a, k.kappa_a, k.sigma_a)
    return qg * qa


def pe_fusion(i0, i1, fused, constants: PeConstants = None,
              allow_colour_luma: bool = False) -> float:
    """Edge strength and orientation preservation score in [0, 1]."""
    a, b, f = _check_triple(i0, i1, fused, allow_colour_luma)
    k = constants or PeConstants()
    g_a, al_a = _sobel(a)
    g_b, al_b = _sobel(b)
    g_f, al_f = _sobel(f)
    q_af = _edge_preservation(g_a, al_a, g_f, al_f, k)
    q_bf = _edge_preservation(g_b, al_b, g_f, al_f, k)
    w_a = g_a ** k.weight_exponent
    w_b = g_b ** k.weight_exponent
    denom = float(np.sum(w_a + w_b))
    if denom == 0.0:
        return 0.0  # neither input carries edges
    return float(np.sum(q_af * w_a + q_bf * w_b) / denom)


def evaluate_pair(i0, i1, fused, window: int = DEFAULT_WINDOW,
                  constants: PeConstants = None, pair_id: str = "",
                  allow_colour_luma: bool = False) -> MetricReport:
    """All three scores for one fused pair."""
    return MetricReport(
        q0=q0_fusion(i0, i1, fused, window, allow_colour_luma),
        pe=pe_fusion(i0, i1, fused, constants, allow_colour_luma),
        q=piella_q(i0, i1, fused, window, allow_colour_luma),
        window_size=window,
        pair_id=pair_id,
    )
