"""Class-relevance maps and probability-weighted image mixing.

A relevance map for one layer is the ReLU of the gradient-weighted channel
sum of that layer's activation, upsampled bilinearly to input resolution.
Maps from the three coarsest layers are multiplied and min-max normalised
into a per-pixel class probability; two such probabilities are turned into
an exclusive mixing weight and blended pixelwise.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from imgfuse.backbone import (
    BackboneHandle, COARSE_LAYER_SET, FeatureMap, LayerTap, class_score_taps, preprocess, tap,
)
from imgfuse.errors import ContractError, DegenerateMapError
from imgfuse.images import ImageTensor


@dataclass
class CamMap:
    """Per-pixel class relevance in [0, 1] at input resolution."""

    values: np.ndarray
    class_id: int
    source_layers: Tuple[str, ...] = ()
    degenerate: bool = False


@dataclass
class MixingMap:
    """Convex weight of input 0 per pixel; weight of input 1 is 1 - p_m0."""

    p_m0: np.ndarray

    @property
    def p_m1(self) -> np.ndarray:
        return 1.0 - self.p_m0


def norm_map(z: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]."""
    z = np.asarray(z, dtype=np.float64)
    lo, hi = z.min(), z.max()
    if hi == lo:
        raise DegenerateMapError(f"constant map (value {lo:.6g}) cannot be normalised")
    return (z - lo) / (hi - lo)


def cam_from_activation_and_gradient(activation: torch.Tensor,
                                     gradient: torch.Tensor) -> torch.Tensor:
    """Rectified gradient-weighted channel sum, at layer resolution.

    Channel weights are the spatial average of the gradient; the map is
    ReLU(sum_c weight_c * activation_c) of shape (H_l, W_l).
    """
    if activation.shape != gradient.shape or activation.ndim != 3:
        raise ContractError(
            f"activation/gradient must share a (C, H, W) shape, got "
            f"{tuple(activation.shape)} and {tuple(gradient.shape)}"
        )
    weights = gradient.mean(dim=(1, 2))
    return torch.relu((weights[:, None, None] * activation).sum(dim=0))


def _upsample_bilinear(m: torch.Tensor, size) -> torch.Tensor:
    return F.interpolate(m[None, None], size=size, mode="bilinear", align_corners=False)[0, 0]


def grad_cam(handle: BackboneHandle, image: ImageTensor, class_id: int, layer) -> np.ndarray:
    """Raw (unnormalised) class-relevance map for one layer.

    The class score is taken at native input resolution; the rectified map
    is bilinearly upsampled back to the image's H x W.  Values are >= 0.
    """
    layer = layer if isinstance(layer, LayerTap) else tap(layer)
    net_input = preprocess(image, dtype=handle.dtype)
    _, acts = class_score_taps(handle, net_input, class_id, (layer,))
    activation, gradient = acts[layer]
    raw = cam_from_activation_and_gradient(activation, gradient)
    up = _upsample_bilinear(raw, (image.height, image.width))
    return up.cpu().numpy().astype(np.float64)


def combine_cams(maps: Sequence[np.ndarray], class_id: int = -1,
                 source_layers: Tuple[str, ...] = (),
                 degenerate_policy: str = "uniform") -> CamMap:
    """Multiply per-layer maps and min-max normalise the product to [0, 1].

    Each factor is min-max normalised first so no layer's scale dominates
    the product; a constant factor carries no information and is dropped.
    A constant product is degenerate: policy "uniform" returns a flagged
    0.5 map (an uninformative class should mix evenly), "error" raises.
    """
    if not maps:
        raise ContractError("no maps to combine")
    if degenerate_policy not in ("uniform", "error"):
        raise ContractError(f"unknown degenerate policy {degenerate_policy!r}")
    shape = np.asarray(maps[0]).shape
    product = np.ones(shape, dtype=np.float64)
    for m in maps:
        m = np.asarray(m, dtype=np.float64)
        if m.shape != shape:
            raise ContractError(f"map shape mismatch: {m.shape} vs {shape}")
        if m.max() == m.min():
            continue
        product = product * norm_map(m)

    if product.max() == product.min():
        if degenerate_policy == "error":
            raise DegenerateMapError("combined relevance map is constant")
        return CamMap(np.full(shape, 0.5), class_id, tuple(source_layers), degenerate=True)
    return CamMap(norm_map(product), class_id, tuple(source_layers), degenerate=False)


def class_relevance(handle: BackboneHandle, image: ImageTensor, class_id: int,
                    layers=COARSE_LAYER_SET, degenerate_policy: str = "uniform") -> CamMap:
    """Combined multi-layer relevance probability for one image and class."""
    maps = [grad_cam(handle, image, class_id, layer) for layer in layers]
    names = tuple(l.layer_name if isinstance(l, LayerTap) else str(l) for l in layers)
    return combine_cams(maps, class_id=class_id, source_layers=names,
                        degenerate_policy=degenerate_policy)


def mixing_map(p0: CamMap, p1: CamMap) -> MixingMap:
    """Exclusive combination of two class probabilities.

    p_m0 = 0.5 (1 + p0 - p1): equal relevance mixes evenly (0.5), input 1
    dominant drives it to 0, input 0 dominant drives it to 1.
    """
    a = np.asarray(p0.values, dtype=np.float64)
    b = np.asarray(p1.values, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"relevance map size mismatch: {a.shape} vs {b.shape}")
    # halvings are exact, so swapping arguments negates the offset bit-exactly
    return MixingMap(0.5 + (0.5 * a - 0.5 * b))


def cam_fuse(i0: ImageTensor, i1: ImageTensor, mix: MixingMap) -> ImageTensor:
    """Pixelwise convex combination of the pair under the mixing weights."""
    if i0.pixels.shape != i1.pixels.shape:
        raise ContractError(f"image size mismatch: {i0.pixels.shape} vs {i1.pixels.shape}")
    p = np.asarray(mix.p_m0, dtype=np.float64)
    if p.shape != i0.pixels.shape[:2]:
        raise ContractError(
            f"mixing map {p.shape} does not match image {i0.pixels.shape[:2]}"
        )
    if p.min() < 0.0 or p.max() > 1.0:
        raise ContractError("mixing weights outside [0, 1]")
    p = p[:, :, None]
    fused = p * i0.pixels.astype(np.float64) + (1.0 - p) * i1.pixels.astype(np.float64)
    return ImageTensor(fused.astype(np.float32), colour_space=i0.colour_space)


def cam_weight_features(f: FeatureMap, p: CamMap) -> FeatureMap:
    """Scale every channel of a feature map by the area-averaged relevance."""
    values = f.values
    ph = torch.from_numpy(np.asarray(p.values, dtype=np.float64)).to(values.dtype)
    if ph.ndim != 2:
        raise ContractError(f"relevance map must be 2-D, got shape {tuple(ph.shape)}")
    target = values.shape[1:]
    if tuple(ph.shape) != tuple(target):
        ph = F.adaptive_avg_pool2d(ph[None, None], target)[0, 0]
    return FeatureMap(values * ph[None, :, :], source_layer=f.source_layer,
                      source_image_id=f.source_image_id)


def render_overlay(image: ImageTensor, cam: CamMap, alpha: float = 0.5) -> ImageTensor:
    """Blend an image with a colour-mapped relevance map for inspection."""
    if not 0.0 <= alpha <= 1.0:
        raise ContractError("alpha must lie in [0, 1]")
    heat = _heat_colours(np.asarray(cam.values, dtype=np.float64))
    base = image.pixels.astype(np.float64)
    if base.shape[2] == 1:
        base = np.repeat(base, 3, axis=2)
    blended = (1.0 - alpha) * base + alpha * heat
    return ImageTensor(np.clip(blended, 0.0, 1.0).astype(np.float32))


def _heat_colours(v: np.ndarray) -> np.ndarray:
    """Blue -> cyan -> yellow -> red ramp over [0, 1], shape (H, W, 3)."""
    v = np.clip(v, 0.0, 1.0)
    r = np.clip(2.0 * v - 0.5, 0.0, 1.0)
    g = np.clip(2.0 - np.abs(4.0 * v - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - 2.0 * v, 0.0, 1.0)
    return np.stack([r, g, b], axis=2)
