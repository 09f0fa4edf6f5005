"""Frozen VGG19 backbone: layer taps, classification, and input gradients.

The backbone is loaded once from an explicit checkpoint file and never
trained.  Feature maps are tapped after each convolution's ReLU at native
input resolution; classification resizes a copy of the image to the
classifier's 224x224 receptive field.
"""

import hashlib
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Mapping, Tuple

import numpy as np
import torch
from torch import nn
from torchvision.models import vgg19, VGG19_Weights

from imgfuse.errors import BackboneLoadError, ContractError, TapError
from imgfuse.images import ImageTensor

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
CLASSIFIER_INPUT_SIZE = 224

# conv name -> (index of the Conv2d in vgg19().features, channels, downscale vs input)
_CONV_LAYERS = {
    "conv1_1": (0, 64, 1),
    "conv1_2": (2, 64, 1),
    "conv2_1": (5, 128, 2),
    "conv2_2": (7, 128, 2),
    "conv3_1": (10, 256, 4),
    "conv3_2": (12, 256, 4),
    "conv3_3": (14, 256, 4),
    "conv3_4": (16, 256, 4),
    "conv4_1": (19, 512, 8),
    "conv4_2": (21, 512, 8),
    "conv4_3": (23, 512, 8),
    "conv4_4": (25, 512, 8),
    "conv5_1": (28, 512, 16),
    "conv5_2": (30, 512, 16),
    "conv5_3": (32, 512, 16),
    "conv5_4": (34, 512, 16),
}

NUM_CLASSES = 1000


@dataclass(frozen=True)
class LayerTap:
    """A named convolutional output of VGG19."""

    layer_name: str
    resolution_divisor: int

    def __post_init__(self):
        if self.layer_name not in _CONV_LAYERS:
            raise TapError(f"unknown layer {self.layer_name!r}; valid: conv1_1 .. conv5_4")
        expected = _CONV_LAYERS[self.layer_name][2]
        if self.resolution_divisor != expected:
            raise TapError(
                f"{self.layer_name} has resolution divisor {expected}, "
                f"not {self.resolution_divisor}"
            )

    @property
    def channels(self):
        return _CONV_LAYERS[self.layer_name][1]


def tap(name: str) -> LayerTap:
    """LayerTap for a conv layer name, e.g. ``tap("conv1_1")``."""
    if name not in _CONV_LAYERS:
        raise TapError(f"unknown layer {name!r}; valid: conv1_1 .. conv5_4")
    return LayerTap(name, _CONV_LAYERS[name][2])


ALL_TAPS = tuple(tap(name) for name in _CONV_LAYERS)
DEFAULT_LOSS_LAYERS = (tap("conv1_1"),)
COARSE_LAYER_SET = (tap("conv3_4"), tap("conv4_4"), tap("conv5_4"))


@dataclass
class FeatureMap:
    """Post-ReLU activation tensor (C, H, W) from a named layer."""

    values: torch.Tensor
    source_layer: LayerTap
    source_image_id: str = ""

    @property
    def shape(self):
        return tuple(self.values.shape)


@dataclass
class ClassPrediction:
    class_id: int
    class_label: str
    probability: float


class BackboneHandle:
    """Immutable, frozen VGG19 with tap access.  Safe for concurrent reads."""

    def __init__(self, features, avgpool, classifier, labels, checkpoint_id, dtype):
        self.features = features
        self.avgpool = avgpool
        self.classifier = classifier
        self.labels = labels
        self.checkpoint_id = checkpoint_id
        self.dtype = dtype

    def label_of(self, class_id: int) -> str:
        if not 0 <= class_id < NUM_CLASSES:
            raise ContractError(f"class id {class_id} outside [0, {NUM_CLASSES})")
        return self.labels[class_id]


def _coerce_taps(taps) -> Tuple[LayerTap, ...]:
    out = []
    for t in taps:
        out.append(t if isinstance(t, LayerTap) else tap(t))
    if not out:
        raise ContractError("at least one layer tap required")
    return tuple(out)


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def load_backbone(weights_path, dtype: str = "float32") -> BackboneHandle:
    """Load a VGG19 checkpoint (torchvision state-dict layout) read-only.

    Any checkpoint matching the VGG19 architecture with the 1000-way
    ImageNet classifier head is accepted; the file digest is recorded so
    downstream reports can identify which weights produced them.
    """
    torch_dtype = {"float32": torch.float32, "float64": torch.float64}.get(dtype)
    if torch_dtype is None:
        raise ContractError(f"unsupported dtype {dtype!r}")

    model = vgg19(weights=None)
    reference = model.state_dict()

    try:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise BackboneLoadError(f"weights file not found: {weights_path}") from None
    except Exception as exc:
        raise BackboneLoadError(f"cannot read weights file {weights_path}: {exc}") from exc

    if not isinstance(state, Mapping):
        raise BackboneLoadError(f"weights file {weights_path} does not hold a state dict")
    for key in reference:
        if key not in state:
            raise BackboneLoadError(f"checkpoint missing tensor {key!r}")
        if tuple(state[key].shape) != tuple(reference[key].shape):
            raise BackboneLoadError(
                f"architecture mismatch at tensor {key!r}: checkpoint "
                f"{tuple(state[key].shape)} vs VGG19 {tuple(reference[key].shape)}"
            )
    model.load_state_dict(state)

    # ceil-mode pooling keeps tapped maps at ceil(H / divisor) for odd sizes;
    # identical to the stock network on even-sized inputs such as 224x224
    for layer in model.features:
        if isinstance(layer, nn.MaxPool2d):
            layer.ceil_mode = True

    model = model.to(torch_dtype)
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)

    labels = list(VGG19_Weights.IMAGENET1K_V1.meta["categories"])
    return BackboneHandle(
        features=model.features,
        avgpool=model.avgpool,
        classifier=model.classifier,
        labels=labels,
        checkpoint_id=_file_digest(weights_path),
        dtype=torch_dtype,
    )


def save_initialised_checkpoint(path, seed: int = 0) -> None:
    """Write a deterministic randomly initialised VGG19 checkpoint.

    Stand-in for environments without an ImageNet-pretrained file: the
    architecture and every interface behave identically, only the learned
    semantics differ.
    """
    torch.manual_seed(seed)
    model = vgg19(weights=None)
    torch.save(model.state_dict(), path)


def preprocess(image, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """ImageTensor -> normalised network input of shape (1, 3, H, W).

    Grayscale planes are replicated to three channels, then each channel
    is shifted/scaled by the fixed ImageNet statistics.  Spatial size is
    preserved; the convolutional taps run at native resolution.
    """
    if not isinstance(image, ImageTensor):
        image = ImageTensor(image)
    px = image.pixels
    if px.shape[2] == 1:
        px = np.repeat(px, 3, axis=2)
    x = torch.from_numpy(np.ascontiguousarray(px.transpose(2, 0, 1))).to(dtype)
    mean = torch.tensor(IMAGENET_MEAN, dtype=dtype).view(3, 1, 1)
    std = torch.tensor(IMAGENET_STD, dtype=dtype).view(3, 1, 1)
    return ((x - mean) / std).unsqueeze(0)


def deprocess(net_input: torch.Tensor) -> np.ndarray:
    """Inverse of :func:`preprocess` without clamping: (1,3,H,W) -> (H,W,3)."""
    if net_input.ndim != 4 or net_input.shape[0] != 1 or net_input.shape[1] != 3:
        raise ContractError(f"expected (1, 3, H, W) network input, got {tuple(net_input.shape)}")
    x = net_input.detach()[0]
    mean = torch.tensor(IMAGENET_MEAN, dtype=x.dtype).view(3, 1, 1)
    std = torch.tensor(IMAGENET_STD, dtype=x.dtype).view(3, 1, 1)
    return (x * std + mean).permute(1, 2, 0).cpu().numpy()


def _run_taps(handle: BackboneHandle, x: torch.Tensor, taps: Tuple[LayerTap, ...]):
    """Single forward pass collecting post-ReLU outputs at the given taps."""
    want = {_CONV_LAYERS[t.layer_name][0] + 1: t for t in taps}  # index of the ReLU
    last = max(want)
    out = {}
    for idx, layer in enumerate(handle.features):
        x = layer(x)
        if idx in want:
            out[want[idx]] = x
        if idx == last:
            break
    return out


def forward_taps(handle: BackboneHandle, net_input: torch.Tensor, taps,
                 image_id: str = "") -> Dict[LayerTap, FeatureMap]:
    """Post-activation feature maps at the requested layers.

    Deterministic for fixed weights and input; returned tensors are
    detached copies shaped (C, H_l, W_l).
    """
    taps = _coerce_taps(taps)
    if net_input.ndim != 4 or net_input.shape[0] != 1:
        raise ContractError(f"expected (1, C, H, W) network input, got {tuple(net_input.shape)}")
    with torch.no_grad():
        acts = _run_taps(handle, net_input.to(handle.dtype), taps)
    return {
        t: FeatureMap(acts[t][0].detach().clone(), source_layer=t, source_image_id=image_id)
        for t in taps
    }


def classify(handle: BackboneHandle, image) -> ClassPrediction:
    """Top-1 ImageNet prediction with its softmax probability.

    A copy of the image is resized (bilinear) to 224x224 for the
    classifier head; the original resolution is untouched.
    """
    x = preprocess(image, dtype=handle.dtype)
    probs = class_probabilities(handle, x)
    class_id = int(torch.argmax(probs).item())
    return ClassPrediction(
        class_id=class_id,
        class_label=handle.labels[class_id],
        probability=float(probs[class_id].item()),
    )


def class_probabilities(handle: BackboneHandle, net_input: torch.Tensor) -> torch.Tensor:
    """Softmax over the 1000 classes for a preprocessed input."""
    with torch.no_grad():
        x = net_input.to(handle.dtype)
        if x.shape[-2:] != (CLASSIFIER_INPUT_SIZE, CLASSIFIER_INPUT_SIZE):
            x = torch.nn.functional.interpolate(
                x, size=(CLASSIFIER_INPUT_SIZE, CLASSIFIER_INPUT_SIZE),
                mode="bilinear", align_corners=False,
            )
        logits = _classifier_logits(handle, x)
        return torch.softmax(logits[0], dim=0)


def _classifier_logits(handle: BackboneHandle, x: torch.Tensor) -> torch.Tensor:
    x = handle.features(x)
    x = handle.avgpool(x)
    x = torch.flatten(x, 1)
    return handle.classifier(x)


def input_gradient(handle: BackboneHandle, net_input: torch.Tensor,
                   objective: Callable[[Dict[LayerTap, torch.Tensor]], torch.Tensor],
                   taps) -> torch.Tensor:
    """Gradient of a scalar functional of tapped feature maps w.r.t. the input.

    ``objective`` receives a dict LayerTap -> activation tensor (1, C, H, W)
    and must return a scalar; the result is backpropagated through the
    frozen weights down to the (preprocessed) input.
    """
    taps = _coerce_taps(taps)
    x = net_input.detach().to(handle.dtype).clone().requires_grad_(True)
    acts = _run_taps(handle, x, taps)
    value = objective(dict(acts))
    if isinstance(value, (int, float)):
        value = torch.as_tensor(float(value), dtype=handle.dtype)
    if not torch.is_tensor(value) or value.numel() != 1:
        raise ContractError("objective must return a scalar")
    if not value.requires_grad:
        # constant functional: gradient is identically zero
        return torch.zeros_like(x)
    (grad,) = torch.autograd.grad(value.reshape(()), x)
    return grad.detach()


def class_score_taps(handle: BackboneHandle, net_input: torch.Tensor, class_id: int,
                     taps) -> Tuple[float, Dict[LayerTap, Tuple[torch.Tensor, torch.Tensor]]]:
    """Class score plus (activation, gradient) pairs at the given taps.

    The score is the pre-softmax logit of ``class_id`` computed at the
    input's native resolution (the adaptive pooling stage absorbs the
    spatial size).  Gradients are of the score w.r.t. each tapped
    activation, as used for class-relevance mapping.
    """
    if not 0 <= class_id < NUM_CLASSES:
        raise ContractError(f"class id {class_id} outside [0, {NUM_CLASSES})")
    taps = _coerce_taps(taps)
    want = {_CONV_LAYERS[t.layer_name][0] + 1: t for t in taps}

    # grad-enabled forward from the input so tapped activations sit in the graph
    x = net_input.detach().to(handle.dtype).clone().requires_grad_(True)
    acts = {}
    for idx, layer in enumerate(handle.features):
        x = layer(x)
        if idx in want:
            acts[want[idx]] = x
    x = handle.avgpool(x)
    x = torch.flatten(x, 1)
    logits = handle.classifier(x)
    score = logits[0, class_id]
    grads = torch.autograd.grad(score, list(acts.values()))
    out = {
        t: (a[0].detach().clone(), g[0].detach().clone())
        for (t, a), g in zip(acts.items(), grads)
    }
    return float(score.item()), out
