"""Image fusion via CNN feature-map optimisation and class-activation mixing.

The package fuses two co-registered images by combining the activation maps
of a frozen VGG19 at chosen layers (choose-maximum or local-majority rules)
and recovering the fused image through gradient descent on the network
input, or by mixing the images directly with class-activation probability
maps.  Objective fusion quality is scored with windowed UIQI, edge
preservation and saliency-weighted UIQI metrics.
"""

from imgfuse.images import ImageTensor, load_image, save_image
from imgfuse.backbone import BackboneHandle, LayerTap, ClassPrediction, load_backbone
from imgfuse.rules import FusedTarget, psi0_choose_max, psi1_majority
from imgfuse.optimize import OptimizerConfig, OptimizationTrace, fusion_loss, optimise_image
from imgfuse.cam import CamMap, MixingMap, grad_cam, combine_cams, mixing_map, cam_fuse, cam_weight_features
from imgfuse.metrics import MetricReport, uiqi_window, q0_fusion, pe_fusion, piella_q
from imgfuse.pipeline import MethodSpec, FusionReport, run_method

__version__ = "0.1.0"

__all__ = [
    "ImageTensor",
    "load_image",
    "save_image",
    "BackboneHandle",
    "LayerTap",
    "ClassPrediction",
    "load_backbone",
    "FusedTarget",
    "psi0_choose_max",
    "psi1_majority",
    "OptimizerConfig",
    "OptimizationTrace",
    "fusion_loss",
    "optimise_image",
    "CamMap",
    "MixingMap",
    "grad_cam",
    "combine_cams",
    "mixing_map",
    "cam_fuse",
    "cam_weight_features",
    "MetricReport",
    "uiqi_window",
    "q0_fusion",
    "pe_fusion",
    "piella_q",
    "MethodSpec",
    "FusionReport",
    "run_method",
]
