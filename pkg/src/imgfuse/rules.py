"""Feature-map combination rules producing the optimisation target.

Both rules are strictly selective: every output element is copied from one
of the two inputs, decided by absolute magnitude.  ``psi0`` decides per
element; ``psi1`` smooths the per-element decision with a 3x3 majority
vote per channel before selecting.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from imgfuse.backbone import FeatureMap
from imgfuse.errors import ContractError


@dataclass
class FusedTarget:
    """Rule-combined feature map; mask is True where input 0 was chosen."""

    values: torch.Tensor
    rule_id: str
    selection_mask: torch.Tensor


RULE_IDS = ("psi0", "psi1")


def _paired_values(f0, f1):
    v0 = f0.values if isinstance(f0, FeatureMap) else torch.as_tensor(f0)
    v1 = f1.values if isinstance(f1, FeatureMap) else torch.as_tensor(f1)
    if v0.shape != v1.shape:
        raise ContractError(f"feature shape mismatch: {tuple(v0.shape)} vs {tuple(v1.shape)}")
    if isinstance(f0, FeatureMap) and isinstance(f1, FeatureMap):
        if f0.source_layer != f1.source_layer:
            raise ContractError(
                f"feature maps from different layers: "
                f"{f0.source_layer.layer_name} vs {f1.source_layer.layer_name}"
            )
    return v0, v1


def psi0_choose_max(f0, f1) -> FusedTarget:
    """Elementwise choose-maximum by absolute magnitude; ties go to input 0."""
    v0, v1 = _paired_values(f0, f1)
    mask = v0.abs() >= v1.abs()
    return FusedTarget(torch.where(mask, v0, v1), "psi0", mask)


def psi1_majority(f0, f1) -> FusedTarget:
    """3x3 channelwise majority vote on |f0| > |f1|, replicate padding.

    A 9-sample boolean vote cannot tie, so the median equals
    (count of True >= 5).  Accepts (C, H, W) feature maps.
    """
    v0, v1 = _paired_values(f0, f1)
    if v0.ndim != 3:
        raise ContractError(f"expected (C, H, W) feature maps, got shape {tuple(v0.shape)}")
    votes = (v0.abs() > v1.abs()).to(v0.dtype).unsqueeze(1)  # (C, 1, H, W)
    padded = F.pad(votes, (1, 1, 1, 1), mode="replicate")
    kernel = torch.ones(1, 1, 3, 3, dtype=v0.dtype)
    counts = F.conv2d(padded, kernel).squeeze(1)  # integer-valued sums, exact in fp
    mask = counts >= 5
    return FusedTarget(torch.where(mask, v0, v1), "psi1", mask)


def get_rule(rule_id: str):
    if rule_id == "psi0":
        return psi0_choose_max
    if rule_id == "psi1":
        return psi1_majority
    raise ContractError(f"unknown fusion rule {rule_id!r}; expected one of {RULE_IDS}")
