"""Fused-image recovery by gradient descent on the network input.

The target feature maps are combined once, up front, from the two input
images; the candidate image then descends the squared feature distance to
those targets with Adam, starting from the pixelwise mean of the inputs.
The optimisation variable lives in the unclamped, normalised input domain;
clamping to [0, 1] happens only on the returned image.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import torch

from imgfuse.backbone import (
    BackboneHandle, FeatureMap, LayerTap, _run_taps, deprocess, forward_taps, preprocess, tap,
)
from imgfuse.errors import ContractError, DivergenceError
from imgfuse.images import ImageTensor, mean_image
from imgfuse.rules import FusedTarget, get_rule


@dataclass
class OptimizerConfig:
    epochs: int = 100
    iterations_per_epoch: int = 100
    initial_learning_rate: float = 0.05
    lr_decay_per_epoch: float = 0.97
    loss_layers: Tuple[str, ...] = ("conv1_1",)
    convergence_tol: float = 1e-6  # relative; 0 disables early stopping
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if self.iterations_per_epoch < 0:
            raise ContractError("iterations_per_epoch must be >= 0")
        if self.initial_learning_rate <= 0:
            raise ContractError("initial_learning_rate must be positive")
        if not 0.0 < self.lr_decay_per_epoch <= 1.0:
            raise ContractError("lr_decay_per_epoch must lie in (0, 1]")
        if self.convergence_tol < 0:
            raise ContractError("convergence_tol must be nonnegative")
        if not self.loss_layers:
            raise ContractError("at least one loss layer required")

    def taps(self) -> Tuple[LayerTap, ...]:
        return tuple(tap(name) for name in self.loss_layers)


@dataclass
class OptimizationTrace:
    epoch_losses: List[float] = field(default_factory=list)
    epoch_learning_rates: List[float] = field(default_factory=list)
    initial_loss: float = 0.0
    final_loss: float = 0.0
    steps: int = 0
    wall_time_seconds: float = 0.0
    stopped_early: bool = False


def _loss_against_targets(acts, targets) -> torch.Tensor:
    """Sum over layers of the squared l2 distance to the fused targets."""
    total = None
    for t, target in targets.items():
        diff = target.values - acts[t][0]
        term = (diff * diff).sum()
        total = term if total is None else total + term
    return total


def fusion_loss(handle: BackboneHandle, candidate, targets: Dict[LayerTap, FusedTarget]) -> float:
    """Squared feature distance of a candidate image to the fused targets."""
    if not targets:
        raise ContractError("no fused targets given")
    x = candidate if torch.is_tensor(candidate) else preprocess(candidate, dtype=handle.dtype)
    with torch.no_grad():
        acts = _run_taps(handle, x, tuple(targets))
        for t, target in targets.items():
            if tuple(target.values.shape) != tuple(acts[t][0].shape):
                raise ContractError(
                    f"target shape {tuple(target.values.shape)} does not match tap "
                    f"{t.layer_name} output {tuple(acts[t][0].shape)}"
                )
        return float(_loss_against_targets(acts, targets).item())


def build_targets(handle: BackboneHandle, i0: ImageTensor, i1: ImageTensor, rule,
                  taps) -> Dict[LayerTap, FusedTarget]:
    """Fuse the two images' tapped feature maps with the given rule.

    ``rule`` is "psi0", "psi1", or a callable (FeatureMap, FeatureMap) ->
    FusedTarget.  Called once per run, before the descent loops.
    """
    rule_fn = get_rule(rule) if isinstance(rule, str) else rule
    f0 = forward_taps(handle, preprocess(i0, dtype=handle.dtype), taps, image_id="input0")
    f1 = forward_taps(handle, preprocess(i1, dtype=handle.dtype), taps, image_id="input1")
    return {t: rule_fn(f0[t], f1[t]) for t in f0}


def optimise_image(handle: BackboneHandle, i0: ImageTensor, i1: ImageTensor, rule,
                   config: OptimizerConfig = None):
    """Recover the fused image for an input pair.

    Returns (fused ImageTensor, OptimizationTrace).  The candidate starts
    at mean(i0, i1) and runs ``epochs`` x ``iterations_per_epoch`` Adam
    steps with the learning rate decayed geometrically per epoch.
    """
    config = config or OptimizerConfig()
    if i0.pixels.shape != i1.pixels.shape or i0.colour_space != i1.colour_space:
        raise ContractError(
            f"input pair mismatch: {i0.pixels.shape}/{i0.colour_space} vs "
            f"{i1.pixels.shape}/{i1.colour_space}"
        )
    t_start = time.perf_counter()
    taps = config.taps()
    targets = build_targets(handle, i0, i1, rule, taps)

    var = preprocess(mean_image(i0, i1), dtype=handle.dtype).clone().requires_grad_(True)
    optimizer = torch.optim.Adam(
        [var], lr=config.initial_learning_rate, betas=config.adam_betas, eps=config.adam_eps,
    )

    trace = OptimizationTrace()
    trace.initial_loss = fusion_loss(handle, var.detach(), targets)

    prev_epoch_loss = None
    for epoch in range(config.epochs):
        lr = config.initial_learning_rate * config.lr_decay_per_epoch ** epoch
        for group in optimizer.param_groups:
            group["lr"] = lr

        epoch_sum = 0.0
        for _ in range(config.iterations_per_epoch):
            optimizer.zero_grad(set_to_none=True)
            acts = _run_taps(handle, var, taps)
            loss = _loss_against_targets(acts, targets)
            loss_val = float(loss.item())
            if not np.isfinite(loss_val):
                raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            loss.backward()
            optimizer.step()
            epoch_sum += loss_val
            trace.steps += 1

        if config.iterations_per_epoch == 0:
            break
        epoch_mean = epoch_sum / config.iterations_per_epoch
        trace.epoch_losses.append(epoch_mean)
        trace.epoch_learning_rates.append(lr)

        if config.convergence_tol > 0 and prev_epoch_loss is not None:
            rel_gain = (prev_epoch_loss - epoch_mean) / max(prev_epoch_loss, 1e-30)
            if rel_gain < config.convergence_tol:
                trace.stopped_early = True
                break
        prev_epoch_loss = epoch_mean

    trace.final_loss = fusion_loss(handle, var.detach(), targets)
    trace.wall_time_seconds = time.perf_counter() - t_start

    fused = np.clip(deprocess(var.detach()), 0.0, 1.0).astype(np.float32)
    if i0.is_grayscale:
        fused = fused.mean(axis=2, keepdims=True)
    return ImageTensor(fused, colour_space=i0.colour_space), trace


def write_trace_csv(trace: OptimizationTrace, path) -> None:
    """Per-epoch loss and learning rate as CSV (epoch, loss, lr)."""
    with open(path, "w") as f:
        f.write("epoch,loss,lr\n")
        for epoch, (loss, lr) in enumerate(
            zip(trace.epoch_losses, trace.epoch_learning_rates)
        ):
            f.write(f"{epoch},{loss!r},{lr!r}\n")
