"""Method dispatch: the four named fusion methods and their reports.

fm0  feature optimisation, choose-maximum rule
fm1  feature optimisation, 3x3 majority rule
fm2  feature optimisation, choose-maximum over relevance-weighted features
fm3  direct relevance-probability mixing (no optimisation)
"""

import time
from dataclasses import dataclass, field
from typing import Optional

from imgfuse.backbone import BackboneHandle, ClassPrediction, classify
from imgfuse.cam import cam_fuse, cam_weight_features, class_relevance, mixing_map
from imgfuse.errors import ContractError
from imgfuse.images import ImageTensor
from imgfuse.metrics import MetricReport, evaluate_pair
from imgfuse.optimize import OptimizationTrace, OptimizerConfig, optimise_image
from imgfuse.rules import psi0_choose_max, psi1_majority


@dataclass(frozen=True)
class MethodSpec:
    method_id: str
    rule: Optional[str]
    uses_cam: bool
    uses_optimiser: bool


METHODS = {
    "fm0": MethodSpec("fm0", rule="psi0", uses_cam=False, uses_optimiser=True),
    "fm1": MethodSpec("fm1", rule="psi1", uses_cam=False, uses_optimiser=True),
    "fm2": MethodSpec("fm2", rule="psi0", uses_cam=True, uses_optimiser=True),
    "fm3": MethodSpec("fm3", rule=None, uses_cam=True, uses_optimiser=False),
}


def method_spec(method_id: str) -> MethodSpec:
    try:
        return METHODS[method_id.lower()]
    except KeyError:
        raise ContractError(
            f"unknown method {method_id!r}; expected one of {sorted(METHODS)}"
        ) from None


@dataclass
class FusionReport:
    pair_id: str
    method_id: str
    metrics: Optional[MetricReport] = None
    class_input0: Optional[ClassPrediction] = None
    class_input1: Optional[ClassPrediction] = None
    class_fused: Optional[ClassPrediction] = None
    weights_checkpoint: str = ""
    config_snapshot: dict = field(default_factory=dict)
    wall_time_seconds: float = 0.0
    trace: Optional[OptimizationTrace] = None
    fused_path: str = ""
    notes: str = ""

    def to_dict(self) -> dict:
        def pred(p):
            return None if p is None else {
                "class_id": p.class_id, "label": p.class_label, "probability": p.probability,
            }

        return {
            "pair_id": self.pair_id,
            "method_id": self.method_id,
            "metrics": None if self.metrics is None else {
                "q0": self.metrics.q0, "pe": self.metrics.pe, "q": self.metrics.q,
                "window_size": self.metrics.window_size,
            },
            "class_input0": pred(self.class_input0),
            "class_input1": pred(self.class_input1),
            "class_fused": pred(self.class_fused),
            "weights_checkpoint": self.weights_checkpoint,
            "config_snapshot": self.config_snapshot,
            "wall_time_seconds": self.wall_time_seconds,
            "optimisation": None if self.trace is None else {
                "steps": self.trace.steps,
                "initial_loss": self.trace.initial_loss,
                "final_loss": self.trace.final_loss,
                "stopped_early": self.trace.stopped_early,
            },
            "fused_path": self.fused_path,
            "notes": self.notes,
        }


def run_method(handle: BackboneHandle, spec, i0: ImageTensor, i1: ImageTensor,
               optimizer_config: OptimizerConfig = None,
               class0: Optional[int] = None, class1: Optional[int] = None,
               pair_id: str = "", compute_metrics: bool = True,
               config_snapshot: dict = None):
    """Fuse one co-registered pair with the given method.

    Returns (fused ImageTensor, FusionReport).  ``class0``/``class1``
    override the per-image top-1 class used for relevance maps.
    """
    if isinstance(spec, str):
        spec = method_spec(spec)
    if i0.pixels.shape != i1.pixels.shape or i0.colour_space != i1.colour_space:
        raise ContractError(
            f"input pair mismatch: {i0.pixels.shape}/{i0.colour_space} vs "
            f"{i1.pixels.shape}/{i1.colour_space}"
        )
    t_start = time.perf_counter()
    optimizer_config = optimizer_config or OptimizerConfig()

    report = FusionReport(pair_id=pair_id, method_id=spec.method_id,
                          weights_checkpoint=handle.checkpoint_id,
                          config_snapshot=dict(config_snapshot or {}))

    p0 = p1 = None
    if spec.uses_cam:
        report.class_input0 = classify(handle, i0)
        report.class_input1 = classify(handle, i1)
        c0 = report.class_input0.class_id if class0 is None else class0
        c1 = report.class_input1.class_id if class1 is None else class1
        p0 = class_relevance(handle, i0, c0)
        p1 = class_relevance(handle, i1, c1)
        if p0.degenerate or p1.degenerate:
            flagged = [n for n, p in (("input0", p0), ("input1", p1)) if p.degenerate]
            report.notes = f"degenerate relevance map for {', '.join(flagged)}"

    if spec.uses_optimiser:
        if spec.method_id == "fm2":
            def rule(f0, f1):
                return psi0_choose_max(cam_weight_features(f0, p0),
                                       cam_weight_features(f1, p1))
        else:
            rule = {"psi0": psi0_choose_max, "psi1": psi1_majority}[spec.rule]
        fused, trace = optimise_image(handle, i0, i1, rule, optimizer_config)
        report.trace = trace
    else:
        fused = cam_fuse(i0, i1, mixing_map(p0, p1))

    if report.class_input0 is None:
        report.class_input0 = classify(handle, i0)
        report.class_input1 = classify(handle, i1)
    report.class_fused = classify(handle, fused)

    if compute_metrics and i0.is_grayscale:
        report.metrics = evaluate_pair(i0, i1, fused, pair_id=pair_id)

    report.wall_time_seconds = time.perf_counter() - t_start
    return fused, report
