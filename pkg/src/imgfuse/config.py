"""Flat key-value configuration shared by the CLI and the bench harness.

The file format is a single-level YAML mapping; CLI flags override file
values.  Every run records the effective snapshot so it can be replayed.
"""

from dataclasses import asdict, dataclass, fields
from typing import Optional, Tuple

import yaml

from imgfuse.errors import ContractError
from imgfuse.metrics import DEFAULT_WINDOW, PeConstants
from imgfuse.optimize import OptimizerConfig


@dataclass
class ToolConfig:
    # optimisation
    epochs: int = 100
    iterations_per_epoch: int = 100
    initial_learning_rate: float = 0.05
    lr_decay_per_epoch: float = 0.97
    loss_layers: str = "conv1_1"
    convergence_tol: float = 1e-6
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # relevance maps
    cam_layers: str = "conv3_4,conv4_4,conv5_4"
    degenerate_policy: str = "uniform"
    # metrics
    metric_window: int = DEFAULT_WINDOW
    pe_gamma_g: float = 0.9994
    pe_kappa_g: float = 15.0
    pe_sigma_g: float = 0.5
    pe_gamma_a: float = 0.9879
    pe_kappa_a: float = 22.0
    pe_sigma_a: float = 0.8
    pe_weight_exponent: float = 1.0
    # run control
    weights: str = ""
    seed: int = 0
    workers: int = 1

    def optimizer_config(self) -> OptimizerConfig:
        names = tuple(s.strip() for s in self.loss_layers.split(",") if s.strip())
        return OptimizerConfig(
            epochs=self.epochs,
            iterations_per_epoch=self.iterations_per_epoch,
            initial_learning_rate=self.initial_learning_rate,
            lr_decay_per_epoch=self.lr_decay_per_epoch,
            loss_layers=names,
            convergence_tol=self.convergence_tol,
            adam_betas=(self.adam_beta1, self.adam_beta2),
            adam_eps=self.adam_eps,
        )

    def cam_layer_names(self) -> Tuple[str, ...]:
        return tuple(s.strip() for s in self.cam_layers.split(",") if s.strip())

    def pe_constants(self) -> PeConstants:
        return PeConstants(
            gamma_g=self.pe_gamma_g, kappa_g=self.pe_kappa_g, sigma_g=self.pe_sigma_g,
            gamma_a=self.pe_gamma_a, kappa_a=self.pe_kappa_a, sigma_a=self.pe_sigma_a,
            weight_exponent=self.pe_weight_exponent,
        )

    def snapshot(self) -> dict:
        return asdict(self)


def load_config(path: Optional[str] = None, **overrides) -> ToolConfig:
    """Config from an optional YAML file plus keyword overrides.

    Overrides with value None are ignored, so optional CLI flags can be
    passed through unconditionally.
    """
    values = {}
    if path:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ContractError(f"config file {path} must hold a flat key-value mapping")
        values.update(data)
    for key, val in overrides.items():
        if val is not None:
            values[key] = val

    known = {f.name for f in fields(ToolConfig)}
    unknown = set(values) - known
    if unknown:
        raise ContractError(f"unknown config keys: {sorted(unknown)}")
    return ToolConfig(**values)


def save_config(config: ToolConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config.snapshot(), f, sort_keys=True)
