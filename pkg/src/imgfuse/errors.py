"""Exception types shared across the fusion toolkit.

Every error carries a ``stage`` tag naming the pipeline component that
raised it, so CLI failures can report where they came from.
"""


class FusionToolError(Exception):
    """Base class for all toolkit errors."""

    stage = "imgfuse"

    def __str__(self):
        return f"[{self.stage}] {super().__str__()}"


class ImageError(FusionToolError):
    """Invalid image content (range, size, channels) or unreadable file."""

    stage = "images"


class BackboneLoadError(FusionToolError):
    """Weights file missing, unreadable, or not a VGG19 checkpoint."""

    stage = "backbone"


class TapError(FusionToolError):
    """Requested layer name is not a VGG19 convolutional output."""

    stage = "backbone"


class ContractError(FusionToolError):
    """Caller violated an operation precondition (shape, type, value)."""

    stage = "contract"


class DivergenceError(FusionToolError):
    """Optimisation produced a non-finite loss."""

    stage = "optimizer"

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class DegenerateMapError(FusionToolError):
    """Activation map is constant, so min-max normalisation is undefined."""

    stage = "cam"


class MetricInputError(FusionToolError):
    """Metric inputs unsupported (colour images, mismatched sizes)."""

    stage = "metrics"
