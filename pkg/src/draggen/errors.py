"""Exception types shared across the package."""


class DraggenError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DraggenError, ValueError):
    """Malformed or non-finite input."""


class CapacityError(DraggenError, ValueError):
    """More drags than the configured capacity N."""


class InvalidTreeError(DraggenError, ValueError):
    """Kinematic tree violates a structural invariant."""


class InvalidCameraError(DraggenError, ValueError):
    """Degenerate camera (zero scale)."""


class OcclusionError(DraggenError, RuntimeError):
    """No visible surface point found for a drag after resampling."""


class ResolutionError(DraggenError, ValueError):
    """Image resolution incompatible with the latent codec."""


class ShapeError(DraggenError, ValueError):
    """Array shape mismatch."""


class ConfigError(DraggenError, ValueError):
    """Inconsistent or incomplete configuration."""


class TrainingDiverged(DraggenError, RuntimeError):
    """Loss became non-finite during training.

    Carries the step index and the batch item ids for the failing step.
    """

    def __init__(self, step: int, batch_ids: list):
        self.step = step
        self.batch_ids = batch_ids
        super().__init__(f"non-finite loss at step {step}; batch items: {batch_ids}")


class DegenerateFeatureError(DraggenError, RuntimeError):
    """Feature pyramid is identically zero (untrained drag pathway)."""
