"""Error taxonomy shared across the package."""


class DistillLabError(Exception):
    """Base class for package-specific failures."""


class UnsupportedScheduleError(DistillLabError, ValueError):
    """Unknown noise-schedule family."""


class TrainingDivergedError(DistillLabError):
    """Non-finite loss encountered while training a model."""


class SamplingDivergedError(DistillLabError):
    """Non-finite intermediate state during ancestral sampling."""


class RenderQualityError(DistillLabError):
    """Ray march failed to converge on too many foreground pixels."""


class ConversionFailedError(DistillLabError):
    """Representation conversion has no usable iso-region."""


class DistillationDivergedError(DistillLabError):
    """Non-finite distillation gradient; carries (t, pose) diagnostics."""

    def __init__(self, msg, t=None, pose=None):
        super().__init__(msg)
        self.t = t
        self.pose = pose


class PoseOutOfRangeError(DistillLabError):
    """Sampled camera violates the view prior's trained FOV restriction."""
