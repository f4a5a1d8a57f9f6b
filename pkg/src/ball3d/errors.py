"""Exception types shared across the package."""


class Ball3dError(Exception):
    """Base class for all package errors."""


class RayParallelToPlane(Ball3dError):
    """Viewing ray is (numerically) parallel to the ground or vertical plane."""


class BehindCamera(Ball3dError):
    """3D point has non-positive depth in the camera frame."""


class SequenceTooShort(Ball3dError):
    """Operation needs a longer sequence than was provided."""


class NonTerminating(Ball3dError):
    """Simulated ball failed to come to rest within the step cap."""


class TargetUnreachable(Ball3dError):
    """No valid ballistic stroke found for the sampled target after retries."""


class MalformedRecord(Ball3dError):
    """A JSONL record failed schema validation (carries the line number)."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class SchemaVersionMismatch(Ball3dError):
    """Dataset file was written with an unsupported schema version."""


class UnboundedGap(Ball3dError):
    """First or last track point is missing; gap filling needs both anchors."""


class DivergedTraining(Ball3dError):
    """Training loss became non-finite."""


class ShapeMismatch(Ball3dError):
    """Tensor or parameter shapes do not chain."""


class GraphNotRecorded(Ball3dError):
    """backward() called on a tensor with no recorded computation graph."""


class SingularNormalEquations(Ball3dError):
    """Normal equations of the reprojection fit are rank deficient."""


class LengthMismatch(Ball3dError):
    """Predicted and ground-truth sequences have different lengths."""


class DegenerateRange(Ball3dError):
    """Ground truth spans no usable range for normalization."""


class NoGroundTruthEvents(Ball3dError):
    """Landing metrics require at least one ground-truth contact event."""


class CameraMismatch(Ball3dError):
    """Sequence camera_id does not match the provided camera file."""
