"""Exception hierarchy for the calibration toolkit."""


class CalibrationError(Exception):
    """Base class for all toolkit errors."""


class FrameMismatchError(CalibrationError):
    """Raised when coordinate-frame labels are inconsistent at a composition boundary."""


class BehindCameraError(CalibrationError):
    """Raised when a point with z <= 0 is projected through the pinhole model."""


class PoseEstimationError(CalibrationError):
    """Raised when board pose estimation is degenerate (e.g. collinear corners)."""


class DegenerateDistanceError(CalibrationError):
    """Raised when corner pixel spacing is too small for the distance prior."""


class InsufficientPointsError(CalibrationError):
    """Raised when an operation receives fewer points than it needs."""


class DegenerateNormalError(CalibrationError):
    """Raised when cluster normals cancel and no representative direction exists."""


class NoPlaneError(CalibrationError):
    """Raised when RANSAC cannot find a plane supported by enough inliers."""


class ExtractionError(CalibrationError):
    """Board extraction pipeline failure, tagged with the stage that emptied out."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


class BoardNotVisibleError(CalibrationError):
    """Raised when the simulated board is outside a sensor's field of view."""


class InfeasibleSpreadError(CalibrationError):
    """Raised when the requested board-orientation spread cannot be met."""


class PointFileError(CalibrationError):
    """Raised on malformed point-file input; carries the offending line number."""

    def __init__(self, path: str, line_number: int, message: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")
