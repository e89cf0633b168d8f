"""Domain exceptions. The CLI maps each family to an exit code."""

from typing import Optional


class PalosError(Exception):
    exit_code = 2


# --- validation (exit 2) ---


class InputValidationError(PalosError):
    exit_code = 2


class NonFinite(InputValidationError):
    def __init__(self, index):
        self.index = tuple(int(i) for i in index)
        super().__init__(f"Non-finite sample at (channel, sample) = {self.index}")


class DuplicateChannel(InputValidationError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"Duplicate channel label: {label!r}")


class TooShort(InputValidationError):
    def __init__(self, n_samples: int, required: int):
        self.n_samples = n_samples
        self.required = required
        super().__init__(f"Recording has {n_samples} samples, at least {required} required")


class TooFewChannels(InputValidationError):
    def __init__(self, n_channels: int):
        self.n_channels = n_channels
        super().__init__(f"Recording has {n_channels} channel(s), at least 2 required")


class TooFewSegments(InputValidationError):
    def __init__(self, n_segments: int):
        self.n_segments = n_segments
        super().__init__(f"Only {n_segments} segment(s) fit the recording, at least 2 required")


class InvalidConfig(InputValidationError):
    pass


class ZeroPower(InputValidationError):
    def __init__(self, channel, freq: Optional[float] = None):
        self.channel = channel
        self.freq = freq
        where = f" at {freq:g} Hz" if freq is not None else ""
        super().__init__(f"Zero power on channel {channel!r}{where}")


class ZeroTrace(InputValidationError):
    def __init__(self, freq: Optional[float] = None):
        self.freq = freq
        where = f" at {freq:g} Hz" if freq is not None else ""
        super().__init__(f"Cross-spectral matrix has zero trace{where}")


class UnknownChannel(InputValidationError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"Channel {label!r} is not in the recording")


class EmptyBand(InputValidationError):
    def __init__(self, band: str):
        self.band = band
        super().__init__(f"No frequency bins fall inside band {band!r}")


class EmptyNetwork(InputValidationError):
    def __init__(self):
        super().__init__("Network has no off-diagonal edges")


class ShapeMismatch(InputValidationError):
    pass


class DipoleOutsideBrain(InputValidationError):
    def __init__(self, index: int, radius_mm: float, brain_radius_mm: float):
        self.index = index
        self.radius_mm = radius_mm
        super().__init__(
            f"Dipole {index} at radius {radius_mm:.2f} mm is not inside the brain shell ({brain_radius_mm:.2f} mm)"
        )


class EmptyRoi(InputValidationError):
    def __init__(self, roi: str):
        self.roi = roi
        super().__init__(f"ROI {roi!r} has no member sources")


class DegenerateInput(InputValidationError):
    pass


class SingularGram(InputValidationError):
    pass


class MalformedHeader(InputValidationError):
    pass


class UnsupportedUnits(InputValidationError):
    def __init__(self, units: str):
        self.units = units
        super().__init__(f"Unsupported units: {units!r}")


# --- numerical (exit 3) ---


class NumericalError(PalosError):
    exit_code = 3


class NoConvergence(NumericalError):
    def __init__(self, residual: float, iterations: int, component: Optional[int] = None):
        self.residual = residual
        self.iterations = iterations
        self.component = component
        what = "" if component is None else f" for component {component}"
        super().__init__(f"No convergence{what} after {iterations} iterations (residual {residual:.3e})")


class EigenFailure(NumericalError):
    pass


class TargetUnreachable(NumericalError):
    pass


# --- I/O (exit 1) ---


class RecordingIOError(PalosError):
    exit_code = 1
