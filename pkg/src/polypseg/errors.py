"""Exception types shared across the package."""


class PolypsegError(Exception):
    """Base class for all package-specific errors."""


class FrameFormatError(PolypsegError):
    """Raised when an input image is not an 8-bit RGB/RGBA PNG."""


class DegenerateRegionError(PolypsegError):
    """Raised when a superpixel region admits no valid co-occurrence pairs."""


class SingularSystemError(PolypsegError):
    """Raised when the classifier's linear system cannot be solved reliably."""


class SingleClassError(PolypsegError):
    """Raised when training data contains only one class."""


class PatientLeakageError(PolypsegError):
    """Raised when the same patient appears in both train and test splits."""


class ArtifactError(PolypsegError):
    """Raised when a required on-disk artifact is missing or inconsistent."""


class ManifestError(PolypsegError):
    """Raised when a dataset manifest is malformed."""


class UsageError(PolypsegError):
    """Raised for caller mistakes that map to CLI exit code 2."""
