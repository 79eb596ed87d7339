"""Exception types shared across the library."""


class WholeBodyError(Exception):
    """Base class for every error raised by this package."""


# --- model loading -----------------------------------------------------------

class UrdfError(WholeBodyError):
    """Base class for URDF ingestion failures."""


class MalformedXml(UrdfError):
    """The document is not well-formed XML."""


class InvalidUrdf(UrdfError):
    """Structurally valid XML that violates the supported URDF subset."""


class MissingInertial(UrdfError):
    def __init__(self, link):
        super().__init__(f"link '{link}' has no <inertial> element")
        self.link = link


class InvalidInertia(UrdfError):
    def __init__(self, link, reason):
        super().__init__(f"link '{link}': {reason}")
        self.link = link


class NonTreeTopology(UrdfError):
    """The link/joint connectivity is not a tree rooted at a single base link."""


class UnsupportedJointType(UrdfError):
    def __init__(self, name, kind):
        super().__init__(f"joint '{name}' has unsupported type '{kind}'")
        self.name = name
        self.kind = kind


class ModelLoadError(WholeBodyError):
    """A model source could not be turned into a usable model."""


# --- math / dynamics ---------------------------------------------------------

class DimensionMismatch(WholeBodyError):
    """An input vector or matrix has the wrong size for the model."""


class UnknownFrame(WholeBodyError):
    def __init__(self, frame):
        super().__init__(f"unknown frame '{frame}'")
        self.frame = frame


class SingularMassMatrix(WholeBodyError):
    """The mass matrix is singular or too badly conditioned to solve."""


class InvalidRotation(WholeBodyError):
    """A matrix that should be a rotation is not orthonormal with det +1."""


# --- abstraction layer -------------------------------------------------------

class UnknownJoint(WholeBodyError):
    def __init__(self, joint):
        super().__init__(f"unknown joint '{joint}'")
        self.joint = joint


class EmptySelection(WholeBodyError):
    """A controller over zero degrees of freedom is a configuration mistake."""


class UnsupportedMode(WholeBodyError):
    def __init__(self, joint, mode):
        super().__init__(f"joint '{joint}' does not support mode {mode}")
        self.joint = joint
        self.mode = mode


class NoSuchSensor(WholeBodyError):
    def __init__(self, kind):
        super().__init__(f"no sensor of kind {kind}")
        self.kind = kind


class EstimateUnavailable(WholeBodyError):
    def __init__(self, kind):
        super().__init__(f"estimate {kind} is not available")
        self.kind = kind


class StaleInterface(WholeBodyError):
    """The backend behind an interface is gone."""


class BackendUnavailable(WholeBodyError):
    """No usable backend was supplied at initialization."""


class FixedBaseRequired(WholeBodyError):
    """The requested controller is defined for fixed-base robots only."""


# --- harness -----------------------------------------------------------------

class ConfigError(WholeBodyError):
    def __init__(self, key, reason):
        super().__init__(f"config key '{key}': {reason}")
        self.key = key
