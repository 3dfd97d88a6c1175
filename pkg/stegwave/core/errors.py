"""Exception hierarchy for stegwave"""


class StegwaveError(Exception):
    """Base class for every error raised by stegwave engines"""


class ConfigurationError(StegwaveError, ValueError):
    """A parameter is outside its valid range"""


class ImageFormatError(StegwaveError, ValueError):
    """A PNM byte stream could not be decoded"""


class MalformedHeaderError(ImageFormatError):
    """PNM header is not parseable"""


class UnsupportedMaxvalError(ImageFormatError):
    """PNM maxval other than 255"""


class TruncatedDataError(ImageFormatError):
    """Fewer raster bytes than the header promises"""


class UnsupportedMagicError(ImageFormatError):
    """PNM magic other than binary P5/P6"""


class DimensionMismatchError(StegwaveError, ValueError):
    """Two images (or an image and a curve) do not share geometry"""


class InsufficientDataError(StegwaveError, ValueError):
    """Input too short or empty for the requested computation"""


class TrainingError(StegwaveError, ValueError):
    """Classifier training input is unusable"""


class UnknownLabelError(TrainingError):
    """A test label was never seen at training time"""


class CalibrationError(StegwaveError, ValueError):
    """Calibration curve is unusable for estimation"""


class ModelFormatError(StegwaveError, ValueError):
    """Persisted model file is corrupt or of an unknown version"""
