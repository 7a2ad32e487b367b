"""Exception types raised across the package."""


class PatchAugError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PatchAugError, ValueError):
    """A configuration value violates its documented range or cross-field rule."""


class OutOfBoundsError(PatchAugError, ValueError):
    """A patch rectangle or placement exceeds the image bounds."""


class ChannelMismatchError(PatchAugError, ValueError):
    """Host and patch channel counts differ."""


class DimMismatchError(PatchAugError, ValueError):
    """Image or vector dimensions do not line up."""


class InvalidAreaError(PatchAugError, ValueError):
    """Patch/image areas violate 0 <= patch_area <= image_area, image_area >= 1."""


class LengthMismatchError(PatchAugError, ValueError):
    """Two label vectors have different lengths."""


class LambdaRangeError(PatchAugError, ValueError):
    """A mixing weight lies outside [0, 1]."""


class TruncatedRecordError(PatchAugError, ValueError):
    """A binary dataset file is not a whole number of records."""


class LabelRangeError(PatchAugError, ValueError):
    """A class index lies outside [0, num_classes)."""


class EmptyDatasetError(PatchAugError, ValueError):
    """An operation that needs at least one example received none."""


class FormatVersionError(PatchAugError, ValueError):
    """A container file has an unknown magic string or unreadable header."""


class ChecksumError(PatchAugError, ValueError):
    """A container file's payload does not match its stored checksum."""


class CheckpointError(PatchAugError, ValueError):
    """A model checkpoint is unreadable or inconsistent with its header."""


class CheckpointMismatchError(PatchAugError, ValueError):
    """A checkpoint's dimensions do not match the dataset it is applied to."""


class MalformedMetricsError(PatchAugError, ValueError):
    """A metrics CSV file cannot be parsed."""
