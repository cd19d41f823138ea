"""
Exception hierarchy shared by the services and the command line.

Each family carries the process exit code the CLI reports for it.
"""


class PnKitError(Exception):
    exit_code = 1


# Configuration / validation (exit 2)

class ConfigError(PnKitError):
    exit_code = 2


class InvalidLevel(ConfigError):
    pass


class UntrainedModel(ConfigError):
    pass


# Image and model I/O (exit 1)

class ImageError(PnKitError):
    exit_code = 1


class UnreadableFile(ImageError):
    pass


class UnsupportedFormat(ImageError):
    pass


class DimMismatch(ImageError):
    pass


class TileTooSmall(ImageError):
    pass


class TooSmallImage(ImageError):
    pass


class ShapeMismatch(ImageError):
    pass


class EmptyHistogram(ImageError):
    pass


class ModelFormatError(ImageError):
    pass


# Dataset problems (exit 3)

class DatasetError(PnKitError):
    exit_code = 3


class EmptyDataset(DatasetError):
    pass


class MissingImage(DatasetError):
    pass


class BadLabel(DatasetError):
    pass


class DuplicateId(DatasetError):
    pass


class ClassTooSmall(DatasetError):
    pass


class EmptyClass(DatasetError):
    pass


class InsufficientDescriptors(DatasetError):
    pass


class SingleClass(DatasetError):
    pass


class LengthMismatch(DatasetError):
    pass
