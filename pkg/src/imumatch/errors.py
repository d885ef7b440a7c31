"""Exception hierarchy shared by all imumatch modules."""


class ImuMatchError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(ImuMatchError, ValueError):
    pass


class BehindCameraError(ImuMatchError, ValueError):
    """Point has z <= 0 and cannot be projected."""


class InvalidDepthError(ImuMatchError, ValueError):
    """Pixel carries no usable depth (d <= 0)."""


class InvalidIntervalError(ImuMatchError, ValueError):
    pass


class OrderingError(ImuMatchError, ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class OutOfRangeError(ImuMatchError, LookupError):
    pass


class AlignmentError(ImuMatchError, ValueError):
    pass


class IncompatibleDescriptorError(ImuMatchError, ValueError):
    pass


class InvalidConfigError(ImuMatchError, ValueError):
    pass


class ParseError(ImuMatchError, ValueError):
    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


class EmptyDatasetError(ImuMatchError, ValueError):
    pass


class AssociationError(ImuMatchError, LookupError):
    pass
