__all__ = (
    "LabError",
    "InvalidSpecError",
    "SensorFaultError",
    "InsufficientDataError",
    "IllConditionedError",
    "DegenerateDataError",
    "DimensionError",
    "CollectionError",
    "ConfigError",
    "ModelFormatError",
)


class LabError(Exception):
    """Base for every error raised deliberately by pihlab.

    `context` holds whatever locates the problem (seed, tick, path...), and is
    appended to the message when rendered.
    """

    def __init__(self, message, **context):
        Exception.__init__(self, message, context)
        self.message = message
        self.context = context

    def __str__(self):
        buf = [ self.message ]
        if self.context:
            buf.append(" (%s)" % ", ".join(
                "%s=%s" % (key, self.context[key]) for key in sorted(self.context)
            ))
        return "".join(buf)


class InvalidSpecError(LabError, ValueError):
    pass


class SensorFaultError(LabError):
    pass


class InsufficientDataError(LabError, ValueError):
    pass


class IllConditionedError(LabError):
    pass


class DegenerateDataError(LabError, ValueError):
    pass


class DimensionError(LabError, ValueError):
    pass


class CollectionError(LabError):
    pass


class ConfigError(LabError, ValueError):
    pass


class ModelFormatError(LabError):
    pass
