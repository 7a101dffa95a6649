import json

from pihlab.errors import ConfigError


class ConfigObject(object):
    """Mixin for the plain configuration classes.

    Subclasses list their attribute names in FIELDS and accept each as a
    keyword argument to __init__. Values must be JSON-representable after
    `_export` (tuples become lists).
    """

    FIELDS = ()
    SECTION = None

    def to_dict(self):
        return {name: _export(getattr(self, name)) for name in self.FIELDS}

    @classmethod
    def from_dict(cls, data):
        if data is None:
            return cls()
        if not isinstance(data, dict):
            raise ConfigError("expected an object", section=cls.SECTION or cls.__name__)
        unknown = sorted(set(data) - set(cls.FIELDS))
        if unknown:
            raise ConfigError(
                "unknown keys: %s" % ", ".join(unknown),
                section=cls.SECTION or cls.__name__,
            )
        try:
            return cls(**data)
        except (TypeError, ValueError) as error:
            if isinstance(error, ConfigError):
                raise
            raise ConfigError(str(error), section=cls.SECTION or cls.__name__)

    def replace(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return type(self)(**values)

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return "%s(%s)" % (
            type(self).__name__,
            ", ".join("%s=%r" % (name, getattr(self, name)) for name in self.FIELDS),
        )


def _export(value):
    if isinstance(value, tuple):
        return [_export(v) for v in value]
    if isinstance(value, list):
        return [_export(v) for v in value]
    if isinstance(value, ConfigObject):
        return value.to_dict()
    return value


def vector(values, length, name):
    try:
        result = tuple(float(v) for v in values)
    except TypeError:
        result = (float(values),) * length
    if len(result) != length:
        raise ConfigError("%s needs %d components" % (name, length), got=len(result))
    return result


def dump_json(data, stream):
    json.dump(data, stream, sort_keys=True, indent=2)
    stream.write("\n")
