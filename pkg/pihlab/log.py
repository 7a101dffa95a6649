"""Minimal leveled logging with brace-formatted messages.

Library entry points take an optional `logger` and fall back to a
`NullLogger`, so nothing is printed unless a caller asks for it. Messages are
templates for `str.format`; arguments are only substituted when a logger
actually emits the message.
"""
import sys


__all__ = (
    "select_level",
    "level_name",
    "Logger", "NullLogger", "StreamLogger", "RecordingLogger", "TaggedLogger",
    "ensure_logger",
    "CRITICAL", "ERROR", "WARNING", "INFO", "VERBOSE", "DEBUG", "MINIMUM",
)


CRITICAL = 50
ERROR = 40
WARNING = 30
INFO = 20
VERBOSE = 15
DEBUG = 10
MINIMUM = 0

LEVEL_NAMES = {
    CRITICAL: "critical",
    ERROR: "error",
    WARNING: "warning",
    INFO: "info",
    VERBOSE: "verbose",
    DEBUG: "debug",
}


def select_level(choices, zero_level, index):
    """Step `index` places away from `zero_level` within `choices`, clamped
    to the ends. The CLI uses this to turn -v/-q counts into a level."""
    zero_index = choices.index(zero_level)
    index = max(0, min(len(choices) - 1, zero_index + index))
    return choices[index]


def level_name(level):
    return LEVEL_NAMES.get(level, str(level))


def log_method(level):
    def method(self, template, *targs, **tkwargs):
        self.log(level, template, *targs, **tkwargs)
    return method


class Logger(object):
    def format(self, message, args, kwargs):
        if not args and not kwargs:
            return message
        return message.format(*args, **kwargs)

    def log(self, level, message, *message_args, **message_kwargs):
        raise NotImplementedError()

    def tagged(self, tag):
        """A logger that prefixes every message with `[tag]` and forwards it
        here. Used to mark which episode or trial a message came from."""
        return TaggedLogger(self, tag)

    critical = log_method(CRITICAL)
    error = log_method(ERROR)
    warning = log_method(WARNING)
    info = log_method(INFO)
    verbose = log_method(VERBOSE)
    debug = log_method(DEBUG)


class NullLogger(Logger):
    def log(self, level, message, *message_args, **message_kwargs):
        pass

    def tagged(self, tag):
        return self


class TaggedLogger(Logger):
    def __init__(self, parent, tag):
        self.parent = parent
        self.tag = tag

    def log(self, level, message, *message_args, **message_kwargs):
        text = self.format(message, message_args, message_kwargs)
        # already formatted; the parent must not substitute again
        self.parent.log(level, "[%s] %s" % (self.tag, text))


class StreamLogger(Logger):
    """Prints each message on its own line, prefixed with the level name when
    `prefix` is set. Messages outside [min_level, max_level) are dropped."""

    def __init__(self, stream=None, min_level=MINIMUM, max_level=None, prefix=True):
        self._stream = stream or sys.stderr
        self.min_level = min_level
        self.max_level = max_level
        self.prefix = prefix

    def log(self, level, message, *message_args, **message_kwargs):
        if level < self.min_level or (self.max_level is not None and level >= self.max_level):
            return
        text = self.format(message, message_args, message_kwargs)
        if self.prefix:
            text = "%s: %s" % (level_name(level), text)
        print(text, file=self._stream)


class RecordingLogger(Logger):
    """Keeps (level, text) pairs in `records`. Handy for tests."""

    def __init__(self):
        self.records = [ ]

    def log(self, level, message, *message_args, **message_kwargs):
        self.records.append((level, self.format(message, message_args, message_kwargs)))

    def messages(self, min_level=MINIMUM):
        return [text for level, text in self.records if level >= min_level]


def ensure_logger(logger):
    return logger if logger is not None else NullLogger()
