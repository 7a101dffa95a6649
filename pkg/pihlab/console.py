__all__ = (
    "StatusLine",
    "ProgressLine",
    "NullProgressHandler",
)


def prepare_text(text, max_len):
    stext, _, _ = str(text).partition("\n")
    return stext[:max_len]


class StatusLine(object):
    """A single, repeatedly overwritten line on a terminal stream."""

    def __init__(self, stream, line_width=78):
        self._stream = stream
        self._line_width = line_width
        self._last_len = 0

    def clear(self):
        self.set_text("")
        self._stream.write("\r")
        self._stream.flush()

    def set_text(self, new_text):
        text = prepare_text(new_text, self._line_width)
        now_len = len(text)

        self._stream.write("\r%s" % text)
        if now_len < self._last_len:
            self._stream.write(" " * (self._last_len - now_len))
        self._stream.flush()
        self._last_len = now_len


class ProgressLine(object):
    """Progress handler drawing `label: done/total` on a StatusLine.

    A progress handler has two methods: `progress(done, total)`, called after
    each unit of work, and `complete()`, called once at the end.
    """

    def __init__(self, stream, label):
        self._line = StatusLine(stream)
        self._label = label

    def progress(self, done, total):
        percent = 100 * done // total if total else 100
        self._line.set_text("%s: %d/%d (%d%%)" % (self._label, done, total, percent))

    def complete(self):
        self._line.clear()


class NullProgressHandler(object):
    def progress(self, _done, _total):
        pass

    def complete(self):
        pass


def ensure_progress(handler):
    return handler if handler is not None else NullProgressHandler()
