import collections
import csv
import json
import os

import numpy as np

from pihlab._common import dump_json
from pihlab.core import CSV_COLUMNS, format_csv_row, parse_csv_row
from pihlab.errors import InvalidSpecError
from pihlab.types import AnyPath
from pihlab.units import DEFAULT_DT


__all__ = (
    "TickRecord",
    "EpisodeLog",
)


TickRecord = collections.namedtuple(
    "TickRecord", (
        "t",
        "x_r",
        "x_c",
        "x",
        "wrench",
        "in_hole",
    )
)


class EpisodeLog(object):
    """Per-tick history of one insertion attempt.

    Records hold the reference, commanded and actual positions and the
    observed wrench. `metadata` is a plain dict describing the episode
    (controller kind and gains, env seed, misalignment, abort annotations)
    and is what gets written to the JSON sidecar.

    Logs read back from CSV only carry the actual position; their x_r and x_c
    are None.
    """

    def __init__(self, dt=DEFAULT_DT, metadata=None):
        self.dt = float(dt)
        self.records = [ ]
        self.metadata = dict(metadata or {})
        self.metadata.setdefault("aborted", False)
        self._fz = [ ]

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    @property
    def last(self):
        return self.records[-1] if self.records else None

    @property
    def aborted(self):
        return bool(self.metadata.get("aborted"))

    def append(self, t, x_r, x_c, x, wrench, in_hole=False):
        if self.records and not t > self.records[-1].t:
            raise InvalidSpecError("episode times must strictly increase", t=t)
        self.records.append(TickRecord(t, x_r, x_c, x, wrench, bool(in_hole)))
        self._fz.append(wrench.fz)

    def annotate_abort(self, reason, tick):
        self.metadata["aborted"] = True
        self.metadata["abort_reason"] = str(reason)
        self.metadata["abort_tick"] = int(tick)

    @property
    def times(self):
        return np.array([r.t for r in self.records], dtype=float)

    @property
    def fz(self):
        return np.array(self._fz, dtype=float)

    @property
    def wrenches(self):
        if not self.records:
            return np.zeros((0, 6))
        return np.array([r.wrench for r in self.records], dtype=float)

    @property
    def positions(self):
        if not self.records:
            return np.zeros((0, 3))
        return np.array([r.x for r in self.records], dtype=float)

    def to_csv(self, path: AnyPath):
        """Write `path` (CSV, actual position and wrench) and `path`.json
        (metadata)."""
        with open(path, "w", newline="") as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for record in self.records:
                writer.writerow(format_csv_row(record.t, record.x, record.wrench))

        with open(sidecar_path(path), "w") as stream:
            metadata = dict(self.metadata)
            metadata["dt"] = self.dt
            dump_json(metadata, stream)

    @classmethod
    def from_csv(cls, path: AnyPath):
        metadata = { }
        sidecar = sidecar_path(path)
        if os.path.exists(sidecar):
            with open(sidecar, "r") as stream:
                metadata = json.load(stream)
        dt = metadata.pop("dt", DEFAULT_DT)

        log = cls(dt=dt, metadata=metadata)
        with open(path, "r", newline="") as stream:
            reader = csv.reader(stream)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_COLUMNS:
                raise InvalidSpecError("unexpected episode CSV header", path=path)
            for row in reader:
                t, position, wrench = parse_csv_row(row)
                log.append(t, None, None, position, wrench)
        return log


def sidecar_path(path):
    return os.fspath(path) + ".json"
