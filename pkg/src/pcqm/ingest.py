"""Fully censused stem maps: loading, species filtering and true densities.

Stem files are CSV with a mandatory ``species,x,y`` header. The study window
always comes from a descriptor, never from the extent of the data.
"""
import csv
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestError
from .fileio import read_window_json
from .simulate import PointPattern, StudyWindow

__all__ = [
    "StemMap",
    "load_stem_map",
    "write_stem_map",
    "filter_abundant",
    "species_pattern",
    "true_density",
]

STEM_COLUMNS = ("species", "x", "y")


@dataclass(frozen=True, eq=False)
class StemMap:
    species: tuple
    xy: np.ndarray
    window: StudyWindow
    dropped: list = field(default_factory=list)  # (line, reason) in lenient mode

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float).reshape(-1, 2)
        if len(self.species) != xy.shape[0]:
            raise IngestError("species and coordinate counts differ")
        if any(not s for s in self.species):
            raise IngestError("species codes must be non-empty")
        if not np.all(self.window.contains(xy)):
            raise IngestError("stem coordinates fall outside the window")
        xy.setflags(write=False)
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "species", tuple(self.species))

    def __len__(self):
        return len(self.species)

    @property
    def records(self):
        return [(s, float(x), float(y)) for s, (x, y) in zip(self.species, self.xy)]

    def counts(self):
        return Counter(self.species)


def _as_window(descriptor):
    if isinstance(descriptor, StudyWindow):
        return descriptor
    if isinstance(descriptor, dict):
        return StudyWindow.from_dict(descriptor)
    return read_window_json(descriptor)


def load_stem_map(path, window_descriptor, strict=True):
    """Read a stem CSV and validate every row against the window.

    In strict mode the first bad row raises :class:`IngestError` naming its
    line; otherwise bad rows are skipped and listed in ``StemMap.dropped``.
    """
    window = _as_window(window_descriptor)
    species, xy, dropped = [], [], []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestError(f"cannot open stem map {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty file (header species,x,y required)")
        header = [h.strip().lower() for h in header]
        missing = [c for c in STEM_COLUMNS if c not in header]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}")
        ci = [header.index(c) for c in STEM_COLUMNS]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            reason = None
            try:
                code = row[ci[0]].strip()
                x, y = float(row[ci[1]]), float(row[ci[2]])
            except (IndexError, ValueError):
                reason = f"malformed row {row!r}"
            else:
                if not code:
                    reason = "empty species code"
                elif not (math.isfinite(x) and math.isfinite(y)):
                    reason = "non-finite coordinate"
                elif not window.contains((x, y))[0]:
                    reason = f"coordinate ({x}, {y}) outside the window"
            if reason is not None:
                if strict:
                    raise IngestError(f"{path}:{lineno}: {reason}")
                dropped.append((lineno, reason))
                continue
            species.append(code)
            xy.append((x, y))
    if not species:
        warnings.warn(f"{path}: stem map has no records", stacklevel=2)
    return StemMap(tuple(species), np.array(xy, dtype=float).reshape(-1, 2), window, dropped)


def write_stem_map(path, m: StemMap):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STEM_COLUMNS)
        for s, (x, y) in zip(m.species, m.xy):
            w.writerow((s, repr(float(x)), repr(float(y))))


def filter_abundant(m: StemMap, min_count):
    """Species codes with at least ``min_count`` stems, sorted."""
    if int(min_count) != min_count or min_count < 1:
        raise IngestError(f"min_count must be a positive integer, got {min_count}")
    return sorted(code for code, c in m.counts().items() if c >= min_count)


def species_pattern(m: StemMap, code):
    mask = np.fromiter((s == code for s in m.species), dtype=bool, count=len(m))
    if not mask.any():
        raise KeyError(f"species {code!r} not in stem map")
    return PointPattern(m.xy[mask], m.window)


def true_density(p: PointPattern):
    """Stem count divided by window area."""
    return len(p) / p.window.area
