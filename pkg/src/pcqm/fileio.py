"""CSV and JSON formats for distance samples, point patterns and windows."""
import csv
import json
import math

import numpy as np

from .errors import IngestError
from .estimators import DistanceSample
from .simulate import PointPattern, StudyWindow

__all__ = [
    "fmt",
    "write_sample_csv",
    "read_sample_csv",
    "write_pattern_csv",
    "read_pattern_csv",
    "write_window_json",
    "read_window_json",
]

SAMPLE_COLUMNS = ("point_id", "sector_id", "distance", "censored")


def fmt(v):
    """Shortest round-tripping text for a float; empty for None/NaN."""
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(v)


def write_sample_csv(path, s: DistanceSample):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for i in range(s.n):
            for j in range(s.q):
                v = s.distances[i, j]
                w.writerow([i, j, fmt(v), int(math.isnan(v))])


def _parse_flag(text, where):
    t = text.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no", ""):
        return False
    raise IngestError(f"{where}: censored flag must be 0/1, got {text!r}")


def read_sample_csv(path, ell=1, C=math.inf, q=None):
    """Load a ``point_id,sector_id,distance,censored`` file into a DistanceSample.

    Every (point, sector) cell must appear exactly once. Censored rows need a
    finite ``C``; ``q`` (if given) must match the number of sector ids.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in SAMPLE_COLUMNS if c not in header]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}")
        col = {c: header.index(c) for c in SAMPLE_COLUMNS}
        cells = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            where = f"{path}:{lineno}"
            try:
                pid = int(row[col["point_id"]])
                sid = int(row[col["sector_id"]])
                cens = _parse_flag(row[col["censored"]], where)
                text = row[col["distance"]].strip()
            except (IndexError, ValueError) as exc:
                if isinstance(exc, IngestError):
                    raise
                raise IngestError(f"{where}: malformed row {row!r}") from None
            if cens:
                d = math.nan
            else:
                try:
                    d = float(text)
                except ValueError:
                    raise IngestError(f"{where}: distance {text!r} is not a number") from None
                if not (d > 0 and math.isfinite(d)):
                    raise IngestError(f"{where}: distance must be positive and finite, got {d}")
                if d > C:
                    raise IngestError(f"{where}: distance {d} exceeds the radius {C}")
            if pid < 0 or sid < 0:
                raise IngestError(f"{where}: ids must be non-negative")
            if (pid, sid) in cells:
                raise IngestError(f"{where}: duplicate cell ({pid}, {sid})")
            cells[(pid, sid)] = d
    if not cells:
        raise IngestError(f"{path}: no data rows")
    n = max(k[0] for k in cells) + 1
    nq = max(k[1] for k in cells) + 1
    if q is not None and nq != q:
        raise IngestError(f"{path}: file has {nq} sectors per point, expected q={q}")
    if len(cells) != n * nq:
        raise IngestError(f"{path}: {len(cells)} cells do not fill a {n} x {nq} grid")
    grid = np.empty((n, nq))
    for (i, j), d in cells.items():
        grid[i, j] = d
    if np.isnan(grid).any() and math.isinf(C):
        raise IngestError(f"{path}: censored rows need a finite censoring radius")
    return DistanceSample(grid, ell, C)


def write_pattern_csv(path, p: PointPattern):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "y"))
        for x, y in p.points:
            w.writerow((repr(float(x)), repr(float(y))))


def read_pattern_csv(path, window: StudyWindow):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise IngestError(f"{path}: {exc}") from None
    if data.size and data.shape[1] != 2:
        raise IngestError(f"{path}: expected columns x,y")
    return PointPattern(data.reshape(-1, 2), window)


def write_window_json(path, window: StudyWindow):
    with open(path, "w") as fh:
        json.dump(window.to_dict(), fh, indent=2)
        fh.write("\n")


def read_window_json(path):
    try:
        with open(path) as fh:
            return StudyWindow.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read window descriptor {path}: {exc}") from None
