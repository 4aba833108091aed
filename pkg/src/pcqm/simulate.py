"""Point-process generation and PCQM field sampling.

Randomness enters only through ``seed`` arguments. A seed may be an int, a
``numpy.random.SeedSequence`` or a ready ``Generator``; :func:`derive_rng`
builds the per-replicate streams used by the benchmark engine.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import GridIndex, pcqm_distances
from .errors import ConfigError, DomainError
from .estimators import DistanceSample
from .model import NbdModel

__all__ = [
    "StudyWindow",
    "PointPattern",
    "SurveyDesign",
    "derive_rng",
    "gen_poisson",
    "gen_thomas",
    "lhs_focal_points",
    "pcqm_sample",
    "sample_nbd_distances",
]


@dataclass(frozen=True)
class StudyWindow:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"window {name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise DomainError(f"window must have positive extent, got {self}")

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def area(self):
        return self.width * self.height

    def buffered(self, b):
        """Window shrunk by ``b`` on every side; ConfigError if nothing is left."""
        b = float(b)
        if not (self.width > 2 * b and self.height > 2 * b):
            raise ConfigError(f"buffer {b} leaves an empty window inside {self.width} x {self.height}")
        return StudyWindow(self.x_min + b, self.y_min + b, self.x_max - b, self.y_max - b)

    def expanded(self, b):
        return StudyWindow(self.x_min - b, self.y_min - b, self.x_max + b, self.y_max + b)

    def contains(self, xy):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return ((xy[:, 0] >= self.x_min) & (xy[:, 0] <= self.x_max)
                & (xy[:, 1] >= self.y_min) & (xy[:, 1] <= self.y_max))

    def to_dict(self):
        return {"x_min": self.x_min, "y_min": self.y_min, "x_max": self.x_max, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["x_min"], d["y_min"], d["x_max"], d["y_max"])
        except KeyError as exc:
            raise ConfigError(f"window descriptor is missing {exc.args[0]!r}") from None


@dataclass(frozen=True, eq=False)
class PointPattern:
    points: np.ndarray
    window: StudyWindow

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if not np.all(self.window.contains(pts)):
            raise DomainError("pattern has points outside its window")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def intensity(self):
        """Realized density: count divided by window area."""
        return len(self) / self.window.area


@dataclass(frozen=True)
class SurveyDesign:
    n: int = 120
    q: int = 4
    ell: int = 1
    C: float = 10.0
    buffer: float | None = None

    def __post_init__(self):
        for name in ("n", "q", "ell"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        if not float(self.C) > 0:
            raise ConfigError(f"censoring radius C must be positive, got {self.C}")
        object.__setattr__(self, "C", float(self.C))
        b = self.C + 0.1 if self.buffer is None else float(self.buffer)
        if not (b >= 0 and math.isfinite(b)):
            raise ConfigError(f"buffer must be finite and non-negative, got {b}")
        object.__setattr__(self, "buffer", b)


def derive_rng(master_seed, *key):
    """Independent counter-based stream for replicate ``key`` of ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _uniform_in(rng, window, count):
    xy = np.empty((count, 2))
    xy[:, 0] = window.x_min + window.width * rng.random(count)
    xy[:, 1] = window.y_min + window.height * rng.random(count)
    return xy


def gen_poisson(lam, window, seed):
    """Homogeneous Poisson pattern of intensity ``lam`` on ``window``."""
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"intensity must be positive, got {lam}")
    rng = _rng(seed)
    count = rng.poisson(lam * window.area)
    return PointPattern(_uniform_in(rng, window, count), window)


def gen_thomas(kappa, mu, sigma, window, seed):
    """Thomas cluster pattern: Poisson parents, Poisson(mu) Gaussian offspring.

    Parents live on the window grown by 4 sigma so clusters centred just
    outside still contribute; only offspring inside ``window`` are kept.
    """
    for name, v in (("kappa", kappa), ("mu", mu), ("sigma", sigma)):
        if not (v > 0 and math.isfinite(v)):
            raise DomainError(f"{name} must be positive, got {v}")
    rng = _rng(seed)
    outer = window.expanded(4.0 * sigma)
    parents = _uniform_in(rng, outer, rng.poisson(kappa * outer.area))
    counts = rng.poisson(mu, parents.shape[0])
    kids = np.repeat(parents, counts, axis=0) + rng.normal(0.0, sigma, (int(counts.sum()), 2))
    return PointPattern(kids[window.contains(kids)], window)


def lhs_focal_points(design, window, seed):
    """Latin hypercube of ``design.n`` focal points inside the buffered window."""
    inner = window.buffered(design.buffer)
    rng = _rng(seed)
    n = design.n
    out = np.empty((n, 2))
    for axis, (lo, span) in enumerate(((inner.x_min, inner.width), (inner.y_min, inner.height))):
        strata = rng.permutation(n)
        out[:, axis] = lo + span * (strata + rng.random(n)) / n
    return out


def pcqm_sample(pattern, focals, design, backend=None):
    """Sector distances from each focal point to the ell-th nearest pattern point.

    Sector j covers angles [2 pi j/q, 2 pi (j+1)/q) counterclockwise from the
    +x axis. A sector with fewer than ell points within C is censored.
    """
    focals = np.asarray(focals, dtype=float).reshape(-1, 2)
    w = pattern.window
    if design.buffer > 0 and not np.all(w.buffered(design.buffer).contains(focals)):
        raise DomainError("focal points must lie inside the buffered window")
    if not np.all(w.contains(focals)):
        raise DomainError("focal points must lie inside the window")
    cell = design.C if math.isfinite(design.C) else max(w.width, w.height)
    cell = min(cell, max(w.width, w.height))
    index = GridIndex(pattern.points, w.x_min, w.y_min, w.width, w.height, cell)
    d = pcqm_distances(index, focals, design.q, design.ell, design.C, backend)
    return DistanceSample(d, design.ell, design.C)


def sample_nbd_distances(m: NbdModel, count, seed):
    """Draw ``count`` ell-th neighbour distances from the NBD model.

    W = G1/(G1+G2) with G1 ~ Gamma(ell), G2 ~ Gamma(k) is Beta(ell, k), and
    W/(1-W) = G1/G2, so the ratio is used directly.
    """
    count = int(count)
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    rng = _rng(seed)
    g1 = rng.standard_gamma(m.ell, count)
    g2 = rng.standard_gamma(m.k, count)
    return np.sqrt(m.k * g1 / (m.a * g2))
