"""Hot loops, each with a numba implementation and a vectorised numpy twin.

:class:`NbdLogLik` and :func:`pcqm_distances` dispatch on
:data:`pcqm._jit.NUMBA_ENABLED`.
Both twins are importable for benchmarking and for equivalence tests.
"""
import math

import numpy as np

from ._jit import NUMBA_ENABLED, njit
from .specfun import _log_betainc_pair, _log_gamma_ratio_scaled

_EPS = 1e-15
_MAXIT = 10000
TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# NBD log-likelihood in (log lambda, log k)
# --------------------------------------------------------------------------

@njit
def _nbd_censored_term(n0, ell, a, C, k):
    if n0 == 0:
        return 0.0
    t = a * C * C
    # 1 - I_w(ell, k) with w = t / (t + k)
    lc = _log_betainc_pair(t / (t + k), k / (t + k), float(ell), k, _EPS, _MAXIT)[1]
    return n0 * lc


@njit
def _nbd_loglik_numba(r2, sum_log_r, n0, ell, q, C, log_lam, log_k):
    a = math.pi * math.exp(log_lam) / q
    k = math.exp(log_k)
    n = r2.shape[0]
    # Neumaier-compensated sum of log1p terms
    total = 0.0
    comp = 0.0
    c = a / k
    for i in range(n):
        x = math.log1p(c * r2[i])
        t = total + x
        if abs(total) >= abs(x):
            comp += (total - t) + x
        else:
            comp += (x - t) + total
        total = t
    const = (math.log(2.0) + ell * math.log(a) - math.lgamma(ell)
             + _log_gamma_ratio_scaled(k, float(ell)))
    ll = n * const + (2 * ell - 1) * sum_log_r - (ell + k) * (total + comp)
    return ll + _nbd_censored_term(n0, ell, a, C, k)


def _nbd_loglik_numpy(r2, sum_log_r, n0, ell, q, C, log_lam, log_k):
    a = math.pi * math.exp(log_lam) / q
    k = math.exp(log_k)
    const = (math.log(2.0) + ell * math.log(a) - math.lgamma(ell)
             + _log_gamma_ratio_scaled(k, float(ell)))
    ll = (r2.size * const + (2 * ell - 1) * sum_log_r
          - (ell + k) * float(np.log1p((a / k) * r2).sum()))
    return ll + _nbd_censored_term(n0, ell, a, C, k)


# Above this many distances numpy's vectorised log1p beats the scalar libm
# call inside the compiled loop, so automatic dispatch switches twins.
NUMBA_LOGLIK_MAX_N = 4096


class NbdLogLik:
    """Censored NBD log-likelihood of (log lambda, log k) for fixed data.

    Observed distances ``r`` contribute density terms; ``n0`` sectors censored
    at radius ``C`` contribute survival terms (``C`` unused when ``n0 == 0``).
    ``backend=None`` picks numba for samples up to ``NUMBA_LOGLIK_MAX_N``.
    """

    def __init__(self, r, n0, ell, q, C, backend=None):
        r = np.asarray(r, dtype=float)
        self.r2 = np.ascontiguousarray(r * r)
        self.sum_log_r = float(np.log(r).sum())
        self.n0 = int(n0)
        self.ell = int(ell)
        self.q = float(q)
        self.C = float(C) if n0 else 1.0
        if backend is None:
            use_numba = NUMBA_ENABLED and self.r2.size <= NUMBA_LOGLIK_MAX_N
        else:
            use_numba = backend == "numba"
        self._impl = _nbd_loglik_numba if use_numba else _nbd_loglik_numpy

    def __call__(self, log_lam, log_k):
        return self._impl(self.r2, self.sum_log_r, self.n0, self.ell, self.q, self.C,
                          float(log_lam), float(log_k))


# --------------------------------------------------------------------------
# PCQM sector search on a uniform grid index
# --------------------------------------------------------------------------

class GridIndex:
    """Points bucketed into square cells of side ``cell`` (row-major, sorted)."""

    def __init__(self, points, x0, y0, width, height, cell):
        self.cell = float(cell)
        self.x0 = float(x0)
        self.y0 = float(y0)
        self.nx = max(1, int(math.ceil(width / cell)))
        self.ny = max(1, int(math.ceil(height / cell)))
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        cx = np.clip(((pts[:, 0] - self.x0) / cell).astype(np.int64), 0, self.nx - 1)
        cy = np.clip(((pts[:, 1] - self.y0) / cell).astype(np.int64), 0, self.ny - 1)
        cid = cy * self.nx + cx
        order = np.argsort(cid, kind="stable")
        self.order = order.astype(np.int64)
        self.xs = np.ascontiguousarray(pts[order, 0])
        self.ys = np.ascontiguousarray(pts[order, 1])
        counts = np.bincount(cid, minlength=self.nx * self.ny)
        self.starts = np.zeros(self.nx * self.ny + 1, dtype=np.int64)
        np.cumsum(counts, out=self.starts[1:])


@njit
def _reach(C, cell, nx, ny):
    # number of cells to scan around the focal cell
    span = nx + ny
    if C >= cell * span:
        return span
    return int(math.ceil(C / cell))


@njit
def _sector_of(dx, dy, q):
    ang = math.atan2(dy, dx)
    if ang < 0.0:
        ang += TWO_PI
    s = int(ang * q / TWO_PI)
    if s >= q:
        s = q - 1
    return s


@njit
def _pcqm_numba(xs, ys, order, starts, nx, ny, x0, y0, cell, fx, fy, q, ell, C):
    n = fx.shape[0]
    out = np.full((n, q), np.nan)
    best_d = np.empty((q, ell))
    best_i = np.empty((q, ell), dtype=np.int64)
    cnt = np.empty(q, dtype=np.int64)
    reach = _reach(C, cell, nx, ny)
    for f in range(n):
        px = fx[f]
        py = fy[f]
        cnt[:] = 0
        cx = int((px - x0) / cell)
        cy = int((py - y0) / cell)
        for gy in range(max(cy - reach, 0), min(cy + reach, ny - 1) + 1):
            for gx in range(max(cx - reach, 0), min(cx + reach, nx - 1) + 1):
                c = gy * nx + gx
                for j in range(starts[c], starts[c + 1]):
                    dx = xs[j] - px
                    dy = ys[j] - py
                    d = math.sqrt(dx * dx + dy * dy)
                    if d > C or d == 0.0:
                        continue
                    s = _sector_of(dx, dy, q)
                    idx = order[j]
                    m = cnt[s]
                    # insertion into the sorted top-ell list, ties by point index
                    pos = m if m < ell else ell
                    while pos > 0 and (best_d[s, pos - 1] > d or
                                       (best_d[s, pos - 1] == d and best_i[s, pos - 1] > idx)):
                        if pos < ell:
                            best_d[s, pos] = best_d[s, pos - 1]
                            best_i[s, pos] = best_i[s, pos - 1]
                        pos -= 1
                    if pos < ell:
                        best_d[s, pos] = d
                        best_i[s, pos] = idx
                        if m < ell:
                            cnt[s] = m + 1
        for s in range(q):
            if cnt[s] >= ell:
                out[f, s] = best_d[s, ell - 1]
    return out


def _pcqm_numpy(xs, ys, order, starts, nx, ny, x0, y0, cell, fx, fy, q, ell, C):
    n = fx.shape[0]
    out = np.full((n, q), np.nan)
    reach = _reach(C, cell, nx, ny)
    for f in range(n):
        px, py = fx[f], fy[f]
        cx = int((px - x0) / cell)
        cy = int((py - y0) / cell)
        gx = np.arange(max(cx - reach, 0), min(cx + reach, nx - 1) + 1)
        gy = np.arange(max(cy - reach, 0), min(cy + reach, ny - 1) + 1)
        cells = (gy[:, None] * nx + gx[None, :]).ravel()
        if cells.size == 0:
            continue
        idx = np.concatenate([np.arange(starts[c], starts[c + 1]) for c in cells])
        dx = xs[idx] - px
        dy = ys[idx] - py
        d = np.sqrt(dx * dx + dy * dy)
        keep = (d <= C) & (d > 0.0)
        if not keep.any():
            continue
        dx, dy, d, pid = dx[keep], dy[keep], d[keep], order[idx[keep]]
        ang = np.arctan2(dy, dx)
        ang = np.where(ang < 0.0, ang + TWO_PI, ang)
        sec = np.minimum((ang * q / TWO_PI).astype(np.int64), q - 1)
        for s in range(q):
            sel = sec == s
            if np.count_nonzero(sel) < ell:
                continue
            ds = d[sel]
            rank = np.lexsort((pid[sel], ds))
            out[f, s] = ds[rank[ell - 1]]
    return out


def pcqm_distances(index, focals, q, ell, C, backend=None):
    """(n, q) array of ell-th neighbour distances per sector; NaN marks censoring."""
    focals = np.asarray(focals, dtype=float).reshape(-1, 2)
    fx = np.ascontiguousarray(focals[:, 0])
    fy = np.ascontiguousarray(focals[:, 1])
    use_numba = NUMBA_ENABLED if backend is None else backend == "numba"
    impl = _pcqm_numba if use_numba else _pcqm_numpy
    return impl(index.xs, index.ys, index.order, index.starts, index.nx, index.ny,
                index.x0, index.y0, index.cell, fx, fy, int(q), int(ell), float(C))
