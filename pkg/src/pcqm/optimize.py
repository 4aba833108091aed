"""Bounded derivative-free maximisation.

Both routines maximise; callers pass objectives over log-parameters so
positivity is automatic. Non-finite objective values are treated as -inf.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import OptimizationError

__all__ = ["OptimResult", "maximize_1d", "maximize_2d", "fd_gradient"]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# fixed restart offsets (log-parameter units), cycled deterministically
_RESTART_OFFSETS = ((0.25, -0.35), (-0.3, 0.45), (0.15, 0.9))


@dataclass
class OptimResult:
    argmax: np.ndarray
    value: float
    iterations: int
    converged: bool


def _safe(objective):
    def f(*x):
        v = objective(*x)
        v = float(v)
        return v if math.isfinite(v) else -math.inf
    return f


def _width_ok(lo, hi, tol):
    return hi - lo <= tol * max(1.0, abs(0.5 * (lo + hi)))


def maximize_1d(objective, bracket, tol=1e-10, max_iter=500, n_probe=24, max_expand=20,
                polish=True):
    """Golden-section ascent.

    The bracket is first scanned on ``n_probe`` equispaced points; the best
    probe and its neighbours seed the golden-section interval. A best probe at
    an edge triggers outward expansion (the bracket is treated as a starting
    guess, at most ``max_expand`` widenings). ``polish`` adds finite-difference
    Newton steps, as in :func:`maximize_2d`.
    """
    lo, hi = (float(v) for v in bracket)
    if not lo < hi:
        raise ValueError(f"bracket must satisfy lo < hi, got {bracket}")
    f = _safe(objective)
    xs = list(np.linspace(lo, hi, n_probe))
    fs = [f(x) for x in xs]
    if all(v == -math.inf for v in fs):
        raise OptimizationError("objective non-finite on the whole probe grid")
    step = xs[1] - xs[0]
    iters = 0
    for _ in range(max_expand):
        i = int(np.argmax(fs))
        if 0 < i < len(xs) - 1:
            break
        if i == 0:
            xs.insert(0, xs[0] - step)
            fs.insert(0, f(xs[0]))
        else:
            xs.append(xs[-1] + step)
            fs.append(f(xs[-1]))
        step *= 2.0
        iters += 1
    i = int(np.argmax(fs))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, len(xs) - 1)]
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    converged = False
    for _ in range(max_iter):
        if _width_ok(a, b, tol):
            converged = True
            break
        iters += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x_best, f_best = (c, fc) if fc >= fd else (d, fd)
    if fs[i] > f_best:
        x_best, f_best = xs[i], fs[i]
    x_best = np.array([x_best])
    if polish and math.isfinite(f_best):
        x_best, f_best = _newton_polish(f, x_best, f_best)
    return OptimResult(x_best, f_best, iters, converged)


def _nelder_mead(f, x0, scale, tol, xtol, max_iter):
    # standard coefficients; minimises g = -f
    n = 2
    simplex = np.empty((n + 1, n))
    simplex[0] = x0
    for j in range(n):
        v = np.array(x0, dtype=float)
        v[j] += scale
        simplex[j + 1] = v
    vals = np.array([-f(*v) for v in simplex])
    it = 0
    converged = False
    while True:
        order = np.argsort(vals, kind="stable")
        simplex, vals = simplex[order], vals[order]
        spread = vals[-1] - vals[0]
        diam = np.max(np.abs(simplex[1:] - simplex[0]))
        if np.isfinite(spread) and (
                spread == 0.0 or (spread <= tol * max(1.0, abs(vals[0])) and diam <= xtol)):
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = -f(*xr)
        if fr < vals[0]:
            xe = centroid + 2.0 * (centroid - simplex[-1])
            fe = -f(*xe)
            if fe < fr:
                simplex[-1], vals[-1] = xe, fe
            else:
                simplex[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            simplex[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = -f(*xc)
            if fc <= fr:
                simplex[-1], vals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (simplex[-1] - centroid)
            fc = -f(*xc)
            if fc < vals[-1]:
                simplex[-1], vals[-1] = xc, fc
                continue
        # shrink toward the best vertex
        for j in range(1, n + 1):
            simplex[j] = simplex[0] + 0.5 * (simplex[j] - simplex[0])
            vals[j] = -f(*simplex[j])
    return simplex[0].copy(), -vals[0], it, converged


def fd_gradient(f, x, h=1e-5):
    """Central-difference gradient of ``f(*x)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (f(*(x + e)) - f(*(x - e))) / (2.0 * h)
    return g


def _fd_hessian(f, x, h=1e-4):
    n = x.size
    H = np.empty((n, n))
    f0 = f(*x)
    eye = np.eye(n) * h
    for i in range(n):
        H[i, i] = (f(*(x + eye[i])) - 2.0 * f0 + f(*(x - eye[i]))) / (h * h)
        for j in range(i):
            H[i, j] = H[j, i] = (f(*(x + eye[i] + eye[j])) - f(*(x + eye[i] - eye[j]))
                                 - f(*(x - eye[i] + eye[j])) + f(*(x - eye[i] - eye[j]))) / (4 * h * h)
    return H


def _newton_polish(f, x, v, steps=4, max_step=0.05):
    # Value comparisons stall once differences reach rounding noise (large
    # sums); difference quotients average that noise out, so a few Newton
    # steps on them finish the job. A step is kept only if it shrinks the
    # gradient without a material loss in value.
    g = fd_gradient(f, x)
    if not np.all(np.isfinite(g)):
        return x, v
    noise = 1e-12 * max(1.0, abs(v))
    for _ in range(steps):
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        H = _fd_hessian(f, x)
        if not np.all(np.isfinite(H)) or np.any(np.linalg.eigvalsh(H) >= 0.0):
            break
        dx = -np.linalg.solve(H, g)
        big = np.max(np.abs(dx))
        if big > max_step:
            dx *= max_step / big
        xn = x + dx
        vn = f(*xn)
        if not vn >= v - noise:
            break
        gnew = fd_gradient(f, xn)
        if not (np.all(np.isfinite(gnew)) and np.linalg.norm(gnew) < gn):
            break
        x, v, g = xn, vn, gnew
    return x, v


def maximize_2d(objective, start, tol=1e-10, xtol=1e-9, max_iter=2000, scale=0.1, restarts=3,
                polish=True):
    """Nelder-Mead ascent with deterministic restarts.

    A run converges when the spread of vertex values is at most ``tol``
    relative and the simplex diameter is at most ``xtol`` (or the values are
    exactly tied, e.g. a flat objective). After the first run, ``restarts``
    further runs start from the best point shifted by fixed offsets; the best
    of all runs is returned, optionally refined by finite-difference Newton
    steps (``polish``) when the maximum is interior and strictly concave.
    """
    f = _safe(objective)
    x0 = np.asarray(start, dtype=float).reshape(2)
    if f(*x0) == -math.inf:
        raise OptimizationError("objective is not finite at the start point")
    best_x, best_v, best_conv, total, any_conv = None, -math.inf, False, 0, False
    starts = [x0]
    for r in range(restarts + 1):
        if r > 0:
            base = best_x if best_x is not None else x0
            starts.append(base + np.array(_RESTART_OFFSETS[(r - 1) % len(_RESTART_OFFSETS)]))
        xs = starts[-1]
        if f(*xs) == -math.inf:
            continue
        x, v, it, conv = _nelder_mead(f, xs, scale, tol, xtol, max_iter)
        total += it
        any_conv = any_conv or conv
        if v > best_v or best_x is None:
            best_x, best_v, best_conv = x, v, conv
    if best_x is None:
        raise OptimizationError("no restart produced a finite objective")
    if not any_conv:
        raise OptimizationError("Nelder-Mead did not converge in any restart",
                                best=OptimResult(best_x, best_v, total, False))
    if polish:
        best_x, best_v = _newton_polish(f, best_x, best_v)
    return OptimResult(best_x, best_v, total, best_conv)
