"""Special functions: log-gamma, incomplete gamma and incomplete beta.

The scalar kernels (underscore-prefixed) are numba-compilable so the
likelihood kernels can call them from compiled code. Everything is evaluated
in log space where overflow is possible; public wrappers validate arguments
and turn kernel NaNs (non-convergence) into :class:`NumericError`.
"""
import math
from dataclasses import dataclass

from ._jit import njit
from .errors import AllCensoredError, DomainError, NumericError

__all__ = [
    "ToleranceConfig",
    "DEFAULT_TOL",
    "ln_gamma",
    "lower_inc_gamma",
    "upper_inc_gamma",
    "log_lower_inc_gamma",
    "log_upper_inc_gamma",
    "gammainc_p",
    "gammainc_q",
    "reg_inc_beta",
    "reg_inc_beta_complement",
    "log_reg_inc_beta_pair",
    "solve_m_c",
]

FPMIN = 1e-300


@dataclass(frozen=True)
class ToleranceConfig:
    rel_tol: float = 1e-15
    max_iter: int = 10000

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise DomainError(f"rel_tol must lie in (0, 1e-6], got {self.rel_tol}")
        if self.max_iter < 50:
            raise DomainError(f"max_iter must be >= 50, got {self.max_iter}")


DEFAULT_TOL = ToleranceConfig()


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@njit
def _stirling_corr(z):
    z2 = z * z
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z


@njit
def _log_gamma_ratio_scaled(x, d):
    """ln[Gamma(x + d) / (Gamma(x) * x**d)] without cancellation for large x."""
    y = x + d
    if x > 1e3 and y > 1e3:
        return (y - 0.5) * math.log1p(d / x) - d + _stirling_corr(y) - _stirling_corr(x)
    return math.lgamma(y) - math.lgamma(x) - d * math.log(x)


@njit
def _log_gser(a, x, eps, max_iter):
    # log of gamma(a, x) by the power series; valid for x < a + 1
    ap = a
    term = 1.0 / a
    s = term
    for _ in range(max_iter):
        ap += 1.0
        term *= x / ap
        s += term
        if abs(term) < abs(s) * eps:
            return a * math.log(x) - x + math.log(s)
    return math.nan


@njit
def _log_gcf(a, x, eps, max_iter):
    # log of Gamma(a, x) by the Legendre continued fraction (modified Lentz)
    b = x + 1.0 - a
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < FPMIN:
            d = FPMIN
        c = b + an / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return a * math.log(x) - x + math.log(h)
    return math.nan


@njit
def _log_inc_gamma_pair(a, x, eps, max_iter):
    """(log gamma(a, x), log Gamma(a, x)) for a > 0, x >= 0."""
    lg = math.lgamma(a)
    if x == 0.0:
        return -math.inf, lg
    if math.isinf(x):
        return lg, -math.inf
    if x < a + 1.0:
        lo = _log_gser(a, x, eps, max_iter)
        if math.isnan(lo):
            return math.nan, math.nan
        p = math.exp(lo - lg)
        if p >= 1.0:
            return lo, -math.inf
        return lo, lg + math.log1p(-p)
    up = _log_gcf(a, x, eps, max_iter)
    if math.isnan(up):
        return math.nan, math.nan
    return lg + math.log1p(-math.exp(up - lg)), up


@njit
def _log_gammainc_q(a, x, eps, max_iter):
    """log of the regularized upper incomplete gamma Q(a, x)."""
    up = _log_inc_gamma_pair(a, x, eps, max_iter)[1]
    return up - math.lgamma(a)


@njit
def _log_inv_beta(a, b):
    # -ln B(a, b), stable when one argument is large
    if b >= a:
        return _log_gamma_ratio_scaled(b, a) + a * math.log(b) - math.lgamma(a)
    return _log_gamma_ratio_scaled(a, b) + b * math.log(a) - math.lgamma(b)


@njit
def _betacf(a, b, x, eps, max_iter):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return math.nan


@njit
def _log_betainc_pair(x, y, a, b, eps, max_iter):
    """(log I_x(a, b), log[1 - I_x(a, b)]) with y = 1 - x supplied by the caller."""
    if x <= 0.0:
        return -math.inf, 0.0
    if y <= 0.0:
        return 0.0, -math.inf
    front = a * math.log(x) + b * math.log(y) + _log_inv_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        cf = _betacf(a, b, x, eps, max_iter)
        if math.isnan(cf):
            return math.nan, math.nan
        li = front + math.log(cf) - math.log(a)
        if li >= 0.0:
            return 0.0, -math.inf
        return li, math.log1p(-math.exp(li))
    cf = _betacf(b, a, y, eps, max_iter)
    if math.isnan(cf):
        return math.nan, math.nan
    lc = front + math.log(cf) - math.log(b)
    if lc >= 0.0:
        return -math.inf, 0.0
    return math.log1p(-math.exp(lc)), lc


# --------------------------------------------------------------------------
# public wrappers
# --------------------------------------------------------------------------

def _check_positive(name, v):
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"{name} must be positive and finite, got {v}")


def _check_x(x):
    if math.isnan(x) or x < 0:
        raise DomainError(f"x must be non-negative, got {x}")


def ln_gamma(a):
    """Natural log of the complete gamma function for ``a > 0``."""
    a = float(a)
    _check_positive("a", a)
    return math.lgamma(a)


def _pair(a, x, tol):
    a = float(a)
    x = float(x)
    _check_positive("a", a)
    _check_x(x)
    lo, up = _log_inc_gamma_pair(a, x, tol.rel_tol, tol.max_iter)
    if math.isnan(lo):
        raise NumericError(f"incomplete gamma did not converge for a={a}, x={x}")
    return lo, up


def _exp(v, what):
    try:
        return math.exp(v)
    except OverflowError:
        raise NumericError(f"{what} overflows double precision; use the log_ variant") from None


def log_lower_inc_gamma(a, x, tol=DEFAULT_TOL):
    return _pair(a, x, tol)[0]


def log_upper_inc_gamma(a, x, tol=DEFAULT_TOL):
    return _pair(a, x, tol)[1]


def lower_inc_gamma(a, x, tol=DEFAULT_TOL):
    """gamma(a, x) = integral of t**(a-1) exp(-t) over [0, x]."""
    return _exp(_pair(a, x, tol)[0], "gamma(a, x)")


def upper_inc_gamma(a, x, tol=DEFAULT_TOL):
    """Gamma(a, x) = integral of t**(a-1) exp(-t) over [x, inf)."""
    return _exp(_pair(a, x, tol)[1], "Gamma(a, x)")


def gammainc_p(a, x, tol=DEFAULT_TOL):
    """Regularized lower incomplete gamma P(a, x)."""
    return math.exp(_pair(a, x, tol)[0] - math.lgamma(float(a)))


def gammainc_q(a, x, tol=DEFAULT_TOL):
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    return math.exp(_pair(a, x, tol)[1] - math.lgamma(float(a)))


def log_reg_inc_beta_pair(w, a, b, w_complement=None, tol=DEFAULT_TOL):
    """Return ``(log I_w(a, b), log(1 - I_w(a, b)))``.

    Pass ``w_complement`` (= 1 - w) when it is known more accurately than
    ``1 - w`` would be in floating point.
    """
    w = float(w)
    a = float(a)
    b = float(b)
    if math.isnan(w) or w < 0.0 or w > 1.0:
        raise DomainError(f"w must lie in [0, 1], got {w}")
    _check_positive("a", a)
    _check_positive("b", b)
    y = 1.0 - w if w_complement is None else float(w_complement)
    li, lc = _log_betainc_pair(w, y, a, b, tol.rel_tol, tol.max_iter)
    if math.isnan(li):
        raise NumericError(f"incomplete beta did not converge for w={w}, a={a}, b={b}")
    return li, lc


def reg_inc_beta(w, a, b, tol=DEFAULT_TOL):
    """Regularized incomplete beta function I_w(a, b)."""
    return math.exp(log_reg_inc_beta_pair(w, a, b, tol=tol)[0])


def reg_inc_beta_complement(w, a, b, w_complement=None, tol=DEFAULT_TOL):
    """1 - I_w(a, b), computed without subtractive cancellation."""
    return math.exp(log_reg_inc_beta_pair(w, a, b, w_complement, tol)[1])


def solve_m_c(ell, p0, tol=DEFAULT_TOL):
    """Expected sector count m with P(ell, m) = 1 - p0.

    ``p0`` is the censored proportion. ``p0 == 0`` returns ``math.inf``,
    the uncensored signal: callers bypass the adjustment. ``ell == 1`` uses the
    exact root ``-log(p0)``; other orders bisect on the decreasing Q(ell, m).
    """
    ell = int(ell)
    if ell < 1:
        raise DomainError(f"ell must be a positive integer, got {ell}")
    p0 = float(p0)
    if math.isnan(p0) or p0 < 0.0:
        raise DomainError(f"p0 must lie in [0, 1), got {p0}")
    if p0 >= 1.0:
        raise AllCensoredError("p0 >= 1: every sector censored, m_C undefined")
    if p0 == 0.0:
        return math.inf
    if ell == 1:
        return -math.log(p0)

    def resid(m):
        return math.exp(_log_gammainc_q(float(ell), m, tol.rel_tol, tol.max_iter)) - p0

    lo, hi = 1e-12, 1.0
    if resid(lo) <= 0.0:
        return lo
    while resid(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise NumericError(f"no bracket for m_C (ell={ell}, p0={p0})")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if resid(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return 0.5 * (lo + hi)
