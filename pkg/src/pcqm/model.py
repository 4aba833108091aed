"""Distance distributions under the Poisson (CSR) and negative-binomial models.

Both models describe R, the distance from a sampling point to the ``ell``-th
nearest individual inside one of ``q`` equal-angle sectors. Throughout,
``a = pi * lambda / q`` is the expected count per unit squared radius, so the
expected count in a sector of radius r is ``a * r**2``.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import DomainError, NumericError
from .specfun import _log_betainc_pair, _log_gamma_ratio_scaled, _log_inc_gamma_pair

__all__ = [
    "CsrModel",
    "NbdModel",
    "csr_pdf",
    "csr_logpdf",
    "csr_cdf",
    "csr_sf",
    "csr_moment",
    "csr_truncated_moment_upper",
    "csr_truncated_moment_lower",
    "nbd_pdf",
    "nbd_logpdf",
    "nbd_cdf",
    "nbd_sf",
    "nbd_moment",
    "nbd_truncated_moment_upper",
    "nbd_truncated_moment_lower",
    "delta1",
    "asymptotic_bias_pair",
]

_EPS = specfun.DEFAULT_TOL.rel_tol
_MAXIT = specfun.DEFAULT_TOL.max_iter
_LOG_TINY = math.log(1e-300)


def _check_common(lam, q, ell):
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"lambda must be positive, got {lam}")
    if int(q) != q or q < 1:
        raise DomainError(f"q must be a positive integer, got {q}")
    if int(ell) != ell or ell < 1:
        raise DomainError(f"ell must be a positive integer, got {ell}")


@dataclass(frozen=True)
class CsrModel:
    lam: float
    q: int = 4
    ell: int = 1

    def __post_init__(self):
        _check_common(self.lam, self.q, self.ell)

    @property
    def a(self):
        return math.pi * self.lam / self.q


@dataclass(frozen=True)
class NbdModel:
    lam: float
    k: float
    q: int = 4
    ell: int = 1

    def __post_init__(self):
        _check_common(self.lam, self.q, self.ell)
        if not (self.k > 0 and not math.isnan(self.k)):
            raise DomainError(f"k must be positive, got {self.k}")

    @property
    def a(self):
        return math.pi * self.lam / self.q

    def as_csr(self):
        return CsrModel(self.lam, self.q, self.ell)


def _positive_r(r):
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("distances must be positive")
    return arr


def _nonneg_r(r):
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError("distances must be non-negative")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


# --------------------------------------------------------------------------
# CSR
# --------------------------------------------------------------------------

def csr_logpdf(m, r):
    r = _positive_r(r)
    a, ell = m.a, m.ell
    out = (math.log(2.0) + ell * math.log(a) - math.lgamma(ell)
           + (2 * ell - 1) * np.log(r) - a * r * r)
    return _out(out)


def csr_pdf(m, r):
    """Density of the ell-th neighbour distance in a sector under CSR."""
    return _out(np.exp(csr_logpdf(m, r)))


def _csr_log_cdf_sf(m, r):
    t = m.a * r * r
    lo, up = _log_inc_gamma_pair(float(m.ell), t, _EPS, _MAXIT)
    if math.isnan(lo):
        raise NumericError(f"incomplete gamma failed at T={t}")
    lg = math.lgamma(m.ell)
    return lo - lg, up - lg


def csr_cdf(m, r):
    """P(R <= r) = P(ell, a r^2)."""
    r = _nonneg_r(r)
    f = np.vectorize(lambda x: math.exp(_csr_log_cdf_sf(m, x)[0]), otypes=[float])
    return _out(f(r))


def csr_sf(m, r):
    """P(R > r), evaluated directly rather than as 1 - cdf."""
    r = _nonneg_r(r)
    f = np.vectorize(lambda x: math.exp(_csr_log_cdf_sf(m, x)[1]), otypes=[float])
    return _out(f(r))


def csr_moment(m, u):
    """E[R^u] = (q / (pi lambda))^(u/2) Gamma(ell + u/2) / (ell - 1)!."""
    u = float(u)
    if u <= -2 * m.ell:
        raise DomainError(f"moment order u={u} requires u > -2*ell = {-2 * m.ell}")
    return math.exp(-0.5 * u * math.log(m.a) + math.lgamma(m.ell + 0.5 * u) - math.lgamma(m.ell))


def csr_truncated_moment_upper(m, u, C):
    """E[R^u | R > C] = a^(-u/2) Gamma(ell + u/2, aC^2) / Gamma(ell, aC^2)."""
    u = float(u)
    C = float(C)
    if not C > 0:
        raise DomainError(f"C must be positive, got {C}")
    alpha = m.ell + 0.5 * u
    if alpha <= 0:
        raise DomainError(f"u={u} requires ell + u/2 > 0")
    t = m.a * C * C
    num = _log_inc_gamma_pair(alpha, t, _EPS, _MAXIT)[1]
    den = _log_inc_gamma_pair(float(m.ell), t, _EPS, _MAXIT)[1]
    if math.isnan(num) or math.isnan(den):
        raise NumericError(f"incomplete gamma failed at T={t}")
    if den - math.lgamma(m.ell) < _LOG_TINY:
        raise NumericError(
            f"P(R > C) below 1e-300 (lambda={m.lam}, C={C}, ell={m.ell}); "
            "conditional tail moment is not representable")
    return math.exp(-0.5 * u * math.log(m.a) + num - den)


def csr_truncated_moment_lower(m, u, C):
    """E[R^u | R <= C] = gamma(ell + u/2, m_C) (q/(pi lambda))^(u/2) / ((ell-1)! P)."""
    u = float(u)
    C = float(C)
    if not C > 0:
        raise DomainError(f"C must be positive, got {C}")
    if u <= -2 * m.ell:
        raise DomainError(f"moment order u={u} requires u > -2*ell")
    if math.isinf(C):
        return csr_moment(m, u)
    t = m.a * C * C
    num = _log_inc_gamma_pair(m.ell + 0.5 * u, t, _EPS, _MAXIT)[0]
    log_p = _csr_log_cdf_sf(m, C)[0]
    if log_p == -math.inf:
        raise NumericError("P(R <= C) = 0; lower truncated moment undefined")
    return math.exp(-0.5 * u * math.log(m.a) + num - math.lgamma(m.ell) - log_p)


# --------------------------------------------------------------------------
# NBD
# --------------------------------------------------------------------------

def nbd_logpdf(m, r):
    r = _positive_r(r)
    a, k, ell = m.a, float(m.k), m.ell
    const = (math.log(2.0) + ell * math.log(a) - math.lgamma(ell)
             + _log_gamma_ratio_scaled(k, float(ell)))
    out = const + (2 * ell - 1) * np.log(r) - (ell + k) * np.log1p(a * r * r / k)
    return _out(out)


def nbd_pdf(m, r):
    """Density of the ell-th neighbour distance in a sector under the NBD model."""
    return _out(np.exp(nbd_logpdf(m, r)))


def _nbd_w(m, r):
    t = m.a * r * r
    k = float(m.k)
    return t / (t + k), k / (t + k)


def _nbd_log_cdf_sf(m, r, da=0.0):
    # I_w(ell + da, k - da) and its complement with w = a r^2 / (a r^2 + k)
    if math.isinf(r):
        return 0.0, -math.inf
    w, wc = _nbd_w(m, r)
    li, lc = _log_betainc_pair(w, wc, float(m.ell + da), float(m.k - da), _EPS, _MAXIT)
    if math.isnan(li):
        raise NumericError(f"incomplete beta failed at w={w}")
    return li, lc


def nbd_cdf(m, r):
    """P(R <= r) = I_w(ell, k), w = a r^2 / (a r^2 + k)."""
    r = _nonneg_r(r)
    f = np.vectorize(lambda x: math.exp(_nbd_log_cdf_sf(m, x)[0]), otypes=[float])
    return _out(f(r))


def nbd_sf(m, r):
    r = _nonneg_r(r)
    f = np.vectorize(lambda x: math.exp(_nbd_log_cdf_sf(m, x)[1]), otypes=[float])
    return _out(f(r))


def _nbd_log_moment(m, u):
    u = float(u)
    if not (-2 * m.ell < u < 2 * m.k):
        raise DomainError(f"NBD moment of order u={u} requires -2*ell < u < 2*k")
    k = float(m.k)
    # (k/a)^(u/2) Gamma(k - u/2)/Gamma(k) = a^(-u/2) * exp(scaled ratio)
    return (-0.5 * u * math.log(m.a) + _log_gamma_ratio_scaled(k, -0.5 * u)
            + math.lgamma(m.ell + 0.5 * u) - math.lgamma(m.ell))


def nbd_moment(m, u):
    """E[R^u] = (kq/(pi lambda))^(u/2) Gamma(ell+u/2) Gamma(k-u/2) / (Gamma(ell) Gamma(k))."""
    return math.exp(_nbd_log_moment(m, u))


def nbd_truncated_moment_upper(m, u, C):
    """E[R^u | R > C] under the NBD model, exact via incomplete beta complements."""
    C = float(C)
    if not C >= 0:
        raise DomainError(f"C must be non-negative, got {C}")
    base = _nbd_log_moment(m, u)
    if C == 0:
        return math.exp(base)
    u = float(u)
    num = _nbd_log_cdf_sf(m, C, 0.5 * u)[1]
    den = _nbd_log_cdf_sf(m, C)[1]
    if den < _LOG_TINY:
        raise NumericError(f"P(R > C) below 1e-300 (C={C}); tail moment not representable")
    return math.exp(base + num - den)


def nbd_truncated_moment_lower(m, u, C):
    """E[R^u | R <= C] under the NBD model."""
    C = float(C)
    if not C > 0:
        raise DomainError(f"C must be positive, got {C}")
    base = _nbd_log_moment(m, u)
    if math.isinf(C):
        return math.exp(base)
    num = _nbd_log_cdf_sf(m, C, 0.5 * float(u))[0]
    den = _nbd_log_cdf_sf(m, C)[0]
    if den == -math.inf:
        raise NumericError("P(R <= C) = 0; lower truncated moment undefined")
    return math.exp(base + num - den)


# --------------------------------------------------------------------------
# first-order CSR approximation diagnostics
# --------------------------------------------------------------------------

def delta1(ell, u, lam, q, C):
    """First-order 1/k coefficient of E_NBD[R^u | R > C] about its CSR limit.

    E_NBD[R^u | R > C] = E_CSR[R^u | R > C] + delta1 / k + O(1/k^2).
    """
    m = CsrModel(lam, q, ell)
    C = float(C)
    if not C > 0:
        raise DomainError(f"C must be positive, got {C}")
    u = float(u)
    alpha = ell + 0.5 * u
    if alpha <= 0:
        raise DomainError(f"u={u} requires ell + u/2 > 0")
    if u == 0.0:
        return 0.0  # R^0 = 1 under both models
    a = m.a
    t = a * C * C

    def lg(s):
        v = _log_inc_gamma_pair(float(s), t, _EPS, _MAXIT)[1]
        if math.isnan(v):
            raise NumericError(f"incomplete gamma failed at T={t}")
        return v

    g_l = lg(ell)
    terms = (
        (-ell, lg(alpha + 1) + g_l),
        (0.5, lg(alpha + 2) + g_l),
        (ell, lg(alpha) + lg(ell + 1)),
        (-0.5, lg(alpha) + lg(ell + 2)),
    )
    ref = max(v for _, v in terms)
    total = sum(c * math.exp(v - ref) for c, v in terms)
    return a ** (-0.5 * u) * total * math.exp(ref - 2.0 * g_l)


def asymptotic_bias_pair(m, u, C):
    """Large-sample biases of the two censoring-adjusted moments under NBD truth.

    Returns ``(bias_poisson, bias_imputed)``: the limit of the Poisson-corrected
    moment ``M_u`` minus E[R^u], and the limit of the CSR-imputed moment (with
    the density seed taken from the censored Pollard limit) minus E[R^u].
    """
    u = float(u)
    if not m.k > 1:
        raise DomainError("second-moment limit requires k>1")
    if not m.k > 0.5 * u:
        raise DomainError(f"moment of order u={u} requires k > u/2")
    C = float(C)
    if not C > 0:
        raise DomainError(f"C must be positive, got {C}")
    if u == 0.0:
        return 0.0, 0.0
    mu_star = nbd_moment(m, u)
    if math.isinf(C):
        return 0.0, 0.0
    log_p_obs, log_p0 = _nbd_log_cdf_sf(m, C)
    p0 = math.exp(log_p0)
    if p0 == 0.0:
        return 0.0, 0.0
    m_c = specfun.solve_m_c(m.ell, p0)

    def poisson_limit(order):
        alpha = m.ell + 0.5 * order
        e_low = nbd_truncated_moment_lower(m, order, C)
        log_lower = _log_inc_gamma_pair(alpha, m_c, _EPS, _MAXIT)[0]
        return e_low * math.exp(math.lgamma(alpha) - log_lower) * (1.0 - p0)

    mu_limit = poisson_limit(u)
    m2_limit = poisson_limit(2.0)
    lam_init = m.ell * m.q / (math.pi * m2_limit)
    tail = csr_truncated_moment_upper(CsrModel(lam_init, m.q, m.ell), u, C)
    e_limit = (1.0 - p0) * nbd_truncated_moment_lower(m, u, C) + p0 * tail
    return mu_limit - mu_star, e_limit - mu_star
