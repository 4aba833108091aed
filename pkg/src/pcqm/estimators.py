"""Density estimators for point-centred quarter (PCQM) samples.

Complete-data estimators require every sector to be observed. Censored-data
estimators accept sectors recorded only as "distance exceeds C". Every
estimator takes a :class:`DistanceSample` and returns a :class:`DensityEstimate`.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import specfun
from ._kernels import NbdLogLik
from .errors import (
    AllCensoredError,
    DegenerateSampleError,
    DomainError,
    NotApplicableError,
    NumericError,
    OptimizationError,
    PCQMError,
    PreconditionError,
)
from .model import CsrModel, csr_truncated_moment_upper
from .optimize import maximize_1d, maximize_2d
from .specfun import _log_inc_gamma_pair

__all__ = [
    "DistanceSample",
    "DensityEstimate",
    "AdjustedMoment",
    "cottam",
    "pollard",
    "csr_mle_complete",
    "morisita_m1",
    "morisita_m2",
    "shen",
    "shen_k",
    "nbd_mle_complete",
    "warde_petran",
    "dahdouh_koedam",
    "adjusted_moment_poisson",
    "cottam_censored",
    "pollard_censored",
    "csr_mle_censored",
    "adjusted_moment_nbd",
    "shen_censored",
    "morisita_censored",
    "nbd_mle_censored",
    "ESTIMATORS",
    "COMPLETE_ESTIMATORS",
    "CENSORED_ESTIMATORS",
    "run_estimator",
]

K_SENTINEL_LOG = math.log(1e6)


@dataclass(frozen=True, eq=False)
class DistanceSample:
    """PCQM observations on an ``n x q`` grid; ``NaN`` marks a censored sector."""

    distances: np.ndarray
    ell: int = 1
    C: float = math.inf

    def __post_init__(self):
        d = np.array(self.distances, dtype=float)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise DomainError(f"distances must be a non-empty n x q grid, got shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)
        if int(self.ell) != self.ell or self.ell < 1:
            raise DomainError(f"ell must be a positive integer, got {self.ell}")
        object.__setattr__(self, "ell", int(self.ell))
        C = float(self.C)
        if not C > 0:
            raise DomainError(f"censoring radius must be positive, got {C}")
        object.__setattr__(self, "C", C)
        obs = d[~np.isnan(d)]
        if np.any(obs <= 0):
            raise DomainError("distances must be strictly positive (zero distance has no sector)")
        if np.any(obs > C):
            raise DomainError(f"observed distance exceeds the censoring radius C={C}")
        if math.isinf(C) and np.isnan(d).any():
            raise DomainError("censored cells require a finite censoring radius")

    @classmethod
    def from_cells(cls, cells, ell=1, C=math.inf):
        """Build from nested rows where ``None`` marks a censored sector."""
        grid = [[math.nan if v is None else float(v) for v in row] for row in cells]
        return cls(np.array(grid, dtype=float), ell, C)

    @classmethod
    def from_observed(cls, observed, n0=0, n=1, q=None, ell=1, C=math.inf):
        """Pack ``observed`` distances and ``n0`` censored cells into an n x q grid."""
        obs = np.asarray(observed, dtype=float).ravel()
        total = obs.size + int(n0)
        q = total // n if q is None else int(q)
        if n * q != total:
            raise DomainError(f"{obs.size} observed + {n0} censored does not fill {n} x {q}")
        flat = np.concatenate([obs, np.full(int(n0), math.nan)])
        return cls(flat.reshape(n, q), ell, C)

    @property
    def n(self):
        return self.distances.shape[0]

    @property
    def q(self):
        return self.distances.shape[1]

    @property
    def nq(self):
        return self.distances.size

    @property
    def censored(self):
        return np.isnan(self.distances)

    @property
    def n0(self):
        return int(self.censored.sum())

    @property
    def p0(self):
        return self.n0 / self.nq

    @property
    def observed(self):
        """Observed distances, row-major."""
        d = self.distances.ravel()
        return d[~np.isnan(d)]

    def scaled(self, c):
        """Copy with every distance and the radius multiplied by ``c``."""
        return DistanceSample(self.distances * c, self.ell, self.C * c)


@dataclass
class DensityEstimate:
    lambda_hat: float
    estimator_id: str
    k_hat: float | None = None
    valid: bool = True
    warnings: list = field(default_factory=list)

    def invalidate(self, reason):
        self.valid = False
        self.warnings.append(reason)
        return self


@dataclass(frozen=True)
class AdjustedMoment:
    u: float
    value: float
    method: str
    lambda_init: float | None = None


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _require_complete(s, name):
    if s.n0:
        raise PreconditionError(f"{name} requires complete data; sample has {s.n0} censored cells")


def _require_some_observed(s, name):
    if s.n0 >= s.nq:
        raise AllCensoredError(f"{name}: every sector is censored")


def _require_ell1(s, name):
    if s.ell != 1:
        raise NotApplicableError(f"{name} is defined only for ell = 1 (got ell = {s.ell})")


def _estimate(lam, name, k=None):
    est = DensityEstimate(float(lam), name, k)
    if not (math.isfinite(est.lambda_hat) and est.lambda_hat > 0):
        est.invalidate(f"non-positive density estimate {est.lambda_hat:.6g}")
    return est


# --------------------------------------------------------------------------
# complete data
# --------------------------------------------------------------------------

def cottam(s):
    """Cottam-type estimator ``q ell / (4 mean(r)^2)``."""
    _require_complete(s, "cottam")
    r = s.observed
    return _estimate(s.q * s.ell / (4.0 * r.mean() ** 2), "cottam")


def pollard(s):
    """Pollard-type estimator ``q (nq ell - 1) / (pi sum r^2)``."""
    _require_complete(s, "pollard")
    if s.nq * s.ell <= 1:
        raise PreconditionError("pollard requires nq*ell > 1")
    r = s.observed
    return _estimate(s.q * (s.nq * s.ell - 1) / (math.pi * np.sum(r * r)), "pollard")


def csr_mle_complete(s):
    _require_complete(s, "csr_mle_complete")
    r = s.observed
    return _estimate(s.n * s.q ** 2 * s.ell / (math.pi * np.sum(r * r)), "csr_mle_complete")


def morisita_m1(s):
    """Morisita's first estimator; needs ell > 1."""
    _require_complete(s, "morisita_m1")
    if s.ell == 1:
        raise NotApplicableError("morisita_m1 requires ell > 1")
    r = s.observed
    return _estimate((s.ell - 1) / (math.pi * s.n) * np.sum(1.0 / (r * r)), "morisita_m1")


def morisita_m2(s):
    """Morisita's second estimator, built from per-point sums of squares."""
    _require_complete(s, "morisita_m2")
    if s.ell * s.q <= 1:
        raise PreconditionError("morisita_m2 requires ell*q > 1")
    per_point = np.sum(s.distances ** 2, axis=1)
    lam = (s.ell * s.q - 1) / (math.pi * s.n) * np.sum(s.q / per_point)
    return _estimate(lam, "morisita_m2")


def _shen_sums(r):
    return np.sum(1.0 / r), np.sum(r), np.sum(r * r)


def shen(s):
    _require_complete(s, "shen")
    s_inv, s1, s2 = _shen_sums(s.observed)
    q, ell = s.q, s.ell
    lam = q * (2 * ell - 1) * s_inv / (math.pi * s1) - s.n * q * q * ell / (math.pi * s2)
    return _estimate(lam, "shen")


def shen_k(s):
    """Aggregation estimate paired with :func:`shen`; ``lambda_hat`` is Shen's density.

    Solves the NBD moment identities E[1/R]/E[R] = a(k - 1/2)/(k(ell - 1/2)) and
    E[R^2] = k ell/(a(k - 1)) for k, which gives

        k = 1 + ell S1 / ((2 ell - 1) S_inv S2 / nq - 2 ell S1).

    The denominator has mean zero under CSR, so k_hat diverges there.
    """
    _require_complete(s, "shen_k")
    s_inv, s1, s2 = _shen_sums(s.observed)
    ell = s.ell
    denom = (2 * ell - 1) * s_inv * s2 / s.nq - 2 * ell * s1
    if abs(denom) <= 1e-12 * abs(s1 * ell):
        raise DegenerateSampleError("shen_k denominator vanishes (distances carry no aggregation signal)")
    k = 1.0 + s1 * ell / denom
    est = shen(s)
    est.estimator_id = "shen_k"
    est.k_hat = float(k)
    if not (math.isfinite(k) and k > 0):
        est.invalidate(f"aggregation estimate outside (0, inf): {k:.6g}")
    return est


def nbd_mle_complete(s):
    _require_complete(s, "nbd_mle_complete")
    est = _nbd_mle(s)
    est.estimator_id = "nbd_mle_complete"
    return est


# --------------------------------------------------------------------------
# censored data, CSR
# --------------------------------------------------------------------------

def warde_petran(s):
    """Warde-Petranka correction for ell = 1; uncensored samples fall back to Cottam."""
    _require_ell1(s, "warde_petran")
    _require_some_observed(s, "warde_petran")
    if s.n0 == 0:
        est = cottam(s)
        est.estimator_id = "warde_petran"
        return est
    p0 = s.p0
    r = s.observed
    g = math.exp(_log_inc_gamma_pair(1.5, -math.log(p0), 1e-15, 10000)[0])
    lam = s.q / (math.pi * r.mean() ** 2) * g * g / (1.0 - p0) ** 2
    return _estimate(lam, "warde_petran")


def dahdouh_koedam(s):
    _require_ell1(s, "dahdouh_koedam")
    _require_some_observed(s, "dahdouh_koedam")
    r = s.observed
    return _estimate(s.q * (1.0 - s.p0) / (4.0 * r.mean() ** 2), "dahdouh_koedam")


def adjusted_moment_poisson(s, u):
    """Censoring-adjusted sample moment under CSR.

    The observed-sum moment is inflated by ``Gamma(alpha) / gamma(alpha, m_C)``
    with ``alpha = ell + u/2`` and ``m_C`` matched to the censored proportion.
    """
    _require_some_observed(s, "adjusted_moment_poisson")
    u = float(u)
    if u <= -2 * s.ell:
        raise DomainError(f"moment order u={u} requires u > -2*ell")
    r = s.observed
    raw = np.sum(r ** u) / s.nq
    if s.n0 == 0:
        return AdjustedMoment(u, float(raw), "poisson-correction")
    alpha = s.ell + 0.5 * u
    m_c = specfun.solve_m_c(s.ell, s.p0)
    log_lower = specfun.log_lower_inc_gamma(alpha, m_c)
    value = raw * math.exp(math.lgamma(alpha) - log_lower)
    return AdjustedMoment(u, float(value), "poisson-correction")


def cottam_censored(s):
    _require_some_observed(s, "cottam_censored")
    m1 = adjusted_moment_poisson(s, 1.0).value
    return _estimate(s.q * s.ell / (4.0 * m1 * m1), "cottam_censored")


def pollard_censored(s):
    _require_some_observed(s, "pollard_censored")
    if s.nq * s.ell <= 1:
        raise PreconditionError("pollard_censored requires nq*ell > 1")
    m2 = adjusted_moment_poisson(s, 2.0).value
    return _estimate((s.nq * s.ell - 1) / (math.pi * s.n * m2), "pollard_censored")


def _csr_loglik(s, log_lam):
    """Censored CSR log-likelihood as a function of log density."""
    r = s.observed
    ell, q = s.ell, s.q
    a = math.pi * math.exp(log_lam) / q
    ll = (r.size * (math.log(2.0) + ell * math.log(a) - math.lgamma(ell))
          + (2 * ell - 1) * np.sum(np.log(r)) - a * np.sum(r * r))
    if s.n0:
        log_q = _log_inc_gamma_pair(float(ell), a * s.C * s.C, 1e-15, 10000)[1] - math.lgamma(ell)
        ll += s.n0 * log_q
    return float(ll)


def csr_mle_censored(s, method="auto"):
    """Censored CSR maximum likelihood.

    ``method="auto"`` uses the closed form when it exists (ell = 1, or no
    censoring) and golden-section search otherwise; ``"numeric"`` forces the
    search.
    """
    name = "csr_mle_censored"
    r = s.observed
    if method not in ("auto", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto" and s.n0 == 0:
        return _estimate(s.nq * s.q * s.ell / (math.pi * np.sum(r * r)), name)
    if method == "auto" and s.ell == 1:
        if s.n0 == s.nq:
            return DensityEstimate(0.0, name).invalidate("every sector censored: MLE is 0")
        lam = s.q * (s.nq - s.n0) / (math.pi * (np.sum(r * r) + s.n0 * s.C ** 2))
        return _estimate(lam, name)
    _require_some_observed(s, name)
    theta0 = math.log(pollard_censored(s).lambda_hat)
    res = maximize_1d(lambda t: _csr_loglik(s, t),
                      (theta0 - math.log(100.0), theta0 + math.log(100.0)))
    est = _estimate(math.exp(res.argmax[0]), name)
    if not res.converged:
        est.warnings.append("golden-section search hit its iteration cap")
    return est


# --------------------------------------------------------------------------
# censored data, NBD
# --------------------------------------------------------------------------

def _default_lambda_init(s, lambda_init):
    if lambda_init is None:
        est = pollard_censored(s)
        if not est.valid:
            raise NumericError("censored Pollard seed for lambda_init is invalid")
        return est.lambda_hat
    if not (lambda_init > 0 and math.isfinite(lambda_init)):
        raise DomainError(f"lambda_init must be positive, got {lambda_init}")
    return float(lambda_init)


def adjusted_moment_nbd(s, u, lambda_init=None):
    """Sample moment with censored sectors imputed by their CSR tail expectation."""
    _require_some_observed(s, "adjusted_moment_nbd")
    u = float(u)
    r = s.observed
    total = float(np.sum(r ** u))
    if s.n0 == 0:
        return AdjustedMoment(u, total / s.nq, "nbd-imputation", lambda_init)
    lam0 = _default_lambda_init(s, lambda_init)
    tail = csr_truncated_moment_upper(CsrModel(lam0, s.q, s.ell), u, s.C)
    return AdjustedMoment(u, (total + s.n0 * tail) / s.nq, "nbd-imputation", lam0)


def shen_censored(s, lambda_init=None):
    _require_some_observed(s, "shen_censored")
    lam0 = _default_lambda_init(s, lambda_init) if s.n0 else lambda_init
    e_inv = adjusted_moment_nbd(s, -1.0, lam0).value
    e1 = adjusted_moment_nbd(s, 1.0, lam0).value
    e2 = adjusted_moment_nbd(s, 2.0, lam0).value
    q, ell = s.q, s.ell
    lam = q * (2 * ell - 1) * e_inv / (math.pi * e1) - q * ell / (math.pi * e2)
    return _estimate(lam, "shen_censored")


def morisita_censored(s, lambda_init=None):
    if s.ell == 1:
        raise NotApplicableError("morisita_censored requires ell > 1")
    _require_some_observed(s, "morisita_censored")
    lam0 = _default_lambda_init(s, lambda_init) if s.n0 else lambda_init
    e_inv2 = adjusted_moment_nbd(s, -2.0, lam0).value
    return _estimate(s.q * (s.ell - 1) / math.pi * e_inv2, "morisita_censored")


def _nbd_start(s):
    lam0 = pollard_censored(s).lambda_hat
    k0 = 2.0
    if s.n0 == 0:
        try:
            kk = shen_k(s)
            if kk.valid:
                k0 = max(kk.k_hat, 0.5)
        except PCQMError:
            pass
    return lam0, min(k0, 1e5)


def _nbd_mle(s, name="nbd_mle_censored"):
    _require_some_observed(s, name)
    loglik = NbdLogLik(s.observed, s.n0, s.ell, s.q, s.C)
    lam0, k0 = _nbd_start(s)

    def objective(theta, phi):
        if phi > 30.0:
            return -math.inf
        return loglik(theta, phi)

    try:
        res = maximize_2d(objective, (math.log(lam0), math.log(k0)))
    except OptimizationError as exc:
        if exc.best is None:
            raise
        res = exc.best
    theta, phi = res.argmax
    if phi > K_SENTINEL_LOG:
        est = csr_mle_censored(s)
        est.estimator_id = name
        est.k_hat = math.inf
        est.warnings.append("aggregation estimate exceeded 1e6: CSR-consistent, density from CSR MLE")
        return est
    est = _estimate(math.exp(theta), name, math.exp(phi))
    if not res.converged:
        est.warnings.append("Nelder-Mead hit its iteration cap")
    return est


def nbd_mle_censored(s):
    """Joint (lambda, k) maximum likelihood under the NBD model with censoring."""
    return _nbd_mle(s)


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

ESTIMATORS = {
    "cottam": cottam,
    "pollard": pollard,
    "csr_mle_complete": csr_mle_complete,
    "morisita_m1": morisita_m1,
    "morisita_m2": morisita_m2,
    "shen": shen,
    "shen_k": shen_k,
    "nbd_mle_complete": nbd_mle_complete,
    "warde_petran": warde_petran,
    "dahdouh_koedam": dahdouh_koedam,
    "cottam_censored": cottam_censored,
    "pollard_censored": pollard_censored,
    "csr_mle_censored": csr_mle_censored,
    "shen_censored": shen_censored,
    "morisita_censored": morisita_censored,
    "nbd_mle_censored": nbd_mle_censored,
}

COMPLETE_ESTIMATORS = (
    "cottam", "pollard", "csr_mle_complete", "morisita_m1", "morisita_m2",
    "shen", "shen_k", "nbd_mle_complete",
)

# the seven censored estimators compared on field data
CENSORED_ESTIMATORS = (
    "dahdouh_koedam", "cottam_censored", "pollard_censored", "csr_mle_censored",
    "morisita_censored", "shen_censored", "nbd_mle_censored",
)


def canonical_name(name):
    key = name.strip().lower().replace("-", "_")
    if key not in ESTIMATORS:
        raise KeyError(f"unknown estimator {name!r}; choose from {sorted(ESTIMATORS)}")
    return key


def run_estimator(name, s):
    """Apply an estimator, converting package errors into an invalid estimate."""
    key = canonical_name(name)
    try:
        return ESTIMATORS[key](s)
    except NotApplicableError as exc:
        return DensityEstimate(math.nan, key, valid=False, warnings=[f"not-applicable: {exc}"])
    except PCQMError as exc:
        return DensityEstimate(math.nan, key, valid=False, warnings=[f"{type(exc).__name__}: {exc}"])
