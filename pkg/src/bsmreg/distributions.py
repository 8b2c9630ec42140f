"""Mean-parameterized beta and beta scale mixture distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .exceptions import DomainError
from .mixing import MixingSpec, sample_mixing
from .numeric import DEFAULT_NODES, _lbeta, QuadratureRule, build_quadrature, expect_mixing

__all__ = [
    "BetaParams",
    "BsmParams",
    "MomentSummary",
    "beta_log_pdf",
    "to_classical",
    "from_classical",
    "beta_moments",
    "bsm_log_pdf",
    "bsm_pdf",
    "bsm_sample",
    "bsm_moments",
    "bsm_variance",
    "raw_moment",
    "tpb_posterior_prob",
    "tpb_classify",
    "quadrature_for",
]


@dataclass(frozen=True)
class BetaParams:
    mu: float
    phi: float

    def __post_init__(self):
        if not (0.0 < self.mu < 1.0):
            raise DomainError(f"mu must lie in (0, 1), got {self.mu!r}")
        if not (self.phi > 0.0 and math.isfinite(self.phi)):
            raise DomainError(f"phi must be positive, got {self.phi!r}")


@dataclass(frozen=True)
class BsmParams:
    base: BetaParams
    mixing: MixingSpec
    quadrature_nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if self.quadrature_nodes < 1:
            raise DomainError("quadrature_nodes must be at least 1")

    @classmethod
    def of(cls, mu, phi, mixing=None, quadrature_nodes=DEFAULT_NODES):
        return cls(BetaParams(mu, phi), mixing or MixingSpec.degenerate(), quadrature_nodes)

    @property
    def mu(self):
        return self.base.mu

    @property
    def phi(self):
        return self.base.phi


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float


def _check_unit(y):
    y_arr = np.asarray(y, dtype=float)
    if np.any(~((y_arr > 0.0) & (y_arr < 1.0))):
        raise DomainError("responses must lie strictly inside (0, 1)")
    return y_arr


def _beta_logpdf_raw(y, mu, phi):
    # no validation; broadcasting over y, mu, phi
    a = mu / phi
    b = (1.0 - mu) / phi
    return (a - 1.0) * np.log(y) + (b - 1.0) * np.log1p(-y) - _lbeta(a, b)


def beta_log_pdf(y, p: BetaParams):
    """Log density of the mean-parameterized beta law at ``y`` in (0, 1)."""
    y_arr = _check_unit(y)
    out = _beta_logpdf_raw(y_arr, p.mu, p.phi)
    return float(out) if np.ndim(out) == 0 else out


def to_classical(p: BetaParams) -> tuple[float, float]:
    """Return the classical shapes ``(alpha, beta) = (mu/phi, (1-mu)/phi)``."""
    return p.mu / p.phi, (1.0 - p.mu) / p.phi


def from_classical(alpha: float, beta: float) -> BetaParams:
    s = alpha + beta
    return BetaParams(alpha / s, 1.0 / s)


def beta_moments(p: BetaParams) -> MomentSummary:
    """Mean, variance, skewness and excess kurtosis from the closed forms."""
    mu, phi = p.mu, p.phi
    q = mu * (1.0 - mu)
    var = q * phi / (1.0 + phi)
    skew = 2.0 * (1.0 - 2.0 * mu) * math.sqrt(1.0 + 1.0 / phi) / ((2.0 + 1.0 / phi) * math.sqrt(q))
    kurt = 6.0 * phi * (1.0 + phi - q * (5.0 + 6.0 * phi)) / (q * (1.0 + 2.0 * phi) * (1.0 + 3.0 * phi))
    return MomentSummary(mu, var, skew, kurt)


@lru_cache(maxsize=512)
def quadrature_for(mixing: MixingSpec, node_count: int = DEFAULT_NODES) -> QuadratureRule:
    """Memoized :func:`build_quadrature`."""
    return build_quadrature(mixing, node_count)


def _mixture_logpdf(y, mu, phi, rule: QuadratureRule):
    # log sum_j w_j f_B(y; mu, phi / node_j); trailing axis runs over nodes
    y = np.asarray(y, dtype=float)[..., None]
    mu = np.asarray(mu, dtype=float)[..., None]
    comp = _beta_logpdf_raw(y, mu, phi / rule.nodes) + rule.log_weights
    if rule.nodes.size == 1:
        return comp[..., 0]
    return logsumexp(comp, axis=-1)


def bsm_log_pdf(y, p: BsmParams):
    """Log density of the beta scale mixture at ``y`` in (0, 1).

    Computed as a max-shifted log-sum-exp over the mixing quadrature nodes.
    """
    y_arr = _check_unit(y)
    rule = quadrature_for(p.mixing, p.quadrature_nodes)
    out = _mixture_logpdf(y_arr, p.mu, p.phi, rule)
    return float(out) if np.ndim(out) == 0 else out


def bsm_pdf(y, p: BsmParams):
    return np.exp(bsm_log_pdf(y, p))


def bsm_sample(p: BsmParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw from the hierarchy ``W ~ h``, ``Y | W ~ Beta(mu w/phi, (1-mu) w/phi)``."""
    n = int(n)
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    w = sample_mixing(p.mixing, rng, n)
    if n == 0:
        return w
    y = rng.beta(p.mu * w / p.phi, (1.0 - p.mu) * w / p.phi)
    # extreme shapes can round a draw onto the boundary
    tiny = np.finfo(float).tiny
    return np.clip(y, tiny, 1.0 - np.finfo(float).epsneg)


def raw_moment(p: BsmParams, k: int) -> float:
    """``E[Y**k]`` as ``E_h[prod_r (mu W + r phi) / (W + r phi)]``."""
    rule = quadrature_for(p.mixing, p.quadrature_nodes)
    mu, phi = p.mu, p.phi

    def g(w):
        out = np.ones_like(w)
        for r in range(k):
            out = out * (mu * w + r * phi) / (w + r * phi)
        return out

    return expect_mixing(g, rule)


def bsm_moments(p: BsmParams) -> MomentSummary:
    """Mean, variance, skewness and excess kurtosis from the raw moments.

    Raw moments ``k = 1..4`` are mixing expectations of the conditional beta
    raw moments; central moments follow by the binomial expansion.
    """
    r1, r2, r3, r4 = (raw_moment(p, k) for k in (1, 2, 3, 4))
    m2 = r2 - r1 ** 2
    m3 = r3 - 3.0 * r1 * r2 + 2.0 * r1 ** 3
    m4 = r4 - 4.0 * r1 * r3 + 6.0 * r1 ** 2 * r2 - 3.0 * r1 ** 4
    return MomentSummary(r1, m2, m3 / m2 ** 1.5, m4 / m2 ** 2 - 3.0)


def bsm_variance(p: BsmParams) -> float:
    """Variance as ``mu (1 - mu) phi E_h[1 / (phi + W)]``."""
    rule = quadrature_for(p.mixing, p.quadrature_nodes)
    return p.mu * (1.0 - p.mu) * p.phi * expect_mixing(lambda w: 1.0 / (p.phi + w), rule)


def _tpb_component_logs(y, mu, phi, theta1, theta2):
    log_ref = math.log(theta1) + _beta_logpdf_raw(y, mu, phi)
    log_con = math.log1p(-theta1) + _beta_logpdf_raw(y, mu, theta2 * phi)
    return log_ref, log_con


def tpb_posterior_prob(y, mu, phi, theta1, theta2):
    """Posterior probability that ``y`` came from the reference beta component."""
    y_arr = _check_unit(y)
    MixingSpec.two_point(theta1, theta2)
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(~((mu_arr > 0.0) & (mu_arr < 1.0))) or not phi > 0.0:
        raise DomainError("mu must lie in (0, 1) and phi must be positive")
    log_ref, log_con = _tpb_component_logs(y_arr, mu_arr, phi, theta1, theta2)
    # 1 / (1 + exp(log_con - log_ref)), evaluated without overflow
    out = np.exp(-np.logaddexp(0.0, log_con - log_ref))
    return float(out) if np.ndim(out) == 0 else out


def tpb_classify(y, mu, phi, theta1, theta2):
    """True where ``y`` is assigned to the reference component (posterior > 0.5)."""
    return np.asarray(tpb_posterior_prob(y, mu, phi, theta1, theta2)) > 0.5
