"""EM estimation for the two-point (variance-inflated) beta regression."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, expit

from .distributions import _beta_logpdf_raw
from .exceptions import ConvergenceError, DomainError
from .mixing import MixingKind, MixingSpec
from .numeric import minimize
from .regression import (Dataset, FitOptions, FitResult, RegressionModel, _build_result,
                         fit_mle, log_likelihood, natural_vector, to_working)

logger = logging.getLogger(__name__)

__all__ = ["EmTrace", "EmOptions", "e_step", "m_step_theta1", "m_step_q2", "q2_value", "em_fit"]

THETA1_CLIP = 1e-8
ASCENT_SLACK = 1e-10


@dataclass
class EmTrace:
    loglik_path: list = field(default_factory=list)
    responsibilities: np.ndarray | None = None
    iterations: int = 0
    converged: bool = False


@dataclass
class EmOptions:
    tol: float = 1e-8
    param_tol: float = 1e-7
    max_iter: int = 1000
    inner_tol: float = 1e-6
    nodes: int = 64
    compute_se: bool = True
    theta1_start: float = 0.95
    theta2_start: float = 2.0


def _component_logs(model: RegressionModel, data: Dataset):
    mu = model.mean(data.design)
    m = model.mixing
    log_ref = math.log(m.theta1) + _beta_logpdf_raw(data.response, mu, model.phi)
    log_con = math.log1p(-m.theta1) + _beta_logpdf_raw(data.response, mu, m.theta2 * model.phi)
    return log_ref, log_con


def e_step(model: RegressionModel, data: Dataset) -> np.ndarray:
    """Posterior reference-component probabilities ``z_i``.

    ``z_i = 1 / (1 + exp(log_con_i - log_ref_i))``, so ``z_i`` and its
    complement ``expit(log_con_i - log_ref_i)`` sum to one.
    """
    if model.family is not MixingKind.TWO_POINT:
        raise DomainError("e_step needs a two-point mixing model")
    log_ref, log_con = _component_logs(model, data)
    return expit(log_ref - log_con)


def m_step_theta1(z) -> float:
    """Closed-form update: the mean responsibility, clipped away from 0 and 1."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise DomainError("m_step_theta1 needs at least one responsibility")
    return float(np.clip(math.fsum(z) / z.size, THETA1_CLIP, 1.0 - THETA1_CLIP))


def q2_value(z, data: Dataset, beta, phi, theta2) -> float:
    """Expected complete-data log-likelihood term depending on (beta, phi, theta2)."""
    mu = expit(data.design @ np.asarray(beta, dtype=float))
    y = data.response
    ref = _beta_logpdf_raw(y, mu, phi)
    con = _beta_logpdf_raw(y, mu, theta2 * phi)
    return math.fsum(z * ref + (1.0 - z) * con)


def _beta_score(y, mu, s):
    """Derivatives of the beta log-density in ``mu`` and in ``log s`` (scale ``s``)."""
    a = mu / s
    b = (1.0 - mu) / s
    lo, l1 = np.log(y), np.log1p(-y)
    psi_a, psi_b, psi_t = digamma(a), digamma(b), digamma(1.0 / s)
    d_mu = (lo - l1 - psi_a + psi_b) / s
    d_logs = -a * (lo - psi_a) - b * (l1 - psi_b) - psi_t / s
    return d_mu, d_logs


def m_step_q2(z, data: Dataset, warm, inner_tol=1e-6, fixed_theta2=None):
    """Maximize the weighted two-component beta log-likelihood.

    Parameters
    ----------
    z : array_like
        Responsibilities from :func:`e_step`.
    data : Dataset
    warm : tuple
        ``(beta, phi, theta2)`` to start from.
    inner_tol : float
        Tolerance of the inner optimizer. Its result is then refined by
        Newton steps on the analytic score, since a value-based line search
        alone leaves ``theta2`` uncertain at the 1e-6 level.
    fixed_theta2 : float, optional
        Hold ``theta2`` at this value (``1`` is allowed) and optimize only
        ``beta`` and ``phi``.

    Returns
    -------
    tuple
        Updated ``(beta, phi, theta2)``.
    """
    z = np.asarray(z, dtype=float)
    beta0, phi0, theta2_0 = warm
    beta0 = np.asarray(beta0, dtype=float)
    k = beta0.size

    if fixed_theta2 is None:
        x0 = np.concatenate([beta0, [math.log(phi0), math.log(theta2_0 - 1.0)]])

        def unpack(x):
            return x[:k], math.exp(x[k]), 1.0 + math.exp(x[k + 1])
    else:
        x0 = np.concatenate([beta0, [math.log(phi0)]])

        def unpack(x):
            return x[:k], math.exp(x[k]), float(fixed_theta2)

    def objective(x):
        if abs(x[k]) > 50.0 or (fixed_theta2 is None and x[k + 1] > 40.0):
            return math.inf
        beta, phi, t2 = unpack(x)
        with np.errstate(all="ignore"):
            val = -q2_value(z, data, beta, phi, t2)
        return val if math.isfinite(val) else math.inf

    X, y = data.design, data.response

    def gradient(x):
        beta, phi, t2 = unpack(x)
        mu = expit(X @ beta)
        with np.errstate(all="ignore"):
            r_mu, r_s = _beta_score(y, mu, phi)
            c_mu, c_s = _beta_score(y, mu, t2 * phi)
        d_mu = z * r_mu + (1.0 - z) * c_mu
        g = np.empty(x.size)
        g[:k] = X.T @ (d_mu * mu * (1.0 - mu))
        g[k] = math.fsum(z * r_s + (1.0 - z) * c_s)
        if fixed_theta2 is None:
            g[k + 1] = math.fsum((1.0 - z) * c_s) * (t2 - 1.0) / t2
        return -g

    try:
        res = minimize(objective, x0, tol=inner_tol, gtol=inner_tol, simplex=False, gradient=gradient)
    except Exception as exc:
        raise ConvergenceError(f"M-step failed from warm start {warm!r}: {exc}") from exc
    return unpack(_newton_polish(objective, gradient, res.argmin, res.value))


def _newton_polish(objective, gradient, x, fx, steps=3):
    """Refine a line-search optimum with Newton steps on the analytic score.

    Value-based line searches cannot resolve moves below about
    ``sqrt(rounding noise / curvature)``; the score carries far less noise.
    A step is kept only if the objective does not rise beyond rounding.
    """
    slack = 1e-12 * max(1.0, abs(fx))
    for _ in range(steps):
        g = gradient(x)
        if not np.all(np.isfinite(g)):
            break
        h = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.abs(x))
        H = np.empty((x.size, x.size))
        for i in range(x.size):
            e = np.zeros(x.size)
            e[i] = h[i]
            H[:, i] = (gradient(x + e) - gradient(x - e)) / (2.0 * h[i])
        H = 0.5 * (H + H.T)
        try:
            np.linalg.cholesky(H)
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        cand = x - step
        fc = objective(cand)
        if not (math.isfinite(fc) and fc <= fx + slack):
            break
        x, fx = cand, min(fx, fc)
        if np.max(np.abs(step)) < 1e-12:
            break
    return x


def em_fit(data: Dataset, options: EmOptions | None = None, **kwargs) -> tuple[FitResult, EmTrace]:
    """Fit the two-point beta regression by EM.

    Starts from the beta-regression MLE for ``(beta, phi)`` and
    ``(theta1, theta2) = (0.95, 2)``. Converged once the relative change of
    the observed log-likelihood is below ``tol`` and no natural-scale
    parameter moved by more than ``param_tol`` in the last round; gives up
    after ``max_iter`` rounds.

    Raises
    ------
    ConvergenceError
        If the observed log-likelihood decreases by more than 1e-10.
    """
    opts = options or EmOptions()
    for key, val in kwargs.items():
        if not hasattr(opts, key):
            raise TypeError(f"unknown option {key!r}")
        setattr(opts, key, val)

    base = fit_mle(data, "beta", FitOptions(compute_se=False))
    beta = base.coefficients.copy()
    phi = base.model.phi
    theta1, theta2 = opts.theta1_start, opts.theta2_start
    start = RegressionModel(beta, phi, MixingSpec.two_point(theta1, theta2))
    model = start

    trace = EmTrace()
    ll = log_likelihood(model, data)
    trace.loglik_path.append(ll)
    z = e_step(model, data)
    for it in range(1, opts.max_iter + 1):
        old = natural_vector(model)
        theta1 = m_step_theta1(z)
        beta, phi, theta2 = m_step_q2(z, data, (beta, phi, theta2), inner_tol=opts.inner_tol)
        model = RegressionModel(beta, phi, MixingSpec.two_point(theta1, theta2))
        step = float(np.max(np.abs(natural_vector(model) - old)))
        new_ll = log_likelihood(model, data)
        trace.loglik_path.append(new_ll)
        trace.iterations = it
        if new_ll < ll - ASCENT_SLACK:
            raise ConvergenceError(
                f"observed log-likelihood decreased at iteration {it}: {ll!r} -> {new_ll!r}")
        z = e_step(model, data)
        if abs(new_ll - ll) < opts.tol * abs(new_ll) and step < opts.param_tol:
            trace.converged = True
            ll = new_ll
            break
        ll = new_ll
    trace.responsibilities = z
    if not trace.converged:
        logger.warning("EM stopped after %d iterations without converging", trace.iterations)

    fit = _build_result(MixingKind.TWO_POINT, data, to_working(model), -ll, trace.converged,
                        trace.iterations, math.nan, "em", start, opts.nodes, opts.compute_se,
                        method="em")
    return fit, trace
