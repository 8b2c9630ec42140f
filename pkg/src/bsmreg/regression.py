"""Logit-link mean regression under beta scale mixture errors.

Fitting runs on an unconstrained working scale:

=========  ==============  ======================
parameter  natural          working
=========  ==============  ======================
beta       real             beta
phi        > 0              log(phi)
theta      > 0              log(theta)
theta1     (0, 1)           logit(theta1)
theta2     > 1              log(theta2 - 1)
=========  ==============  ======================
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .distributions import _beta_logpdf_raw, _mixture_logpdf, quadrature_for
from .exceptions import DomainError, EvaluationError
from .mixing import FAMILY_LABELS, MixingKind, MixingSpec, as_kind
from .numeric import DEFAULT_NODES, minimize, numeric_hessian
from .selection import aic as _aic, bic as _bic

logger = logging.getLogger(__name__)

__all__ = [
    "Dataset",
    "RegressionModel",
    "FitResult",
    "FitOptions",
    "link",
    "link_inverse",
    "log_likelihood",
    "fit_mle",
    "standard_errors",
    "to_working",
    "to_natural",
    "param_names",
]

# admissible range for scalar tail weights during optimization
THETA_RANGE = (1e-6, 1e4)


def link(mu):
    """Logit link ``ln(mu / (1 - mu))``."""
    out = logit(np.asarray(mu, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


_MU_FLOOR = np.finfo(float).tiny
_MU_CEIL = 1.0 - np.finfo(float).epsneg


def link_inverse(eta):
    """Inverse logit, kept inside the open interval (0, 1).

    ``expit`` rounds to exactly 1.0 once ``eta`` exceeds about 37; the result
    is clipped to the largest double below one (and the smallest normal
    double above zero) so saturated means stay valid beta means.
    """
    out = np.clip(expit(np.asarray(eta, dtype=float)), _MU_FLOOR, _MU_CEIL)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Dataset:
    """Responses in (0, 1) and a design matrix whose first column is ones."""

    response: np.ndarray
    design: np.ndarray
    covariate_names: tuple = ()

    def __post_init__(self):
        y = np.array(self.response, dtype=float).ravel()
        X = np.array(self.design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size:
            raise DomainError(f"design has {X.shape[0]} rows but response has {y.size} values")
        bad = np.flatnonzero(~((y > 0.0) & (y < 1.0)))
        if bad.size:
            raise DomainError(f"response must lie in (0, 1); row {int(bad[0])} has value {float(y[bad[0]])!r}")
        if not np.all(X[:, 0] == 1.0):
            raise DomainError("first design column must be all ones (intercept)")
        if not np.all(np.isfinite(X)):
            raise DomainError("design contains non-finite values")
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise DomainError("design matrix is rank deficient")
        names = tuple(self.covariate_names) or tuple(f"x{j}" for j in range(1, X.shape[1]))
        if len(names) != X.shape[1] - 1:
            raise DomainError("covariate_names must label every non-intercept column")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_arrays(cls, y, X=None, names=()):
        """Build from responses and covariates; the intercept column is prepended."""
        y = np.asarray(y, dtype=float).ravel()
        if X is None:
            X = np.empty((y.size, 0))
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls(y, np.column_stack([np.ones(y.size), X]), tuple(names))

    @property
    def n(self) -> int:
        return self.response.size

    @property
    def n_coef(self) -> int:
        return self.design.shape[1]

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.concatenate([self.response, other.response]),
                       np.vstack([self.design, other.design]), self.covariate_names)

    def take(self, index) -> "Dataset":
        return Dataset(self.response[index], self.design[index], self.covariate_names)


@dataclass(frozen=True)
class RegressionModel:
    """Coefficients, variability and mixing law of a BSM regression."""

    coefficients: np.ndarray
    phi: float
    mixing: MixingSpec = field(default_factory=MixingSpec.degenerate)

    def __post_init__(self):
        beta = np.array(self.coefficients, dtype=float).ravel()
        beta.setflags(write=False)
        object.__setattr__(self, "coefficients", beta)
        if not (self.phi > 0.0 and math.isfinite(self.phi)):
            raise DomainError(f"phi must be positive, got {self.phi!r}")

    @property
    def family(self) -> MixingKind:
        return self.mixing.kind

    def mean(self, design) -> np.ndarray:
        return link_inverse(np.asarray(design, dtype=float) @ self.coefficients)


def param_names(family, n_coef: int) -> list[str]:
    kind = as_kind(family)
    names = [f"beta{j}" for j in range(n_coef)] + ["phi"]
    if kind is MixingKind.TWO_POINT:
        names += ["theta1", "theta2"]
    elif kind is not MixingKind.DEGENERATE:
        names.append("theta")
    return names


def to_natural(family, working, n_coef: int) -> RegressionModel:
    """Map a working-scale vector to a :class:`RegressionModel`."""
    kind = as_kind(family)
    w = np.asarray(working, dtype=float)
    beta = w[:n_coef]
    phi = math.exp(w[n_coef])
    if kind is MixingKind.DEGENERATE:
        mixing = MixingSpec.degenerate()
    elif kind is MixingKind.TWO_POINT:
        t1 = float(expit(w[n_coef + 1]))
        t2 = 1.0 + math.exp(w[n_coef + 2])
        mixing = MixingSpec.two_point(t1, t2)
    else:
        mixing = MixingSpec(kind, theta=math.exp(w[n_coef + 1]))
    return RegressionModel(beta, phi, mixing)


def to_working(model: RegressionModel) -> np.ndarray:
    parts = list(model.coefficients) + [math.log(model.phi)]
    m = model.mixing
    if m.kind is MixingKind.TWO_POINT:
        parts += [float(logit(m.theta1)), math.log(m.theta2 - 1.0)]
    elif m.kind is not MixingKind.DEGENERATE:
        parts.append(math.log(m.theta))
    return np.array(parts, dtype=float)


def natural_vector(model: RegressionModel) -> np.ndarray:
    parts = list(model.coefficients) + [model.phi]
    parts += list(model.mixing.params.values())
    return np.array(parts, dtype=float)


def _natural_jacobian(family, working, n_coef):
    # elementwise derivative d natural / d working
    kind = as_kind(family)
    w = np.asarray(working, dtype=float)
    d = np.ones(w.size)
    d[n_coef] = math.exp(w[n_coef])
    if kind is MixingKind.TWO_POINT:
        t1 = float(expit(w[n_coef + 1]))
        d[n_coef + 1] = t1 * (1.0 - t1)
        d[n_coef + 2] = math.exp(w[n_coef + 2])
    elif kind is not MixingKind.DEGENERATE:
        d[n_coef + 1] = math.exp(w[n_coef + 1])
    return d


def _pointwise_loglik(model: RegressionModel, data: Dataset, nodes: int):
    mu = model.mean(data.design)
    if model.family is MixingKind.DEGENERATE:
        return _beta_logpdf_raw(data.response, mu, model.phi)
    rule = quadrature_for(model.mixing, nodes)
    return _mixture_logpdf(data.response, mu, model.phi, rule)


def log_likelihood(model: RegressionModel, data: Dataset, nodes: int = DEFAULT_NODES) -> float:
    """Observed-data log-likelihood ``sum_i log f_BSM(y_i; mu_i, phi, theta)``."""
    return math.fsum(_pointwise_loglik(model, data, nodes))


def _negloglik_working(family, data, nodes):
    kind = as_kind(family)
    k = data.n_coef

    def objective(w):
        w = np.asarray(w, dtype=float)
        if not np.all(np.isfinite(w)) or abs(w[k]) > 50.0:
            return math.inf
        if kind not in (MixingKind.DEGENERATE, MixingKind.TWO_POINT):
            th = math.exp(w[k + 1]) if w[k + 1] < 700 else math.inf
            if not (THETA_RANGE[0] <= th <= THETA_RANGE[1]):
                return math.inf
        elif kind is MixingKind.TWO_POINT:
            if not (abs(w[k + 1]) < 40.0 and w[k + 2] < 40.0):
                return math.inf
        try:
            model = to_natural(kind, w, k)
        except DomainError:
            return math.inf
        with np.errstate(all="ignore"):
            val = -log_likelihood(model, data, nodes)
        return val if math.isfinite(val) else math.inf

    return objective


@dataclass
class FitOptions:
    """Tolerances for :func:`fit_mle`."""

    nodes: int = DEFAULT_NODES
    tol: float = 1e-8
    gtol: float = 1e-6
    maxiter: int = 2000
    n_restarts: int = 5
    jitter: float = 0.25
    seed: int = 0
    compute_se: bool = True
    start: dict | None = None


@dataclass
class FitResult:
    """Outcome of a maximum-likelihood fit."""

    family: MixingKind
    natural_estimates: dict
    working_estimates: np.ndarray
    standard_errors: dict
    loglik: float
    aic: float
    bic: float
    converged: bool
    iterations: int
    start_used: dict
    n_obs: int
    n_params: int
    nodes: int = DEFAULT_NODES
    gradient_norm: float = math.nan
    message: str = ""
    se_diagnostic: str = ""
    method: str = "mle"

    @property
    def model(self) -> RegressionModel:
        return to_natural(self.family, self.working_estimates, self.n_params - _n_extra(self.family))

    @property
    def label(self) -> str:
        return FAMILY_LABELS[self.family]

    @property
    def coefficients(self) -> np.ndarray:
        return self.model.coefficients


def _n_extra(family) -> int:
    return 1 + as_kind(family).n_params


def initial_beta_phi(data: Dataset):
    """Least-squares start on the logit scale and a moment-matched ``phi``."""
    y = data.response
    X = data.design
    beta, *_ = np.linalg.lstsq(X, logit(y), rcond=None)
    mu = expit(X @ beta)
    s = float(np.mean((y - mu) ** 2 / (mu * (1.0 - mu))))
    s = min(max(s, 1e-6), 0.99)
    # mu(1-mu) phi / (1 + phi) matched to the residual variance
    return beta, s / (1.0 - s)


def default_start(data: Dataset, family) -> RegressionModel:
    kind = as_kind(family)
    beta, phi = initial_beta_phi(data)
    if kind is MixingKind.DEGENERATE:
        mixing = MixingSpec.degenerate()
    elif kind is MixingKind.TWO_POINT:
        mixing = MixingSpec.two_point(0.95, 2.0)
    else:
        mixing = MixingSpec(kind, theta=0.1)
    return RegressionModel(beta, phi, mixing)


def _named(names, values):
    return {n: float(v) for n, v in zip(names, values)}


def _build_result(kind, data, opt_x, opt_value, converged, iterations, gnorm, message,
                  start_model, nodes, compute_se, method="mle"):
    k = data.n_coef
    names = param_names(kind, k)
    model = to_natural(kind, opt_x, k)
    loglik = -opt_value
    n_params = len(names)
    fit = FitResult(
        family=kind,
        natural_estimates=_named(names, natural_vector(model)),
        working_estimates=np.asarray(opt_x, dtype=float).copy(),
        standard_errors={},
        loglik=loglik,
        aic=_aic(loglik, n_params),
        bic=_bic(loglik, n_params, data.n),
        converged=bool(converged),
        iterations=int(iterations),
        start_used=_named(names, natural_vector(start_model)),
        n_obs=data.n,
        n_params=n_params,
        nodes=nodes,
        gradient_norm=float(gnorm),
        message=message,
        method=method,
    )
    if compute_se:
        fit.standard_errors, fit.se_diagnostic = _standard_errors(fit, data)
    return fit


def fit_mle(data: Dataset, family="beta", options: FitOptions | None = None, **kwargs) -> FitResult:
    """Direct maximum-likelihood fit of a BSM regression.

    Parameters
    ----------
    data : Dataset
    family : str or MixingKind
        ``beta``, ``tpb``, ``gb``, ``lnb`` or ``igb`` (or a kind).
    options : FitOptions, optional
        Keyword arguments override individual fields.

    Returns
    -------
    FitResult
        Non-convergence is reported through ``converged=False``; the best
        point found is kept.
    """
    opts = options or FitOptions()
    for key, val in kwargs.items():
        if not hasattr(opts, key):
            raise TypeError(f"unknown option {key!r}")
        setattr(opts, key, val)
    kind = as_kind(family)
    n_params = data.n_coef + _n_extra(kind)
    if data.n <= n_params:
        raise DomainError(f"need more observations ({data.n}) than parameters ({n_params})")

    objective = _negloglik_working(kind, data, opts.nodes)
    starts = []
    if opts.start is not None:
        starts.append(_start_from_dict(kind, data, opts.start))
    starts.append(default_start(data, kind))
    if kind is not MixingKind.DEGENERATE and opts.start is None:
        # the beta fit is the theta -> 0 limit of every richer family
        base = fit_mle(data, MixingKind.DEGENERATE, FitOptions(nodes=opts.nodes, tol=opts.tol,
                                                               gtol=opts.gtol, compute_se=False))
        starts.append(RegressionModel(base.coefficients, base.model.phi,
                                      default_start(data, kind).mixing))

    best = None
    best_start = None
    total_iter = 0
    for start_model in starts:
        x0 = to_working(start_model)
        if not math.isfinite(objective(x0)):
            continue
        res = minimize(objective, x0, tol=opts.tol, gtol=opts.gtol, maxiter=opts.maxiter)
        total_iter += res.iterations
        if best is None or res.value < best.value:
            best, best_start = res, start_model
    if best is None:
        raise EvaluationError("log-likelihood is not finite at any starting point")

    if not best.converged and opts.n_restarts > 0:
        rng = np.random.default_rng(opts.seed)
        centre = best.argmin.copy()
        for _ in range(opts.n_restarts):
            x0 = centre + opts.jitter * (1.0 + np.abs(centre)) * rng.standard_normal(centre.size)
            if not math.isfinite(objective(x0)):
                continue
            res = minimize(objective, x0, tol=opts.tol, gtol=opts.gtol, maxiter=opts.maxiter)
            total_iter += res.iterations
            if res.value < best.value or (res.converged and not best.converged
                                          and res.value <= best.value + opts.tol * abs(best.value)):
                best = res
                best_start = to_natural(kind, x0, data.n_coef)
        if not best.converged:
            logger.warning("%s fit did not converge (gradient norm %.3g)",
                           FAMILY_LABELS[kind], best.gradient_norm)

    return _build_result(kind, data, best.argmin, best.value, best.converged, total_iter,
                         best.gradient_norm, best.message, best_start, opts.nodes, opts.compute_se)


def _start_from_dict(kind, data, start):
    beta = [start[f"beta{j}"] for j in range(data.n_coef)]
    if kind is MixingKind.DEGENERATE:
        mixing = MixingSpec.degenerate()
    elif kind is MixingKind.TWO_POINT:
        mixing = MixingSpec.two_point(start["theta1"], start["theta2"])
    else:
        mixing = MixingSpec(kind, theta=start["theta"])
    return RegressionModel(beta, start["phi"], mixing)


def standard_errors_from_objective(negloglik, working, jacobian_diag=None):
    """Observed-information SEs of a negative log-likelihood at ``working``.

    Returns ``(se, diagnostic)``; ``se`` is all-NaN when the Hessian is not
    positive definite. ``jacobian_diag`` maps working to natural scale by the
    delta method.
    """
    working = np.asarray(working, dtype=float)
    try:
        H = numeric_hessian(negloglik, working)
    except EvaluationError as exc:
        return np.full(working.size, math.nan), str(exc)
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return np.full(working.size, math.nan), "Hessian of the negative log-likelihood is not positive definite"
    cov = np.linalg.inv(H)
    if jacobian_diag is not None:
        J = np.asarray(jacobian_diag, dtype=float)
        cov = cov * np.outer(J, J)
    return np.sqrt(np.diag(cov)), ""


def _standard_errors(fit: FitResult, data: Dataset):
    kind = fit.family
    k = data.n_coef
    objective = _negloglik_working(kind, data, fit.nodes)
    se, diag = standard_errors_from_objective(
        objective, fit.working_estimates, _natural_jacobian(kind, fit.working_estimates, k))
    names = param_names(kind, k)
    return _named(names, se), diag


def standard_errors(fit: FitResult, data: Dataset) -> dict:
    """Natural-scale standard errors from the observed information.

    Unavailable SEs come back as NaN; the reason is stored on
    ``fit.se_diagnostic``.
    """
    se, diag = _standard_errors(fit, data)
    fit.se_diagnostic = diag
    return se
