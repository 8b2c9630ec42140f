"""scikit-learn compatible front end for BSM regression."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .distributions import tpb_posterior_prob
from .em import em_fit
from .exceptions import DomainError
from .mixing import FAMILY_LABELS, MixingKind, as_kind
from .regression import Dataset, FitOptions, _pointwise_loglik, fit_mle, link_inverse

__all__ = ["BSMRegressor", "check_unit_interval", "squeeze_unit_interval"]


def check_unit_interval(y, name="y"):
    """Validate that every value of ``y`` lies strictly inside (0, 1)."""
    y = np.asarray(y, dtype=float).ravel()
    bad = np.flatnonzero(~((y > 0.0) & (y < 1.0)))
    if bad.size:
        raise DomainError(f"{name} must lie strictly inside (0, 1); "
                          f"row {int(bad[0])} has value {float(y[bad[0]])!r}")
    return y


def squeeze_unit_interval(y):
    """Compress [0, 1] data into (0, 1) via ``(y (n - 1) + 0.5) / n``."""
    y = np.asarray(y, dtype=float).ravel()
    if np.any((y < 0.0) | (y > 1.0)):
        raise DomainError("squeeze needs values in [0, 1]")
    n = y.size
    return (y * (n - 1) + 0.5) / n


class BSMRegressor(RegressorMixin, BaseEstimator):
    """Mean regression for (0, 1) responses under a beta scale mixture.

    Parameters
    ----------
    family : {"beta", "tpb", "gb", "lnb", "igb"}
        Mixing law for the variability parameter.
    nodes : int
        Quadrature nodes for continuous mixing laws.
    method : {"mle", "em"}
        ``"em"`` applies to ``family="tpb"`` only.
    tol, gtol : float
        Optimizer tolerances.
    max_iter : int
        Iteration cap for the optimizer (EM rounds for ``method="em"``).
    compute_se : bool
        Compute observed-information standard errors after fitting.
    random_state : int
        Seed for jittered restarts.

    Attributes
    ----------
    intercept_ : float
    coef_ : ndarray of shape (n_features,)
    phi_ : float
    theta_ : dict
        Mixing parameters (empty for ``family="beta"``).
    loglik_, aic_, bic_ : float
    result_ : FitResult
    trace_ : EmTrace or None
    """

    def __init__(self, family="beta", nodes=64, method="mle", tol=1e-8, gtol=1e-6,
                 max_iter=2000, compute_se=True, random_state=0):
        self.family = family
        self.nodes = nodes
        self.method = method
        self.tol = tol
        self.gtol = gtol
        self.max_iter = max_iter
        self.compute_se = compute_se
        self.random_state = random_state

    def _dataset(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        y = check_unit_interval(y)
        return Dataset.from_arrays(y, X)

    def fit(self, X, y):
        kind = as_kind(self.family)
        if self.method not in ("mle", "em"):
            raise ValueError(f"method must be 'mle' or 'em', got {self.method!r}")
        if self.method == "em" and kind is not MixingKind.TWO_POINT:
            raise ValueError("method='em' is only available for family='tpb'")
        data = self._dataset(X, y)
        self.n_features_in_ = data.n_coef - 1
        self.trace_ = None
        if self.method == "em":
            self.result_, self.trace_ = em_fit(data, nodes=self.nodes, tol=self.tol,
                                               max_iter=min(self.max_iter, 1000),
                                               compute_se=self.compute_se)
        else:
            opts = FitOptions(nodes=self.nodes, tol=self.tol, gtol=self.gtol, maxiter=self.max_iter,
                              seed=self.random_state, compute_se=self.compute_se)
            self.result_ = fit_mle(data, kind, opts)
        res = self.result_
        model = res.model
        self.intercept_ = float(model.coefficients[0])
        self.coef_ = np.array(model.coefficients[1:])
        self.phi_ = model.phi
        self.theta_ = dict(model.mixing.params)
        self.loglik_ = res.loglik
        self.aic_ = res.aic
        self.bic_ = res.bic
        self.converged_ = res.converged
        self.family_label_ = FAMILY_LABELS[kind]
        return self

    def _design(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict(self, X):
        """Conditional mean ``mu(x)``."""
        X = self._design(X)
        return link_inverse(self.intercept_ + X @ self.coef_)

    def score_samples(self, X, y):
        """Per-observation log-density of ``y`` given ``X``."""
        X = self._design(X)
        data = Dataset.from_arrays(check_unit_interval(y), X)
        return _pointwise_loglik(self.result_.model, data, self.nodes)

    def score(self, X, y, sample_weight=None):
        """Mean log-likelihood per observation (higher is better)."""
        return float(np.average(self.score_samples(X, y), weights=sample_weight))

    def posterior_reference_proba(self, X, y):
        """Posterior probability that each ``y`` belongs to the reference component.

        Only defined for ``family="tpb"``.
        """
        check_is_fitted(self, "result_")
        if as_kind(self.family) is not MixingKind.TWO_POINT:
            raise ValueError("posterior probabilities need family='tpb'")
        mu = self.predict(X)
        return tpb_posterior_prob(check_unit_interval(y), mu, self.phi_,
                                  self.theta_["theta1"], self.theta_["theta2"])

    def predict_outliers(self, X, y):
        """True where an observation is classified as contaminant (posterior <= 0.5)."""
        return ~(np.asarray(self.posterior_reference_proba(X, y)) > 0.5)
