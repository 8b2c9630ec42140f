"""Numerical building blocks: log-beta, mixing quadrature, minimization, Hessians."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .exceptions import DomainError, EvaluationError

DEFAULT_NODES = 64

__all__ = [
    "DEFAULT_NODES",
    "QuadratureRule",
    "OptimResult",
    "log_beta_fn",
    "build_quadrature",
    "expect_mixing",
    "minimize",
    "numeric_hessian",
]


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
# Stirling correction lnG(x) - [(x - 1/2) ln x - x + ln(2 pi)/2] as a series in 1/x
_STIRLING = (1.0 / 12, -1.0 / 360, 1.0 / 1260, -1.0 / 1680, 1.0 / 1188, -691.0 / 360360, 1.0 / 156)
_LARGE = 15.0


def _stirling_corr(x):
    r = 1.0 / x
    r2 = r * r
    acc = np.zeros_like(x)
    for c in reversed(_STIRLING):
        acc = acc * r2 + c
    return acc * r


def _lbeta(a, b):
    """Vectorized ln B(a, b) without argument checks."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    small = np.minimum(a, b)
    large = np.maximum(a, b)
    if large.max(initial=0.0) < _LARGE:
        return gammaln(a) + gammaln(b) - gammaln(a + b)
    out = np.empty(small.shape)

    direct = large < _LARGE
    if np.any(direct):
        s, x = small[direct], large[direct]
        out[direct] = gammaln(s) + gammaln(x) - gammaln(s + x)

    both = small >= _LARGE
    if np.any(both):
        s, x = small[both], large[both]
        t = s + x
        out[both] = (_HALF_LOG_2PI - 0.5 * np.log(t)
                     - (s - 0.5) * np.log1p(x / s) - (x - 0.5) * np.log1p(s / x)
                     + _stirling_corr(s) + _stirling_corr(x) - _stirling_corr(t))

    mixed = ~direct & ~both
    if np.any(mixed):
        s, x = small[mixed], large[mixed]
        # lnG(x) - lnG(x + s) from the Stirling expansions of both terms
        diff = (s - (x - 0.5) * np.log1p(s / x) - s * np.log(x + s)
                + _stirling_corr(x) - _stirling_corr(x + s))
        out[mixed] = gammaln(s) + diff
    return out


def log_beta_fn(a, b):
    """Natural log of the beta function, ``ln B(a, b)``.

    Accepts scalars or broadcastable arrays. Large arguments use Stirling
    expansions so that tiny/huge argument pairs keep full relative accuracy.
    Non-positive arguments raise :class:`DomainError`.
    """
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(~(a_arr > 0)) or np.any(~(b_arr > 0)):
        raise DomainError(f"log_beta_fn requires positive arguments, got a={a!r}, b={b!r}")
    out = _lbeta(a_arr, b_arr)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Discrete probability law ``sum_j weights[j] * delta(nodes[j])``."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if nodes.shape != weights.shape or nodes.size == 0:
            raise DomainError("nodes and weights must be non-empty and of equal length")
        if np.any(~(nodes > 0)):
            raise DomainError("quadrature nodes must be strictly positive")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("quadrature nodes must be strictly increasing")
        if np.any(~(weights >= 0)):
            raise DomainError("quadrature weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-10:
            raise DomainError(f"quadrature weights sum to {float(weights.sum())!r}, expected 1")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def __len__(self):
        return self.nodes.size


def _from_unsorted(nodes, weights) -> QuadratureRule:
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    keep = weights > 0
    nodes, weights = nodes[keep], weights[keep]
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    return QuadratureRule(nodes, weights / weights.sum())


def _golub_welsch(diag: np.ndarray, offdiag: np.ndarray):
    """Nodes and normalized weights from a symmetric Jacobi matrix."""
    if diag.size == 1:
        return diag.copy(), np.ones(1)
    x, vecs = eigh_tridiagonal(diag, offdiag)
    return x, vecs[0, :] ** 2


def _gen_laguerre(n: int, alpha: float):
    # probability-normalized rule for weight x**alpha * exp(-x); stable for large alpha
    k = np.arange(n, dtype=float)
    diag = 2.0 * k + alpha + 1.0
    off = np.sqrt(k[1:] * (k[1:] + alpha))
    return _golub_welsch(diag, off)


def _hermite(n: int):
    # weight exp(-t**2) normalized to a probability law
    k = np.arange(1, n, dtype=float)
    return _golub_welsch(np.zeros(n), np.sqrt(k / 2.0))


def build_quadrature(spec, node_count: int = DEFAULT_NODES) -> QuadratureRule:
    """Discretize the mixing law ``spec`` into a :class:`QuadratureRule`.

    Parameters
    ----------
    spec : MixingSpec
        Mixing distribution. Discrete kinds return their exact atoms and
        ignore ``node_count``.
    node_count : int
        Number of Gaussian nodes for continuous kinds.

    Notes
    -----
    Gamma uses generalized Gauss-Laguerre with exponent ``1/theta`` scaled by
    ``theta``; log-normal uses Gauss-Hermite under
    ``w = exp(theta + sqrt(2 theta) t)``; inverse Gaussian uses Gauss-Legendre
    on (0, 1) with ``w = v / (1 - v)``, the density folded into the weights,
    then renormalized.
    """
    from .mixing import MixingKind, mixing_density

    if int(node_count) != node_count or node_count < 1:
        raise DomainError(f"node_count must be a positive integer, got {node_count!r}")
    node_count = int(node_count)
    spec.validate()
    kind = spec.kind
    if kind is MixingKind.DEGENERATE:
        return QuadratureRule(np.ones(1), np.ones(1))
    if kind is MixingKind.TWO_POINT:
        return _from_unsorted([1.0, 1.0 / spec.theta2], [spec.theta1, 1.0 - spec.theta1])
    theta = spec.theta
    if kind is MixingKind.GAMMA:
        x, w = _gen_laguerre(node_count, 1.0 / theta)
        return _from_unsorted(theta * x, w)
    if kind is MixingKind.LOG_NORMAL:
        t, w = _hermite(node_count)
        return _from_unsorted(np.exp(theta + math.sqrt(2.0 * theta) * t), w)
    if kind is MixingKind.INVERSE_GAUSSIAN:
        v, w = np.polynomial.legendre.leggauss(node_count)
        v = 0.5 * (v + 1.0)
        nodes = v / (1.0 - v)
        dens = mixing_density(spec, nodes)
        return _from_unsorted(nodes, 0.5 * w * dens / (1.0 - v) ** 2)
    raise DomainError(f"no quadrature for mixing kind {kind!r}")


def expect_mixing(g: Callable, rule: QuadratureRule) -> float:
    """Return ``E[g(W)]`` under ``rule``; ``g`` is called once on the node array."""
    values = np.asarray(g(rule.nodes), dtype=float)
    if values.ndim == 0:
        values = np.full(rule.nodes.shape, float(values))
    bad = ~np.isfinite(values)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"g is not finite at node w={float(rule.nodes[j])!r} "
                              f"(value {float(values[j])!r})")
    return float(math.fsum(rule.weights * values))


@dataclass
class OptimResult:
    argmin: np.ndarray
    value: float
    converged: bool
    iterations: int
    gradient_norm: float
    message: str = ""
    nfev: int = 0
    history: list = field(default_factory=list, repr=False)


def _central_gradient(f, x, fx=None):
    eps = np.finfo(float).eps ** (1.0 / 3.0)
    g = np.empty_like(x)
    if not np.all(np.isfinite(x)):
        # line searches may probe overflowed points; the objective is +inf there
        g.fill(math.nan)
        return g
    for i in range(x.size):
        h = eps * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return g


def minimize(objective, start, tol=1e-8, gtol=1e-6, maxiter=2000,
             simplex_maxiter=None, simplex=True, gradient=None) -> OptimResult:
    """Minimize ``objective`` by Nelder-Mead followed by BFGS refinement.

    Non-finite objective values met during the search are treated as
    ``+inf`` (the step is rejected). The returned point is the best one ever
    evaluated, so the best value is monotone across iterations.

    Parameters
    ----------
    objective : callable
        Maps a 1-d float array to a float.
    start : array_like
        Starting point; the objective must be finite there.
    tol : float
        Relative objective-change tolerance.
    gtol : float
        Gradient-norm tolerance (central finite differences).
    maxiter : int
        Iteration cap for each stage.
    simplex_maxiter : int, optional
        Separate cap for the simplex stage.
    simplex : bool
        Skip the simplex stage when False (useful for warm starts).
    gradient : callable, optional
        Analytic gradient of ``objective``; central differences otherwise.
    """
    x0 = np.array(start, dtype=float).ravel()
    f0 = objective(x0)
    if not np.isfinite(f0):
        raise EvaluationError(f"objective is not finite at the starting point (value {f0!r})")

    best = {"x": x0.copy(), "f": float(f0)}
    history = [float(f0)]
    nfev = [1]

    def f(x):
        x = np.asarray(x, dtype=float)
        nfev[0] += 1
        try:
            val = float(objective(x))
        except (DomainError, FloatingPointError, OverflowError, ValueError, ZeroDivisionError):
            return math.inf
        if not math.isfinite(val):
            return math.inf
        if val < best["f"]:
            best["f"] = val
            best["x"] = x.copy()
        return val

    iterations = 0
    message = ""
    if simplex:
        res = optimize.minimize(
            f, x0, method="Nelder-Mead",
            options={"maxiter": simplex_maxiter or maxiter * max(1, x0.size),
                     "xatol": 1e-8, "fatol": tol * max(1.0, abs(f0)), "adaptive": x0.size > 2},
        )
        iterations += int(res.nit)
        history.append(best["f"])

    def jac(x):
        x = np.asarray(x, dtype=float)
        if gradient is None:
            return _central_gradient(f, x)
        if not np.all(np.isfinite(x)):
            return np.full(x.size, math.nan)
        return np.asarray(gradient(x), dtype=float)

    f_before = best["f"]
    res = optimize.minimize(f, best["x"].copy(), jac=jac, method="BFGS",
                            options={"gtol": gtol, "maxiter": maxiter})
    iterations += int(res.nit)
    message = str(res.message)
    history.append(best["f"])

    x_best = best["x"]
    grad = jac(x_best)
    gnorm = float(np.linalg.norm(grad)) if np.all(np.isfinite(grad)) else math.inf
    rel_change = abs(f_before - best["f"]) / max(1.0, abs(best["f"]))
    converged = gnorm < gtol or (rel_change < tol and gnorm < math.sqrt(gtol))
    return OptimResult(argmin=x_best.copy(), value=best["f"], converged=bool(converged),
                       iterations=iterations, gradient_norm=gnorm, message=message,
                       nfev=nfev[0], history=history)


def numeric_hessian(objective, point) -> np.ndarray:
    """Central-difference Hessian, symmetrized as ``(H + H.T) / 2``.

    Step for coordinate ``i`` is ``cbrt(eps) * (1 + |x_i|)``.
    """
    x = np.array(point, dtype=float).ravel()
    p = x.size
    steps = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.abs(x))
    H = np.empty((p, p))
    f0 = objective(x)

    def at(di, si, dj, sj):
        y = x.copy()
        y[di] += si * steps[di]
        y[dj] += sj * steps[dj]
        return objective(y)

    for i in range(p):
        for j in range(i, p):
            if i == j:
                fpp = at(i, 2.0, i, 0.0)
                fmm = at(i, -2.0, i, 0.0)
                H[i, i] = (fpp - 2.0 * f0 + fmm) / (4.0 * steps[i] ** 2)
            else:
                val = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1))
                H[i, j] = H[j, i] = val / (4.0 * steps[i] * steps[j])
    bad = np.argwhere(~np.isfinite(H))
    if bad.size:
        pairs = sorted({(int(min(a, b)), int(max(a, b))) for a, b in bad})
        raise EvaluationError(f"non-finite Hessian entries at coordinate pairs {pairs}")
    return 0.5 * (H + H.T)
