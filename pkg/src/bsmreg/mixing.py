"""Mixing laws for the scale variable ``W``.

Every continuous law here has its mode at ``w = 1`` and collapses to the
point mass at 1 as its tail parameter shrinks to zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import DomainError

__all__ = ["MixingKind", "MixingSpec", "mixing_density", "sample_mixing"]


class MixingKind(str, enum.Enum):
    DEGENERATE = "degenerate"
    TWO_POINT = "two_point"
    GAMMA = "gamma"
    LOG_NORMAL = "log_normal"
    INVERSE_GAUSSIAN = "inverse_gaussian"

    @property
    def n_params(self) -> int:
        return {"degenerate": 0, "two_point": 2}.get(self.value, 1)

    @property
    def is_discrete(self) -> bool:
        return self in (MixingKind.DEGENERATE, MixingKind.TWO_POINT)


# short family labels used by the regression layer and the CLI
FAMILY_ALIASES = {
    "beta": MixingKind.DEGENERATE,
    "b": MixingKind.DEGENERATE,
    "tpb": MixingKind.TWO_POINT,
    "gb": MixingKind.GAMMA,
    "lnb": MixingKind.LOG_NORMAL,
    "igb": MixingKind.INVERSE_GAUSSIAN,
}
FAMILY_LABELS = {
    MixingKind.DEGENERATE: "beta",
    MixingKind.TWO_POINT: "tpb",
    MixingKind.GAMMA: "gb",
    MixingKind.LOG_NORMAL: "lnb",
    MixingKind.INVERSE_GAUSSIAN: "igb",
}


def as_kind(family) -> MixingKind:
    """Coerce a family label (``"igb"``, ``"gamma"``, a :class:`MixingKind`) to a kind."""
    if isinstance(family, MixingKind):
        return family
    key = str(family).lower()
    if key in FAMILY_ALIASES:
        return FAMILY_ALIASES[key]
    try:
        return MixingKind(key)
    except ValueError:
        raise DomainError(f"unknown mixing family {family!r}") from None


@dataclass(frozen=True)
class MixingSpec:
    """A mixing law and its tail parameter(s).

    ``theta1`` (proportion of reference points) and ``theta2`` (variance
    inflation) apply to ``TWO_POINT`` only; ``theta`` to the continuous kinds.
    Instances are hashable and used as cache keys.
    """

    kind: MixingKind
    theta: float | None = None
    theta1: float | None = None
    theta2: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", as_kind(self.kind))
        for name in ("theta", "theta1", "theta2"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, float(val))
        self.validate()

    @classmethod
    def degenerate(cls):
        return cls(MixingKind.DEGENERATE)

    @classmethod
    def two_point(cls, theta1, theta2):
        return cls(MixingKind.TWO_POINT, theta1=theta1, theta2=theta2)

    @classmethod
    def gamma(cls, theta):
        return cls(MixingKind.GAMMA, theta=theta)

    @classmethod
    def log_normal(cls, theta):
        return cls(MixingKind.LOG_NORMAL, theta=theta)

    @classmethod
    def inverse_gaussian(cls, theta):
        return cls(MixingKind.INVERSE_GAUSSIAN, theta=theta)

    def validate(self):
        kind = self.kind
        if kind is MixingKind.DEGENERATE:
            if any(v is not None for v in (self.theta, self.theta1, self.theta2)):
                raise DomainError("degenerate mixing carries no parameters")
        elif kind is MixingKind.TWO_POINT:
            t1, t2 = self.theta1, self.theta2
            if t1 is None or t2 is None or self.theta is not None:
                raise DomainError("two-point mixing needs theta1 and theta2 only")
            if not (0.0 < t1 < 1.0):
                raise DomainError(f"theta1 must lie in (0, 1), got {t1!r}")
            if not (t2 > 1.0 and math.isfinite(t2)):
                raise DomainError(f"theta2 must exceed 1, got {t2!r}")
        else:
            if self.theta1 is not None or self.theta2 is not None:
                raise DomainError(f"{kind.value} mixing takes a single theta")
            if self.theta is None or not (self.theta > 0.0 and math.isfinite(self.theta)):
                raise DomainError(f"theta must be positive, got {self.theta!r}")
        return self

    @property
    def params(self) -> dict:
        if self.kind is MixingKind.TWO_POINT:
            return {"theta1": self.theta1, "theta2": self.theta2}
        if self.kind is MixingKind.DEGENERATE:
            return {}
        return {"theta": self.theta}


def mixing_density(spec: MixingSpec, w):
    """Density (continuous kinds) or mass (discrete kinds) of ``W`` at ``w``."""
    w_arr = np.asarray(w, dtype=float)
    if np.any(~(w_arr > 0)):
        raise DomainError("mixing_density requires w > 0")
    kind = spec.kind
    if kind is MixingKind.DEGENERATE:
        out = np.where(w_arr == 1.0, 1.0, 0.0)
    elif kind is MixingKind.TWO_POINT:
        out = np.where(w_arr == 1.0, spec.theta1,
                       np.where(w_arr == 1.0 / spec.theta2, 1.0 - spec.theta1, 0.0))
    elif kind is MixingKind.GAMMA:
        th = spec.theta
        shape = 1.0 / th
        logd = shape * np.log(w_arr) - w_arr / th - (shape + 1.0) * math.log(th) - gammaln(shape + 1.0)
        out = np.exp(logd)
    elif kind is MixingKind.LOG_NORMAL:
        th = spec.theta
        lw = np.log(w_arr)
        out = np.exp(-((lw - th) ** 2) / (2.0 * th)) / (w_arr * math.sqrt(2.0 * math.pi * th))
    elif kind is MixingKind.INVERSE_GAUSSIAN:
        th = spec.theta
        m = math.sqrt(3.0 * th + 1.0)
        out = np.sqrt((3.0 * th + 1.0) / (2.0 * math.pi * th * w_arr ** 3)) * np.exp(
            -((w_arr - m) ** 2) / (2.0 * th * w_arr))
    else:  # pragma: no cover - enum is closed
        raise DomainError(f"unknown mixing kind {kind!r}")
    if out.ndim == 0:
        return float(out)
    return out


def _inverse_gaussian(rng, mean, shape, n):
    # transformation with multiple roots (Michael, Schucany & Haas)
    nu = rng.standard_normal(n)
    y = nu * nu
    x = mean + mean * mean * y / (2.0 * shape) - (mean / (2.0 * shape)) * np.sqrt(
        4.0 * mean * shape * y + mean * mean * y * y)
    u = rng.random(n)
    return np.where(u <= mean / (mean + x), x, mean * mean / x)


def sample_mixing(spec: MixingSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` values of ``W``; only ``rng`` is mutated."""
    spec.validate()
    n = int(n)
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    kind = spec.kind
    if n == 0:
        return np.empty(0)
    if kind is MixingKind.DEGENERATE:
        return np.ones(n)
    if kind is MixingKind.TWO_POINT:
        good = rng.random(n) < spec.theta1
        return np.where(good, 1.0, 1.0 / spec.theta2)
    th = spec.theta
    if kind is MixingKind.GAMMA:
        return rng.gamma(1.0 / th + 1.0, th, size=n)
    if kind is MixingKind.LOG_NORMAL:
        return np.exp(th + math.sqrt(th) * rng.standard_normal(n))
    if kind is MixingKind.INVERSE_GAUSSIAN:
        m = math.sqrt(3.0 * th + 1.0)
        return _inverse_gaussian(rng, m, (3.0 * th + 1.0) / th, n)
    raise DomainError(f"unknown mixing kind {kind!r}")  # pragma: no cover
