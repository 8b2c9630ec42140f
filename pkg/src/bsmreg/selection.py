"""Information criteria and AIC/BIC ranking of fitted models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import DomainError

__all__ = ["aic", "bic", "RankedRow", "RankedTable", "rank_models"]


def aic(loglik: float, k: int) -> float:
    """Akaike information criterion ``2k - 2 loglik``."""
    if k < 1:
        raise DomainError(f"parameter count must be at least 1, got {k}")
    return 2.0 * k - 2.0 * loglik


def bic(loglik: float, k: int, n: int) -> float:
    """Bayesian information criterion ``ln(n) k - 2 loglik`` (natural log)."""
    if k < 1 or n < 1:
        raise DomainError(f"need k >= 1 and n >= 1, got k={k}, n={n}")
    return math.log(n) * k - 2.0 * loglik


@dataclass(frozen=True)
class RankedRow:
    label: str
    k: int
    loglik: float
    aic: float
    aic_rank: int
    bic: float
    bic_rank: int
    tie: bool = False


@dataclass(frozen=True)
class RankedTable:
    rows: tuple
    n: int

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def by_label(self) -> dict:
        return {r.label: r for r in self.rows}

    def to_records(self) -> list[dict]:
        return [dict(label=r.label, k=r.k, loglik=r.loglik, aic=r.aic, aic_rank=r.aic_rank,
                     bic=r.bic, bic_rank=r.bic_rank, tie=r.tie) for r in self.rows]


def _ranks(values):
    # ordinal ranks; equal values keep input order
    return rankdata(values, method="ordinal").astype(int)


def rank_models(fits, n: int) -> RankedTable:
    """Rank ``(label, loglik, k)`` triples by AIC and BIC (1 = best).

    Rows keep input order. Criteria are recomputed from ``loglik`` and ``k``;
    exactly equal criterion values are ranked in input order and flagged.
    """
    fits = list(fits)
    if not fits:
        raise DomainError("rank_models needs at least one model")
    labels = [str(f[0]) for f in fits]
    if len(set(labels)) != len(labels):
        dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
        raise DomainError(f"duplicate model labels: {dupes}")
    a = np.array([aic(ll, k) for _, ll, k in fits])
    b = np.array([bic(ll, k, n) for _, ll, k in fits])
    ar, br = _ranks(a), _ranks(b)
    rows = []
    for i, (label, ll, k) in enumerate(fits):
        tie = bool(np.sum(a == a[i]) > 1 or np.sum(b == b[i]) > 1)
        rows.append(RankedRow(label, int(k), float(ll), float(a[i]), int(ar[i]),
                              float(b[i]), int(br[i]), tie))
    return RankedTable(tuple(rows), int(n))
