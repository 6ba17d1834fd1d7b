"""Information criteria for segmented models.

With ``m = m1 + m2`` change-points (``m1`` continuous, ``m2`` discontinuous),
segment dimension ``p`` and ``d = 1`` when a dispersion is estimated:

* ``aic``: ``2p(m+1) + 6 m2 + 2d``.  A continuous change-point removes one
  regression coefficient and costs 2 as a location parameter, so the two
  cancel; a discontinuous change-point costs 6.
* ``aic-naive``: ``2p(m+1) + 2 m2 + 2d``, i.e. every location counted as one
  ordinary parameter.
* ``aic-naive-cont6``: ``2p(m+1) + 4 m1 + 2d``, the naive variant for joined
  models that charges 6 per continuous change-point (``8m + 4`` for lines).
* ``bic``: ``(p(m+1) + m2 + d) log n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

AIC = "aic"
AIC_NAIVE = "aic-naive"
AIC_NAIVE_CONT6 = "aic-naive-cont6"
BIC = "bic"
CRITERIA = (AIC, AIC_NAIVE, AIC_NAIVE_CONT6, BIC)

_ALIASES = {"aic-proposed": AIC}


def criterion_name(name: str) -> str:
    """Canonical criterion name, accepting ``aic-proposed`` for ``aic``."""
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in CRITERIA:
        raise ValueError(f"unknown criterion {name!r}; expected one of {', '.join(CRITERIA)}")
    return key


def penalty(criterion: str, p: int, m1: int, m2: int, n: int | None = None,
            dispersion_estimated: bool = False) -> float:
    """Penalty term added to ``-2 log L``."""
    criterion = criterion_name(criterion)
    if min(p, m1, m2) < 0:
        raise ValueError("counts must be non-negative")
    m = m1 + m2
    d = 1 if dispersion_estimated else 0
    if criterion == AIC:
        return float(2 * p * (m + 1) + 6 * m2 + 2 * d)
    if criterion == AIC_NAIVE:
        return float(2 * p * (m + 1) + 2 * m2 + 2 * d)
    if criterion == AIC_NAIVE_CONT6:
        return float(2 * p * (m + 1) + 4 * m1 + 2 * d)
    if n is None or n < 1:
        raise ValueError("bic needs n >= 1")
    return (p * (m + 1) + m2 + d) * math.log(n)


@dataclass(frozen=True)
class CriterionScore:
    """Criterion value of one fitted model.

    ``free_regression_params`` counts regression coefficients after the
    continuity constraints, plus the dispersion when it is estimated.
    """

    criterion: str
    neg2loglik: float
    penalty: float
    total: float
    free_regression_params: int
    n_changepoints_cont: int
    n_changepoints_disc: int

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "neg2loglik": self.neg2loglik,
            "penalty": self.penalty,
            "total": self.total,
            "free_regression_params": self.free_regression_params,
            "m_continuous": self.n_changepoints_cont,
            "m_discontinuous": self.n_changepoints_disc,
        }


def score_loglik(loglik: float, criterion: str, p: int, m1: int, m2: int, n: int,
                 dispersion_estimated: bool = False) -> CriterionScore:
    criterion = criterion_name(criterion)
    neg2 = -2.0 * float(loglik)
    pen = penalty(criterion, p, m1, m2, n, dispersion_estimated)
    free = p * (m1 + m2 + 1) - m1 + (1 if dispersion_estimated else 0)
    return CriterionScore(criterion, neg2, pen, neg2 + pen, free, m1, m2)


def score(fit, criterion: str, n: int) -> CriterionScore:
    """Score a ``FitResult`` under ``criterion`` for a sample of size ``n``."""
    model = fit.model
    return score_loglik(fit.loglik, criterion, model.p, model.m_continuous,
                        model.m_discontinuous, n, model.family.has_dispersion)
