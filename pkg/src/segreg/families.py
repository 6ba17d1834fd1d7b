"""Exponential-family response laws with canonical links.

Each family writes the per-observation log density as
``y * eta - cumulant(eta) + log_base(y)`` where ``eta`` is the linear
predictor.  The free-variance Gaussian family divides the first two terms by
its dispersion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln

from .errors import ResponseSupportError

GAUSSIAN_UNIT = "gaussian-unit-variance"
GAUSSIAN_FREE = "gaussian-free-variance"
POISSON = "poisson-log-link"
BERNOULLI = "bernoulli-logit"

FAMILY_KINDS = (GAUSSIAN_UNIT, GAUSSIAN_FREE, POISSON, BERNOULLI)

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ResponseFamily:
    """Response law of a segmented regression model.

    Parameters
    ----------
    kind : str
        One of ``FAMILY_KINDS``.
    dispersion : float
        Variance of the free-variance Gaussian family.  Ignored otherwise.
    """

    kind: str = GAUSSIAN_UNIT
    dispersion: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if not (np.isfinite(self.dispersion) and self.dispersion > 0):
            raise ValueError("dispersion must be positive and finite")

    @property
    def is_gaussian(self) -> bool:
        return self.kind in (GAUSSIAN_UNIT, GAUSSIAN_FREE)

    @property
    def has_dispersion(self) -> bool:
        """Whether the family carries an estimated dispersion parameter."""
        return self.kind == GAUSSIAN_FREE

    @property
    def variance(self) -> float:
        return self.dispersion if self.kind == GAUSSIAN_FREE else 1.0

    def with_dispersion(self, dispersion: float) -> "ResponseFamily":
        return ResponseFamily(self.kind, float(dispersion))

    def cumulant(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.is_gaussian:
            return 0.5 * eta**2
        if self.kind == POISSON:
            return np.exp(eta)
        return np.logaddexp(0.0, eta)

    def mean(self, eta):
        """Inverse canonical link, the derivative of the cumulant."""
        eta = np.asarray(eta, dtype=float)
        if self.is_gaussian:
            return eta
        if self.kind == POISSON:
            return np.exp(eta)
        return expit(eta)

    def variance_function(self, eta):
        """Second derivative of the cumulant."""
        eta = np.asarray(eta, dtype=float)
        if self.is_gaussian:
            return np.ones_like(eta)
        if self.kind == POISSON:
            return np.exp(eta)
        mu = expit(eta)
        return mu * (1.0 - mu)

    def log_base(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_gaussian:
            return -0.5 * y**2 / self.variance - 0.5 * (_LOG_2PI + np.log(self.variance))
        if self.kind == POISSON:
            return -gammaln(y + 1.0)
        return np.zeros_like(y)

    def loglik_terms(self, y, eta):
        """Per-observation log density at linear predictor ``eta``."""
        y = np.asarray(y, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if self.is_gaussian:
            s2 = self.variance
            return -0.5 * (y - eta) ** 2 / s2 - 0.5 * (_LOG_2PI + np.log(s2))
        return y * eta - self.cumulant(eta) + self.log_base(y)

    def validate_response(self, y) -> None:
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise ResponseSupportError("responses must be finite")
        if self.kind == POISSON:
            if np.any(y < 0) or np.any(y != np.round(y)):
                raise ResponseSupportError("Poisson responses must be non-negative integers")
        elif self.kind == BERNOULLI:
            if np.any((y != 0) & (y != 1)):
                raise ResponseSupportError("Bernoulli responses must be 0 or 1")

    def link_start(self, y):
        """Working response on the link scale used to start iterative fits."""
        y = np.asarray(y, dtype=float)
        if self.is_gaussian:
            return y
        if self.kind == POISSON:
            return np.log(y + 0.5)
        z = (y + 0.5) / 2.0
        return np.log(z / (1.0 - z))

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.has_dispersion:
            out["dispersion"] = self.dispersion
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ResponseFamily":
        return cls(data["kind"], float(data.get("dispersion", 1.0)))
