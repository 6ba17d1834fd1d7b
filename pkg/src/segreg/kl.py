"""Kullback-Leibler divergence between segmented Gaussian models.

For Gaussian responses with variances ``s0`` (true) and ``s1`` (fitted) and a
uniform covariate law on the domain ``(a, b]``, the divergence is

    log(sqrt(s1 / s0)) + s0 / (2 s1) - 1/2 + E_x[(mu0(x) - mu1(x))^2] / (2 s1).

The union of both models' change-points cuts the domain into pieces where the
mean difference is a polynomial, so the expectation is integrated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from .model import SegmentedModel

CLOSED_FORM = "closed-form"
QUADRATURE = "quadrature"


@dataclass(frozen=True)
class KLResult:
    value: float
    method: str


def _pieces(true_model: SegmentedModel, fitted_model: SegmentedModel):
    a, b = true_model.domain
    cuts = np.unique(np.concatenate([[a, b], true_model.locations, fitted_model.locations]))
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        k0 = int(np.searchsorted(true_model.locations, mid, side="left"))
        k1 = int(np.searchsorted(fitted_model.locations, mid, side="left"))
        yield lo, hi, true_model.segments[k0].coeffs, fitted_model.segments[k1].coeffs


def mean_square_difference(true_model: SegmentedModel, fitted_model: SegmentedModel,
                           method: str = CLOSED_FORM) -> float:
    """``E_x[(mu0(x) - mu1(x))^2]`` under the uniform law on the domain."""
    a, b = true_model.domain
    total = 0.0
    for lo, hi, c0, c1 in _pieces(true_model, fitted_model):
        diff = Polynomial(c0) - Polynomial(c1)
        if method == CLOSED_FORM:
            prim = (diff * diff).integ()
            total += float(prim(hi) - prim(lo))
        elif method == QUADRATURE:
            val, _ = quad(lambda x: float(diff(x)) ** 2, lo, hi, epsabs=1e-12, epsrel=1e-10,
                          limit=200)
            total += val
        else:
            raise ValueError(f"unknown method {method!r}")
    return max(total, 0.0) / (b - a)


def kl_divergence(true_model: SegmentedModel, fitted_model: SegmentedModel,
                  method: str = CLOSED_FORM) -> KLResult:
    """Divergence from the true to the fitted Gaussian segmented model.

    Raises
    ------
    ValueError
        If the domains differ or either model is not Gaussian.
    """
    if tuple(true_model.domain) != tuple(fitted_model.domain):
        raise ValueError("models must share a domain")
    if not (true_model.family.is_gaussian and fitted_model.family.is_gaussian):
        raise ValueError("divergence is implemented for Gaussian families only")
    msd = mean_square_difference(true_model, fitted_model, method)
    s0 = true_model.family.variance
    s1 = fitted_model.family.variance
    value = 0.5 * np.log(s1 / s0) + s0 / (2.0 * s1) - 0.5 + msd / (2.0 * s1)
    return KLResult(float(max(value, 0.0)), method)
