"""Maximum-likelihood fitting of polynomial segments.

Gaussian fits are solved by a QR decomposition of the design; Poisson and
Bernoulli fits use Newton iterations (iteratively reweighted least squares) on
the canonical-link log-likelihood with step-halving.  Covariates are mapped to
``[0, 1]`` before building the power basis and the coefficients are mapped
back afterwards.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import null_space, solve_triangular

from .errors import DegenerateSegmentError, NonConvergenceError
from .families import ResponseFamily
from .model import SegmentParams

RANK_TOL = 1e-10
MAX_ITER = 100
MAX_HALVINGS = 20
REL_TOL = 1e-12
GRAD_TOL = 1e-9
DISPERSION_FLOOR = 1e-12


class DegenerateDispersionWarning(RuntimeWarning):
    """The residual sum of squares is zero, so the dispersion hit its floor."""


@dataclass(frozen=True)
class SegmentFit:
    """Result of fitting one segment.

    ``loglik`` is evaluated at the family's stated dispersion; ``rss`` is the
    residual sum of squares on the response scale.
    """

    params: SegmentParams
    loglik: float
    iterations: int
    converged: bool
    rss: float


@dataclass(frozen=True)
class GLMSolution:
    beta: np.ndarray
    eta: np.ndarray
    loglik: float
    iterations: int
    converged: bool


def unit_coordinates(x, lo: float, width: float) -> np.ndarray:
    return (np.asarray(x, dtype=float) - lo) / width


def coeffs_from_unit(coeffs_t: Sequence[float], lo: float, width: float) -> tuple:
    """Re-express a polynomial in ``t = (x - lo) / width`` as a polynomial in ``x``."""
    p = len(coeffs_t)
    lin = Polynomial([-lo / width, 1.0 / width])
    out = Polynomial([coeffs_t[-1]])
    for c in reversed(coeffs_t[:-1]):
        out = out * lin + c
    full = np.zeros(p)
    full[: out.coef.size] = out.coef[:p]
    return tuple(float(v) for v in full)


def _qr_solve(X: np.ndarray, z: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= RANK_TOL * max(diag.max(), 1.0):
        raise DegenerateSegmentError("design matrix is rank deficient")
    return solve_triangular(r, q.T @ z)


def fit_glm(family: ResponseFamily, X: np.ndarray, y: np.ndarray) -> GLMSolution:
    """Canonical-link maximum likelihood for an arbitrary design matrix."""
    n, k = X.shape
    if n < k:
        raise DegenerateSegmentError(f"{n} points cannot identify {k} coefficients")
    if family.is_gaussian:
        beta = _qr_solve(X, y)
        eta = X @ beta
        ll = float(np.sum(family.loglik_terms(y, eta)))
        return GLMSolution(beta, eta, ll, 1, True)

    beta = _qr_solve(X, family.link_start(y))
    eta = X @ beta
    ll = float(np.sum(family.loglik_terms(y, eta)))
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        w = family.variance_function(eta)
        sw = np.sqrt(np.maximum(w, 1e-300))
        resid = y - family.mean(eta)
        step = _qr_solve(X * sw[:, None], resid / sw)
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + scale * step
            eta_c = X @ cand
            ll_c = float(np.sum(family.loglik_terms(y, eta_c)))
            if np.isfinite(ll_c) and ll_c >= ll - 1e-14 * (1.0 + abs(ll)):
                break
            scale *= 0.5
        else:
            raise NonConvergenceError("log-likelihood decreased after step-halving")
        change = abs(ll_c - ll)
        beta, eta, ll = cand, eta_c, ll_c
        grad = X.T @ (y - family.mean(eta))
        if change <= REL_TOL * (1.0 + abs(ll)) and np.max(np.abs(grad)) <= GRAD_TOL * (1.0 + abs(ll)):
            converged = True
            break
    if np.max(np.abs(eta)) > 30.0:
        raise NonConvergenceError("fitted linear predictor diverges (complete separation or boundary MLE)")
    return GLMSolution(beta, eta, ll, it, converged)


def fit_segment(family: ResponseFamily, x, y, p: int) -> SegmentFit:
    """Fit a single polynomial segment of dimension ``p`` by maximum likelihood.

    Parameters
    ----------
    family : ResponseFamily
        Response law.
    x, y : array_like
        Covariates and responses of the points in the segment.
    p : int
        Number of polynomial coefficients.

    Returns
    -------
    SegmentFit
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    family.validate_response(y)
    if x.size < p:
        raise DegenerateSegmentError(f"{x.size} points cannot identify {p} coefficients")
    lo = float(x.min())
    width = float(x.max() - lo)
    if width <= 0.0:
        if p > 1:
            raise DegenerateSegmentError("segment has a single distinct covariate value")
        width = 1.0
    t = unit_coordinates(x, lo, width)
    X = np.vander(t, p, increasing=True)
    sol = fit_glm(family, X, y)
    coeffs = coeffs_from_unit(sol.beta, lo, width)
    rss = float(np.sum((y - family.mean(sol.eta)) ** 2))
    return SegmentFit(SegmentParams(coeffs), sol.loglik, sol.iterations, sol.converged, rss)


def fit_variance(residual_sum_squares: float, n: int) -> float:
    """Maximum-likelihood Gaussian dispersion ``RSS / n``.

    A zero residual sum of squares is degenerate: a warning is issued and the
    dispersion floor is returned.
    """
    if n < 1:
        raise ValueError("fit_variance needs n >= 1")
    value = float(residual_sum_squares) / n
    if value < DISPERSION_FLOOR:
        warnings.warn("zero residual variance; dispersion floor applied",
                      DegenerateDispersionWarning, stacklevel=2)
        return DISPERSION_FLOOR
    return value


@dataclass(frozen=True)
class ConstrainedFit:
    segments: tuple
    loglik: float
    rss: float
    eta: np.ndarray


def fit_constrained(family: ResponseFamily, x, y, p: int, locations: Sequence[float],
                    continuous: Sequence[bool], domain: tuple) -> ConstrainedFit:
    """Joint fit of all segments with continuity imposed at flagged change-points.

    Each continuity flag adds the linear constraint that neighbouring
    polynomials agree at the change-point.  The constraints are removed by
    reparameterising the stacked coefficient vector over the null space of the
    constraint matrix, after which an ordinary GLM fit applies.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    locs = np.asarray(locations, dtype=float)
    m = locs.size
    lo, hi = float(domain[0]), float(domain[1])
    width = hi - lo
    t = unit_coordinates(x, lo, width)
    tk = unit_coordinates(locs, lo, width)
    seg = np.searchsorted(locs, x, side="left")
    counts = np.bincount(seg, minlength=m + 1)
    if np.any(counts == 0):
        raise DegenerateSegmentError("empty segment")
    powers = np.vander(t, p, increasing=True)
    D = np.zeros((x.size, p * (m + 1)))
    for k in range(m + 1):
        mask = seg == k
        D[mask, k * p:(k + 1) * p] = powers[mask]
    rows = []
    for k in range(m):
        if continuous[k]:
            row = np.zeros(p * (m + 1))
            pk = tk[k] ** np.arange(p)
            row[k * p:(k + 1) * p] = pk
            row[(k + 1) * p:(k + 2) * p] = -pk
            rows.append(row)
    if rows:
        N = null_space(np.array(rows))
        sol = fit_glm(family, D @ N, y)
        theta = N @ sol.beta
    else:
        sol = fit_glm(family, D, y)
        theta = sol.beta
    segments = tuple(SegmentParams(coeffs_from_unit(theta[k * p:(k + 1) * p], lo, width))
                     for k in range(m + 1))
    rss = float(np.sum((y - family.mean(sol.eta)) ** 2))
    return ConstrainedFit(segments, sol.loglik, rss, sol.eta)
