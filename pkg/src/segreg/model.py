"""Domain types for segmented exponential-family regression.

A model on the domain ``(a, b]`` has ``m`` change-points
``a < tau_1 < ... < tau_m < b`` and ``m + 1`` polynomial segments.  Segment
``k`` covers the right-closed interval ``(tau_{k-1}, tau_k]``, so a point
sitting exactly on a change-point belongs to the left segment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, InvalidModelError
from .families import GAUSSIAN_UNIT, ResponseFamily

CONTINUOUS = "continuous"
DISCONTINUOUS = "discontinuous"
UNIFORM = "uniform"
EMPIRICAL = "empirical"

CONTINUITY_TOL = 1e-8


def poly_eval(coeffs: Sequence[float], x):
    """Evaluate ``c_1 + c_2 x + ... + c_p x^(p-1)`` by Horner's rule."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c in reversed(tuple(coeffs)):
        out = out * x + c
    return out


@dataclass(frozen=True)
class SegmentParams:
    """Polynomial coefficients of one segment's linear predictor."""

    coeffs: tuple

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) < 1:
            raise InvalidModelError("a segment needs at least one coefficient")
        if not all(np.isfinite(coeffs)):
            raise InvalidModelError("segment coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def p(self) -> int:
        return len(self.coeffs)

    def predictor(self, x):
        return poly_eval(self.coeffs, x)


@dataclass(frozen=True)
class ChangePointSpec:
    """Location of a change-point and whether the regression is continuous there."""

    location: float
    continuity: str = CONTINUOUS

    def __post_init__(self) -> None:
        if self.continuity not in (CONTINUOUS, DISCONTINUOUS):
            raise InvalidModelError(f"unknown continuity flag {self.continuity!r}")
        object.__setattr__(self, "location", float(self.location))

    @property
    def is_continuous(self) -> bool:
        return self.continuity == CONTINUOUS


@dataclass(frozen=True)
class SegmentedModel:
    """Full parameter bundle of a segmented regression model.

    Parameters
    ----------
    domain : tuple of float
        Covariate interval ``(a, b]``.
    segments : sequence of SegmentParams
        ``m + 1`` segments sharing the same dimension ``p``.
    change_points : sequence of ChangePointSpec
        ``m`` interior change-points with strictly increasing locations.
    family : ResponseFamily
        Response law.
    """

    domain: tuple
    segments: tuple
    change_points: tuple = ()
    family: ResponseFamily = field(default_factory=ResponseFamily)

    def __post_init__(self) -> None:
        a, b = (float(v) for v in self.domain)
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise InvalidModelError("domain must be a finite interval with a < b")
        object.__setattr__(self, "domain", (a, b))
        segments = tuple(s if isinstance(s, SegmentParams) else SegmentParams(tuple(s))
                         for s in self.segments)
        cps = tuple(c if isinstance(c, ChangePointSpec) else ChangePointSpec(*c)
                    for c in self.change_points)
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "change_points", cps)
        if len(segments) != len(cps) + 1:
            raise InvalidModelError("segments count must equal change_points count + 1")
        p = segments[0].p
        if any(s.p != p for s in segments):
            raise InvalidModelError("all segments must share the same dimension p")
        locs = [c.location for c in cps]
        if any(not (a < t < b) for t in locs):
            raise InvalidModelError("change-points must lie strictly inside the domain")
        if any(t2 <= t1 for t1, t2 in zip(locs, locs[1:])):
            raise InvalidModelError("change-point locations must be strictly increasing")
        for k, cp in enumerate(cps):
            if cp.is_continuous:
                left = float(segments[k].predictor(cp.location))
                right = float(segments[k + 1].predictor(cp.location))
                if abs(left - right) > CONTINUITY_TOL * (1.0 + abs(left)):
                    raise InvalidModelError(
                        f"continuity violated at change-point {k + 1}: {left!r} vs {right!r}")

    @property
    def p(self) -> int:
        return self.segments[0].p

    @property
    def m(self) -> int:
        return len(self.change_points)

    @property
    def m_continuous(self) -> int:
        return sum(cp.is_continuous for cp in self.change_points)

    @property
    def m_discontinuous(self) -> int:
        return self.m - self.m_continuous

    @property
    def locations(self) -> np.ndarray:
        return np.array([cp.location for cp in self.change_points], dtype=float)

    @property
    def pattern(self) -> tuple:
        return tuple(cp.continuity for cp in self.change_points)

    def check_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a, b = self.domain
        if np.any(~(x > a)) or np.any(~(x <= b)):
            raise DomainError(f"covariate outside the model domain ({a}, {b}]")
        return x

    def segment_indices(self, x) -> np.ndarray:
        """Zero-based segment index for each covariate value."""
        x = self.check_domain(x)
        return np.searchsorted(self.locations, x, side="left")

    def linear_predictor(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = self.segment_indices(x)
        eta = np.empty(x.shape, dtype=float)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                eta[mask] = seg.predictor(x[mask])
        return eta

    def mean_function(self, x) -> np.ndarray:
        return self.family.mean(self.linear_predictor(x))

    def to_dict(self) -> dict:
        return {
            "domain": [self.domain[0], self.domain[1]],
            "p": self.p,
            "family": self.family.to_dict(),
            "segments": [list(s.coeffs) for s in self.segments],
            "change_points": [{"location": cp.location, "continuity": cp.continuity}
                              for cp in self.change_points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SegmentedModel":
        segments = [SegmentParams(tuple(c)) for c in data["segments"]]
        if any(s.p != int(data["p"]) for s in segments):
            raise InvalidModelError("segment length does not match p")
        return cls(
            domain=tuple(data["domain"]),
            segments=tuple(segments),
            change_points=tuple(ChangePointSpec(c["location"], c["continuity"])
                                for c in data["change_points"]),
            family=ResponseFamily.from_dict(data["family"]),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "SegmentedModel":
        return cls.from_dict(json.loads(text))


class Dataset:
    """Sample of ``(x, y)`` pairs on a known covariate interval.

    Points are stored sorted by ``x`` (stable sort); ``order[i]`` is the
    original position of the ``i``-th sorted point.
    """

    def __init__(self, x: Iterable[float], y: Iterable[float], domain=(0.0, 1.0),
                 covariate_law: str = UNIFORM) -> None:
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        a, b = (float(v) for v in domain)
        if not a < b:
            raise ValueError("domain must satisfy a < b")
        if np.any(~(x > a)) or np.any(~(x <= b)):
            raise DomainError(f"covariate outside the domain ({a}, {b}]")
        if covariate_law not in (UNIFORM, EMPIRICAL):
            raise ValueError(f"unknown covariate law {covariate_law!r}")
        order = np.argsort(x, kind="stable")
        self.x = x[order]
        self.y = y[order]
        self.order = order
        for arr in (self.x, self.y, self.order):
            arr.setflags(write=False)
        self.domain = (a, b)
        self.covariate_law = covariate_law

    @property
    def n(self) -> int:
        return int(self.x.size)

    def __len__(self) -> int:
        return self.n

    def subset(self, start: int, stop: int) -> "Dataset":
        """Contiguous slice of the sorted points as a new dataset."""
        return Dataset(self.x[start:stop], self.y[start:stop], self.domain, self.covariate_law)

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, domain={self.domain}, covariate_law={self.covariate_law!r})"


def single_segment_model(coeffs, domain=(0.0, 1.0), family: ResponseFamily | None = None
                         ) -> SegmentedModel:
    return SegmentedModel(tuple(domain), (SegmentParams(tuple(coeffs)),), (),
                          family or ResponseFamily(GAUSSIAN_UNIT))


def log_likelihood(model: SegmentedModel, data: Dataset) -> float:
    """Exact log-likelihood of ``data`` under ``model``.

    The covariate density term is excluded; the response base measure term is
    included so values are absolute.
    """
    if data.n == 0:
        return 0.0
    model.family.validate_response(data.y)
    eta = model.linear_predictor(data.x)
    return float(np.sum(model.family.loglik_terms(data.y, eta)))


def predict_mean(model: SegmentedModel, x: float) -> float:
    """Mean response at ``x``; a point on a change-point uses the left segment."""
    return float(model.mean_function(np.asarray([x], dtype=float))[0])


def segment_index(model: SegmentedModel, x: float) -> int:
    """One-based index ``k`` with ``tau_{k-1} < x <= tau_k``."""
    return int(model.segment_indices(np.asarray([x], dtype=float))[0]) + 1
