"""Profile-likelihood search over change-point locations.

Discontinuous change-points split the data into independently fitted
segments, so the optimal placement is found by a partition dynamic programme
over per-interval segment costs.  Continuous (joined) change-points couple
neighbouring segments; for Gaussian lines the coupling is handled exactly by a
dynamic programme whose state is the fitted value at the last knot (see
``_kernels``), and all other cases enumerate candidate tuples and fit each one
with the continuity constraints imposed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateSegmentError, InfeasibleError, NonConvergenceError, SegRegError
from .families import ResponseFamily
from .model import (CONTINUOUS, DISCONTINUOUS, ChangePointSpec, Dataset, SegmentedModel,
                    log_likelihood)
from .segfit import fit_constrained, fit_segment, fit_variance, unit_coordinates

DATA_MIDPOINTS = "data-midpoints"
DATA_POINTS = "data-points"
FIXED_GRID = "fixed-grid"
CANDIDATE_RULES = (DATA_MIDPOINTS, DATA_POINTS, FIXED_GRID)

BRUTE_FORCE = "brute-force"
DYNAMIC_PROGRAMMING = "dynamic-programming"
STRATEGIES = (BRUTE_FORCE, DYNAMIC_PROGRAMMING)

TIE_TOL = 1e-9


@dataclass(frozen=True)
class SearchConfig:
    """Search settings.

    Parameters
    ----------
    min_segment_points : int, optional
        Minimum number of observations per segment.  Defaults to
        ``max(p + 1, 3)``.
    candidate_rule : str, optional
        ``"data-midpoints"``, ``"data-points"`` or ``"fixed-grid"``.  Defaults
        to midpoints for discontinuous and data points for continuous or
        mixed patterns.
    grid_resolution : float
        Spacing of the fixed grid, in covariate units.
    strategy : str
        ``"dynamic-programming"`` (falls back to enumeration where no exact
        recursion is available) or ``"brute-force"``.
    """

    min_segment_points: Optional[int] = None
    candidate_rule: Optional[str] = None
    grid_resolution: float = 0.01
    strategy: str = DYNAMIC_PROGRAMMING

    def __post_init__(self) -> None:
        if self.candidate_rule is not None and self.candidate_rule not in CANDIDATE_RULES:
            raise ValueError(f"unknown candidate rule {self.candidate_rule!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not self.grid_resolution > 0:
            raise ValueError("grid_resolution must be positive")

    def min_points(self, p: int) -> int:
        if self.min_segment_points is None:
            return max(p + 1, 3)
        if self.min_segment_points < p + 1:
            raise ValueError(f"min_segment_points must be at least p + 1 = {p + 1}")
        return int(self.min_segment_points)

    def rule_for(self, all_discontinuous: bool) -> str:
        if self.candidate_rule is not None:
            return self.candidate_rule
        return DATA_MIDPOINTS if all_discontinuous else DATA_POINTS

    def to_dict(self) -> dict:
        return {"min_segment_points": self.min_segment_points,
                "candidate_rule": self.candidate_rule,
                "grid_resolution": self.grid_resolution,
                "strategy": self.strategy}


@dataclass(frozen=True)
class ContinuityPattern:
    """Continuity flag for each change-point, in order."""

    flags: tuple = ()

    def __post_init__(self) -> None:
        flags = tuple(self.flags)
        if any(f not in (CONTINUOUS, DISCONTINUOUS) for f in flags):
            raise ValueError("flags must be 'continuous' or 'discontinuous'")
        object.__setattr__(self, "flags", flags)

    @classmethod
    def parse(cls, code: str) -> "ContinuityPattern":
        """Build a pattern from a string of ``c``/``d`` letters."""
        table = {"c": CONTINUOUS, "d": DISCONTINUOUS}
        try:
            return cls(tuple(table[ch] for ch in code.strip().lower()))
        except KeyError as exc:
            raise ValueError(f"pattern letters must be c or d, got {code!r}") from exc

    @classmethod
    def uniform(cls, m: int, continuity: str) -> "ContinuityPattern":
        return cls((continuity,) * m)

    @property
    def m(self) -> int:
        return len(self.flags)

    @property
    def m_continuous(self) -> int:
        return sum(f == CONTINUOUS for f in self.flags)

    @property
    def m_discontinuous(self) -> int:
        return self.m - self.m_continuous

    @property
    def code(self) -> str:
        return "".join("c" if f == CONTINUOUS else "d" for f in self.flags)

    @property
    def is_all_continuous(self) -> bool:
        return self.m_discontinuous == 0

    @property
    def is_all_discontinuous(self) -> bool:
        return self.m_continuous == 0

    def prefix(self, k: int) -> "ContinuityPattern":
        return ContinuityPattern(self.flags[:k])


@dataclass(frozen=True)
class FitResult:
    """Maximum-likelihood fit for a fixed number of change-points and pattern."""

    model: SegmentedModel
    loglik: float
    candidates_evaluated: int
    profile: Optional[dict] = None
    strategy: str = DYNAMIC_PROGRAMMING

    @property
    def pattern(self) -> ContinuityPattern:
        return ContinuityPattern(self.model.pattern)


@dataclass
class _Candidates:
    values: np.ndarray  # candidate locations (covariate units)
    counts: np.ndarray  # number of points with x <= value
    rule: str = field(default=DATA_POINTS)


def candidate_locations(data: Dataset, rule: str = DATA_MIDPOINTS,
                        resolution: float = 0.01) -> np.ndarray:
    """Sorted, deduplicated candidate change-point locations.

    Raises
    ------
    DegenerateSegmentError
        If the data have fewer than two distinct covariate values.
    """
    if data.n == 0:
        raise DegenerateSegmentError("no data")
    ux = np.unique(data.x)
    if ux.size < 2:
        raise DegenerateSegmentError("need at least two distinct covariate values")
    if rule == DATA_MIDPOINTS:
        return 0.5 * (ux[:-1] + ux[1:])
    if rule == DATA_POINTS:
        return ux[:-1].copy()
    if rule == FIXED_GRID:
        a, b = data.domain
        k = int(np.floor((b - a) / resolution + 1e-9))
        grid = a + resolution * np.arange(1, k + 1)
        return np.unique(grid[(grid > a) & (grid < b)])
    raise ValueError(f"unknown candidate rule {rule!r}")


def _candidates(data: Dataset, rule: str, resolution: float) -> _Candidates:
    vals = candidate_locations(data, rule, resolution)
    a, b = data.domain
    vals = vals[(vals > a) & (vals < b)]
    counts = np.searchsorted(data.x, vals, side="right")
    keep = (counts > 0) & (counts < data.n)
    return _Candidates(vals[keep], counts[keep].astype(np.int64), rule)


def _boundaries(cands: _Candidates):
    """Distinct data splits with the smallest candidate location for each."""
    counts, first = np.unique(cands.counts, return_index=True)
    return counts.astype(np.int64), cands.values[first]


def _check_feasible(n: int, m: int, min_pts: int) -> None:
    if n < (m + 1) * min_pts:
        raise InfeasibleError(
            f"{n} points cannot hold {m + 1} segments of at least {min_pts} points")


def _gaussian_loglik(family: ResponseFamily, rss: float, n: int) -> float:
    if family.has_dispersion:
        s2 = max(rss / n, 1e-12)
        return -0.5 * n * (np.log(2.0 * np.pi * s2) + 1.0)
    return -0.5 * n * np.log(2.0 * np.pi) - 0.5 * rss


def _finish(data: Dataset, family: ResponseFamily, segments, locations, flags, evaluated,
            strategy, profile=None, rss=None) -> FitResult:
    if family.has_dispersion:
        if rss is None:
            raise ValueError("residual sum of squares needed for the dispersion")
        family = family.with_dispersion(fit_variance(rss, data.n))
    cps = tuple(ChangePointSpec(float(t), f) for t, f in zip(locations, flags))
    model = SegmentedModel(data.domain, tuple(segments), cps, family)
    return FitResult(model, log_likelihood(model, data), int(evaluated), profile, strategy)


def _segment_fit_or_none(family, x, y, p):
    try:
        return fit_segment(family, x, y, p)
    except (DegenerateSegmentError, NonConvergenceError):
        return None


def _discontinuous_model(data, family, p, counts, locations, evaluated, strategy, profile=None):
    edges = [0, *[int(c) for c in counts], data.n]
    fits = [fit_segment(family, data.x[a:b], data.y[a:b], p) for a, b in zip(edges, edges[1:])]
    rss = sum(f.rss for f in fits)
    return _finish(data, family, [f.params for f in fits], locations,
                   [DISCONTINUOUS] * len(locations), evaluated, strategy, profile, rss)


def _discontinuous_path(data: Dataset, m_values: Sequence[int], family: ResponseFamily, p: int,
                        config: SearchConfig, record_profile: bool = False) -> dict:
    """Best discontinuous fit for each requested ``m``; infeasible ``m`` map to the error."""
    min_pts = config.min_points(p)
    rule = config.rule_for(True)
    out: dict = {}
    m_max = max(m_values)
    try:
        cands = _candidates(data, rule, config.grid_resolution)
    except DegenerateSegmentError as exc:
        for m in m_values:
            try:
                out[m] = _discontinuous_single(data, 0, family, p, config, None, None) if m == 0 \
                    else exc
            except SegRegError as err:
                out[m] = err
        return out
    bcounts, blocs = _boundaries(cands)
    n = data.n
    if config.strategy == BRUTE_FORCE or record_profile:
        for m in m_values:
            try:
                out[m] = _discontinuous_single(data, m, family, p, config, bcounts, blocs,
                                               record_profile)
            except SegRegError as exc:
                out[m] = exc
        return out

    nodes = np.concatenate([[0], bcounts, [n]]).astype(np.int64)
    K2 = nodes.size
    if family.is_gaussian:
        a, b = data.domain
        t = unit_coordinates(data.x, a, b - a)
        if m_max <= 1:
            front = _kernels.segment_costs(t, data.y, p, np.array([0]))[0]
            back = _kernels.segment_costs(t[::-1].copy(), data.y[::-1].copy(), p,
                                          np.array([0]))[0]
            cost = np.full((K2, K2), np.inf)
            cost[0, 1:] = front[nodes[1:]]
            cost[:-1, -1] = back[n - nodes[:-1]]
            evaluated = 2 * K2
        else:
            rows = _kernels.segment_costs(t, data.y, p, nodes[:-1])
            cost = np.full((K2, K2), np.inf)
            cost[:-1, :] = rows[:, nodes]
            evaluated = K2 * (K2 - 1) // 2
    else:
        cost = np.full((K2, K2), np.inf)
        evaluated = 0
        for i in range(K2 - 1):
            for j in range(i + 1, K2):
                if nodes[j] - nodes[i] < min_pts:
                    continue
                if m_max <= 1 and i != 0 and j != K2 - 1:
                    continue
                fit = _segment_fit_or_none(family, data.x[nodes[i]:nodes[j]],
                                           data.y[nodes[i]:nodes[j]], p)
                evaluated += 1
                if fit is not None:
                    cost[i, j] = -fit.loglik
    diff = nodes[None, :] - nodes[:, None]
    cost = np.where(diff >= min_pts, cost, np.inf)
    best, chosen = _kernels.partition_dp(cost, int(m_max))
    for m in m_values:
        try:
            _check_feasible(n, m, min_pts)
            if not np.isfinite(best[m]):
                raise DegenerateSegmentError(
                    f"no admissible placement of {m} discontinuous change-points")
            sel = chosen[m, :m]
            out[m] = _discontinuous_model(data, family, p, nodes[sel], blocs[sel - 1] if m else [],
                                          evaluated, DYNAMIC_PROGRAMMING)
        except SegRegError as exc:
            out[m] = exc
    return out


def _discontinuous_single(data, m, family, p, config, bcounts, blocs, record_profile=False):
    min_pts = config.min_points(p)
    n = data.n
    _check_feasible(n, m, min_pts)
    if m == 0:
        fit = fit_segment(family, data.x, data.y, p)
        return _finish(data, family, [fit.params], [], [], 1, BRUTE_FORCE, None, fit.rss)
    cache: dict = {}

    def seg(a, b):
        key = (a, b)
        if key not in cache:
            fit = _segment_fit_or_none(family, data.x[a:b], data.y[a:b], p)
            if fit is None:
                cache[key] = None
            elif family.is_gaussian:
                cache[key] = fit.rss
            else:
                cache[key] = -fit.loglik
        return cache[key]

    best_val = np.inf
    best_sel = None
    evaluated = 0
    profile = {} if record_profile else None
    for sel in itertools.combinations(range(bcounts.size), m):
        edges = [0, *[int(bcounts[s]) for s in sel], n]
        if min(e2 - e1 for e1, e2 in zip(edges, edges[1:])) < min_pts:
            continue
        evaluated += 1
        total = 0.0
        for e1, e2 in zip(edges, edges[1:]):
            c = seg(e1, e2)
            if c is None:
                total = np.inf
                break
            total += c
        if not np.isfinite(total):
            continue
        if profile is not None:
            val = _gaussian_loglik(family, total, n) if family.is_gaussian else -total
            profile[tuple(float(blocs[s]) for s in sel)] = val
        if total < best_val - _tie_scale(family, total):
            best_val = total
            best_sel = sel
    if best_sel is None:
        raise DegenerateSegmentError(f"every placement of {m} change-points is degenerate")
    idx = np.array(best_sel, dtype=np.int64)
    return _discontinuous_model(data, family, p, bcounts[idx], blocs[idx], evaluated,
                                BRUTE_FORCE, profile)


def _tie_scale(family: ResponseFamily, rss: float) -> float:
    # Costs are residual sums of squares for Gaussian families, which equal
    # twice the negative log-likelihood in the unit-variance case.
    if family.is_gaussian and not family.has_dispersion:
        return 2.0 * TIE_TOL
    return TIE_TOL


def _use_line_dp(family: ResponseFamily, p: int, config: SearchConfig) -> bool:
    return config.strategy == DYNAMIC_PROGRAMMING and family.is_gaussian and p == 2


def _knot_bound(t: np.ndarray, cand_t: np.ndarray, y: np.ndarray) -> float:
    pts = np.unique(np.concatenate([t, cand_t]))
    gaps = np.diff(pts)
    gaps = gaps[gaps > 0]
    delta = gaps.min() if gaps.size else 1.0
    return float((1.0 + np.linalg.norm(y)) * (1.0 + 2.0 / delta))


def _report_locations(cands: _Candidates, sel, flags, data: Dataset) -> list:
    """Locations for the fitted model.

    With data-point candidates a discontinuous flag is reported at the midpoint
    of the gap it splits, which leaves the partition unchanged.
    """
    out = []
    for s, f in zip(sel, flags):
        loc = float(cands.values[s])
        if f == DISCONTINUOUS and cands.rule == DATA_POINTS:
            c = int(cands.counts[s])
            loc = 0.5 * (float(data.x[c - 1]) + float(data.x[c]))
        out.append(loc)
    return out


def _joined_model(data, family, p, cands, sel, flags, evaluated, strategy, profile=None):
    locs = _report_locations(cands, sel, flags, data)
    cfit = fit_constrained(family, data.x, data.y, p, locs, [f == CONTINUOUS for f in flags],
                           data.domain)
    return _finish(data, family, cfit.segments, locs, flags, evaluated, strategy, profile,
                   cfit.rss)


def _joined_path(data: Dataset, pattern: ContinuityPattern, m_values: Sequence[int],
                 family: ResponseFamily, p: int, config: SearchConfig,
                 record_profile: bool = False) -> dict:
    """Best fit for each prefix ``pattern.prefix(m)`` with ``m`` in ``m_values``."""
    min_pts = config.min_points(p)
    rule = config.rule_for(pattern.is_all_discontinuous and pattern.m > 0)
    out: dict = {}
    n = data.n
    try:
        cands = _candidates(data, rule, config.grid_resolution)
    except DegenerateSegmentError as exc:
        cands = None
        cand_error = exc
    if cands is not None and _use_line_dp(family, p, config) and not record_profile:
        a, b = data.domain
        t = unit_coordinates(data.x, a, b - a)
        ct = unit_coordinates(cands.values, a, b - a)
        yc = data.y - data.y.mean()
        flags = np.array([f == CONTINUOUS for f in pattern.flags], dtype=np.int8)
        best, knots, pieces = _kernels.continuous_dp(t, yc, ct, cands.counts, flags, min_pts,
                                                     _knot_bound(t, ct, yc))
        for m in m_values:
            try:
                _check_feasible(n, m, min_pts)
                if not np.isfinite(best[m]):
                    raise DegenerateSegmentError(f"no admissible placement of {m} change-points")
                sel = [int(s) for s in knots[m, :m]]
                out[m] = _joined_model(data, family, p, cands, sel, pattern.flags[:m], pieces,
                                       DYNAMIC_PROGRAMMING)
            except SegRegError as exc:
                out[m] = exc
        return out
    for m in m_values:
        try:
            _check_feasible(n, m, min_pts)
            if m == 0:
                fit = fit_segment(family, data.x, data.y, p)
                out[m] = _finish(data, family, [fit.params], [], [], 1, BRUTE_FORCE, None, fit.rss)
                continue
            if cands is None:
                raise cand_error
            out[m] = _joined_enumerate(data, pattern.prefix(m), family, p, min_pts, cands,
                                       record_profile)
        except SegRegError as exc:
            out[m] = exc
    return out


def _joined_enumerate(data, pattern, family, p, min_pts, cands, record_profile):
    n = data.n
    m = pattern.m
    cont = [f == CONTINUOUS for f in pattern.flags]
    best_val = -np.inf
    best_sel = None
    evaluated = 0
    profile = {} if record_profile else None
    for sel in itertools.combinations(range(cands.values.size), m):
        edges = [0, *[int(cands.counts[s]) for s in sel], n]
        if min(e2 - e1 for e1, e2 in zip(edges, edges[1:])) < min_pts:
            continue
        evaluated += 1
        locs = _report_locations(cands, sel, pattern.flags, data)
        try:
            cfit = fit_constrained(family, data.x, data.y, p, locs, cont, data.domain)
        except (DegenerateSegmentError, NonConvergenceError):
            continue
        val = _gaussian_loglik(family, cfit.rss, n) if family.is_gaussian else cfit.loglik
        if profile is not None:
            profile[tuple(locs)] = val
        if val > best_val + TIE_TOL:
            best_val = val
            best_sel = sel
    if best_sel is None:
        raise DegenerateSegmentError(f"every placement of {m} change-points is degenerate")
    return _joined_model(data, family, p, cands, list(best_sel), pattern.flags, evaluated,
                         BRUTE_FORCE, profile)


def _raise_or_return(result):
    if isinstance(result, Exception):
        raise result
    return result


def fit_discontinuous(data: Dataset, m: int, family: ResponseFamily | None = None, p: int = 2,
                      config: SearchConfig | None = None, record_profile: bool = False
                      ) -> FitResult:
    """Best fit with ``m`` discontinuous change-points.

    Parameters
    ----------
    data : Dataset
    m : int
        Number of change-points.
    family : ResponseFamily, optional
        Defaults to unit-variance Gaussian.
    p : int
        Segment dimension.
    config : SearchConfig, optional
    record_profile : bool
        Store the profile log-likelihood of every evaluated tuple (forces
        enumeration).

    Returns
    -------
    FitResult
    """
    family = family or ResponseFamily()
    config = config or SearchConfig()
    if m < 0:
        raise ValueError("m must be non-negative")
    _check_feasible(data.n, m, config.min_points(p))
    res = _discontinuous_path(data, [m], family, p, config, record_profile)
    return _raise_or_return(res[m])


def fit_continuous(data: Dataset, m: int, family: ResponseFamily | None = None, p: int = 2,
                   config: SearchConfig | None = None, record_profile: bool = False
                   ) -> FitResult:
    """Best fit with ``m`` continuous change-points (joinpoint regression)."""
    family = family or ResponseFamily()
    config = config or SearchConfig()
    if m < 0:
        raise ValueError("m must be non-negative")
    _check_feasible(data.n, m, config.min_points(p))
    pattern = ContinuityPattern.uniform(m, CONTINUOUS)
    res = _joined_path(data, pattern, [m], family, p, config, record_profile)
    return _raise_or_return(res[m])


def fit_mixed(data: Dataset, pattern: ContinuityPattern, family: ResponseFamily | None = None,
              p: int = 2, config: SearchConfig | None = None, record_profile: bool = False
              ) -> FitResult:
    """Best fit for a fixed sequence of continuity flags."""
    family = family or ResponseFamily()
    config = config or SearchConfig()
    if isinstance(pattern, str):
        pattern = ContinuityPattern.parse(pattern)
    if pattern.m > 0 and pattern.is_all_discontinuous:
        return fit_discontinuous(data, pattern.m, family, p, config, record_profile)
    if pattern.is_all_continuous:
        return fit_continuous(data, pattern.m, family, p, config, record_profile)
    _check_feasible(data.n, pattern.m, config.min_points(p))
    res = _joined_path(data, pattern, [pattern.m], family, p, config, record_profile)
    return _raise_or_return(res[pattern.m])


def fit_path(data: Dataset, m_max: int, continuity: str, family: ResponseFamily | None = None,
             p: int = 2, config: SearchConfig | None = None) -> dict:
    """Best fits for every ``m`` in ``0..m_max`` with all flags equal to ``continuity``.

    One dynamic-programming pass serves all ``m``.  Values are ``FitResult``
    objects, or the exception explaining why that ``m`` is infeasible.
    """
    family = family or ResponseFamily()
    config = config or SearchConfig()
    ms = list(range(m_max + 1))
    if continuity == DISCONTINUOUS:
        return _discontinuous_path(data, ms, family, p, config)
    pattern = ContinuityPattern.uniform(m_max, CONTINUOUS)
    return _joined_path(data, pattern, ms, family, p, config)


def with_strategy(config: SearchConfig, strategy: str) -> SearchConfig:
    return replace(config, strategy=strategy)
