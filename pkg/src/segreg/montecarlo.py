"""Monte Carlo experiments on segmented Gaussian line models.

Two experiments are provided:

* ``bias_experiment`` estimates the expected optimism of the maximised
  log-likelihood, ``E[sum g(xi_hat; D) - sum g(xi_hat; D_copy)]``, where ``g``
  is the log-likelihood ratio against the true model and ``D_copy`` is an
  independent sample of the same size.
* ``selection_experiment`` runs model selection under several criteria and
  records the Kullback-Leibler risk of the selected model and the histogram of
  selected change-point counts.

Each replication draws from its own counter-based stream keyed by
``(seed, rep_index, stream)``, so results do not depend on execution order.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .criteria import AIC, AIC_NAIVE, AIC_NAIVE_CONT6, BIC, criterion_name
from .errors import ExperimentAbortedError, SegRegError
from .families import ResponseFamily
from .kl import kl_divergence
from .model import (CONTINUOUS, DISCONTINUOUS, ChangePointSpec, Dataset, SegmentParams,
                    SegmentedModel, log_likelihood)
from .search import FIXED_GRID, ContinuityPattern, SearchConfig, fit_mixed
from .selection import (ALL_CONTINUOUS, ALL_DISCONTINUOUS, PATTERN_POLICIES, SelectionSpace,
                        build_report, fits_for_space)

SLOPE_INTERCEPT = "slope-intercept"
INTERCEPT_SLOPE = "intercept-slope"
MAX_FAILURE_RATE = 0.01
THREADS_ENV = "JOINPOINT_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one Monte Carlo cell.

    Parameters
    ----------
    n : int
        Sample size.
    m_true : int
        Number of true change-points.
    theta_true : tuple of float
        Per-segment coefficient pairs, read according to ``theta_order``.
    tau_true : tuple of float
        True change-point locations in ``(0, 1)``.
    continuity_true : ContinuityPattern
        Continuity of the true change-points; also fixes the pattern fitted in
        the bias experiment.
    replications : int
    seed : int
    m_max : int
        Largest number of change-points considered in selection.
    criteria : tuple of str
    search : SearchConfig
    theta_order : str, optional
        ``"slope-intercept"`` or ``"intercept-slope"``.  Defaults to
        slope-intercept when every true change-point is continuous and to
        intercept-slope otherwise.
    pattern_policy : str, optional
        Selection space; defaults to all-continuous or all-discontinuous
        following ``continuity_true``.
    kl_scale : float, optional
        Multiplier applied to reported divergences (100 for continuous, 10
        otherwise by default).
    histogram_top : int, optional
        Selected counts at or above this value share one bin; defaults to
        ``m_true + 2``.
    label : str
    reference : dict, optional
        Published values for side-by-side reporting.
    """

    n: int
    m_true: int
    theta_true: tuple
    tau_true: tuple
    continuity_true: ContinuityPattern
    replications: int = 1000
    seed: int = 0
    m_max: int = 4
    criteria: tuple = (AIC, AIC_NAIVE, BIC)
    search: SearchConfig = field(default_factory=SearchConfig)
    theta_order: Optional[str] = None
    pattern_policy: Optional[str] = None
    kl_scale: Optional[float] = None
    histogram_top: Optional[int] = None
    label: str = ""
    reference: Optional[dict] = None

    def __post_init__(self) -> None:
        theta = tuple(float(v) for v in self.theta_true)
        tau = tuple(float(v) for v in self.tau_true)
        object.__setattr__(self, "theta_true", theta)
        object.__setattr__(self, "tau_true", tau)
        if isinstance(self.continuity_true, str):
            object.__setattr__(self, "continuity_true",
                               ContinuityPattern.parse(self.continuity_true))
        object.__setattr__(self, "criteria", tuple(criterion_name(c) for c in self.criteria))
        if self.n < 1 or self.replications < 1 or self.m_true < 0 or self.m_max < 0:
            raise ValueError("n, replications must be positive and m_true, m_max non-negative")
        if len(theta) % (self.m_true + 1) != 0 or len(theta) == 0:
            raise ValueError("theta_true length must be p * (m_true + 1)")
        if len(tau) != self.m_true or self.continuity_true.m != self.m_true:
            raise ValueError("tau_true and continuity_true must have m_true entries")
        if any(not 0.0 < t < 1.0 for t in tau) or any(b <= a for a, b in zip(tau, tau[1:])):
            raise ValueError("tau_true must be strictly increasing inside (0, 1)")
        if self.theta_order not in (None, SLOPE_INTERCEPT, INTERCEPT_SLOPE):
            raise ValueError(f"unknown theta_order {self.theta_order!r}")
        if self.pattern_policy is not None and self.pattern_policy not in PATTERN_POLICIES:
            raise ValueError(f"unknown pattern policy {self.pattern_policy!r}")

    @property
    def p(self) -> int:
        return len(self.theta_true) // (self.m_true + 1)

    @property
    def resolved_theta_order(self) -> str:
        if self.theta_order is not None:
            return self.theta_order
        return SLOPE_INTERCEPT if self.continuity_true.is_all_continuous else INTERCEPT_SLOPE

    @property
    def resolved_policy(self) -> str:
        if self.pattern_policy is not None:
            return self.pattern_policy
        if self.continuity_true.is_all_continuous:
            return ALL_CONTINUOUS
        return ALL_DISCONTINUOUS

    @property
    def resolved_kl_scale(self) -> float:
        if self.kl_scale is not None:
            return float(self.kl_scale)
        return 100.0 if self.continuity_true.is_all_continuous else 10.0

    @property
    def resolved_histogram_top(self) -> int:
        return self.histogram_top if self.histogram_top is not None else self.m_true + 2

    def to_dict(self) -> dict:
        out = asdict(self)
        out["continuity_true"] = self.continuity_true.code
        out["search"] = self.search.to_dict()
        out["theta_order"] = self.resolved_theta_order
        out["pattern_policy"] = self.resolved_policy
        out["kl_scale"] = self.resolved_kl_scale
        out["histogram_top"] = self.resolved_histogram_top
        out["theta_true"] = list(self.theta_true)
        out["tau_true"] = list(self.tau_true)
        out["criteria"] = list(self.criteria)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data.pop("experiment", None)
        if "search" in data and isinstance(data["search"], dict):
            data["search"] = SearchConfig(**data["search"])
        if "continuity_true" in data and not isinstance(data["continuity_true"], ContinuityPattern):
            data["continuity_true"] = ContinuityPattern.parse(str(data["continuity_true"]))
        for key in ("theta_true", "tau_true", "criteria"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def true_model(config: ExperimentConfig) -> tuple:
    """Resolve the configured truth into a model.

    Returns the model and a flag telling whether intercepts were adjusted to
    make the mean continuous at the continuous change-points.
    """
    p = config.p
    theta = np.asarray(config.theta_true, dtype=float).reshape(config.m_true + 1, p)
    if config.resolved_theta_order == SLOPE_INTERCEPT:
        if p != 2:
            raise ValueError("slope-intercept ordering needs p = 2")
        theta = theta[:, ::-1].copy()
    projected = False
    for k, (tau, flag) in enumerate(zip(config.tau_true, config.continuity_true.flags)):
        if flag == CONTINUOUS:
            left = float(np.polyval(theta[k][::-1], tau))
            right = float(np.polyval(theta[k + 1][::-1], tau))
            if abs(left - right) > 1e-12:
                theta[k + 1, 0] += left - right
                projected = True
    model = SegmentedModel(
        (0.0, 1.0),
        tuple(SegmentParams(tuple(row)) for row in theta),
        tuple(ChangePointSpec(t, f) for t, f in zip(config.tau_true, config.continuity_true.flags)),
        ResponseFamily(),
    )
    return model, projected


def describe_mean(model: SegmentedModel) -> list:
    """Human-readable mean function, one string per segment."""
    edges = [model.domain[0], *model.locations.tolist(), model.domain[1]]
    out = []
    for k, seg in enumerate(model.segments):
        terms = " + ".join(f"{c:g}*x^{j}" if j else f"{c:g}" for j, c in enumerate(seg.coeffs))
        out.append(f"({edges[k]:g}, {edges[k + 1]:g}]: {terms}")
    return out


def _rng(seed: int, rep_index: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(rep_index), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def _draw(model: SegmentedModel, n: int, rng: np.random.Generator) -> Dataset:
    x = 1.0 - rng.random(n)
    eps = rng.standard_normal(n)
    y = model.mean_function(x) + eps
    return Dataset(x, y, model.domain)


def generate_replication(config: ExperimentConfig, rep_index: int, stream: int = 0) -> Dataset:
    """Sample for replication ``rep_index``: ``x ~ U(0, 1]``, ``y = mu(x) + N(0, 1)``."""
    model, _ = true_model(config)
    return _draw(model, config.n, _rng(config.seed, rep_index, stream))


# ---------------------------------------------------------------------------
# replication workers
# ---------------------------------------------------------------------------

def _bias_once(config, model, rep, attempt):
    data = _draw(model, config.n, _rng(config.seed, rep, 2 * attempt))
    copy = _draw(model, config.n, _rng(config.seed, rep, 2 * attempt + 1))
    fit = fit_mixed(data, config.continuity_true, ResponseFamily(), config.p, config.search)
    inside = fit.loglik - log_likelihood(model, data)
    outside = log_likelihood(fit.model, copy) - log_likelihood(model, copy)
    return inside - outside


def _selection_once(config, model, rep, attempt):
    data = _draw(model, config.n, _rng(config.seed, rep, 2 * attempt))
    space = SelectionSpace(config.m_max, config.resolved_policy, config.criteria[0])
    fits = fits_for_space(data, space, ResponseFamily(), config.p, config.search)
    out = []
    for crit in config.criteria:
        report = build_report(fits, replace(space, criterion=crit), config.n)
        best = report.best
        out.append((best.m, kl_divergence(model, best.fit.model).value))
    return out


def _run_rep(args):
    kind, config, model, rep = args
    fn = _bias_once if kind == "bias" else _selection_once
    for attempt in range(2):
        try:
            return rep, attempt, fn(config, model, rep, attempt)
        except SegRegError:
            continue
    return rep, 2, None


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count from the argument or the ``JOINPOINT_THREADS`` variable (0 = all cores)."""
    if workers is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        workers = int(env) if env else 1
    if workers <= 0:
        workers = os.cpu_count() or 1
    return max(1, int(workers))


def _map_reps(kind, config, model, workers):
    tasks = [(kind, config, model, r) for r in range(config.replications)]
    if workers <= 1:
        results = [_run_rep(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_rep, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    results.sort(key=lambda r: r[0])
    failures = sum(1 for r in results if r[2] is None)
    redraws = sum(1 for r in results if r[1] == 1)
    if failures > MAX_FAILURE_RATE * config.replications:
        raise ExperimentAbortedError(
            f"{failures} of {config.replications} replications failed (limit 1%)")
    return [r[2] for r in results if r[2] is not None], failures, redraws


# ---------------------------------------------------------------------------
# bias experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasReport:
    estimate: float
    std_error: float
    replications: int
    theoretical: float
    failures: int = 0
    redraws: int = 0
    projected_truth: bool = False
    mean_function: tuple = ()
    config: Optional[dict] = None

    def to_dict(self) -> dict:
        return asdict(self)


def theoretical_bias(p: int, pattern: ContinuityPattern) -> float:
    """Limit of the optimism: ``p(m+1)`` plus 3 per discontinuous change-point."""
    return float(p * (pattern.m + 1) + 3 * pattern.m_discontinuous)


def bias_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> BiasReport:
    """Monte Carlo estimate of the maximised log-likelihood's optimism."""
    model, projected = true_model(config)
    values, failures, redraws = _map_reps("bias", config, model, resolve_workers(workers))
    vals = np.asarray(values, dtype=float)
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return BiasReport(float(vals.mean()), se, int(vals.size),
                      theoretical_bias(config.p, config.continuity_true), failures, redraws,
                      projected, tuple(describe_mean(model)), config.to_dict())


# ---------------------------------------------------------------------------
# selection experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriterionSummary:
    kl_mean: float
    kl_median: float
    rate_histogram: dict
    counts: tuple

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SelectionExperimentReport:
    per_criterion: dict
    kl_scale: float
    replications: int
    failures: int = 0
    redraws: int = 0
    projected_truth: bool = False
    mean_function: tuple = ()
    config: Optional[dict] = None

    def rate(self, criterion: str, label: str) -> float:
        return self.per_criterion[criterion_name(criterion)].rate_histogram[label]

    def rate_at_least(self, criterion: str, m: int) -> float:
        counts = self.per_criterion[criterion_name(criterion)].counts
        return 100.0 * sum(counts[m:]) / max(sum(counts), 1)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_criterion"] = {k: v.to_dict() for k, v in self.per_criterion.items()}
        return out


def histogram_labels(m_max: int, top: int) -> list:
    if top > m_max:
        return [str(k) for k in range(m_max + 1)]
    return [str(k) for k in range(top)] + [f"{top}+"]


def _histogram(selected: np.ndarray, m_max: int, top: int) -> tuple:
    counts = np.bincount(selected, minlength=m_max + 1)[: m_max + 1]
    labels = histogram_labels(m_max, top)
    total = max(int(counts.sum()), 1)
    hist = {}
    for k, label in enumerate(labels):
        c = counts[k:].sum() if label.endswith("+") else counts[k]
        hist[label] = 100.0 * float(c) / total
    return hist, tuple(int(c) for c in counts)


def selection_experiment(config: ExperimentConfig, workers: Optional[int] = None
                         ) -> SelectionExperimentReport:
    """Monte Carlo KL risk and selection rates for each configured criterion."""
    model, projected = true_model(config)
    results, failures, redraws = _map_reps("selection", config, model, resolve_workers(workers))
    scale = config.resolved_kl_scale
    top = config.resolved_histogram_top
    per = {}
    for j, crit in enumerate(config.criteria):
        ms = np.array([r[j][0] for r in results], dtype=np.int64)
        kls = np.array([r[j][1] for r in results], dtype=float) * scale
        hist, counts = _histogram(ms, config.m_max, top)
        per[crit] = CriterionSummary(float(kls.mean()), float(np.median(kls)), hist, counts)
    return SelectionExperimentReport(per, scale, len(results), failures, redraws, projected,
                                     tuple(describe_mean(model)), config.to_dict())


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

TAU_BY_M = {1: (0.5,), 2: (0.3, 0.7), 3: (0.25, 0.5, 0.75), 4: (0.2, 0.4, 0.6, 0.8)}

_BIAS_BASE = {
    "continuous": {
        1: (-0.5, 0, 0.5, 0),
        2: (-0.5, 0, 0.5, 0, -0.5, 0),
        3: (-0.5, 0, 0.5, 0, -0.5, 0, 0.5, 0),
        4: (-0.5, 0, 0.5, 0, -0.5, 0, 0.5, 0, -0.5, 0),
    },
    "discontinuous": {
        1: (-1, 0, 1, -1),
        2: (-1, 0, 1, -0.6, -1, 0.8),
        3: (-1, 0, 1, -0.5, -1, 0.5, 1, -1),
        4: (-1, 0, 1, -0.4, -1, 0.4, 1, -0.8, -1, 0.8),
    },
}

# Published bias values, indexed by case, n, multiplier and m.
_BIAS_PUBLISHED = {
    "continuous": {
        100: [(4.08, 5.87, 7.51, 8.74), (4.27, 6.14, 7.60, 8.75), (4.36, 6.19, 7.77, 8.90),
              (4.32, 6.26, 7.90, 9.05)],
        200: [(4.14, 6.05, 7.76, 9.29), (4.39, 6.11, 7.84, 9.42), (4.32, 6.08, 7.97, 9.40),
              (4.21, 6.27, 8.06, 9.66)],
        300: [(4.26, 6.01, 7.89, 9.60), (4.45, 6.10, 7.92, 9.64), (4.30, 5.96, 8.07, 9.67),
              (4.21, 6.20, 8.33, 9.69)],
    },
    "discontinuous": {
        100: [(7.83, 14.36, 19.98, 25.12), (7.76, 14.36, 20.29, 25.83),
              (7.42, 14.11, 21.46, 26.84), (7.36, 15.13, 22.90, 29.10)],
        200: [(8.21, 14.89, 21.03, 27.05), (7.52, 14.19, 20.76, 27.28),
              (7.16, 13.96, 20.76, 27.67), (7.56, 14.53, 21.74, 29.52)],
        300: [(8.28, 14.97, 21.58, 28.02), (7.13, 13.94, 20.61, 26.75),
              (6.84, 13.70, 20.21, 27.36), (7.14, 14.35, 20.96, 29.00)],
    },
}

_SELECTION_THETAS = {
    "table2": {
        100: [(0, 0, 2.5, -1.25), (0, 0, 3, -1.5), (0, 0, 3.5, -1.75), (0, 0, 4, -2)],
        200: [(0, 0, 2.5, -1.25), (0, 0, 3, -1.5), (0, 0, 3.5, -1.75), (0, 0, 4, -2)],
        300: [(0, 0, 2.5, -1.25), (0, 0, 3, -1.5), (0, 0, 3.5, -1.75), (0, 0, 4, -2)],
    },
    "table3": {
        100: [(0, 0, 1.2, 0), (0, 0, 1.8, 0), (0, 0, -1.4, 4), (0, 0, -2.4, 6)],
        200: [(0, 0, 1, 0), (0, 0, 1.6, 0), (0, 0, -0.9, 3), (0, 0, -1.9, 5)],
        300: [(0, 0, 1.2, 0), (0, 0, 1.8, 0), (0, 0, 0.8, 0), (0, 0, 1.4, 0)],
    },
    "table4": {
        100: [(0, 0, 3.5, -1.05, 7, -3.5), (0, 0, 4, -1.2, 8, -4), (0, 0, 4.5, -1.35, 9, -4.5),
              (0, 0, 5, -1.5, 0, 2)],
        200: [(0, 0, 3, -0.9, 6, -3), (0, 0, 3.5, -1.05, 7, -3.5), (0, 0, 4, -1.2, 8, -4),
              (0, 0, 5, -1.5, 0, 2)],
        300: [(0, 0, 2.5, -0.75, 5, -2.5), (0, 0, 3, -0.9, 6, -3), (0, 0, 3.5, -1.05, 7, -3.5),
              (0, 0, 5, -1.5, 0, 2)],
    },
    "table5": {
        100: [(0, 0, 1.4, 0, 2.8, 0), (0, 0, 2, 0, 4, 0), (0, 0, 1.2, 0, 0, 0),
              (0, 0, 1.8, 0, 0, 0)],
        200: [(0, 0, 1.2, 0, 2.4, 0), (0, 0, 1.8, 0, 3.6, 0), (0, 0, 1, 0, 0, 0),
              (0, 0, 1.6, 0, 0, 0)],
        300: [(0, 0, 1, 0, 2, 0), (0, 0, 1.6, 0, 3.2, 0), (0, 0, 0.8, 0, 0, 0),
              (0, 0, 1.4, 0, 0, 0)],
    },
}

# Cells run by default for each preset; the full grid is available on request.
_HEADLINE = {"table1": {"n": 100, "scale": 1}, "table2": {"n": 300, "index": 3},
             "table3": {"n": 100, "index": 1}, "table4": {"n": 100, "index": 0},
             "table5": {"n": 100, "index": 0}}

PRESETS = ("table1", "table2", "table3", "table4", "table5")


@dataclass(frozen=True)
class PresetCell:
    experiment: str  # "bias" or "selection"
    config: ExperimentConfig
    n: int
    m: int
    case: str
    scale: Optional[int] = None
    index: Optional[int] = None


def preset_search(tau: Sequence[float], continuous: bool) -> SearchConfig:
    """Default search of a preset cell.

    Joined cells search the coarsest grid among 0.1 and 0.05 that contains
    every true change-point; with data-point candidates, spurious kinks in
    three-point edge segments inflate both the optimism and AIC's
    over-selection far beyond the published values.  Discontinuous cells use
    the library default (data midpoints).
    """
    if continuous:
        for res in (0.1, 0.05):
            if all(abs(t / res - round(t / res)) < 1e-9 for t in tau):
                return SearchConfig(candidate_rule=FIXED_GRID, grid_resolution=res)
    return SearchConfig()


def preset_cells(name: str, replications: int = 1000, seed: int = 0,
                 search: SearchConfig | None = None) -> list:
    """Every cell of a preset table as ``PresetCell`` records.

    ``search`` overrides the per-cell default from ``preset_search``.
    """
    cells = []
    if name == "table1":
        for case, bases in _BIAS_BASE.items():
            flag = CONTINUOUS if case == "continuous" else DISCONTINUOUS
            for n, rows in _BIAS_PUBLISHED[case].items():
                for s, row in enumerate(rows, start=1):
                    for m in range(1, 5):
                        theta = tuple(s * v for v in bases[m])
                        cfg = ExperimentConfig(
                            n=n, m_true=m, theta_true=theta, tau_true=TAU_BY_M[m],
                            continuity_true=ContinuityPattern.uniform(m, flag),
                            replications=replications, seed=seed,
                            search=search or preset_search(TAU_BY_M[m], flag == CONTINUOUS),
                            label=f"table1 {case} n={n} {s}*theta0 m={m}",
                            reference={"bias": row[m - 1]})
                        cells.append(PresetCell("bias", cfg, n, m, case, scale=s))
        return cells
    if name not in _SELECTION_THETAS:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    m = 1 if name in ("table2", "table3") else 2
    continuous = name in ("table2", "table4")
    flag = CONTINUOUS if continuous else DISCONTINUOUS
    naive = AIC_NAIVE_CONT6 if continuous else AIC_NAIVE
    for n, thetas in _SELECTION_THETAS[name].items():
        for i, theta in enumerate(thetas):
            cfg = ExperimentConfig(
                n=n, m_true=m, theta_true=theta, tau_true=TAU_BY_M[m],
                continuity_true=ContinuityPattern.uniform(m, flag), replications=replications,
                seed=seed, m_max=4, criteria=(AIC, naive, BIC),
                search=search or preset_search(TAU_BY_M[m], continuous),
                label=f"{name} n={n} theta={theta}")
            cells.append(PresetCell("selection", cfg, n, m, flag, index=i))
    return cells


def select_cells(cells: Sequence[PresetCell], name: str, n=None, m=None, scale=None, case=None,
                 index=None, all_cells: bool = False) -> list:
    """Filter preset cells; without filters the preset's headline cells are kept."""
    if not all_cells and all(v is None for v in (n, m, scale, case, index)):
        head = _HEADLINE[name]
        n, scale, index = head.get("n"), head.get("scale"), head.get("index")
    out = []
    for c in cells:
        if n is not None and c.n != n:
            continue
        if m is not None and c.m != m:
            continue
        if scale is not None and c.scale != scale:
            continue
        if case is not None and c.case != case:
            continue
        if index is not None and c.index != index:
            continue
        out.append(c)
    return out


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def format_bias_table(reports: Sequence[BiasReport]) -> str:
    header = f"{'cell':<44} {'estimate':>9} {'se':>7} {'theory':>7} {'published':>9} {'reps':>5}"
    lines = [header, "-" * len(header)]
    for r in reports:
        cfg = r.config or {}
        ref = (cfg.get("reference") or {}).get("bias")
        ref_s = f"{ref:9.2f}" if ref is not None else f"{'-':>9}"
        lines.append(f"{cfg.get('label', ''):<44} {r.estimate:9.3f} {r.std_error:7.3f} "
                     f"{r.theoretical:7.1f} {ref_s} {r.replications:5d}")
    return "\n".join(lines)


def format_selection_table(reports: Sequence[SelectionExperimentReport]) -> str:
    lines = []
    for r in reports:
        cfg = r.config or {}
        first = next(iter(r.per_criterion.values()))
        labels = list(first.rate_histogram)
        header = (f"{'n':>4} {'theta*':<28} {'criterion':<16} {'KL mean':>8} {'KL med':>8} "
                  + " ".join(f"{lab:>6}" for lab in labels))
        if not lines:
            lines += [f"KL scaled x{r.kl_scale:g}; selection rates in %", header,
                      "-" * len(header)]
        theta = "(" + ",".join(f"{v:g}" for v in cfg.get("theta_true", ())) + ")"
        for j, (crit, s) in enumerate(r.per_criterion.items()):
            lines.append(f"{cfg.get('n', '') if j == 0 else '':>4} {theta if j == 0 else '':<28} "
                         f"{crit:<16} {s.kl_mean:8.2f} {s.kl_median:8.2f} "
                         + " ".join(f"{s.rate_histogram[lab]:6.1f}" for lab in labels))
    return "\n".join(lines)


def report_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, default=float)
