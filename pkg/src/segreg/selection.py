"""Model selection over the number of change-points and their continuity."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .criteria import CriterionScore, criterion_name, score
from .errors import InfeasibleError, SegRegError
from .families import ResponseFamily
from .model import CONTINUOUS, DISCONTINUOUS, Dataset
from .search import (ContinuityPattern, FitResult, SearchConfig, fit_mixed, fit_path)

ALL_CONTINUOUS = "all-continuous"
ALL_DISCONTINUOUS = "all-discontinuous"
ALL_PATTERNS = "all-patterns"
PATTERN_POLICIES = (ALL_CONTINUOUS, ALL_DISCONTINUOUS, ALL_PATTERNS)

TIE_TOL = 1e-9


@dataclass(frozen=True)
class SelectionSpace:
    m_max: int = 4
    pattern_policy: str = ALL_CONTINUOUS
    criterion: str = "aic"

    def __post_init__(self) -> None:
        if self.m_max < 0:
            raise ValueError("m_max must be non-negative")
        if self.pattern_policy not in PATTERN_POLICIES:
            raise ValueError(f"unknown pattern policy {self.pattern_policy!r}")
        object.__setattr__(self, "criterion", criterion_name(self.criterion))

    def patterns(self):
        """All (m, pattern) pairs in the space, in evaluation order."""
        for m in range(self.m_max + 1):
            if self.pattern_policy == ALL_CONTINUOUS:
                yield ContinuityPattern.uniform(m, CONTINUOUS)
            elif self.pattern_policy == ALL_DISCONTINUOUS:
                yield ContinuityPattern.uniform(m, DISCONTINUOUS)
            else:
                for combo in itertools.product((CONTINUOUS, DISCONTINUOUS), repeat=m):
                    yield ContinuityPattern(combo)


@dataclass(frozen=True)
class SelectionEntry:
    m: int
    pattern: ContinuityPattern
    fit: Optional[FitResult]
    score: Optional[CriterionScore]
    error: Optional[str] = None

    @property
    def feasible(self) -> bool:
        return self.fit is not None

    @property
    def total(self) -> float:
        return self.score.total if self.score is not None else np.inf

    def to_dict(self) -> dict:
        out = {"m": self.m, "pattern": self.pattern.code, "feasible": self.feasible}
        if self.feasible:
            out.update(loglik=self.fit.loglik, penalty=self.score.penalty,
                       total=self.score.total,
                       change_points=[float(v) for v in self.fit.model.locations])
        else:
            out["error"] = self.error
        return out


@dataclass(frozen=True)
class SelectionReport:
    space: SelectionSpace
    table: tuple
    ranking: tuple
    best_index: int = field(default=0)

    @property
    def best(self) -> SelectionEntry:
        return self.table[self.best_index]

    def to_dict(self) -> dict:
        best = self.best
        return {
            "criterion": self.space.criterion,
            "m_max": self.space.m_max,
            "pattern_policy": self.space.pattern_policy,
            "best": {"m": best.m, "pattern": best.pattern.code, "loglik": best.fit.loglik,
                     "score": best.score.to_dict(), "model": best.fit.model.to_dict()},
            "table": [e.to_dict() for e in self.table],
            "ranking": list(self.ranking),
        }


def _tie_key(entry: SelectionEntry):
    # Among totals within the tie tolerance the more parsimonious, then the
    # more continuous, then the leftmost model wins.
    loc = tuple(float(v) for v in entry.fit.model.locations)
    return (entry.m, -entry.pattern.m_continuous, loc)


def choose_best(entries) -> int:
    """Index of the minimal-total entry with the documented tie-break."""
    feasible = [i for i, e in enumerate(entries) if e.feasible]
    if not feasible:
        raise InfeasibleError("no feasible candidate model")
    low = min(entries[i].total for i in feasible)
    tied = [i for i in feasible if entries[i].total <= low + TIE_TOL]
    return min(tied, key=lambda i: _tie_key(entries[i]))


def fits_for_space(data: Dataset, space: SelectionSpace, family: ResponseFamily, p: int,
                   config: SearchConfig) -> list:
    """Fit every (m, pattern) of the space; returns ``(pattern, FitResult | error)`` pairs."""
    out = []
    if space.pattern_policy in (ALL_CONTINUOUS, ALL_DISCONTINUOUS):
        cont = CONTINUOUS if space.pattern_policy == ALL_CONTINUOUS else DISCONTINUOUS
        path = fit_path(data, space.m_max, cont, family, p, config)
        for m in range(space.m_max + 1):
            out.append((ContinuityPattern.uniform(m, cont), path[m]))
        return out
    for pattern in space.patterns():
        try:
            out.append((pattern, fit_mixed(data, pattern, family, p, config)))
        except SegRegError as exc:
            out.append((pattern, exc))
    return out


def build_report(fits, space: SelectionSpace, n: int) -> SelectionReport:
    entries = []
    for pattern, fit in fits:
        if isinstance(fit, Exception):
            entries.append(SelectionEntry(pattern.m, pattern, None, None,
                                          f"{type(fit).__name__}: {fit}"))
        else:
            entries.append(SelectionEntry(pattern.m, pattern, fit,
                                          score(fit, space.criterion, n)))
    best = choose_best(entries)
    ranking = sorted(range(len(entries)), key=lambda i: (entries[i].total, i))
    return SelectionReport(space, tuple(entries), tuple(ranking), best)


def select_model(data: Dataset, space: SelectionSpace, family: ResponseFamily | None = None,
                 p: int = 2, config: SearchConfig | None = None) -> SelectionReport:
    """Fit every candidate in ``space`` and return the criterion-optimal model.

    Infeasible candidates stay in the table with their error message.
    """
    family = family or ResponseFamily()
    config = config or SearchConfig()
    fits = fits_for_space(data, space, family, p, config)
    return build_report(fits, space, data.n)
