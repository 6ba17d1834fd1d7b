from __future__ import annotations

import json

import numpy as np
import pytest

from segreg.criteria import AIC, BIC, score, score_loglik
from segreg.errors import InfeasibleError
from segreg.model import Dataset
from segreg.search import ContinuityPattern, fit_continuous
from segreg.selection import (ALL_CONTINUOUS, ALL_DISCONTINUOUS, ALL_PATTERNS, SelectionEntry,
                              SelectionSpace, choose_best, select_model)


def _linear(seed=42, n=200):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.random(n)) * 0.999 + 0.0005
    return Dataset(x, x + rng.standard_normal(n))


def _jump_kink(seed=0, n=120):
    rng = np.random.default_rng(seed)
    x = np.arange(1, n + 1) / n
    mu = np.where(x <= 0.3, 0.0, 3.0) + 6 * np.maximum(x - 0.7, 0)
    return Dataset(x, mu + 0.3 * rng.standard_normal(n))


def test_m_max_zero_selects_single_segment():
    d = _jump_kink()
    for crit in ("aic", "aic-naive", "bic"):
        rep = select_model(d, SelectionSpace(0, ALL_PATTERNS, crit))
        assert rep.best.m == 0 and len(rep.table) == 1


def test_linear_seed42_selects_m0():
    d = _linear()
    rep = select_model(d, SelectionSpace(2, ALL_CONTINUOUS, AIC))
    # oracle: rescore each m directly
    totals = [score(fit_continuous(d, m), AIC, d.n).total for m in range(3)]
    assert totals[0] < totals[1] and totals[0] < totals[2]
    assert rep.best.m == 0
    np.testing.assert_allclose([e.total for e in rep.table], totals, atol=1e-9)


def test_all_patterns_count():
    rep = select_model(_jump_kink(n=60), SelectionSpace(2, ALL_PATTERNS, AIC))
    assert len(rep.table) == 7
    codes = sorted(e.pattern.code for e in rep.table)
    assert codes == sorted(["", "c", "d", "cc", "cd", "dc", "dd"])


def test_all_patterns_superset():
    d = _jump_kink(1, 80)
    for crit in (AIC, BIC):
        best = select_model(d, SelectionSpace(2, ALL_PATTERNS, crit)).best.total
        for policy in (ALL_CONTINUOUS, ALL_DISCONTINUOUS):
            assert best <= select_model(d, SelectionSpace(2, policy, crit)).best.total + 1e-9


def test_recovers_mixed_pattern():
    # with m = 3 a three-point continuous ramp can mimic the jump, so cap at 2
    rep = select_model(_jump_kink(), SelectionSpace(2, ALL_PATTERNS, AIC))
    assert rep.best.pattern.code == "dc"
    np.testing.assert_allclose(rep.best.fit.model.locations, [0.3, 0.7], atol=0.03)


def test_rescore_consistency_and_ranking():
    rep = select_model(_jump_kink(2, 70), SelectionSpace(2, ALL_PATTERNS, BIC))
    totals = np.array([e.total for e in rep.table])
    assert rep.best.total == totals.min()
    assert list(rep.ranking) == sorted(range(len(totals)), key=lambda i: (totals[i], i))
    for e in rep.table:
        again = score(e.fit, BIC, 70)
        assert again.total == e.score.total


def test_infeasible_entries_recorded():
    x = np.arange(1, 10) / 9
    rep = select_model(Dataset(x, x ** 2), SelectionSpace(3, ALL_PATTERNS, AIC))
    bad = [e for e in rep.table if not e.feasible]
    assert bad and all(e.m == 3 for e in bad)
    assert all(e.error for e in bad)
    assert len(rep.table) == 15
    assert rep.best.feasible


def test_no_feasible_candidate():
    with pytest.raises(InfeasibleError):
        choose_best([SelectionEntry(1, ContinuityPattern.parse("c"), None, None, "x")])


def test_tie_break_prefers_parsimony_then_continuity():
    class _Fit:
        def __init__(self, locs):
            self.model = type("M", (), {"locations": np.asarray(locs)})()

    def entry(code, locs, total):
        pat = ContinuityPattern.parse(code)
        s = score_loglik(0.0, AIC, 2, pat.m_continuous, pat.m_discontinuous, 10)
        s = type(s)(s.criterion, s.neg2loglik, s.penalty, total, s.free_regression_params,
                    s.n_changepoints_cont, s.n_changepoints_disc)
        return SelectionEntry(pat.m, pat, _Fit(locs), s)

    entries = [entry("d", [0.4], 10.0), entry("c", [0.6], 10.0 + 5e-10), entry("", [], 10.0)]
    assert choose_best(entries) == 2
    assert choose_best(entries[:2]) == 1
    entries = [entry("c", [0.6], 10.0), entry("c", [0.4], 10.0)]
    assert choose_best(entries) == 1


def test_deterministic_and_serializable():
    d = _jump_kink(3, 50)
    a = select_model(d, SelectionSpace(2, ALL_PATTERNS, AIC)).to_dict()
    b = select_model(d, SelectionSpace(2, ALL_PATTERNS, AIC)).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert a["best"]["pattern"] in {"", "c", "d", "cc", "cd", "dc", "dd"}


def test_space_validation():
    with pytest.raises(ValueError):
        SelectionSpace(-1)
    with pytest.raises(ValueError):
        SelectionSpace(2, "some-patterns")
    assert SelectionSpace(criterion="aic-proposed").criterion == AIC
