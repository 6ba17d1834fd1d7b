from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.stats import skew

from segreg.errors import DegenerateSegmentError, InfeasibleError
from segreg.families import GAUSSIAN_FREE, ResponseFamily
from segreg.model import CONTINUOUS, DISCONTINUOUS, Dataset, log_likelihood, poly_eval
from segreg.search import (BRUTE_FORCE, DATA_MIDPOINTS, DATA_POINTS, FIXED_GRID,
                           ContinuityPattern, SearchConfig, candidate_locations, fit_continuous,
                           fit_discontinuous, fit_mixed, fit_path)
from segreg.segfit import fit_segment

BRUTE = SearchConfig(strategy=BRUTE_FORCE)


def _noise(n, seed):
    rng = np.random.default_rng(seed)
    return Dataset(np.sort(rng.random(n)) * 0.999 + 0.0005, rng.standard_normal(n))


def _assert_continuous(model, tol=1e-8):
    for k, cp in enumerate(model.change_points):
        if cp.continuity == CONTINUOUS:
            a = poly_eval(model.segments[k].coeffs, cp.location)
            b = poly_eval(model.segments[k + 1].coeffs, cp.location)
            assert abs(a - b) <= tol * (1 + abs(a))


class TestCandidates:
    data = Dataset([0.2, 0.4, 0.8], [0.0, 1.0, 2.0])

    def test_midpoints(self):
        np.testing.assert_allclose(candidate_locations(self.data, DATA_MIDPOINTS), [0.3, 0.6])

    def test_points(self):
        np.testing.assert_allclose(candidate_locations(self.data, DATA_POINTS), [0.2, 0.4])

    def test_grid_interior(self):
        grid = candidate_locations(self.data, FIXED_GRID, 0.25)
        np.testing.assert_allclose(grid, [0.25, 0.5, 0.75])

    def test_duplicates_removed(self):
        d = Dataset([0.2, 0.2, 0.4, 0.4, 0.8], np.zeros(5))
        np.testing.assert_allclose(candidate_locations(d, DATA_MIDPOINTS), [0.3, 0.6])

    def test_single_distinct_value(self):
        with pytest.raises(DegenerateSegmentError):
            candidate_locations(Dataset([0.5, 0.5], [1.0, 2.0]))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SearchConfig(min_segment_points=2).min_points(2)
        with pytest.raises(ValueError):
            SearchConfig(candidate_rule="bisection")
        assert SearchConfig().min_points(2) == 3
        assert SearchConfig().min_points(4) == 5


class TestDiscontinuous:
    def test_m0_is_single_segment(self):
        d = _noise(25, 1)
        fit = fit_discontinuous(d, 0)
        seg = fit_segment(ResponseFamily(), d.x, d.y, 2)
        np.testing.assert_allclose(fit.model.segments[0].coeffs, seg.params.coeffs, atol=1e-12)

    def test_step_example(self):
        x = np.arange(1, 21) / 20
        y = np.where(x <= 0.5, 0.0, 5.0)
        fit = fit_discontinuous(Dataset(x, y), 1, p=1)
        # exhaustive oracle over every split
        best = min(range(3, 18), key=lambda k: np.var(y[:k]) * k + np.var(y[k:]) * (20 - k))
        assert best == 10
        assert x[9] < fit.model.locations[0] < x[10]
        np.testing.assert_allclose([s.coeffs[0] for s in fit.model.segments], [0.0, 5.0],
                                   atol=1e-12)

    def test_dp_matches_brute_force_n30_m2(self):
        d = _noise(30, 5)
        a = fit_discontinuous(d, 2)
        b = fit_discontinuous(d, 2, config=BRUTE)
        assert a.loglik == pytest.approx(b.loglik, abs=1e-9)
        np.testing.assert_array_equal(a.model.locations, b.model.locations)

    def test_loglik_matches_model(self):
        d = _noise(40, 2)
        fit = fit_discontinuous(d, 2, family=ResponseFamily(GAUSSIAN_FREE, 1.0))
        assert fit.loglik == pytest.approx(log_likelihood(fit.model, d), abs=1e-9)

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            fit_discontinuous(_noise(8, 0), 2)

    def test_nesting(self):
        d = _noise(60, 9)
        path = fit_path(d, 4, DISCONTINUOUS)
        ll = [path[m].loglik for m in range(5)]
        assert all(b >= a - 1e-9 for a, b in zip(ll, ll[1:]))


class TestContinuous:
    def test_noiseless_kink(self):
        x = np.arange(1, 41) / 40
        y = np.maximum(x - 0.5, 0.0)
        fit = fit_continuous(Dataset(x, y), 1, config=SearchConfig(candidate_rule=DATA_POINTS))
        assert fit.model.locations[0] == pytest.approx(0.5, abs=1e-12)
        left, right = fit.model.segments
        assert right.coeffs[1] - left.coeffs[1] == pytest.approx(1.0, abs=1e-9)
        resid = y - np.array([poly_eval(fit.model.segments[int(v > 0.5)].coeffs, v) for v in x])
        assert np.max(np.abs(resid)) < 1e-10

    def test_m0(self):
        d = _noise(25, 3)
        a = fit_continuous(d, 0)
        b = fit_discontinuous(d, 0)
        assert a.loglik == pytest.approx(b.loglik, abs=1e-12)

    def test_continuity_invariant(self):
        for seed in range(5):
            d = _noise(50, seed)
            for m in (1, 2, 3):
                _assert_continuous(fit_continuous(d, m).model)

    def test_general_p(self):
        d = _noise(45, 4)
        fit = fit_continuous(d, 2, p=3)
        brute = fit_continuous(d, 2, p=3, config=BRUTE)
        _assert_continuous(fit.model)
        assert fit.loglik == pytest.approx(brute.loglik, abs=1e-9)
        assert fit.loglik == pytest.approx(log_likelihood(fit.model, d), abs=1e-9)


@pytest.mark.parametrize("n", range(8, 41, 4))
def test_brute_force_dp_equivalence(n):
    d = _noise(n, 100 + n)
    for m in range(0, 4):
        if n < (m + 1) * 3:
            continue
        for fn in (fit_discontinuous, fit_continuous):
            a, b = fn(d, m), fn(d, m, config=BRUTE)
            assert a.loglik == pytest.approx(b.loglik, abs=1e-9)
            np.testing.assert_allclose(a.model.locations, b.model.locations, atol=1e-12)


class TestMixed:
    def _jump_kink(self, n=40, seed=0):
        rng = np.random.default_rng(seed)
        x = np.arange(1, n + 1) / n
        mu = np.where(x <= 0.3, 0.0, 3.0) + 4 * np.maximum(x - 0.7, 0)
        return Dataset(x, mu + 0.3 * rng.standard_normal(n))

    def test_reductions(self):
        d = _noise(30, 8)
        assert fit_mixed(d, "d").loglik == pytest.approx(fit_discontinuous(d, 1).loglik, abs=1e-12)
        assert fit_mixed(d, "c").loglik == pytest.approx(fit_continuous(d, 1).loglik, abs=1e-12)

    def test_correct_pattern_beats_continuous(self):
        d = self._jump_kink()
        mixed = fit_mixed(d, ContinuityPattern.parse("dc"))
        cont = fit_continuous(d, 2)
        assert mixed.loglik >= cont.loglik - 1e-9
        _assert_continuous(mixed.model)
        assert mixed.model.pattern == (DISCONTINUOUS, CONTINUOUS)

    def test_relaxation_ordering(self):
        # shared candidate set so the three searches see the same tuples
        cfg = SearchConfig(candidate_rule=DATA_POINTS)
        for seed in range(4):
            d = self._jump_kink(36, seed)
            disc = fit_discontinuous(d, 2, config=cfg).loglik
            cont = fit_continuous(d, 2, config=cfg).loglik
            for code in ("cd", "dc"):
                mix = fit_mixed(d, code, config=cfg).loglik
                assert disc >= mix - 1e-9
                assert mix >= cont - 1e-9

    def test_mixed_brute_force_oracle(self):
        d = self._jump_kink(24, 3)
        fit = fit_mixed(d, "dc", config=SearchConfig(candidate_rule=DATA_POINTS))
        x = d.x
        best = -np.inf
        for i, j in itertools.combinations(range(2, 21), 2):
            a, b = x[i], x[j]
            if i + 1 < 3 or j - i < 3 or 24 - j - 1 < 3:
                continue
            # left segment free; right two joined at b via the truncated-power basis
            left = x <= a
            X = np.column_stack([np.ones((~left).sum()), x[~left], np.maximum(x[~left] - b, 0)])
            r1 = d.y[left] - np.polyval(np.polyfit(x[left], d.y[left], 1), x[left])
            beta, *_ = np.linalg.lstsq(X, d.y[~left], rcond=None)
            rss = np.sum(r1 ** 2) + np.sum((d.y[~left] - X @ beta) ** 2)
            best = max(best, -0.5 * 24 * np.log(2 * np.pi) - 0.5 * rss)
        assert fit.loglik == pytest.approx(best, abs=1e-9)


def test_estimator_shape_with_growing_n():
    rng = np.random.default_rng(2024)
    tau = 0.5
    med, z = {}, None
    for n in (200, 800, 3200):
        reps = 500 if n == 3200 else 150
        est = np.empty(reps)
        for r in range(reps):
            x = np.sort(rng.random(n)) * 0.999 + 0.0005
            y = 3 * np.maximum(x - tau, 0) + rng.standard_normal(n)
            est[r] = fit_continuous(Dataset(x, y), 1).model.locations[0]
        med[n] = np.median(np.abs(est - tau))
        z = np.sqrt(n) * (est - tau)
    assert med[200] > med[800] > med[3200]
    assert abs(skew(z)) < 0.5
