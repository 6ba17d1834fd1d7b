from __future__ import annotations

import math

import numpy as np
import pytest

from segreg.families import GAUSSIAN_FREE, POISSON, ResponseFamily
from segreg.kl import QUADRATURE, kl_divergence, mean_square_difference
from segreg.model import (CONTINUOUS, DISCONTINUOUS, ChangePointSpec, SegmentParams,
                          SegmentedModel, poly_eval, single_segment_model)


def _random_model(rng, m=2, continuous=False):
    locs = np.sort(rng.uniform(0.1, 0.9, m))
    segs = [tuple(rng.normal(0, 2, 2))]
    for t in locs:
        slope = rng.normal(0, 2)
        if continuous:
            level = poly_eval(segs[-1], t)
            segs.append((level - slope * t, slope))
        else:
            segs.append((rng.normal(0, 2), slope))
    flag = CONTINUOUS if continuous else DISCONTINUOUS
    return SegmentedModel((0.0, 1.0), tuple(SegmentParams(s) for s in segs),
                          tuple(ChangePointSpec(float(t), flag) for t in locs), ResponseFamily())


def _simpson_msd(a, b, points=10 ** 6 + 1):
    x = np.linspace(0.0, 1.0, points)
    x[0] = 1e-12
    ia = np.searchsorted(a.locations, x, side="left")
    ib = np.searchsorted(b.locations, x, side="left")
    ca = np.array([s.coeffs for s in a.segments])[ia]
    cb = np.array([s.coeffs for s in b.segments])[ib]
    f = ((ca[:, 0] - cb[:, 0]) + (ca[:, 1] - cb[:, 1]) * x) ** 2
    h = x[2] - x[1]
    return h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum())


def test_identical_is_zero():
    rng = np.random.default_rng(0)
    m = _random_model(rng)
    assert kl_divergence(m, m).value == 0.0


def test_constant_offset():
    for c in (0.1, -0.7, 2.0):
        base = single_segment_model((1.0, 2.0))
        shifted = single_segment_model((1.0 + c, 2.0))
        assert kl_divergence(base, shifted).value == pytest.approx(c * c / 2, rel=1e-13)


def test_closed_form_matches_simpson():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a, b = _random_model(rng), _random_model(rng, continuous=True)
        # Simpson on a uniform grid loses accuracy at interior kinks; the
        # union of change-points is handled exactly by splitting the integral
        cuts = np.unique(np.concatenate([[0.0, 1.0], a.locations, b.locations]))
        ref = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            xs = np.linspace(lo, hi, 10 ** 6 + 1)
            mid = 0.5 * (lo + hi)
            ca = a.segments[int(np.searchsorted(a.locations, mid))].coeffs
            cb = b.segments[int(np.searchsorted(b.locations, mid))].coeffs
            f = ((ca[0] - cb[0]) + (ca[1] - cb[1]) * xs) ** 2
            h = xs[1] - xs[0]
            ref += h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum())
        assert kl_divergence(a, b).value == pytest.approx(ref / 2, abs=1e-8)


def test_closed_form_matches_uniform_simpson_loosely():
    rng = np.random.default_rng(8)
    a, b = _random_model(rng), _random_model(rng)
    assert mean_square_difference(a, b) == pytest.approx(_simpson_msd(a, b), abs=1e-4)


def test_closed_form_matches_quadrature():
    rng = np.random.default_rng(9)
    for _ in range(5):
        a, b = _random_model(rng, 3), _random_model(rng, 1, True)
        assert kl_divergence(a, b).value == pytest.approx(
            kl_divergence(a, b, QUADRATURE).value, abs=1e-8)


def test_shared_refinement_is_noop():
    rng = np.random.default_rng(3)
    a, b = _random_model(rng), _random_model(rng)
    t = 0.05
    seg0 = a.segments[0]
    refined = SegmentedModel(a.domain, (seg0, seg0, *a.segments[1:]),
                             (ChangePointSpec(t, CONTINUOUS), *a.change_points), a.family)
    assert kl_divergence(refined, b).value == pytest.approx(kl_divergence(a, b).value, abs=1e-14)


def test_nonnegative_and_asymmetric_with_variance():
    rng = np.random.default_rng(4)
    a = _random_model(rng)
    fa = SegmentedModel(a.domain, a.segments, a.change_points, ResponseFamily(GAUSSIAN_FREE, 2.0))
    fb = SegmentedModel(a.domain, a.segments, a.change_points, ResponseFamily(GAUSSIAN_FREE, 0.5))
    ab, ba = kl_divergence(fa, fb).value, kl_divergence(fb, fa).value
    assert ab == pytest.approx(0.5 * math.log(0.25) + 2.0 - 0.5, rel=1e-13)
    assert ba == pytest.approx(0.5 * math.log(4.0) + 0.125 - 0.5, rel=1e-13)
    assert ab > 0 and ba > 0 and ab != ba


def test_errors():
    a = single_segment_model((0.0, 1.0))
    with pytest.raises(ValueError):
        kl_divergence(a, single_segment_model((0.0, 1.0), domain=(0.0, 2.0)))
    with pytest.raises(ValueError):
        kl_divergence(a, single_segment_model((0.0, 1.0), family=ResponseFamily(POISSON)))
