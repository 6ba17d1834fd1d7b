"""Simulation of the change-point limit processes behind the penalty 6.

``V(s) = -sigma^2 |s| / 2 + sigma W_s`` is the Brownian limit of the two-sided
log-likelihood-difference walk ``Q`` around a discontinuous change-point.  The
optimism contributed by one change-point is ``E[sup V - V_copy(argsup V)]``,
whose value is ``3/2 + 3/2 = 3``.

The supremum over a grid of step ``h`` underestimates the continuous
supremum by ``O(sqrt(h))``.  Between neighbouring grid points the path is a
Brownian bridge whatever the drift, so its maximum is drawn exactly from

    M = (a + b + sqrt((a - b)^2 - 2 sigma^2 h log U)) / 2.

Only intervals whose endpoints come within ``BRIDGE_MARGIN`` bridge standard
deviations of the grid maximum are refined; the chance that any other
interval's bridge exceeds the grid maximum is below ``exp(-2 * 8^2)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import HorizonTooSmallError

BROWNIAN = "brownian"
RANDOM_WALK = "random-walk"
MODES = (BROWNIAN, RANDOM_WALK)

CHUNK = 1000
BRIDGE_MARGIN = 8.0
MAX_ESCAPE_RATE = 1e-3


@dataclass(frozen=True)
class WalkConfig:
    """Settings of a limit-process simulation.

    Parameters
    ----------
    horizon : float
        ``S``; the process is simulated on ``[-S, S]`` (in ``s`` units).
    step : float
        Grid step ``h`` of the Brownian simulation.
    sigma : float
        Scale of ``V``; unused in random-walk mode, where it follows from
        ``delta`` and ``tau_star``.
    replications : int
    seed : int
    mode : str
        ``"brownian"`` or ``"random-walk"``.
    delta : tuple of float
        Random-walk mode: coefficient jump ``theta[k+1] - theta[k]`` before
        the ``1 / sqrt(alpha_n)`` localisation.
    alpha_n : float
        Random-walk mode: localisation rate.
    n : int
        Random-walk mode: sample size behind the walk.
    tau_star : float
        Random-walk mode: true change-point location in ``(0, 1)``.
    max_escape_rate : float
        Largest tolerated share of replications whose argsup sits on the
        horizon.
    """

    horizon: float = 50.0
    step: float = 0.01
    sigma: float = 1.0
    replications: int = 10_000
    seed: int = 0
    mode: str = BROWNIAN
    delta: tuple = ()
    alpha_n: float = 1.0
    n: int = 0
    tau_star: float = 0.5
    max_escape_rate: float = MAX_ESCAPE_RATE

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.horizon < 0 or self.step <= 0 or self.sigma <= 0:
            raise ValueError("horizon must be non-negative, step and sigma positive")
        if self.horizon > 0 and self.step > self.horizon:
            raise ValueError("step must not exceed horizon")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if self.mode == RANDOM_WALK:
            if not self.delta or self.alpha_n <= 0 or self.n < 1:
                raise ValueError("random-walk mode needs delta, alpha_n > 0 and n >= 1")
            if not 0.0 < self.tau_star < 1.0:
                raise ValueError("tau_star must lie in (0, 1)")

    @property
    def walk_sigma(self) -> float:
        """Scale of the Brownian limit of the random walk, ``|delta' (1, tau*, ...)|``."""
        basis = self.tau_star ** np.arange(len(self.delta))
        return float(abs(np.dot(self.delta, basis)))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["delta"] = list(self.delta)
        return out


@dataclass(frozen=True)
class FunctionalEstimate:
    """Monte Carlo estimate of ``E[sup V]``, ``E[-V_copy(argsup V)]`` and their sum.

    ``e_sup`` is the continuous-path estimate (bridge-corrected in Brownian
    mode); ``e_sup_grid`` and ``e_sup_half_grid`` are the plain grid suprema
    at ``h`` and ``h / 2`` and ``e_sup_richardson`` their ``sqrt(h)``
    extrapolation.
    """

    e_sup: float
    e_neg_copy_at_argsup: float
    e_total: float
    std_error: float
    se_sup: float
    se_neg_copy: float
    argsup_mean: float
    argsup_se: float
    escape_rate: float
    replications: int
    e_sup_grid: Optional[float] = None
    e_sup_half_grid: Optional[float] = None
    e_sup_richardson: Optional[float] = None
    config: Optional[dict] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed),
                                                                       spawn_key=(int(chunk),))))


def _side_paths(rng, reps, k, h, sigma):
    inc = sigma * np.sqrt(h) * rng.standard_normal((reps, k))
    inc -= 0.5 * sigma * sigma * h
    path = np.empty((reps, k + 1))
    path[:, 0] = 0.0
    np.cumsum(inc, axis=1, out=path[:, 1:])
    return path


def _refine_side(rng, path, top, h, sigma):
    """Half-grid and bridge maxima over the intervals close to ``top``."""
    left, right = path[:, :-1], path[:, 1:]
    near = np.maximum(left, right) >= (top - BRIDGE_MARGIN * sigma * np.sqrt(h))[:, None]
    rows, cols = np.nonzero(near)
    half = np.full(path.shape[0], -np.inf)
    cont = np.full(path.shape[0], -np.inf)
    if rows.size == 0:
        return half, cont
    a, b = left[rows, cols], right[rows, cols]
    z, u1, u2 = rng.standard_normal(rows.size), rng.random(rows.size), rng.random(rows.size)
    mid = 0.5 * (a + b) + 0.5 * sigma * np.sqrt(h) * z
    hh = 0.5 * h
    s2 = sigma * sigma * hh
    m1 = 0.5 * (a + mid + np.sqrt((a - mid) ** 2 - 2.0 * s2 * np.log1p(-u1)))
    m2 = 0.5 * (mid + b + np.sqrt((mid - b) ** 2 - 2.0 * s2 * np.log1p(-u2)))
    np.maximum.at(half, rows, mid)
    np.maximum.at(cont, rows, np.maximum(m1, m2))
    return half, cont


def _summarise(sup, neg, argsup, escapes, config, grid=None, half=None, h=None):
    r = sup.size
    total = sup + neg
    se = lambda v: float(v.std(ddof=1) / np.sqrt(r)) if r > 1 else 0.0
    rich = None
    if grid is not None:
        g, hg = float(grid.mean()), float(half.mean())
        rich = (np.sqrt(2.0) * hg - g) / (np.sqrt(2.0) - 1.0)
    rate = escapes / r
    if rate > config.max_escape_rate:
        raise HorizonTooSmallError(
            f"argsup reached the horizon in {rate:.2%} of replications "
            f"(limit {config.max_escape_rate:.2%}); increase horizon")
    return FunctionalEstimate(
        float(sup.mean()), float(neg.mean()), float(total.mean()), se(total), se(sup), se(neg),
        float(argsup.mean()), se(argsup), float(rate), int(r),
        None if grid is None else float(grid.mean()),
        None if half is None else float(half.mean()),
        None if rich is None else float(rich), config.to_dict())


def simulate_brownian_functional(config: WalkConfig) -> FunctionalEstimate:
    """Estimate ``E[sup V]``, ``E[-V_copy(argsup V)]`` and their sum.

    The copy enters only through ``V_copy(s_hat) ~ N(-sigma^2 |s_hat| / 2,
    sigma^2 |s_hat|)`` at the argsup, so it is drawn directly.

    Raises
    ------
    HorizonTooSmallError
        If the argsup lands on the horizon too often.
    """
    if config.mode != BROWNIAN:
        raise ValueError("simulate_brownian_functional needs mode='brownian'")
    h, sigma = config.step, config.sigma
    k = int(round(config.horizon / h))
    r_total = config.replications
    if k == 0:
        zeros = np.zeros(r_total)
        return _summarise(zeros, zeros, zeros, 0, config, zeros, zeros, h)
    sups, grids, halves, negs, args = [], [], [], [], []
    escapes = 0
    for c, start in enumerate(range(0, r_total, CHUNK)):
        reps = min(CHUNK, r_total - start)
        rng = _chunk_rng(config.seed, c)
        right = _side_paths(rng, reps, k, h, sigma)
        left = _side_paths(rng, reps, k, h, sigma)
        ir, il = right.argmax(axis=1), left.argmax(axis=1)
        mr, ml = right[np.arange(reps), ir], left[np.arange(reps), il]
        grid = np.maximum(mr, ml)
        arg = np.where(mr >= ml, ir * h, -il * h)
        escapes += int(np.count_nonzero(np.abs(arg) >= k * h - 0.5 * h))
        hr, cr = _refine_side(rng, right, grid, h, sigma)
        hl, cl = _refine_side(rng, left, grid, h, sigma)
        half = np.maximum(grid, np.maximum(hr, hl))
        cont = np.maximum(half, np.maximum(cr, cl))
        z = rng.standard_normal(reps)
        neg = 0.5 * sigma * sigma * np.abs(arg) - sigma * np.sqrt(np.abs(arg)) * z
        sups.append(cont)
        grids.append(grid)
        halves.append(half)
        negs.append(neg)
        args.append(arg)
    cat = np.concatenate
    return _summarise(cat(sups), cat(negs), cat(args), escapes, config, cat(grids), cat(halves), h)


def _window_side(rng, config, width, right_side):
    """Distances from tau* and increments of Q on one side of the window."""
    n, alpha = config.n, config.alpha_n
    count = rng.binomial(n, min(width, 1.0))
    u = np.sort(rng.random(count)) * width
    x = config.tau_star + u if right_side else config.tau_star - u
    basis = x[:, None] ** np.arange(len(config.delta))[None, :]
    d = basis @ np.asarray(config.delta) / np.sqrt(alpha)
    eps = rng.standard_normal(count)
    # Reassigning a point to the wrong segment costs D^2/2 plus a noise term
    # whose sign depends on which segment generated it.
    inc = -0.5 * d * d - d * eps if right_side else -0.5 * d * d + d * eps
    return u, inc


def _q_at(u, inc, dist):
    """``Q`` at distance ``dist`` from tau* given one side's points."""
    j = int(np.searchsorted(u, dist, side="right"))
    return float(inc[:j].sum())


def simulate_random_walk_q(config: WalkConfig) -> FunctionalEstimate:
    """Estimate ``E[sup Q - Q_copy(argsup Q)]`` for the finite-sample walk.

    Points in the window ``tau* +- S alpha_n / n`` follow the uniform design;
    ``Q(tau)`` is the log-likelihood change from moving the change-point from
    ``tau*`` to ``tau``.  The argsup is taken at the midpoint of the maximising
    plateau and reported in ``s`` units, ``s = (tau - tau*) n / alpha_n``.
    """
    if config.mode != RANDOM_WALK:
        raise ValueError("simulate_random_walk_q needs mode='random-walk'")
    scale = config.alpha_n / config.n
    width = config.horizon * scale
    r_total = config.replications
    sup = np.zeros(r_total)
    neg = np.zeros(r_total)
    arg = np.zeros(r_total)
    escapes = 0
    if width <= 0:
        return _summarise(sup, neg, arg, 0, config)
    for rep in range(r_total):
        rng = _chunk_rng(config.seed, rep)
        best, loc, edge = 0.0, 0.0, False
        sides = []
        for right_side in (True, False):
            u, inc = _window_side(rng, config, width, right_side)
            sides.append((u, inc))
        (ur, qr), (ul, ql) = sides
        zero_hi = ur[0] if ur.size else width
        zero_lo = ul[0] if ul.size else width
        loc = 0.5 * (zero_hi - zero_lo)
        for sign, (u, inc) in ((1.0, sides[0]), (-1.0, sides[1])):
            if u.size == 0:
                continue
            q = np.cumsum(inc)
            j = int(np.argmax(q))
            if q[j] > best:
                best = float(q[j])
                hi = u[j + 1] if j + 1 < u.size else width
                loc = sign * 0.5 * (u[j] + hi)
                edge = j + 1 == u.size
        cu_r, ci_r = _window_side(rng, config, width, True)
        cu_l, ci_l = _window_side(rng, config, width, False)
        if loc >= 0:
            q_copy = _q_at(cu_r, ci_r, loc)
        else:
            q_copy = _q_at(cu_l, ci_l, -loc)
        sup[rep] = best
        neg[rep] = -q_copy
        arg[rep] = loc / scale
        escapes += int(edge)
    return _summarise(sup, neg, arg, escapes, config)


def sample_path(config: WalkConfig, rep_index: int = 0, max_points: int = 20_001) -> tuple:
    """One Brownian path ``(s, V(s))`` on the grid, thinned to ``max_points``."""
    h, sigma = config.step, config.sigma
    k = int(round(config.horizon / h))
    rng = _chunk_rng(config.seed, 10 ** 9 + int(rep_index))
    right = _side_paths(rng, 1, k, h, sigma)[0]
    left = _side_paths(rng, 1, k, h, sigma)[0]
    s = np.concatenate([-h * np.arange(k, 0, -1), h * np.arange(k + 1)])
    v = np.concatenate([left[:0:-1], right])
    stride = max(1, int(np.ceil(s.size / max_points)))
    return s[::stride], v[::stride]


def scale_check(base: WalkConfig, sigmas: Sequence[float] = (1.0, 2.0)) -> list:
    """Brownian estimates for several ``sigma`` with otherwise identical settings."""
    return [simulate_brownian_functional(replace(base, sigma=float(s))) for s in sigmas]
