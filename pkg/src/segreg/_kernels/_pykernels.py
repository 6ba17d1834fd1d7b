"""Pure-Python implementations of the search kernels.

These mirror the compiled kernels exactly and are used when the extension
module is not available.  All inputs are float64/int64 numpy arrays.
"""

from __future__ import annotations

import numpy as np

INF = np.inf


# ---------------------------------------------------------------------------
# Gaussian segment costs
# ---------------------------------------------------------------------------

def segment_costs(t, y, p, starts):
    """Residual sums of squares of polynomial fits over index ranges.

    Returns an array ``out`` of shape ``(len(starts), n + 1)`` with
    ``out[r, e]`` the least-squares residual sum of squares of a degree
    ``p - 1`` polynomial through points ``starts[r] .. e - 1``.  Entries with
    fewer than ``p`` distinct covariate values are ``inf``.  Rows are built by
    sequential Givens updates, vectorised over starts, with covariates shifted
    to each start.
    """
    t = np.ascontiguousarray(t, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    n = t.size
    S = starts.size
    out = np.full((S, n + 1), INF)
    if S == 0:
        return out
    R = np.zeros((S, p, p))
    d = np.zeros((S, p))
    rss = np.zeros(S)
    distinct = np.zeros(S, dtype=np.int64)
    last = np.full(S, np.nan)
    first = int(starts.min())
    for j in range(first, n):
        act = np.nonzero(starts <= j)[0]
        u = t[j] - t[starts[act]]
        row = np.empty((act.size, p))
        row[:, 0] = 1.0
        for c in range(1, p):
            row[:, c] = row[:, c - 1] * u
        z = np.full(act.size, y[j]) - y[starts[act]]
        Ra = R[act]
        da = d[act]
        for k in range(p):
            rkk = Ra[:, k, k]
            xk = row[:, k]
            h = np.hypot(rkk, xk)
            safe = h > 0.0
            cs = np.where(safe, rkk / np.where(safe, h, 1.0), 1.0)
            sn = np.where(safe, xk / np.where(safe, h, 1.0), 0.0)
            rk = Ra[:, k, k:].copy()
            xr = row[:, k:].copy()
            Ra[:, k, k:] = cs[:, None] * rk + sn[:, None] * xr
            row[:, k:] = -sn[:, None] * rk + cs[:, None] * xr
            dk = da[:, k].copy()
            da[:, k] = cs * dk + sn * z
            z = -sn * dk + cs * z
        R[act] = Ra
        d[act] = da
        rss[act] += z * z
        new_value = ~(last[act] == t[j])
        distinct[act] += new_value
        last[act] = t[j]
        ok = distinct[act] >= p
        vals = np.where(ok, rss[act], INF)
        out[act, j + 1] = vals
    return out


# ---------------------------------------------------------------------------
# Partition dynamic programme (discontinuous change-points)
# ---------------------------------------------------------------------------

def partition_dp(cost, m_max):
    """Optimal partitions of a chain of boundary nodes.

    ``cost`` is a square matrix over nodes ``0 .. K+1`` where node 0 is the
    left end and node ``K+1`` the right end; ``cost[i, j]`` is the cost of a
    segment between nodes ``i < j`` (``inf`` when inadmissible).  Returns
    ``(best, nodes)`` where ``best[m]`` is the minimum total cost with ``m``
    interior boundaries and ``nodes[m, :m]`` the chosen interior nodes.
    Ties are broken towards the smallest predecessor node.
    """
    cost = np.asarray(cost, dtype=np.float64)
    K2 = cost.shape[0]
    last = K2 - 1
    best = np.full(m_max + 1, INF)
    nodes = np.full((m_max + 1, max(m_max, 1)), -1, dtype=np.int64)
    best[0] = cost[0, last]
    F = cost[0].copy()
    F[0] = INF
    F[last] = INF
    back = []
    for m in range(1, m_max + 1):
        if m > 1:
            M = F[:, None] + cost
            arg = np.argmin(M, axis=0)
            Fn = M[arg, np.arange(K2)]
            Fn[0] = INF
            Fn[last] = INF
            back.append(arg)
            F = Fn
        total = F + cost[:, last]
        total[last] = INF
        total[0] = INF
        j = int(np.argmin(total))
        if not np.isfinite(total[j]):
            continue
        best[m] = total[j]
        path = [j]
        for arg in reversed(back):
            path.append(int(arg[path[-1]]))
        nodes[m, :m] = path[::-1]
    return best, nodes


# ---------------------------------------------------------------------------
# Continuous (and mixed) piecewise-linear dynamic programme
# ---------------------------------------------------------------------------

def _entry_points(da, db, dc, v0):
    """First ``v >= v0`` where ``da v^2 + db v + dc`` turns negative (inf if never)."""
    entry = np.full(da.shape, INF)
    disc = db * db - 4.0 * da * dc
    sq = np.sqrt(np.maximum(disc, 0.0))
    sgn = np.where(db >= 0.0, 1.0, -1.0)
    qq = -0.5 * (db + sgn * sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        x1 = qq / da
        x2 = np.where(qq != 0.0, dc / qq, x1)
    r1 = np.minimum(x1, x2)
    r2 = np.maximum(x1, x2)

    pos = da > 0.0
    m = pos & (disc > 0.0) & (r2 > v0)
    entry[m] = np.maximum(r1[m], v0)

    neg = da < 0.0
    m = neg & (disc <= 0.0)
    entry[m] = v0
    m = neg & (disc > 0.0)
    inside = m & (r1 <= v0) & (r2 > v0)
    entry[m] = v0
    entry[inside] = r2[inside]

    zero = da == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        root = -dc / db
    m = zero & (db < 0.0)
    entry[m] = np.maximum(root[m], v0)
    m = zero & (db > 0.0) & (root > v0)
    entry[m] = v0
    m = zero & (db == 0.0) & (dc < 0.0)
    entry[m] = v0
    return entry


def lower_envelope(A, B, C, lo, hi):
    """Indices of the quadratics ``A v^2 + B v + C`` on the lower envelope over ``[lo, hi]``.

    A sweep from ``lo`` to ``hi`` tracks the current minimiser and jumps to
    the earliest point where another quadratic drops below it.
    """
    K = A.size
    if K <= 1:
        return np.arange(K)
    vals = (A * lo + B) * lo + C
    deriv = 2.0 * A * lo + B
    order = np.lexsort((A, deriv, vals))
    cur = int(order[0])
    keep = {cur}
    v0 = lo
    visited = {cur}
    for _ in range(4 * K + 16):
        entry = _entry_points(A - A[cur], B - B[cur], C - C[cur], v0)
        entry[cur] = INF
        if visited:
            vis = np.fromiter(visited, dtype=np.int64)
            hit = entry[vis] == v0
            entry[vis[hit]] = INF
        e = entry.min()
        if not e <= hi:
            break
        cands = np.nonzero(entry == e)[0]
        if cands.size > 1:
            de = 2.0 * A[cands] * e + B[cands]
            cands = cands[np.lexsort((cands, A[cands], de))]
        nxt = int(cands[0])
        if e > v0:
            visited = set()
        v0 = e
        cur = nxt
        visited.add(cur)
        keep.add(cur)
    else:
        return np.arange(K)
    return np.array(sorted(keep), dtype=np.int64)


def _sums(P, a, b):
    return P[:, b] - P[:, a]


def _free_rss(s):
    s0, s1, s2, sy, sty, syy = s
    with np.errstate(divide="ignore", invalid="ignore"):
        sxx = s2 - s1 * s1 / s0
        sxy = sty - s1 * sy / s0
        syy_c = syy - sy * sy / s0
        rss = syy_c - sxy * sxy / sxx
    return np.where(sxx > 0.0, np.maximum(rss, 0.0), INF)


def _anchored(s, anchor):
    """Cost of a line forced through ``(anchor, v)`` as a quadratic in ``v``."""
    s0, s1, s2, sy, sty, syy = s
    sd = s1 - anchor * s0
    sdd = s2 - 2.0 * anchor * s1 + anchor * anchor * s0
    sdy = sty - anchor * sy
    with np.errstate(divide="ignore", invalid="ignore"):
        A = s0 - sd * sd / sdd
        B = -2.0 * sy + 2.0 * sdy * sd / sdd
        C = syy - sdy * sdy / sdd
    bad = ~(sdd > 0.0)
    A = np.where(bad, INF, A)
    return A, B, C


def _bridge(s, L, R):
    """Coefficients of the cost of a line through ``(L, u)`` and ``(R, v)``."""
    s0, s1, s2, sy, sty, syy = s
    D = R - L
    sw = (s1 - L * s0) / D
    sww = (s2 - 2.0 * L * s1 + L * L * s0) / (D * D)
    swy = (sty - L * sy) / D
    suu = s0 - 2.0 * sw + sww
    suv = sw - sww
    svv = sww
    suy = sy - swy
    svy = swy
    return suu, suv, svv, suy, svy, syy


def continuous_dp(t, y, cand_t, cand_n, pattern, min_pts, vbound):
    """Exact least-squares segmentation into joined or broken line segments.

    Parameters
    ----------
    t, y : ndarray
        Sorted covariates (mapped to ``[0, 1]``) and responses.
    cand_t : ndarray
        Candidate change-point locations, increasing.
    cand_n : ndarray
        ``cand_n[j]`` is the number of points with ``t <= cand_t[j]``.
    pattern : ndarray of int8
        Continuity flag per change-point (1 continuous, 0 discontinuous).
    min_pts : int
        Minimum number of points per segment.
    vbound : float
        Bound on the absolute fitted value at any knot of an optimal fit.

    Returns
    -------
    best : ndarray, shape (m + 1,)
        ``best[k]`` is the minimal residual sum of squares using the first
        ``k`` flags of ``pattern``.
    knots : ndarray, shape (m + 1, max(m, 1))
        Candidate indices of the optimal change-points per ``k``.
    pieces : int
        Total number of retained quadratic pieces (a work measure).
    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cand_t = np.asarray(cand_t, dtype=np.float64)
    cand_n = np.asarray(cand_n, dtype=np.int64)
    pattern = np.asarray(pattern, dtype=np.int8)
    n = t.size
    m = pattern.size
    K = cand_t.size
    P = np.zeros((6, n + 1))
    P[:, 1:] = np.cumsum(np.vstack([np.ones(n), t, t * t, y, t * y, y * y]), axis=1)
    best = np.full(m + 1, INF)
    knots = np.full((m + 1, max(m, 1)), -1, dtype=np.int64)
    total_pieces = 0

    if n >= min_pts:
        best[0] = float(_free_rss(_sums(P, 0, n)))

    stages = []
    # stage 1
    js = np.nonzero(cand_n >= min_pts)[0]
    if m >= 1 and js.size:
        s = _sums(P, np.zeros(js.size, dtype=np.int64), cand_n[js])
        if pattern[0]:
            A, B, C = _anchored(s, cand_t[js])
            ok = np.isfinite(A)
        else:
            A = np.zeros(js.size)
            B = np.zeros(js.size)
            C = _free_rss(s)
            ok = np.isfinite(C)
        stages.append(dict(knot=js[ok], A=A[ok], B=B[ok], C=C[ok],
                           parent=np.full(int(ok.sum()), -1, dtype=np.int64)))
    for k in range(2, m + 1):
        prev = stages[-1] if len(stages) == k - 1 else None
        if prev is None or prev["knot"].size == 0:
            break
        cont_in = bool(pattern[k - 2])
        cont_out = bool(pattern[k - 1])
        pk = prev["knot"]
        pn = cand_n[pk]
        new = dict(knot=[], A=[], B=[], C=[], parent=[])
        for j in range(K):
            nj = cand_n[j]
            lim = np.searchsorted(pn, nj - min_pts, side="right")
            if lim == 0:
                continue
            idx = np.arange(lim)
            a_i = pn[idx]
            s = _sums(P, a_i, np.full(lim, nj))
            L = cand_t[pk[idx]]
            Ri = cand_t[j]
            if cont_in and cont_out:
                suu, suv, svv, suy, svy, syy = _bridge(s, L, Ri)
                a, b, c = prev["A"][idx], prev["B"][idx], prev["C"][idx]
                alpha = a + suu
                with np.errstate(divide="ignore", invalid="ignore"):
                    bb = b - 2.0 * suy
                    A = svv - suv * suv / alpha
                    B = -2.0 * svy - bb * suv / alpha
                    C = c + syy - bb * bb / (4.0 * alpha)
                ok = alpha > 0.0
            elif cont_in and not cont_out:
                Al, Bl, Cl = _anchored(s, L)
                a, b, c = prev["A"][idx], prev["B"][idx], prev["C"][idx]
                with np.errstate(divide="ignore", invalid="ignore"):
                    val = c + Cl - (b + Bl) ** 2 / (4.0 * (a + Al))
                ok = np.isfinite(Al) & (a + Al > 0.0)
                A = np.zeros(lim)
                B = np.zeros(lim)
                C = np.where(ok, val, INF)
            elif not cont_in and cont_out:
                Ar, Br, Cr = _anchored(s, np.full(lim, Ri))
                ok = np.isfinite(Ar)
                A, B, C = Ar, Br, prev["C"][idx] + Cr
            else:
                C = prev["C"][idx] + _free_rss(s)
                ok = np.isfinite(C)
                A = np.zeros(lim)
                B = np.zeros(lim)
            sel = np.nonzero(ok)[0]
            if sel.size == 0:
                continue
            if cont_out:
                kept = sel[lower_envelope(A[sel], B[sel], C[sel], -vbound, vbound)]
            else:
                kept = sel[[int(np.argmin(C[sel]))]]
            new["knot"].append(np.full(kept.size, j, dtype=np.int64))
            new["A"].append(A[kept])
            new["B"].append(B[kept])
            new["C"].append(C[kept])
            new["parent"].append(idx[kept])
        if not new["knot"]:
            break
        stages.append({key: np.concatenate(val) for key, val in new.items()})

    for k, st in enumerate(stages, start=1):
        total_pieces += st["knot"].size
        pk = st["knot"]
        rem = n - cand_n[pk]
        ok = rem >= min_pts
        if not np.any(ok):
            continue
        ids = np.nonzero(ok)[0]
        s = _sums(P, cand_n[pk[ids]], np.full(ids.size, n))
        if pattern[k - 1]:
            Al, Bl, Cl = _anchored(s, cand_t[pk[ids]])
            a, b, c = st["A"][ids], st["B"][ids], st["C"][ids]
            with np.errstate(divide="ignore", invalid="ignore"):
                tot = c + Cl - (b + Bl) ** 2 / (4.0 * (a + Al))
            tot = np.where(np.isfinite(Al) & (a + Al > 0.0), tot, INF)
        else:
            tot = st["C"][ids] + _free_rss(s)
        r = int(np.argmin(tot))
        if not np.isfinite(tot[r]):
            continue
        best[k] = max(float(tot[r]), 0.0)
        node = int(ids[r])
        path = []
        for kk in range(k, 0, -1):
            path.append(int(stages[kk - 1]["knot"][node]))
            node = int(stages[kk - 1]["parent"][node])
        knots[k, :k] = path[::-1]
    return best, knots, total_pieces
