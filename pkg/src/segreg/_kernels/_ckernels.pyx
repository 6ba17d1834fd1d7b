# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled search kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, hypot, INFINITY, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()


def segment_costs(t, y, int p, starts):
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const long long[::1] sv = np.ascontiguousarray(starts, dtype=np.int64)
    cdef Py_ssize_t n = tv.shape[0]
    cdef Py_ssize_t S = sv.shape[0]
    out_arr = np.full((S, n + 1), np.inf)
    cdef double[:, ::1] out = out_arr
    cdef double *R = <double *> malloc(p * p * sizeof(double))
    cdef double *d = <double *> malloc(p * sizeof(double))
    cdef double *row = <double *> malloc(p * sizeof(double))
    cdef Py_ssize_t r, j, k, c, s0
    cdef double u, z, rss, h, cs, sn, a, b, dk, last
    cdef long long distinct
    try:
        for r in range(S):
            s0 = sv[r]
            for k in range(p * p):
                R[k] = 0.0
            for k in range(p):
                d[k] = 0.0
            rss = 0.0
            distinct = 0
            last = 0.0
            for j in range(s0, n):
                u = tv[j] - tv[s0]
                row[0] = 1.0
                for c in range(1, p):
                    row[c] = row[c - 1] * u
                z = yv[j] - yv[s0]
                for k in range(p):
                    h = hypot(R[k * p + k], row[k])
                    if h > 0.0:
                        cs = R[k * p + k] / h
                        sn = row[k] / h
                    else:
                        cs = 1.0
                        sn = 0.0
                    for c in range(k, p):
                        a = R[k * p + c]
                        b = row[c]
                        R[k * p + c] = cs * a + sn * b
                        row[c] = -sn * a + cs * b
                    dk = d[k]
                    d[k] = cs * dk + sn * z
                    z = -sn * dk + cs * z
                rss += z * z
                if j == s0 or tv[j] != last:
                    distinct += 1
                last = tv[j]
                if distinct >= p:
                    out[r, j + 1] = rss
    finally:
        free(R)
        free(d)
        free(row)
    return out_arr


def partition_dp(cost, int m_max):
    cdef const double[:, ::1] cv = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t K2 = cv.shape[0]
    cdef Py_ssize_t last = K2 - 1
    best_arr = np.full(m_max + 1, np.inf)
    nodes_arr = np.full((m_max + 1, max(m_max, 1)), -1, dtype=np.int64)
    cdef double[::1] best = best_arr
    cdef long long[:, ::1] nodes = nodes_arr
    back_arr = np.zeros((max(m_max, 1), K2), dtype=np.int64)
    cdef long long[:, ::1] back = back_arr
    F_arr = np.full(K2, np.inf)
    G_arr = np.full(K2, np.inf)
    cdef double[::1] F = F_arr
    cdef double[::1] G = G_arr
    cdef Py_ssize_t m, i, j, jb, kk
    cdef double v, bv, tot
    best[0] = cv[0, last]
    for j in range(1, last):
        F[j] = cv[0, j]
    for m in range(1, m_max + 1):
        if m > 1:
            for j in range(K2):
                G[j] = INFINITY
            for j in range(1, last):
                bv = INFINITY
                jb = 0
                for i in range(1, j):
                    v = F[i] + cv[i, j]
                    if v < bv:
                        bv = v
                        jb = i
                G[j] = bv
                back[m - 1, j] = jb
            for j in range(K2):
                F[j] = G[j]
        bv = INFINITY
        jb = -1
        for j in range(1, last):
            tot = F[j] + cv[j, last]
            if tot < bv:
                bv = tot
                jb = j
        if jb < 0:
            continue
        best[m] = bv
        nodes[m, m - 1] = jb
        for kk in range(m - 1, 0, -1):
            nodes[m, kk - 1] = back[kk, nodes[m, kk]]
    return best_arr, nodes_arr


cdef inline double _entry(double da, double db, double dc, double v0) nogil:
    cdef double disc = db * db - 4.0 * da * dc
    cdef double sq, qq, x1, x2, r1, r2, root
    if da > 0.0 or da < 0.0:
        if disc > 0.0:
            sq = sqrt(disc)
            if db >= 0.0:
                qq = -0.5 * (db + sq)
            else:
                qq = -0.5 * (db - sq)
            x1 = qq / da
            if qq != 0.0:
                x2 = dc / qq
            else:
                x2 = x1
            if x1 < x2:
                r1 = x1
                r2 = x2
            else:
                r1 = x2
                r2 = x1
            if da > 0.0:
                if r2 > v0:
                    return r1 if r1 > v0 else v0
                return INFINITY
            if r1 <= v0 and r2 > v0:
                return r2
            return v0
        if da > 0.0:
            return INFINITY
        return v0
    if db < 0.0:
        root = -dc / db
        return root if root > v0 else v0
    if db > 0.0:
        root = -dc / db
        return v0 if root > v0 else INFINITY
    return v0 if dc < 0.0 else INFINITY


cdef Py_ssize_t _envelope(double *A, double *B, double *C, Py_ssize_t K,
                          double lo, double hi, long long *stamp, char *keep) nogil:
    """Mark pieces on the lower envelope in ``keep``; returns the kept count."""
    cdef Py_ssize_t i, cur, nxt, events, kept
    cdef double v0, e, en, val, bestval, der, bestder
    cdef long long group = 1
    for i in range(K):
        keep[i] = 0
        stamp[i] = 0
    if K == 0:
        return 0
    cur = 0
    bestval = (A[0] * lo + B[0]) * lo + C[0]
    bestder = 2.0 * A[0] * lo + B[0]
    for i in range(1, K):
        val = (A[i] * lo + B[i]) * lo + C[i]
        der = 2.0 * A[i] * lo + B[i]
        if val < bestval or (val == bestval and (der < bestder or (der == bestder and A[i] < A[cur]))):
            cur = i
            bestval = val
            bestder = der
    keep[cur] = 1
    kept = 1
    v0 = lo
    stamp[cur] = group
    events = 0
    while True:
        events += 1
        if events > 4 * K + 16:
            for i in range(K):
                keep[i] = 1
            return K
        e = INFINITY
        nxt = -1
        for i in range(K):
            if i == cur:
                continue
            en = _entry(A[i] - A[cur], B[i] - B[cur], C[i] - C[cur], v0)
            if en == v0 and stamp[i] == group:
                continue
            if en < e:
                e = en
                nxt = i
                bestder = 2.0 * A[i] * e + B[i]
            elif en == e and nxt >= 0:
                der = 2.0 * A[i] * e + B[i]
                if der < bestder or (der == bestder and A[i] < A[nxt]):
                    nxt = i
                    bestder = der
        if nxt < 0 or not (e <= hi):
            break
        if e > v0:
            group += 1
        v0 = e
        cur = nxt
        stamp[cur] = group
        if not keep[cur]:
            keep[cur] = 1
            kept += 1
    return kept


def lower_envelope(A, B, C, double lo, double hi):
    cdef double[::1] a = np.array(A, dtype=np.float64)
    cdef double[::1] b = np.array(B, dtype=np.float64)
    cdef double[::1] c = np.array(C, dtype=np.float64)
    cdef Py_ssize_t K = a.shape[0]
    if K <= 1:
        return np.arange(K)
    stamp_arr = np.zeros(K, dtype=np.int64)
    keep_arr = np.zeros(K, dtype=np.int8)
    cdef long long[::1] stamp = stamp_arr
    cdef char[::1] keep = keep_arr
    _envelope(&a[0], &b[0], &c[0], K, lo, hi, &stamp[0], &keep[0])
    return np.nonzero(keep_arr)[0].astype(np.int64)


cdef inline void _seg(double[:, ::1] P, Py_ssize_t a, Py_ssize_t b, double *s) nogil:
    cdef Py_ssize_t r
    for r in range(6):
        s[r] = P[r, b] - P[r, a]


cdef inline double _free_rss(double *s) nogil:
    cdef double sxx = s[2] - s[1] * s[1] / s[0]
    cdef double sxy, syy, rss
    if not (sxx > 0.0):
        return INFINITY
    sxy = s[4] - s[1] * s[3] / s[0]
    syy = s[5] - s[3] * s[3] / s[0]
    rss = syy - sxy * sxy / sxx
    return rss if rss > 0.0 else 0.0


cdef inline bint _anchored(double *s, double anchor, double *A, double *B, double *C) nogil:
    cdef double sd = s[1] - anchor * s[0]
    cdef double sdd = s[2] - 2.0 * anchor * s[1] + anchor * anchor * s[0]
    cdef double sdy = s[4] - anchor * s[3]
    if not (sdd > 0.0):
        return False
    A[0] = s[0] - sd * sd / sdd
    B[0] = -2.0 * s[3] + 2.0 * sdy * sd / sdd
    C[0] = s[5] - sdy * sdy / sdd
    return True


cdef class _Stage:
    cdef public object knot, A, B, C, parent
    cdef public Py_ssize_t size

    def __init__(self, Py_ssize_t cap):
        cap = max(cap, 16)
        self.knot = np.empty(cap, dtype=np.int64)
        self.A = np.empty(cap)
        self.B = np.empty(cap)
        self.C = np.empty(cap)
        self.parent = np.empty(cap, dtype=np.int64)
        self.size = 0

    def reserve(self, Py_ssize_t extra):
        cdef Py_ssize_t need = self.size + extra
        cdef Py_ssize_t cap = self.knot.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        self.knot = np.resize(self.knot, cap)
        self.A = np.resize(self.A, cap)
        self.B = np.resize(self.B, cap)
        self.C = np.resize(self.C, cap)
        self.parent = np.resize(self.parent, cap)


def continuous_dp(t, y, cand_t, cand_n, pattern, int min_pts, double vbound):
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] ct = np.ascontiguousarray(cand_t, dtype=np.float64)
    cdef const long long[::1] cn = np.ascontiguousarray(cand_n, dtype=np.int64)
    cdef const signed char[::1] pat = np.ascontiguousarray(pattern, dtype=np.int8)
    cdef Py_ssize_t n = tv.shape[0]
    cdef Py_ssize_t m = pat.shape[0]
    cdef Py_ssize_t K = ct.shape[0]
    cdef Py_ssize_t i, j, k, r, q, lim, cnt, kept
    cdef double s[6]
    cdef double a, b, c, alpha, bb, Av, Bv, Cv, Al, Bl, Cl, val, L, Rk
    cdef double suu, suv, svv, suy, svy, D, sw, sww, swy
    cdef bint cont_in, cont_out, ok
    cdef long long total_pieces = 0

    P_arr = np.zeros((6, n + 1))
    t_arr = np.asarray(tv)
    y_arr = np.asarray(yv)
    P_arr[:, 1:] = np.cumsum(np.vstack([np.ones(n), t_arr, t_arr * t_arr, y_arr,
                                        t_arr * y_arr, y_arr * y_arr]), axis=1)
    cdef double[:, ::1] P = P_arr

    best_arr = np.full(m + 1, np.inf)
    knots_arr = np.full((m + 1, max(m, 1)), -1, dtype=np.int64)
    cdef double[::1] best = best_arr
    cdef long long[:, ::1] knots = knots_arr

    if n >= min_pts:
        _seg(P, 0, n, s)
        best[0] = _free_rss(s)

    tmpA_arr = np.empty(K + 1)
    tmpB_arr = np.empty(K + 1)
    tmpC_arr = np.empty(K + 1)
    tmpI_arr = np.empty(K + 1, dtype=np.int64)
    stamp_arr = np.zeros(K + 1, dtype=np.int64)
    keep_arr = np.zeros(K + 1, dtype=np.int8)
    cdef double[::1] tA, tB, tC
    cdef long long[::1] tI, stamp
    cdef char[::1] keep
    cdef double[::1] pA, pB, pC
    cdef long long[::1] pK, pP
    cdef double[::1] nA, nB, nC
    cdef long long[::1] nK, nP

    stages = []
    if m >= 1:
        st = _Stage(K)
        nK = st.knot; nA = st.A; nB = st.B; nC = st.C; nP = st.parent
        cnt = 0
        for j in range(K):
            if cn[j] < min_pts:
                continue
            _seg(P, 0, cn[j], s)
            if pat[0]:
                ok = _anchored(s, ct[j], &Av, &Bv, &Cv)
            else:
                Av = 0.0
                Bv = 0.0
                Cv = _free_rss(s)
                ok = isfinite(Cv)
            if ok:
                nK[cnt] = j; nA[cnt] = Av; nB[cnt] = Bv; nC[cnt] = Cv; nP[cnt] = -1
                cnt += 1
        st.size = cnt
        stages.append(st)

    for k in range(2, m + 1):
        prev = stages[len(stages) - 1]
        if len(stages) != k - 1 or prev.size == 0:
            break
        pK = prev.knot; pA = prev.A; pB = prev.B; pC = prev.C
        cont_in = pat[k - 2] != 0
        cont_out = pat[k - 1] != 0
        st = _Stage(prev.size)
        tA = tmpA_arr; tB = tmpB_arr; tC = tmpC_arr; tI = tmpI_arr
        stamp = stamp_arr; keep = keep_arr
        for j in range(K):
            # predecessors sorted by knot, so admissible ones form a prefix
            lim = 0
            while lim < prev.size and cn[pK[lim]] <= cn[j] - min_pts:
                lim += 1
            if lim == 0:
                continue
            if lim > tA.shape[0]:
                tmpA_arr = np.empty(2 * lim); tmpB_arr = np.empty(2 * lim)
                tmpC_arr = np.empty(2 * lim); tmpI_arr = np.empty(2 * lim, dtype=np.int64)
                stamp_arr = np.zeros(2 * lim, dtype=np.int64)
                keep_arr = np.zeros(2 * lim, dtype=np.int8)
                tA = tmpA_arr; tB = tmpB_arr; tC = tmpC_arr; tI = tmpI_arr
                stamp = stamp_arr; keep = keep_arr
            Rk = ct[j]
            cnt = 0
            for q in range(lim):
                i = pK[q]
                _seg(P, cn[i], cn[j], s)
                L = ct[i]
                a = pA[q]; b = pB[q]; c = pC[q]
                if cont_in and cont_out:
                    D = Rk - L
                    sw = (s[1] - L * s[0]) / D
                    sww = (s[2] - 2.0 * L * s[1] + L * L * s[0]) / (D * D)
                    swy = (s[4] - L * s[3]) / D
                    suu = s[0] - 2.0 * sw + sww
                    suv = sw - sww
                    svv = sww
                    suy = s[3] - swy
                    svy = swy
                    alpha = a + suu
                    if not (alpha > 0.0):
                        continue
                    bb = b - 2.0 * suy
                    Av = svv - suv * suv / alpha
                    Bv = -2.0 * svy - bb * suv / alpha
                    Cv = c + s[5] - bb * bb / (4.0 * alpha)
                elif cont_in:
                    if not _anchored(s, L, &Al, &Bl, &Cl):
                        continue
                    if not (a + Al > 0.0):
                        continue
                    Av = 0.0
                    Bv = 0.0
                    Cv = c + Cl - (b + Bl) * (b + Bl) / (4.0 * (a + Al))
                elif cont_out:
                    if not _anchored(s, Rk, &Al, &Bl, &Cl):
                        continue
                    Av = Al
                    Bv = Bl
                    Cv = c + Cl
                else:
                    val = _free_rss(s)
                    if not isfinite(val):
                        continue
                    Av = 0.0
                    Bv = 0.0
                    Cv = c + val
                tA[cnt] = Av; tB[cnt] = Bv; tC[cnt] = Cv; tI[cnt] = q
                cnt += 1
            if cnt == 0:
                continue
            if cont_out:
                if cnt == 1:
                    keep[0] = 1
                    kept = 1
                else:
                    kept = _envelope(&tA[0], &tB[0], &tC[0], cnt, -vbound, vbound,
                                     &stamp[0], &keep[0])
            else:
                r = 0
                for q in range(1, cnt):
                    if tC[q] < tC[r]:
                        r = q
                for q in range(cnt):
                    keep[q] = 1 if q == r else 0
                kept = 1
            st.reserve(kept)
            nK = st.knot; nA = st.A; nB = st.B; nC = st.C; nP = st.parent
            r = st.size
            for q in range(cnt):
                if keep[q]:
                    nK[r] = j; nA[r] = tA[q]; nB[r] = tB[q]; nC[r] = tC[q]; nP[r] = tI[q]
                    r += 1
            st.size = r
        if st.size == 0:
            break
        stages.append(st)

    cdef Py_ssize_t bestnode, node, kk
    cdef double bestval
    for k in range(1, len(stages) + 1):
        st = stages[k - 1]
        total_pieces += st.size
        pK = st.knot; pA = st.A; pB = st.B; pC = st.C
        bestval = INFINITY
        bestnode = -1
        for q in range(st.size):
            i = pK[q]
            if n - cn[i] < min_pts:
                continue
            _seg(P, cn[i], n, s)
            if pat[k - 1]:
                if not _anchored(s, ct[i], &Al, &Bl, &Cl):
                    continue
                a = pA[q]; b = pB[q]; c = pC[q]
                if not (a + Al > 0.0):
                    continue
                val = c + Cl - (b + Bl) * (b + Bl) / (4.0 * (a + Al))
            else:
                val = pC[q] + _free_rss(s)
            if val < bestval:
                bestval = val
                bestnode = q
        if bestnode < 0:
            continue
        best[k] = bestval if bestval > 0.0 else 0.0
        node = bestnode
        for kk in range(k, 0, -1):
            st = stages[kk - 1]
            pK = st.knot
            pP = st.parent
            knots[k, kk - 1] = pK[node]
            node = pP[node]
    return best_arr, knots_arr, int(total_pieces)
