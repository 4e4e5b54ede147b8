# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of minktens._quad_py: identical recursion, tight C loops.

Selected automatically at import when built; see minktens._quad.  The
subdivision plan, quadrature rule handling and acceptance rule match the
numpy fallback so both backends agree to rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "cython"

ACCEPT_FACTOR = 30.0
cdef double _ACCEPT = 30.0

DEF MAXM = 4
DEF MAXQ = 32
DEF MAXT = 160
DEF MAXCH = 8

# subdivision plans, encoded as vertex index pairs (i, j); i == j keeps v_i
cdef int SUB_N[5]
cdef int SUB_I[5][MAXCH * MAXM]
cdef int SUB_J[5][MAXCH * MAXM]

_PLANS = {
    2: [((0, 0), (0, 1)), ((0, 1), (1, 1))],
    3: [
        ((0, 0), (0, 1), (0, 2)),
        ((0, 1), (1, 1), (1, 2)),
        ((0, 2), (1, 2), (2, 2)),
        ((0, 1), (1, 2), (0, 2)),
    ],
    4: [
        ((0, 0), (0, 1), (0, 2), (0, 3)),
        ((0, 1), (1, 1), (1, 2), (1, 3)),
        ((0, 2), (1, 2), (2, 2), (2, 3)),
        ((0, 3), (1, 3), (2, 3), (3, 3)),
        ((0, 1), (2, 3), (0, 2), (0, 3)),
        ((0, 1), (2, 3), (0, 3), (1, 3)),
        ((0, 1), (2, 3), (1, 3), (1, 2)),
        ((0, 1), (2, 3), (1, 2), (0, 2)),
    ],
}

def _init_tables():
    for m, plan in _PLANS.items():
        SUB_N[m] = len(plan)
        for ci, spec in enumerate(plan):
            for vi, (i, j) in enumerate(spec):
                SUB_I[m][ci * m + vi] = i
                SUB_J[m][ci * m + vi] = j

_init_tables()


cdef double _det3(double a00, double a01, double a02,
                  double a10, double a11, double a12,
                  double a20, double a21, double a22) noexcept nogil:
    return (a00 * (a11 * a22 - a12 * a21)
            - a01 * (a10 * a22 - a12 * a20)
            + a02 * (a10 * a21 - a11 * a20))


cdef double _det4(double* a) noexcept nogil:
    cdef double out = 0.0
    out += a[0] * _det3(a[5], a[6], a[7], a[9], a[10], a[11], a[13], a[14], a[15])
    out -= a[1] * _det3(a[4], a[6], a[7], a[8], a[10], a[11], a[12], a[14], a[15])
    out += a[2] * _det3(a[4], a[5], a[7], a[8], a[9], a[11], a[12], a[13], a[15])
    out -= a[3] * _det3(a[4], a[5], a[6], a[8], a[9], a[10], a[12], a[13], a[14])
    return out


cdef void _geometry(double* v, int m, double* vol, double* c) noexcept nogil:
    cdef double d0, d1, nn
    cdef double e1[3]
    cdef double e2[3]
    cdef double nrm[3]
    cdef double g[9]
    cdef double vcol[16]
    cdef double detv, hi, hn2
    cdef int i, j, k
    if m == 2:
        d0 = v[2] - v[0]
        d1 = v[3] - v[1]
        nn = sqrt(d0 * d0 + d1 * d1)
        vol[0] = nn
        c[0] = fabs(-v[0] * d1 + v[1] * d0) / nn if nn > 1e-300 else 0.0
        if nn <= 1e-300:
            vol[0] = 0.0
        return
    if m == 3:
        for i in range(3):
            e1[i] = v[3 + i] - v[i]
            e2[i] = v[6 + i] - v[i]
        nrm[0] = e1[1] * e2[2] - e1[2] * e2[1]
        nrm[1] = e1[2] * e2[0] - e1[0] * e2[2]
        nrm[2] = e1[0] * e2[1] - e1[1] * e2[0]
        nn = sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2])
        if nn <= 1e-300:
            vol[0] = 0.0
            c[0] = 0.0
            return
        vol[0] = nn / 2.0
        c[0] = fabs(v[0] * nrm[0] + v[1] * nrm[1] + v[2] * nrm[2]) / nn
        return
    # m == 4: gram determinant for the volume, Cramer solve for the distance
    for i in range(3):
        for j in range(3):
            g[i * 3 + j] = 0.0
            for k in range(4):
                g[i * 3 + j] += (v[(i + 1) * 4 + k] - v[k]) * (v[(j + 1) * 4 + k] - v[k])
    d0 = _det3(g[0], g[1], g[2], g[3], g[4], g[5], g[6], g[7], g[8])
    vol[0] = sqrt(d0 if d0 > 0.0 else 0.0) / 6.0
    detv = _det4(v)
    if fabs(detv) <= 1e-300:
        vol[0] = 0.0
        c[0] = 0.0
        return
    hn2 = 0.0
    for i in range(4):
        for j in range(4):
            for k in range(4):
                vcol[j * 4 + k] = 1.0 if k == i else v[j * 4 + k]
        hi = _det4(vcol) / detv
        hn2 += hi * hi
    c[0] = 1.0 / sqrt(hn2) if hn2 > 0.0 else 0.0


cdef void _rule_eval(double* v, int m, cnp.int64_t* exps, int t,
                     double* bary, double* w, int q, double* out) noexcept nogil:
    cdef double vol, c, r2, r, jac, wj, val, ue
    cdef double x[MAXM]
    cdef double u[MAXM]
    cdef int iq, d, i, k, e
    for k in range(t):
        out[k] = 0.0
    _geometry(v, m, &vol, &c)
    if vol <= 0.0:
        return
    for iq in range(q):
        r2 = 0.0
        for d in range(m):
            x[d] = 0.0
            for i in range(m):
                x[d] += bary[iq * m + i] * v[i * m + d]
            r2 += x[d] * x[d]
        r = sqrt(r2)
        jac = c
        for d in range(m):
            jac /= r
        for d in range(m):
            u[d] = x[d] / r
        wj = w[iq] * jac
        for k in range(t):
            val = 1.0
            for d in range(m):
                e = <int> exps[k * m + d]
                ue = u[d]
                while e > 0:
                    if e & 1:
                        val *= ue
                    ue *= ue
                    e >>= 1
            out[k] += wj * val
    for k in range(t):
        out[k] *= vol


cdef void _adapt(double* v, double* vals, double budget, int depth, int max_depth,
                 int m, cnp.int64_t* exps, int t, double* bary, double* w, int q,
                 double* total) noexcept nogil:
    cdef double childv[MAXCH * MAXM * MAXM]
    cdef double childvals[MAXCH * MAXT]
    cdef double csum[MAXT]
    cdef double err, diff, nn
    cdef int nchild = SUB_N[m]
    cdef int ci, vi, d, k, i, j
    for ci in range(nchild):
        for vi in range(m):
            i = SUB_I[m][ci * m + vi]
            j = SUB_J[m][ci * m + vi]
            if i == j:
                for d in range(m):
                    childv[(ci * m + vi) * m + d] = v[i * m + d]
            else:
                nn = 0.0
                for d in range(m):
                    childv[(ci * m + vi) * m + d] = v[i * m + d] + v[j * m + d]
                    nn += childv[(ci * m + vi) * m + d] ** 2
                nn = sqrt(nn)
                for d in range(m):
                    childv[(ci * m + vi) * m + d] /= nn
    for k in range(t):
        csum[k] = 0.0
    for ci in range(nchild):
        _rule_eval(&childv[ci * m * m], m, exps, t, bary, w, q, &childvals[ci * MAXT])
        for k in range(t):
            csum[k] += childvals[ci * MAXT + k]
    err = 0.0
    for k in range(t):
        diff = fabs(vals[k] - csum[k])
        if diff > err:
            err = diff
    if err <= _ACCEPT * budget or depth >= max_depth:
        for k in range(t):
            total[k] += csum[k]
        return
    for ci in range(nchild):
        _adapt(&childv[ci * m * m], &childvals[ci * MAXT], budget / nchild,
               depth + 1, max_depth, m, exps, t, bary, w, q, total)


def integrate_spherical_simplices(verts, exps, bary, weights, double tol, int max_depth=26):
    """Same contract as the numpy backend; see minktens._quad_py."""
    cdef cnp.ndarray[double, ndim=3, mode="c"] v = np.ascontiguousarray(verts, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] e = np.ascontiguousarray(exps, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] b = np.ascontiguousarray(bary, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef int nb = v.shape[0]
    cdef int m = v.shape[1]
    cdef int t = e.shape[0]
    cdef int q = b.shape[0]
    cdef cnp.ndarray[double, ndim=1] total = np.zeros(t)
    cdef double rootvals[MAXT]
    cdef double budget
    cdef int ib, k
    if t == 0 or nb == 0:
        return total
    if t > MAXT or q > MAXQ or m > MAXM:
        raise ValueError("workload exceeds compiled kernel limits")
    budget = tol / nb
    with nogil:
        for ib in range(nb):
            _rule_eval(&v[ib, 0, 0], m, &e[0, 0], t, &b[0, 0], &w[0], q, rootvals)
            _adapt(&v[ib, 0, 0], rootvals, budget, 0, max_depth, m,
                   &e[0, 0], t, &b[0, 0], &w[0], q, &total[0])
    return total
