# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: periodic interpolation gathers, pairwise Holder
distances between derivative stacks, and greedy packing.

Signatures and semantics mirror eulerlab._kernels_py; eulerlab._kernels picks
whichever is available at import time.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, pow, sqrt

cnp.import_array()


cdef inline Py_ssize_t _mod(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    i = i % n
    if i < 0:
        i += n
    return i


def gather_interp(double[:, ::1] f, double[::1] xi, double[::1] yi, int order):
    """Periodic interpolation of f at fractional index coordinates."""
    cdef Py_ssize_t nr = f.shape[0], nc = f.shape[1], npts = xi.shape[0]
    out_arr = np.empty(npts, dtype=float)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t p, a, b, ibase, jbase
    cdef Py_ssize_t ia[4]
    cdef Py_ssize_t jb[4]
    cdef double wx[4]
    cdef double wy[4]
    cdef double tx, ty, t2, t3, acc, row

    if order == 1:
        with nogil:
            for p in range(npts):
                ibase = <Py_ssize_t>floor(xi[p])
                jbase = <Py_ssize_t>floor(yi[p])
                tx = xi[p] - ibase
                ty = yi[p] - jbase
                ia[0] = _mod(ibase, nr)
                ia[1] = _mod(ibase + 1, nr)
                jb[0] = _mod(jbase, nc)
                jb[1] = _mod(jbase + 1, nc)
                out[p] = ((1 - tx) * (1 - ty) * f[ia[0], jb[0]]
                          + tx * (1 - ty) * f[ia[1], jb[0]]
                          + (1 - tx) * ty * f[ia[0], jb[1]]
                          + tx * ty * f[ia[1], jb[1]])
    elif order == 3:
        with nogil:
            for p in range(npts):
                ibase = <Py_ssize_t>floor(xi[p])
                jbase = <Py_ssize_t>floor(yi[p])
                tx = xi[p] - ibase
                ty = yi[p] - jbase

                t2 = tx * tx
                t3 = t2 * tx
                wx[0] = 0.5 * (-t3 + 2.0 * t2 - tx)
                wx[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0)
                wx[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + tx)
                wx[3] = 0.5 * (t3 - t2)
                t2 = ty * ty
                t3 = t2 * ty
                wy[0] = 0.5 * (-t3 + 2.0 * t2 - ty)
                wy[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0)
                wy[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + ty)
                wy[3] = 0.5 * (t3 - t2)

                for a in range(4):
                    ia[a] = _mod(ibase - 1 + a, nr)
                    jb[a] = _mod(jbase - 1 + a, nc)
                acc = 0.0
                for a in range(4):
                    row = (wy[0] * f[ia[a], jb[0]] + wy[1] * f[ia[a], jb[1]]
                           + wy[2] * f[ia[a], jb[2]] + wy[3] * f[ia[a], jb[3]])
                    acc += wx[a] * row
                out[p] = acc
    else:
        raise ValueError("order must be 1 or 3")
    return out_arr


def holder_distance_matrix(double[:, :, :, ::1] stacks, double h, double gamma,
                           long[::1] shifts):
    """Pairwise order-(1+gamma) Holder distances between derivative stacks."""
    cdef Py_ssize_t N = stacks.shape[0], n = stacks.shape[2]
    cdef Py_ssize_t nshift = shifts.shape[0]
    D_arr = np.zeros((N, N), dtype=float)
    cdef double[:, ::1] D = D_arr
    diff_arr = np.empty((6, n, n), dtype=float)
    cdef double[:, :, ::1] dbuf = diff_arr
    seps_arr = np.empty(nshift, dtype=float)
    cdef double[::1] seps = seps_arr
    cdef Py_ssize_t i, j, c, r, cc, sidx, s, rr, c2, cp
    cdef double base2, q2max, v, w, m2, quot, dist

    for sidx in range(nshift):
        seps[sidx] = pow(h * shifts[sidx], gamma)

    with nogil:
        for i in range(N):
            for j in range(i + 1, N):
                base2 = 0.0
                for c in range(0, 6, 2):
                    for r in range(n):
                        for cc in range(n):
                            v = stacks[j, c, r, cc] - stacks[i, c, r, cc]
                            w = stacks[j, c + 1, r, cc] - stacks[i, c + 1, r, cc]
                            dbuf[c, r, cc] = v
                            dbuf[c + 1, r, cc] = w
                            m2 = v * v + w * w
                            if m2 > base2:
                                base2 = m2
                quot = 0.0
                for sidx in range(nshift):
                    s = shifts[sidx]
                    for cp in range(2):
                        c = 2 + 2 * cp
                        # axis 0 separation
                        q2max = 0.0
                        for r in range(n):
                            rr = r + s
                            if rr >= n:
                                rr -= n
                            for cc in range(n):
                                v = dbuf[c, rr, cc] - dbuf[c, r, cc]
                                w = dbuf[c + 1, rr, cc] - dbuf[c + 1, r, cc]
                                m2 = v * v + w * w
                                if m2 > q2max:
                                    q2max = m2
                        v = sqrt(q2max) / seps[sidx]
                        if v > quot:
                            quot = v
                        # axis 1 separation
                        q2max = 0.0
                        for r in range(n):
                            for cc in range(n):
                                c2 = cc + s
                                if c2 >= n:
                                    c2 -= n
                                v = dbuf[c, r, c2] - dbuf[c, r, cc]
                                w = dbuf[c + 1, r, c2] - dbuf[c + 1, r, cc]
                                m2 = v * v + w * w
                                if m2 > q2max:
                                    q2max = m2
                        v = sqrt(q2max) / seps[sidx]
                        if v > quot:
                            quot = v
                dist = sqrt(base2) + quot
                D[i, j] = dist
                D[j, i] = dist
    return D_arr


def greedy_pack(double[:, :] D, double eps):
    """Greedy maximal eps-separated subset scanned in index order."""
    cdef Py_ssize_t N = D.shape[0]
    alive_arr = np.ones(N, dtype=np.uint8)
    cdef unsigned char[::1] alive = alive_arr
    chosen = []
    cdef Py_ssize_t i, j
    for i in range(N):
        if alive[i]:
            chosen.append(i)
            for j in range(N):
                if alive[j] and D[i, j] <= eps:
                    alive[j] = 0
    return np.asarray(chosen, dtype=np.int64)
