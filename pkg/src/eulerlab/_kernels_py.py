"""NumPy reference implementations of the hot kernels.

Semantics must match eulerlab._core exactly; the compiled module is just a
faster version of these routines.  Kept dependency-free so a failed extension
build degrades to a working (slower) install.
"""

import numpy as np


def _cr_weights(t):
    """Catmull-Rom weights for the four taps around a fractional offset t."""
    t2 = t * t
    t3 = t2 * t
    return (
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    )


def gather_interp(f, xi, yi, order):
    """Periodic interpolation of f at fractional index coordinates.

    f: (nr, nc) array; xi indexes axis 0, yi axis 1; order 1 (bilinear) or
    3 (Catmull-Rom cubic).
    """
    nr, nc = f.shape
    ibase = np.floor(xi).astype(np.int64)
    jbase = np.floor(yi).astype(np.int64)
    tx = xi - ibase
    ty = yi - jbase
    if order == 1:
        i0 = np.mod(ibase, nr)
        i1 = np.mod(ibase + 1, nr)
        j0 = np.mod(jbase, nc)
        j1 = np.mod(jbase + 1, nc)
        return ((1 - tx) * (1 - ty) * f[i0, j0] + tx * (1 - ty) * f[i1, j0]
                + (1 - tx) * ty * f[i0, j1] + tx * ty * f[i1, j1])
    if order != 3:
        raise ValueError("order must be 1 or 3")
    wx = _cr_weights(tx)
    wy = _cr_weights(ty)
    out = np.zeros_like(tx)
    for a in range(4):
        ia = np.mod(ibase - 1 + a, nr)
        row = np.zeros_like(tx)
        for b in range(4):
            jb = np.mod(jbase - 1 + b, nc)
            row += wy[b] * f[ia, jb]
        out += wx[a] * row
    return out


def holder_distance_matrix(stacks, h, gamma, shifts, block=64):
    """Pairwise order-(1+gamma) Holder distances between derivative stacks.

    stacks: (N, 6, n, n) with channels (u1, u2, d1u1, d1u2, d2u1, d2u2).
    Distance = max over {field, d1, d2} of the sup Euclidean magnitude of the
    difference, plus the largest Holder-gamma quotient of the first
    derivatives over axis-aligned separations h*shift.
    """
    N = stacks.shape[0]
    D = np.zeros((N, N))
    seps = [(h * int(s)) ** gamma for s in shifts]
    for i in range(N - 1):
        for j0 in range(i + 1, N, block):
            j1 = min(j0 + block, N)
            d = stacks[j0:j1] - stacks[i]
            base2 = np.maximum(
                (d[:, 0] ** 2 + d[:, 1] ** 2).max(axis=(1, 2)),
                np.maximum(
                    (d[:, 2] ** 2 + d[:, 3] ** 2).max(axis=(1, 2)),
                    (d[:, 4] ** 2 + d[:, 5] ** 2).max(axis=(1, 2)),
                ),
            )
            quot = np.zeros(j1 - j0)
            g = d[:, 2:6]
            for s, sep in zip(shifts, seps):
                for axis in (2, 3):
                    dd = np.roll(g, -int(s), axis=axis) - g
                    q2 = np.maximum(
                        (dd[:, 0] ** 2 + dd[:, 1] ** 2).max(axis=(1, 2)),
                        (dd[:, 2] ** 2 + dd[:, 3] ** 2).max(axis=(1, 2)),
                    )
                    np.maximum(quot, np.sqrt(q2) / sep, out=quot)
            D[i, j0:j1] = np.sqrt(base2) + quot
    return D + D.T


def greedy_pack(D, eps):
    """Greedy maximal eps-separated subset (pairwise distance > eps) scanned
    in index order; returns the chosen indices."""
    N = D.shape[0]
    alive = np.ones(N, dtype=bool)
    chosen = []
    for i in range(N):
        if alive[i]:
            chosen.append(i)
            alive &= D[i] > eps
    return np.asarray(chosen, dtype=np.int64)
