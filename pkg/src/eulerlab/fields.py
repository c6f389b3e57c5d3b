"""Doubly periodic fields on the square torus [0, 2pi)^2 and their calculus.

Fields live on a uniform n x n grid with values[i, j] = f(x1, x2) at
x1 = i*h, x2 = j*h, h = 2*pi/n.  All derivatives, inverse Laplacians and the
Biot-Savart map are evaluated spectrally through real FFTs, so band-limited
fields are differentiated exactly up to round-off.

The discrete Holder norm of order s = m + gamma is

    max_{|a| <= m} sup |D^a u|  +  max_{|a| = m} sup_{x != y} |D^a u(x) - D^a u(y)| / |x - y|^gamma

with the quotient maximised over axis-aligned grid pairs at dyadic
separations h*2^j.  Restricting separations to that set keeps the cost at
O(n^2 log n) per derivative while staying within a fixed factor of the dense
supremum; tests pin the gap on closed-form examples.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IntegerOrder, NonZeroMean

__all__ = [
    "TorusGrid",
    "ScalarField2D",
    "VectorField2D",
    "HolderIndex",
    "gradient",
    "divergence",
    "grad_perp",
    "curl2d",
    "inv_laplacian",
    "biot_savart",
    "leray_project",
    "holder_norm",
    "sample_holder_ball",
    "derivative_stack",
    "save_field",
    "load_field",
    "field_to_csv",
    "save_matrix",
    "load_matrix",
]

_MEAN_TOL = 1e-8


@dataclass(frozen=True)
class TorusGrid:
    """Uniform n x n sampling of the torus, n a power of two >= 8."""

    n: int

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.n

    def coords(self):
        x = np.arange(self.n) * self.h
        return np.meshgrid(x, x, indexing="ij")

    def scalar(self, values) -> "ScalarField2D":
        return ScalarField2D(self, values)

    def vector(self, u1, u2) -> "VectorField2D":
        return VectorField2D(ScalarField2D(self, u1), ScalarField2D(self, u2))


@lru_cache(maxsize=32)
def _workspace(n: int):
    """Wavenumber tables for an n x n grid in rfft2 layout (axis 0 full,
    axis 1 real-half)."""
    k1 = np.fft.fftfreq(n, d=1.0 / n)[:, None]  # (n, 1)
    k2 = np.arange(n // 2 + 1, dtype=float)[None, :]  # (1, n/2+1)
    # Odd-order derivative multipliers drop the unpaired Nyquist line.
    k1_odd = k1.copy()
    k1_odd[n // 2, 0] = 0.0
    k2_odd = k2.copy()
    k2_odd[0, n // 2] = 0.0
    ksq = k1**2 + k2**2
    inv_neg_ksq = np.zeros_like(ksq)
    nz = ksq > 0
    inv_neg_ksq[nz] = -1.0 / ksq[nz]
    return {"k1": k1, "k2": k2, "k1_odd": k1_odd, "k2_odd": k2_odd,
            "ksq": ksq, "inv_neg_ksq": inv_neg_ksq}


@lru_cache(maxsize=256)
def _deriv_mult(n: int, a: int, b: int):
    """Spectral multiplier for d^(a+b) / dx1^a dx2^b on an n-grid."""
    ws = _workspace(n)
    k1 = ws["k1_odd"] if a % 2 else ws["k1"]
    k2 = ws["k2_odd"] if b % 2 else ws["k2"]
    return (1j * k1) ** a * (1j * k2) ** b


class ScalarField2D:
    """Real scalar field sampled on a TorusGrid.

    Values are frozen at construction; the rfft2 transform is computed
    lazily and cached.  The mean is stored explicitly so that domain
    restrictions of mean-free operators can be checked exactly.
    """

    __slots__ = ("grid", "values", "mean", "_hat")

    def __init__(self, grid: TorusGrid, values, hat=None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n, grid.n)}, got {values.shape}")
        values = np.ascontiguousarray(values).copy()
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mean", float(values.mean()))
        object.__setattr__(self, "_hat", hat)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField2D is immutable")

    @property
    def hat(self):
        if self._hat is None:
            object.__setattr__(self, "_hat", np.fft.rfft2(self.values))
        return self._hat

    @classmethod
    def from_hat(cls, grid: TorusGrid, hat) -> "ScalarField2D":
        values = np.fft.irfft2(hat, s=(grid.n, grid.n))
        return cls(grid, values, hat=np.asarray(hat, dtype=complex))

    def deriv(self, a: int, b: int) -> "ScalarField2D":
        """Spectral partial derivative d^(a+b)/dx1^a dx2^b."""
        if a == 0 and b == 0:
            return self
        return ScalarField2D.from_hat(self.grid, self.hat * _deriv_mult(self.grid.n, a, b))

    def c0_norm(self) -> float:
        return float(np.abs(self.values).max())

    def __add__(self, other):
        self._check(other)
        return ScalarField2D(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return ScalarField2D(self.grid, self.values - other.values)

    def __mul__(self, c):
        return ScalarField2D(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def _check(self, other):
        if not isinstance(other, ScalarField2D) or other.grid.n != self.grid.n:
            raise ValueError("field arithmetic requires matching grids")


class VectorField2D:
    """Pair of scalar components (u1, u2) on a common grid."""

    __slots__ = ("u1", "u2")

    def __init__(self, u1: ScalarField2D, u2: ScalarField2D):
        if u1.grid.n != u2.grid.n:
            raise ValueError("vector components must share one grid")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    def __setattr__(self, name, value):
        raise AttributeError("VectorField2D is immutable")

    @property
    def grid(self) -> TorusGrid:
        return self.u1.grid

    def c0_norm(self) -> float:
        """Sup of the pointwise Euclidean magnitude."""
        mag2 = self.u1.values**2 + self.u2.values**2
        return float(np.sqrt(mag2.max()))

    def mean(self):
        return np.array([self.u1.mean, self.u2.mean])

    def __add__(self, other):
        return VectorField2D(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return VectorField2D(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c):
        return VectorField2D(self.u1 * c, self.u2 * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def max_divergence(self) -> float:
        return divergence(self).c0_norm()

    def is_divergence_free(self, rel_tol: float = 1e-10) -> bool:
        scale = max(self.c0_norm(), 1e-300)
        return self.max_divergence() <= rel_tol * scale


@dataclass(frozen=True)
class HolderIndex:
    """Non-integer smoothness order s = m + gamma with m = [s], gamma in (0,1)."""

    s: float

    def __post_init__(self):
        if not np.isfinite(self.s) or self.s <= 0:
            raise ValueError(f"Holder order must be positive and finite, got {self.s}")
        if float(self.s) == int(self.s):
            raise IntegerOrder(f"Holder order must be non-integer, got {self.s}")

    @property
    def m(self) -> int:
        return int(math.floor(self.s))

    @property
    def gamma(self) -> float:
        return float(self.s) - self.m


def _as_index(s) -> HolderIndex:
    return s if isinstance(s, HolderIndex) else HolderIndex(float(s))


# ---------------------------------------------------------------------------
# first-order calculus


def gradient(f: ScalarField2D) -> VectorField2D:
    return VectorField2D(f.deriv(1, 0), f.deriv(0, 1))


def divergence(u: VectorField2D) -> ScalarField2D:
    return u.u1.deriv(1, 0) + u.u2.deriv(0, 1)


def grad_perp(f: ScalarField2D) -> VectorField2D:
    """Perpendicular gradient (-d2 f, d1 f); always divergence-free."""
    return VectorField2D(-f.deriv(0, 1), f.deriv(1, 0))


def curl2d(u: VectorField2D) -> ScalarField2D:
    """Scalar curl -d2 u1 + d1 u2 (the vorticity of a velocity field)."""
    return u.u2.deriv(1, 0) - u.u1.deriv(0, 1)


def inv_laplacian(f: ScalarField2D) -> ScalarField2D:
    """Zero-mean solution of Laplace(g) = f; requires f mean-free."""
    scale = max(f.c0_norm(), 1e-300)
    if abs(f.mean) > _MEAN_TOL * scale:
        raise NonZeroMean(
            f"inv_laplacian needs a mean-free field; |mean| = {abs(f.mean):.3e} "
            f"exceeds {_MEAN_TOL:.0e} of the C0 norm {scale:.3e}"
        )
    ws = _workspace(f.grid.n)
    hat = f.hat * ws["inv_neg_ksq"]
    hat[0, 0] = 0.0
    return ScalarField2D.from_hat(f.grid, hat)


def biot_savart(omega: ScalarField2D) -> VectorField2D:
    """Mean-free divergence-free velocity with the given vorticity."""
    return grad_perp(inv_laplacian(omega))


def leray_project(u: VectorField2D) -> VectorField2D:
    """Remove the gradient part: u - grad(invLaplace(div u)).

    Acts coefficient-wise as the projection orthogonal to k; unpaired
    Nyquist lines are dropped so the projection is exactly idempotent.
    """
    n = u.grid.n
    ws = _workspace(n)
    k1, k2, ksq = ws["k1"], ws["k2"], ws["ksq"]
    h1 = u.u1.hat.copy()
    h2 = u.u2.hat.copy()
    for h in (h1, h2):
        h[n // 2, :] = 0.0
        h[:, n // 2] = 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = np.where(ksq > 0, (k1 * h1 + k2 * h2) / ksq, 0.0)
    return VectorField2D(
        ScalarField2D.from_hat(u.grid, h1 - k1 * proj),
        ScalarField2D.from_hat(u.grid, h2 - k2 * proj),
    )


# ---------------------------------------------------------------------------
# Holder norms


def dyadic_separations(n: int):
    """Shift counts 2^j, j = 0 .. log2(n/2), used by the Holder quotient."""
    return [1 << j for j in range(int(math.log2(n // 2)) + 1)]


def _component_values(field):
    if isinstance(field, VectorField2D):
        return [field.u1, field.u2]
    return [field]


def _holder_quotient(deriv_arrays, n: int, h: float, gamma: float) -> float:
    """Max over dyadic axis-aligned pairs of |g(x) - g(y)| / |x-y|^gamma.

    deriv_arrays: list of component arrays of one derivative field."""
    best = 0.0
    for shift in dyadic_separations(n):
        sep = h * shift
        for axis in (0, 1):
            mag2 = None
            for arr in deriv_arrays:
                d = np.roll(arr, -shift, axis=axis) - arr
                mag2 = d * d if mag2 is None else mag2 + d * d
            q = math.sqrt(float(mag2.max())) / sep**gamma
            if q > best:
                best = q
    return best


def holder_norm(field, s) -> float:
    """Discrete Holder norm of order s (non-integer) of a scalar or vector field.

    Largest sup norm over all derivatives up to order [s], plus the largest
    Holder-gamma quotient of the order-[s] derivatives, gamma = s - [s].
    Quotients are taken over axis-aligned pairs at separations h * 2^j.
    Vector fields are measured in the pointwise Euclidean magnitude.
    """
    idx = _as_index(s)
    comps = _component_values(field)
    grid = comps[0].grid
    n, h = grid.n, grid.h

    c_part = 0.0
    top_derivs = []
    for order in range(idx.m + 1):
        for a in range(order, -1, -1):
            b = order - a
            arrs = [c.deriv(a, b).values for c in comps]
            mag2 = sum(arr * arr for arr in arrs)
            c_part = max(c_part, math.sqrt(float(mag2.max())))
            if order == idx.m:
                top_derivs.append(arrs)

    quot = max(_holder_quotient(arrs, n, h, idx.gamma) for arrs in top_derivs)
    return c_part + quot


def derivative_stack(u: VectorField2D) -> np.ndarray:
    """Channels (u1, u2, d1u1, d1u2, d2u1, d2u2) as one (6, n, n) array.

    This is the precomputation consumed by the batched order-(1+gamma)
    distance kernels; holder_norm on differences of fields agrees with the
    kernel output on the same dyadic separations.
    """
    return np.stack([
        u.u1.values, u.u2.values,
        u.u1.deriv(1, 0).values, u.u2.deriv(1, 0).values,
        u.u1.deriv(0, 1).values, u.u2.deriv(0, 1).values,
    ])


# ---------------------------------------------------------------------------
# random fields in a Holder ball


def sample_holder_ball(s, radius: float, seed: int, grid: TorusGrid,
                       kmax: int | None = None) -> VectorField2D:
    """Random divergence-free field with Holder norm of order s exactly `radius`.

    A random stream function with coefficient decay |k|^-(s + 2.1) is drawn
    from a seeded generator (the extra 1.1 over s + 1 keeps the norm of the
    perpendicular gradient finite with margin), then the field is rescaled so
    that holder_norm(u, s) == radius.  Deterministic in (seed, grid, s, kmax).
    """
    idx = _as_index(s)
    n = grid.n
    if kmax is None:
        kmax = n // 3
    if radius < 0:
        raise ValueError("radius must be >= 0")

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, n))
    hat = np.fft.rfft2(noise)

    k1 = np.fft.fftfreq(n, d=1.0 / n)[:, None]
    k2 = np.arange(n // 2 + 1, dtype=float)[None, :]
    kmag = np.sqrt(k1**2 + k2**2)
    band = (np.maximum(np.abs(k1), k2) <= kmax) & (kmag > 0)
    profile = np.zeros_like(kmag)
    profile[band] = kmag[band] ** (-(idx.s + 2.1))
    psi = ScalarField2D.from_hat(grid, hat * profile)
    u = grad_perp(psi)

    if radius == 0.0:
        zero = ScalarField2D(grid, np.zeros((n, n)))
        return VectorField2D(zero, zero)
    return u * (radius / holder_norm(u, idx))


# ---------------------------------------------------------------------------
# serialization

_HEADER = struct.Struct("<q")


def save_field(field, path_or_buf):
    """Flat binary layout: n as little-endian int64, then row-major float64
    values (both components in sequence for vector fields)."""
    comps = _component_values(field)
    n = comps[0].grid.n
    buf = path_or_buf if hasattr(path_or_buf, "write") else open(path_or_buf, "wb")
    try:
        buf.write(_HEADER.pack(n))
        for c in comps:
            buf.write(np.ascontiguousarray(c.values, dtype="<f8").tobytes())
    finally:
        if buf is not path_or_buf:
            buf.close()


def load_field(path_or_buf):
    """Inverse of save_field; returns a ScalarField2D or VectorField2D
    depending on the payload length."""
    buf = path_or_buf if hasattr(path_or_buf, "read") else open(path_or_buf, "rb")
    try:
        (n,) = _HEADER.unpack(buf.read(_HEADER.size))
        payload = buf.read()
    finally:
        if buf is not path_or_buf:
            buf.close()
    grid = TorusGrid(n)
    count = len(payload) // (8 * n * n)
    if len(payload) != count * 8 * n * n or count not in (1, 2):
        raise ValueError("corrupt field payload")
    arrays = [
        np.frombuffer(payload, dtype="<f8", count=n * n, offset=i * 8 * n * n).reshape(n, n)
        for i in range(count)
    ]
    if count == 1:
        return ScalarField2D(grid, arrays[0])
    return grid.vector(arrays[0], arrays[1])


def field_to_csv(field, path):
    """CSV view with x1,x2 coordinates; one value column per component."""
    comps = _component_values(field)
    grid = comps[0].grid
    x1, x2 = grid.coords()
    names = ["value"] if len(comps) == 1 else ["u1", "u2"]
    with open(path, "w", newline="") as fh:
        fh.write("x1,x2," + ",".join(names) + "\n")
        cols = [x1.ravel(), x2.ravel()] + [c.values.ravel() for c in comps]
        for row in zip(*cols):
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def save_matrix(mat: np.ndarray, path_or_buf):
    """Square float64 matrix in the same binary layout as fields."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square matrix")
    buf = path_or_buf if hasattr(path_or_buf, "write") else open(path_or_buf, "wb")
    try:
        buf.write(_HEADER.pack(mat.shape[0]))
        buf.write(np.ascontiguousarray(mat, dtype="<f8").tobytes())
    finally:
        if buf is not path_or_buf:
            buf.close()


def load_matrix(path_or_buf) -> np.ndarray:
    buf = path_or_buf if hasattr(path_or_buf, "read") else open(path_or_buf, "rb")
    try:
        (n,) = _HEADER.unpack(buf.read(_HEADER.size))
        data = np.frombuffer(buf.read(8 * n * n), dtype="<f8")
    finally:
        if buf is not path_or_buf:
            buf.close()
    return data.reshape(n, n).copy()
