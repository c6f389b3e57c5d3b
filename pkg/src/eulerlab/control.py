"""Finite-dimensional control spaces and the endpoint map.

A control space is spanned by the divergence-free trigonometric fields
grad_perp(cos k.x) and grad_perp(sin k.x) over a list of wave vectors.
Controls are piecewise-constant paths of coefficient vectors; their
primitives are continuous piecewise-linear paths vanishing at t=0.  The
endpoint map sends (y, z) to y + S(z) where S(z) is the terminal velocity of
the drift-coupled Euler system driven by z.
"""

import csv
import json
import math

import numpy as np

from .errors import DegenerateBasis
from .fields import TorusGrid, VectorField2D, holder_norm
from .paths import FieldPath, ZeroPath
from .solver import SolverConfig, Triple, solve

DEFAULT_WAVE_VECTORS = ((1, 0), (0, 1), (1, 1))


class ControlSpace:
    """Ordered basis of divergence-free trigonometric vector fields.

    For each wave vector k the pair grad_perp(cos k.x), grad_perp(sin k.x)
    enters the basis, so the dimension is twice the number of wave vectors.
    The Gram matrix is taken in L^2 of the torus.
    """

    __slots__ = ("grid", "wave_vectors", "basis", "gram", "_stack1", "_stack2")

    def __init__(self, grid: TorusGrid, wave_vectors, basis):
        gram = np.empty((len(basis), len(basis)))
        area = (2.0 * math.pi) ** 2
        for i, ei in enumerate(basis):
            for j in range(i, len(basis)):
                ej = basis[j]
                val = float(
                    np.mean(ei.u1.values * ej.u1.values + ei.u2.values * ej.u2.values)
                ) * area
                gram[i, j] = gram[j, i] = val
        det = float(np.linalg.det(gram))
        if det <= 1e-12:
            raise DegenerateBasis(
                f"basis Gram determinant {det:.3e} is not positive; "
                "the generating fields are linearly dependent"
            )
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "wave_vectors", tuple(tuple(k) for k in wave_vectors))
        object.__setattr__(self, "basis", tuple(basis))
        gram.flags.writeable = False
        object.__setattr__(self, "gram", gram)
        object.__setattr__(
            self, "_stack1", np.stack([e.u1.values for e in basis])
        )
        object.__setattr__(
            self, "_stack2", np.stack([e.u2.values for e in basis])
        )

    def __setattr__(self, name, value):
        raise AttributeError("ControlSpace is immutable")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def field_from_coeffs(self, coeffs) -> VectorField2D:
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} coefficients, got shape {c.shape}")
        u1 = np.tensordot(c, self._stack1, axes=1)
        u2 = np.tensordot(c, self._stack2, axes=1)
        return self.grid.vector(u1, u2)


def make_control_space(wave_vectors=DEFAULT_WAVE_VECTORS, grid: TorusGrid = None) -> ControlSpace:
    """Build the control space spanned by grad_perp(cos k.x) and
    grad_perp(sin k.x) for the given nonzero wave vectors.

    Raises DegenerateBasis on duplicate wave vectors (k and -k generate the
    same plane and count as duplicates).
    """
    if grid is None:
        grid = TorusGrid(64)
    seen = set()
    for k in wave_vectors:
        a, b = int(k[0]), int(k[1])
        if a == 0 and b == 0:
            raise ValueError("wave vectors must be nonzero")
        key = (a, b) if (a, b) > (-a, -b) else (-a, -b)
        if key in seen:
            raise DegenerateBasis(f"duplicate wave vector {(a, b)}")
        seen.add(key)
    x1, x2 = grid.coords()
    basis = []
    for k in wave_vectors:
        a, b = float(k[0]), float(k[1])
        phase = a * x1 + b * x2
        sin_p = np.sin(phase)
        cos_p = np.cos(phase)
        # grad_perp(cos) = (b sin, -a sin); grad_perp(sin) = (-b cos, a cos)
        basis.append(grid.vector(b * sin_p, -a * sin_p))
        basis.append(grid.vector(-b * cos_p, a * cos_p))
    return ControlSpace(grid, wave_vectors, basis)


class ControlPath(FieldPath):
    """Piecewise-constant control: coefficient vector c_k on each interval
    [t_k, t_{k+1}) of a strictly increasing breakpoint sequence."""

    def __init__(self, space: ControlSpace, times, coeffs):
        times = tuple(float(t) for t in times)
        coeffs = np.asarray(coeffs, dtype=float)
        if len(times) < 2 or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("breakpoints must strictly increase")
        if coeffs.shape != (len(times) - 1, space.dim):
            raise ValueError(
                f"expected coefficient shape {(len(times) - 1, space.dim)}, "
                f"got {coeffs.shape}"
            )
        self.space = space
        self.times = times
        self.coeffs = coeffs
        self.coeffs.flags.writeable = False
        self._cache = {}

    @property
    def breakpoints(self):
        return self.times

    def _segment(self, t, left):
        from .paths import _segment_index

        return _segment_index(self.times, t, left)

    def eval(self, t, left=False):
        k = self._segment(t, left)
        field = self._cache.get(k)
        if field is None:
            field = self.space.field_from_coeffs(self.coeffs[k])
            self._cache[k] = field
        return field

    def l1_norm(self, norm_fn, t0, t1):
        total = 0.0
        for k in range(len(self.times) - 1):
            a, b = max(self.times[k], t0), min(self.times[k + 1], t1)
            if b > a:
                total += (b - a) * norm_fn(self.eval(0.5 * (a + b)))
        return total

    def __add__(self, other):
        if not isinstance(other, ControlPath) or other.space is not self.space:
            return NotImplemented
        if self.times == other.times:
            return ControlPath(self.space, self.times, self.coeffs + other.coeffs)
        merged = sorted(set(self.times) | set(other.times))
        coeffs = [
            self._coeff_at(0.5 * (a + b)) + other._coeff_at(0.5 * (a + b))
            for a, b in zip(merged, merged[1:])
        ]
        return ControlPath(self.space, merged, np.asarray(coeffs))

    def _coeff_at(self, t):
        return self.coeffs[self._segment(t, left=False)]

    def __mul__(self, c):
        return ControlPath(self.space, self.times, self.coeffs * float(c))

    __rmul__ = __mul__


class PrimitivePath(FieldPath):
    """Continuous piecewise-linear primitive of a piecewise-constant control;
    nodal coefficient vectors with node_coeffs[0] = 0."""

    def __init__(self, space: ControlSpace, times, node_coeffs, source: ControlPath = None):
        times = tuple(float(t) for t in times)
        node_coeffs = np.asarray(node_coeffs, dtype=float)
        if node_coeffs.shape != (len(times), space.dim):
            raise ValueError("one coefficient vector per breakpoint required")
        if np.any(node_coeffs[0] != 0.0):
            raise ValueError("a primitive must vanish at its first breakpoint")
        self.space = space
        self.times = times
        self.node_coeffs = node_coeffs
        self.node_coeffs.flags.writeable = False
        self.source = source

    @property
    def breakpoints(self):
        return self.times

    def coeff_at(self, t):
        from .paths import _segment_index

        k = _segment_index(self.times, t, left=False)
        ta, tb = self.times[k], self.times[k + 1]
        theta = min(max((t - ta) / (tb - ta), 0.0), 1.0)
        return (1.0 - theta) * self.node_coeffs[k] + theta * self.node_coeffs[k + 1]

    def eval(self, t, left=False):
        return self.space.field_from_coeffs(self.coeff_at(t))

    def derivative(self) -> ControlPath:
        if self.source is not None:
            return self.source
        diffs = np.diff(self.node_coeffs, axis=0)
        dts = np.diff(np.asarray(self.times))
        return ControlPath(self.space, self.times, diffs / dts[:, None])

    def l1_norm(self, norm_fn, t0, t1):
        # trapezoid on the nodes; upper bound by convexity of the norm
        total = 0.0
        for k in range(len(self.times) - 1):
            a, b = max(self.times[k], t0), min(self.times[k + 1], t1)
            if b > a:
                na = norm_fn(self.eval(a))
                nb = norm_fn(self.eval(b))
                total += 0.5 * (na + nb) * (b - a)
        return total

    def w11_norm(self, norm_fn, t0, t1):
        return self.l1_norm(norm_fn, t0, t1) + self.derivative().l1_norm(
            norm_fn, t0, t1
        )

    def __add__(self, other):
        if (
            not isinstance(other, PrimitivePath)
            or other.space is not self.space
            or other.times != self.times
        ):
            return NotImplemented
        source = None
        if self.source is not None and other.source is not None:
            source = self.source + other.source
        return PrimitivePath(
            self.space, self.times, self.node_coeffs + other.node_coeffs, source
        )

    def __mul__(self, c):
        source = None if self.source is None else self.source * float(c)
        return PrimitivePath(
            self.space, self.times, self.node_coeffs * float(c), source
        )

    __rmul__ = __mul__


def primitive(eta: ControlPath) -> PrimitivePath:
    """Exact interval-wise integral of a piecewise-constant control; the
    result is piecewise linear with z(t_0) = 0."""
    times = np.asarray(eta.times)
    dts = np.diff(times)
    nodes = np.zeros((len(eta.times), eta.space.dim))
    nodes[1:] = np.cumsum(dts[:, None] * eta.coeffs, axis=0)
    return PrimitivePath(eta.space, eta.times, nodes, source=eta)


def relaxation_norm(eta: ControlPath, norm_fn=None) -> float:
    """Largest field norm of the control's primitive over time; attained at a
    breakpoint because the primitive is piecewise linear."""
    if norm_fn is None:
        norm_fn = lambda field: field.c0_norm()
    z = primitive(eta)
    return max(norm_fn(z.space.field_from_coeffs(c)) for c in z.node_coeffs)


def endpoint_map(
    space: ControlSpace,
    y_coeffs,
    z: PrimitivePath,
    u0: VectorField2D,
    h: FieldPath = None,
    T: float = 1.0,
    config: SolverConfig = None,
) -> VectorField2D:
    """y + S(z): the target-shift y (coefficients in the control space) plus
    the terminal velocity of the drift-coupled system started at u0 with
    external forcing h and drift z."""
    if h is None:
        h = ZeroPath(space.grid)
    if config is None:
        config = SolverConfig(grid=space.grid)
    y = space.field_from_coeffs(np.asarray(y_coeffs, dtype=float))
    traj = solve(Triple(u0, z, h, T), config)
    return y + traj.final_u


def composite_norm(space: ControlSpace, y_coeffs, eta: ControlPath, s=2.5) -> float:
    """Ball norm for sampled control data: ||y||_{C^s} + ||eta||_{L^1(C^s)}
    + ||primitive(eta)||_{W^{1,1}(C^s)}.

    The control enters twice (directly and as the derivative of its
    primitive); the sum norm keeps every term the sampler must bound.
    """
    hn = lambda field: holder_norm(field, s)
    T = eta.times[-1]
    y = space.field_from_coeffs(np.asarray(y_coeffs, dtype=float))
    z = primitive(eta)
    return hn(y) + eta.l1_norm(hn, eta.times[0], T) + z.w11_norm(hn, eta.times[0], T)


def ball_draws(space: ControlSpace, m: float, count: int, seed: int,
               L_intervals: int = 16):
    """Raw (direction, radius) draws behind sample_Bm: a standard Gaussian
    vector and a radius m * U^(1/dim).  Split out so the norm computation in
    finish_ball_draw can be distributed over workers without changing the
    random stream."""
    if m < 0 or count <= 0 or L_intervals < 1:
        raise ValueError("need m >= 0, count > 0, L_intervals >= 1")
    rng = np.random.default_rng(seed)
    dim = space.dim * (1 + L_intervals)
    draws = []
    for _ in range(count):
        if m == 0.0:
            draws.append((np.zeros(dim), 0.0))
            continue
        vec = rng.standard_normal(dim)
        radius = m * rng.uniform() ** (1.0 / dim)
        draws.append((vec, radius))
    return draws


def finish_ball_draw(space: ControlSpace, times, vec, radius: float, s=2.5):
    """Rescale one raw draw to the composite-norm sphere of its radius;
    returns (y_coeffs, eta)."""
    L = len(times) - 1
    y = np.asarray(vec, dtype=float)[: space.dim]
    cs = np.asarray(vec, dtype=float)[space.dim :].reshape(L, space.dim)
    if radius == 0.0:
        return y * 0.0, ControlPath(space, times, cs * 0.0)
    eta = ControlPath(space, times, cs)
    scale = radius / composite_norm(space, y, eta, s=s)
    return y * scale, ControlPath(space, times, cs * scale)


def sample_Bm(
    space: ControlSpace,
    m: float,
    count: int,
    seed: int,
    L_intervals: int = 16,
    T: float = 1.0,
    s=2.5,
):
    """Deterministic samples (y_coeffs, eta) with composite_norm <= m.

    Uniform in the composite-norm ball: a Gaussian direction is rescaled to
    the unit sphere of the (positively homogeneous) composite norm, then
    multiplied by m * U^(1/dim); the radial density r^(dim-1) this induces is
    exactly that of the uniform measure on any star-shaped body.
    """
    times = tuple(T * k / L_intervals for k in range(L_intervals + 1))
    return [
        finish_ball_draw(space, times, vec, radius, s=s)
        for vec, radius in ball_draws(space, m, count, seed, L_intervals)
    ]


# ---------------------------------------------------------------------------
# serialization


def control_to_csv(eta: ControlPath, path):
    """Rows: interval index, t_start, t_end, c_1..c_n."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["interval", "t_start", "t_end"]
            + [f"c_{i + 1}" for i in range(eta.space.dim)]
        )
        for k in range(len(eta.times) - 1):
            writer.writerow(
                [k, f"{eta.times[k]:.12g}", f"{eta.times[k + 1]:.12g}"]
                + [f"{c:.12g}" for c in eta.coeffs[k]]
            )


def control_from_csv(space: ControlSpace, path) -> ControlPath:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    times = [float(r[1]) for r in body] + [float(body[-1][2])]
    coeffs = [[float(v) for v in r[3:]] for r in body]
    return ControlPath(space, times, np.asarray(coeffs))


def control_to_json(eta: ControlPath, path):
    doc = {
        "wave_vectors": [list(k) for k in eta.space.wave_vectors],
        "grid": eta.space.grid.n,
        "times": list(eta.times),
        "coeffs": eta.coeffs.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def control_from_json(path, space: ControlSpace = None) -> ControlPath:
    with open(path) as fh:
        doc = json.load(fh)
    if space is None:
        space = make_control_space(
            tuple(tuple(k) for k in doc["wave_vectors"]), TorusGrid(doc["grid"])
        )
    return ControlPath(space, doc["times"], np.asarray(doc["coeffs"]))
