"""Time-dependent field paths: forcing terms and control primitives.

Solver steps never straddle a breakpoint, so piecewise paths are sampled
with exact interval alignment: eval(t, left=True) returns the limit from the
left, which a time stepper uses at the right endpoint of a step.
"""

from __future__ import annotations

import bisect

import numpy as np

from .fields import ScalarField2D, TorusGrid, VectorField2D

__all__ = [
    "ZeroPath",
    "ConstantPath",
    "PiecewiseConstantPath",
    "PiecewiseLinearPath",
    "SmoothPath",
]


def _zero_vector(grid: TorusGrid) -> VectorField2D:
    z = ScalarField2D(grid, np.zeros((grid.n, grid.n)))
    return VectorField2D(z, z)


class FieldPath:
    """Base class; subclasses provide eval() and breakpoints."""

    breakpoints: tuple = ()

    def eval(self, t: float, left: bool = False) -> VectorField2D:
        raise NotImplementedError

    def derivative(self) -> "FieldPath":
        raise NotImplementedError(f"{type(self).__name__} has no stored derivative")

    @property
    def is_zero(self) -> bool:
        return False

    def l1_norm(self, norm_fn, t0: float, t1: float) -> float:
        """Integral of norm_fn(path(t)) over [t0, t1] (quadrature on the
        piecewise structure; exact for piecewise-constant paths)."""
        raise NotImplementedError


class ZeroPath(FieldPath):
    def __init__(self, grid: TorusGrid):
        self.grid = grid
        self._zero = _zero_vector(grid)

    def eval(self, t, left=False):
        return self._zero

    def derivative(self):
        return self

    @property
    def is_zero(self):
        return True

    def l1_norm(self, norm_fn, t0, t1):
        return 0.0


class ConstantPath(FieldPath):
    def __init__(self, field: VectorField2D):
        self.field = field

    def eval(self, t, left=False):
        return self.field

    def derivative(self):
        return ZeroPath(self.field.grid)

    def l1_norm(self, norm_fn, t0, t1):
        return (t1 - t0) * norm_fn(self.field)


def _check_times(times):
    times = tuple(float(t) for t in times)
    if len(times) < 2 or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("breakpoints must be strictly increasing")
    return times


def _segment_index(times, t, left):
    """Index k with times[k] <= t < times[k+1]; left=True resolves exact
    breakpoints to the preceding interval.  Clamped at the ends."""
    if left:
        k = bisect.bisect_left(times, t) - 1
    else:
        k = bisect.bisect_right(times, t) - 1
    return min(max(k, 0), len(times) - 2)


class PiecewiseConstantPath(FieldPath):
    """Constant fields on the half-open intervals [t_k, t_{k+1})."""

    def __init__(self, times, fields):
        self.times = _check_times(times)
        if len(fields) != len(self.times) - 1:
            raise ValueError("need one field per interval")
        self.fields = list(fields)

    @property
    def breakpoints(self):
        return self.times

    def eval(self, t, left=False):
        return self.fields[_segment_index(self.times, t, left)]

    def l1_norm(self, norm_fn, t0, t1):
        total = 0.0
        for k, f in enumerate(self.fields):
            lo = max(self.times[k], t0)
            hi = min(self.times[k + 1], t1)
            if hi > lo:
                total += (hi - lo) * norm_fn(f)
        return total


class PiecewiseLinearPath(FieldPath):
    """Linear interpolation of node fields; derivative is piecewise constant."""

    def __init__(self, times, node_fields):
        self.times = _check_times(times)
        if len(node_fields) != len(self.times):
            raise ValueError("need one field per node")
        self.nodes = list(node_fields)

    @property
    def breakpoints(self):
        return self.times

    def eval(self, t, left=False):
        k = _segment_index(self.times, t, left)
        t0, t1 = self.times[k], self.times[k + 1]
        th = (t - t0) / (t1 - t0)
        th = min(max(th, 0.0), 1.0)
        if th == 0.0:
            return self.nodes[k]
        if th == 1.0:
            return self.nodes[k + 1]
        return self.nodes[k] * (1.0 - th) + self.nodes[k + 1] * th

    def derivative(self):
        fields = [
            (self.nodes[k + 1] - self.nodes[k]) * (1.0 / (self.times[k + 1] - self.times[k]))
            for k in range(len(self.nodes) - 1)
        ]
        return PiecewiseConstantPath(self.times, fields)

    def l1_norm(self, norm_fn, t0, t1):
        """Trapezoid on the nodes; an upper bound since norms are convex
        along linear segments."""
        total = 0.0
        for k in range(len(self.nodes) - 1):
            lo = max(self.times[k], t0)
            hi = min(self.times[k + 1], t1)
            if hi > lo:
                total += 0.5 * (hi - lo) * (
                    norm_fn(self.eval(lo)) + norm_fn(self.eval(hi, left=True))
                )
        return total

    def w11_norm(self, norm_fn, t0, t1):
        d = self.derivative()
        return self.l1_norm(norm_fn, t0, t1) + d.l1_norm(norm_fn, t0, t1)


class SmoothPath(FieldPath):
    """Path given by a callable t -> VectorField2D, optionally with an
    analytic time derivative."""

    def __init__(self, fn, derivative_fn=None, breakpoints=(), quad_points: int = 33):
        self.fn = fn
        self.derivative_fn = derivative_fn
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.quad_points = quad_points

    def eval(self, t, left=False):
        return self.fn(t)

    def derivative(self):
        if self.derivative_fn is None:
            raise NotImplementedError("smooth path needs an explicit derivative")
        return SmoothPath(self.derivative_fn, breakpoints=self.breakpoints)

    def l1_norm(self, norm_fn, t0, t1):
        ts = np.linspace(t0, t1, self.quad_points)
        vals = np.array([norm_fn(self.fn(t)) for t in ts])
        return float(np.trapezoid(vals, ts))
