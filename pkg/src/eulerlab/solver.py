"""Time integration of the controlled incompressible Euler system on the
2-torus.

The momentum equation couples the unknown velocity u to a prescribed
divergence-free drift path z through the advecting field u + z:

    du/dt + <(u + z), grad>(u + z) + grad p = f,   div u = 0.

Two discretisations are provided:

* a semi-Lagrangian scheme that transports vorticity along back-traced
  characteristics with a Simpson-rule source term, unconditionally stable;
* a pseudospectral RK4 reference with two-thirds dealiasing, which conserves
  energy and enstrophy up to time-stepping error.

By default the solver substitutes w = u + z, integrates the standard Euler
system for w with forcing f + dz/dt, and returns u = w - z.  The spectral
engine can also advance u directly (z_mode="direct"), advecting the combined
vorticity of u + z; the two routes discretise the same dynamics through
different code paths and are used to cross-check each other.
"""

import dataclasses
import json
import math
import os
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import CflViolation, Divergence, OutOfRange
from .fields import (
    ScalarField2D,
    TorusGrid,
    VectorField2D,
    _workspace,
    biot_savart,
    curl2d,
    divergence,
    holder_norm,
    inv_laplacian,
    save_field,
)
from .paths import (
    ConstantPath,
    FieldPath,
    PiecewiseConstantPath,
    ZeroPath,
)
from ._kernels import gather_interp

_METHODS = ("semi_lagrangian", "spectral")
_Z_MODES = ("substitution", "direct")


# ---------------------------------------------------------------------------
# problem data


@dataclass(frozen=True)
class Triple:
    """Problem data (u0, z, f) with a time horizon.

    u0 is the divergence-free initial velocity, z the drift path (absolutely
    continuous in time), f the forcing path.  The data norm used throughout
    is ||u0||_{C^s} + ||z||_{W^{1,1}(C^s)} + ||f||_{L^1(C^s)}.
    """

    u0: VectorField2D
    z: FieldPath
    f: FieldPath
    horizon: float

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not self.u0.is_divergence_free(1e-8):
            raise ValueError("u0 must be divergence-free")

    @property
    def grid(self) -> TorusGrid:
        return self.u0.grid

    def data_norm(self, s) -> float:
        """Holder-s data norm: C^s of u0 plus W^{1,1} of z plus L^1 of f."""
        hn = lambda field: holder_norm(field, s)
        T = self.horizon
        z_part = self.z.l1_norm(hn, 0.0, T) + self.z.derivative().l1_norm(hn, 0.0, T)
        return holder_norm(self.u0, s) + z_part + self.f.l1_norm(hn, 0.0, T)


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation parameters.

    dt is chosen adaptively as min(dt_max, cfl * h / max speed) and clipped
    to land exactly on forcing breakpoints and snapshot times.  z_mode
    "direct" (spectral only) advances u itself instead of w = u + z.
    """

    grid: TorusGrid
    method: str = "semi_lagrangian"
    dt_max: float = 5e-3
    cfl: float = 0.5
    dealias: bool = True
    interp_order: int = 3
    upsample: int = 4
    z_mode: str = "substitution"
    snapshot_times: tuple = None
    blowup_factor: float = 1e6
    min_dt: float = 1e-10

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.z_mode not in _Z_MODES:
            raise ValueError(f"z_mode must be one of {_Z_MODES}")
        if self.z_mode == "direct" and self.method != "spectral":
            raise ValueError("z_mode='direct' requires the spectral method")
        if self.interp_order not in (1, 3):
            raise ValueError("interp_order must be 1 or 3")
        if self.dt_max <= 0 or self.cfl <= 0 or self.min_dt <= 0:
            raise ValueError("dt_max, cfl and min_dt must be positive")
        if self.upsample < 1:
            raise ValueError("upsample must be >= 1")


# ---------------------------------------------------------------------------
# trajectories and flow maps


def _energy_enstrophy(u: VectorField2D, omega: ScalarField2D):
    area = (2.0 * math.pi) ** 2
    en = 0.5 * float(np.mean(u.u1.values**2 + u.u2.values**2)) * area
    ens = 0.5 * float(np.mean(omega.values**2)) * area
    return en, ens


class SolutionTrajectory:
    """Velocity snapshots u(t_k) with vorticities and a per-step log.

    Immutable once constructed.  Snapshots hold the full velocity including
    its spatial mean; vorticities are the curl of the snapshots.
    """

    __slots__ = ("times", "fields", "omegas", "step_log", "config")

    def __init__(self, times, fields, omegas, step_log=None, config=None):
        times = tuple(float(t) for t in times)
        if len(times) != len(fields) or any(
            b <= a for a, b in zip(times, times[1:])
        ):
            raise ValueError("snapshot times must strictly increase, one per field")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "fields", tuple(fields))
        object.__setattr__(self, "omegas", tuple(omegas))
        if step_log is None:
            en_pairs = [_energy_enstrophy(u, w) for u, w in zip(fields, omegas)]
            step_log = {
                "t": np.asarray(times),
                "dt": np.diff(np.asarray(times), prepend=times[0]),
                "umax": np.array([u.c0_norm() for u in fields]),
                "energy": np.array([p[0] for p in en_pairs]),
                "enstrophy": np.array([p[1] for p in en_pairs]),
                "max_div": np.array([u.max_divergence() for u in fields]),
            }
        object.__setattr__(self, "step_log", step_log)
        object.__setattr__(self, "config", config)

    def __setattr__(self, name, value):
        raise AttributeError("SolutionTrajectory is immutable")

    @classmethod
    def from_fields(cls, times, fields) -> "SolutionTrajectory":
        omegas = [curl2d(u) for u in fields]
        return cls(times, fields, omegas)

    @property
    def grid(self) -> TorusGrid:
        return self.fields[0].grid

    @property
    def horizon(self) -> float:
        return self.times[-1]

    @property
    def final_u(self) -> VectorField2D:
        return self.fields[-1]

    def u_at(self, t: float) -> VectorField2D:
        for tk, u in zip(self.times, self.fields):
            if abs(tk - t) <= 1e-9 * max(1.0, abs(t)):
                return u
        raise OutOfRange(f"no snapshot stored at t={t}; have {self.times}")

    def velocity_values(self, t: float):
        """Velocity component arrays at time t, linear in t between
        snapshots (used by flow-map back-tracing)."""
        t0, t1 = self.times[0], self.times[-1]
        if t < t0 - 1e-12 or t > t1 + 1e-12:
            raise OutOfRange(f"t={t} outside [{t0}, {t1}]")
        t = min(max(t, t0), t1)
        k = min(bisect_right(self.times, t) - 1, len(self.times) - 2)
        k = max(k, 0)
        ua, ub = self.fields[k], self.fields[k + 1]
        ta, tb = self.times[k], self.times[k + 1]
        theta = (t - ta) / (tb - ta)
        v1 = (1.0 - theta) * ua.u1.values + theta * ub.u1.values
        v2 = (1.0 - theta) * ua.u2.values + theta * ub.u2.values
        return v1, v2


class FlowMap:
    """Back-traced characteristic positions: maps a grid point x at time t1
    to the departure point at time t0 <= t1 of the characteristic through x.

    Displacements are stored unwrapped so the map interpolates smoothly
    across the periodic seam; positions() wraps into [0, 2pi).
    """

    __slots__ = ("grid", "t0", "t1", "disp1", "disp2")

    def __init__(self, grid, t0, t1, disp1, disp2):
        disp1 = np.ascontiguousarray(disp1, dtype=float)
        disp2 = np.ascontiguousarray(disp2, dtype=float)
        disp1.flags.writeable = False
        disp2.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "t0", float(t0))
        object.__setattr__(self, "t1", float(t1))
        object.__setattr__(self, "disp1", disp1)
        object.__setattr__(self, "disp2", disp2)

    def __setattr__(self, name, value):
        raise AttributeError("FlowMap is immutable")

    def positions(self):
        x1, x2 = self.grid.coords()
        tau = 2.0 * math.pi
        return np.mod(x1 + self.disp1, tau), np.mod(x2 + self.disp2, tau)

    def compose(self, earlier: "FlowMap") -> "FlowMap":
        """Chain with a map for an earlier time span: self traces t1 -> t0,
        `earlier` traces t0 -> earlier.t0; the result traces t1 -> earlier.t0
        (earlier's displacement is interpolated at self's arrival points)."""
        if abs(earlier.t1 - self.t0) > 1e-9:
            raise OutOfRange("maps do not chain: spans must share an endpoint")
        h = self.grid.h
        x1, x2 = self.grid.coords()
        xi = (x1 + self.disp1) / h
        yi = (x2 + self.disp2) / h
        d1 = self.disp1 + gather_interp(earlier.disp1, xi, yi, 3)
        d2 = self.disp2 + gather_interp(earlier.disp2, xi, yi, 3)
        return FlowMap(self.grid, earlier.t0, self.t1, d1, d2)

    def transport(self, values, order: int = 3):
        """Pull a grid-sampled function back along the flow: returns
        values(position) at every grid node."""
        h = self.grid.h
        x1, x2 = self.grid.coords()
        xi = (x1 + self.disp1) / h
        yi = (x2 + self.disp2) / h
        return gather_interp(np.asarray(values, dtype=float), xi, yi, order)


# ---------------------------------------------------------------------------
# spectral upsampling and force sampling


def spectral_upsample(values, factor: int):
    """Trigonometric interpolation of an (n, n) sample onto a (factor*n)^2
    grid.  Nyquist lines are dropped first so the result is the band-limited
    interpolant of the resolved modes."""
    values = np.asarray(values, dtype=float)
    if factor == 1:
        return values
    n = values.shape[0]
    half = n // 2
    hat = np.fft.rfft2(values)
    hat[half, :] = 0.0
    hat[:, half] = 0.0
    m = factor * n
    out = np.zeros((m, half * factor + 1), dtype=complex)
    out[:half, : half + 1] = hat[:half, :]
    out[m - half + 1 :, : half + 1] = hat[half + 1 :, :]
    return np.fft.irfft2(out, s=(m, m)) * factor * factor


def spectral_restrict(values, factor: int):
    """Inverse of spectral_upsample: restriction of an (n, n) sample to the
    (n // factor)^2 grid by truncating to the coarse grid's resolved modes.
    Round-trips exactly with spectral_upsample on band-limited data."""
    values = np.asarray(values, dtype=float)
    if factor == 1:
        return values
    n = values.shape[0]
    m = n // factor
    if m * factor != n or m < 4:
        raise ValueError("factor must divide n with n // factor >= 4")
    half = m // 2
    hat = np.fft.rfft2(values)
    sub = np.zeros((m, half + 1), dtype=complex)
    sub[:half, :] = hat[:half, : half + 1]
    sub[half + 1 :, :] = hat[n - half + 1 :, : half + 1]
    sub[:, half] = 0.0
    return np.fft.irfft2(sub, s=(m, m)) / (factor * factor)


class _StageSampler:
    """Evaluates the sum of several field paths at integrator stage times
    inside one time segment [a, b].

    Piecewise-constant paths are evaluated once per segment; other paths are
    evaluated per stage time with left-limits taken at t = b so that the
    segment's own value is used on its closing breakpoint.
    """

    def __init__(self, paths, a: float, b: float):
        self.paths = [p for p in paths if not p.is_zero]
        self.a = a
        self.b = b
        self._const = all(
            isinstance(p, (ConstantPath, PiecewiseConstantPath)) for p in self.paths
        )
        self._cache = {}

    @property
    def is_zero(self) -> bool:
        return not self.paths

    def total(self, t: float):
        if not self.paths:
            return None
        key = "const" if self._const else t
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        t_eval = 0.5 * (self.a + self.b) if self._const else t
        left = t_eval >= self.b - 1e-14 * max(1.0, abs(self.b))
        total = self.paths[0].eval(t_eval, left=left)
        for p in self.paths[1:]:
            total = total + p.eval(t_eval, left=left)
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[key] = total
        return total


class _FieldDataMemo:
    """Small id-keyed memo for per-field derived data; holds a reference to
    each key field so ids cannot be recycled while cached."""

    def __init__(self, build):
        self.build = build
        self._store = {}

    def get(self, field):
        key = id(field)
        hit = self._store.get(key)
        if hit is not None:
            return hit[1]
        data = self.build(field)
        if len(self._store) > 16:
            self._store.clear()
        self._store[key] = (field, data)
        return data


# ---------------------------------------------------------------------------
# spectral engine


class _SpectralEngine:
    """Pseudospectral RK4 on the vorticity of the evolved variable.

    substitution mode: state is (curl w, mean w) with w = u + z forced by
    f + dz/dt.  direct mode: state is (curl u, mean u); advection uses u + z
    and the transported vorticity is curl u + curl z.
    """

    def __init__(self, config: SolverConfig, w0: VectorField2D):
        self.grid = config.grid
        n = self.grid.n
        ws = _workspace(n)
        self.k1o = ws["k1_odd"]
        self.k2o = ws["k2_odd"]
        self.inv_neg_ksq = ws["inv_neg_ksq"]
        if config.dealias:
            cut = n // 3
            self.mask = (np.abs(ws["k1"]) <= cut) & (ws["k2"] <= cut)
        else:
            self.mask = np.ones_like(ws["ksq"], dtype=bool)
        self.direct = config.z_mode == "direct"
        omega0 = curl2d(w0)
        self.omega_hat = np.where(self.mask, omega0.hat, 0.0)
        self.omega_hat[0, 0] = 0.0
        self.mean = np.asarray(w0.mean(), dtype=float)
        self._force_memo = _FieldDataMemo(self._build_force_data)
        self._z_memo = _FieldDataMemo(self._build_z_data)

    def _build_force_data(self, field):
        curl_hat = np.where(self.mask, curl2d(field).hat, 0.0)
        curl_hat[0, 0] = 0.0
        return curl_hat, np.asarray(field.mean(), dtype=float)

    def _build_z_data(self, field):
        zeta_hat = np.where(self.mask, curl2d(field).hat, 0.0)
        zeta_hat[0, 0] = 0.0
        return field.u1.values, field.u2.values, zeta_hat, np.asarray(
            field.mean(), dtype=float
        )

    def _velocity(self, omega_hat):
        psi_hat = omega_hat * self.inv_neg_ksq
        n = self.grid.n
        u1 = np.fft.irfft2(-1j * self.k2o * psi_hat, s=(n, n))
        u2 = np.fft.irfft2(1j * self.k1o * psi_hat, s=(n, n))
        return u1, u2

    def umax(self) -> float:
        u1, u2 = self._velocity(self.omega_hat)
        return float(
            np.sqrt((u1 + self.mean[0]) ** 2 + (u2 + self.mean[1]) ** 2).max()
        )

    def c0_norm(self) -> float:
        return self.umax()

    def _rhs(self, t, omega_hat, mean, force_sampler, z_sampler):
        n = self.grid.n
        u1, u2 = self._velocity(omega_hat)
        a1 = u1 + mean[0]
        a2 = u2 + mean[1]
        tot_hat = omega_hat
        if self.direct and z_sampler is not None and not z_sampler.is_zero:
            z_field = z_sampler.total(t)
            # component values carry the drift's own mean, nothing to add
            z1, z2, zeta_hat, _zmean = self._z_memo.get(z_field)
            tot_hat = omega_hat + zeta_hat
            a1 = a1 + z1
            a2 = a2 + z2
        wx = np.fft.irfft2(1j * self.k1o * tot_hat, s=(n, n))
        wy = np.fft.irfft2(1j * self.k2o * tot_hat, s=(n, n))
        adv_hat = np.fft.rfft2(a1 * wx + a2 * wy)
        rhs_hat = np.where(self.mask, -adv_hat, 0.0)
        rhs_hat[0, 0] = 0.0
        dmean = np.zeros(2)
        g = force_sampler.total(t) if force_sampler is not None else None
        if g is not None:
            curl_hat, gmean = self._force_memo.get(g)
            rhs_hat = rhs_hat + curl_hat
            dmean = gmean
        return rhs_hat, dmean

    def step(self, t, dt, force_sampler, z_sampler):
        W, m = self.omega_hat, self.mean
        k1, k1m = self._rhs(t, W, m, force_sampler, z_sampler)
        k2, k2m = self._rhs(
            t + 0.5 * dt, W + 0.5 * dt * k1, m + 0.5 * dt * k1m, force_sampler, z_sampler
        )
        k3, k3m = self._rhs(
            t + 0.5 * dt, W + 0.5 * dt * k2, m + 0.5 * dt * k2m, force_sampler, z_sampler
        )
        k4, k4m = self._rhs(
            t + dt, W + dt * k3, m + dt * k3m, force_sampler, z_sampler
        )
        self.omega_hat = W + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        self.omega_hat[0, 0] = 0.0
        self.mean = m + (dt / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)

    def snapshot(self):
        omega = ScalarField2D.from_hat(self.grid, self.omega_hat)
        u1, u2 = self._velocity(self.omega_hat)
        u = self.grid.vector(u1 + self.mean[0], u2 + self.mean[1])
        return u, omega

    def diagnostics(self):
        u1, u2 = self._velocity(self.omega_hat)
        n = self.grid.n
        omega = np.fft.irfft2(self.omega_hat, s=(n, n))
        area = (2.0 * math.pi) ** 2
        en = 0.5 * (
            float(np.mean(u1**2 + u2**2)) + float(self.mean @ self.mean)
        ) * area
        ens = 0.5 * float(np.mean(omega**2)) * area
        umax = float(np.sqrt((u1 + self.mean[0]) ** 2 + (u2 + self.mean[1]) ** 2).max())
        div = divergence(self.grid.vector(u1, u2)).c0_norm()
        return umax, en, ens, div


# ---------------------------------------------------------------------------
# semi-Lagrangian engine


class _SemiLagrangianEngine:
    """Two-time-level semi-Lagrangian vorticity transport.

    Each step extrapolates the advecting velocity to the half-time level,
    back-traces departure points with a fixed-point midpoint rule, moves the
    vorticity by periodic cubic interpolation on a spectrally upsampled grid,
    and adds the forcing curl integrated along the trajectory by Simpson's
    rule.  Substitution mode only: the evolved variable is w = u + z.
    """

    TRACE_ITERS = 3

    def __init__(self, config: SolverConfig, w0: VectorField2D):
        self.grid = config.grid
        self.order = config.interp_order
        self.upsample = config.upsample
        omega0 = curl2d(w0)
        self.omega = omega0.values - omega0.mean
        self.mean = np.asarray(w0.mean(), dtype=float)
        u = biot_savart(self.grid.scalar(self.omega))
        self.u1 = u.u1.values
        self.u2 = u.u2.values
        self.prev_v = None
        self.prev_dt = None
        self._x1, self._x2 = self.grid.coords()
        self._curl_memo = _FieldDataMemo(self._build_curl_data)

    def _build_curl_data(self, field):
        curl = curl2d(field)
        vals = curl.values - curl.mean
        fine = spectral_upsample(vals, self.upsample)
        return vals, fine, np.asarray(field.mean(), dtype=float)

    def umax(self) -> float:
        return float(
            np.sqrt((self.u1 + self.mean[0]) ** 2 + (self.u2 + self.mean[1]) ** 2).max()
        )

    def c0_norm(self) -> float:
        return self.umax()

    def step(self, t, dt, force_sampler, z_sampler=None):
        hf = self.grid.h / self.upsample
        v1 = self.u1 + self.mean[0]
        v2 = self.u2 + self.mean[1]
        if self.prev_v is None:
            e1, e2 = v1, v2
        else:
            # second-order extrapolation to the midpoint time level
            c = 0.5 * dt / self.prev_dt
            e1 = v1 + c * (v1 - self.prev_v[0])
            e2 = v2 + c * (v2 - self.prev_v[1])
        f1 = spectral_upsample(e1, self.upsample)
        f2 = spectral_upsample(e2, self.upsample)
        a1 = dt * v1
        a2 = dt * v2
        for _ in range(self.TRACE_ITERS):
            xi = (self._x1 - 0.5 * a1) / hf
            yi = (self._x2 - 0.5 * a2) / hf
            a1 = dt * gather_interp(f1, xi, yi, self.order)
            a2 = dt * gather_interp(f2, xi, yi, self.order)
        foot_xi = (self._x1 - a1) / hf
        foot_yi = (self._x2 - a2) / hf
        omega_fine = spectral_upsample(self.omega, self.upsample)
        omega_new = gather_interp(omega_fine, foot_xi, foot_yi, self.order)

        if force_sampler is not None and not force_sampler.is_zero:
            mid_xi = (self._x1 - 0.5 * a1) / hf
            mid_yi = (self._x2 - 0.5 * a2) / hf
            g0 = force_sampler.total(t)
            gm = force_sampler.total(t + 0.5 * dt)
            g1 = force_sampler.total(t + dt)
            c0_vals, c0_fine, m0 = self._curl_memo.get(g0)
            cm_fine = c0_fine if gm is g0 else self._curl_memo.get(gm)[1]
            c1_vals = c0_vals if g1 is g0 else self._curl_memo.get(g1)[0]
            m_mid = m0 if gm is g0 else self._curl_memo.get(gm)[2]
            m_end = m0 if g1 is g0 else self._curl_memo.get(g1)[2]
            src = (
                gather_interp(c0_fine, foot_xi, foot_yi, self.order)
                + 4.0 * gather_interp(cm_fine, mid_xi, mid_yi, self.order)
                + c1_vals
            )
            omega_new = omega_new + (dt / 6.0) * src
            self.mean = self.mean + (dt / 6.0) * (m0 + 4.0 * m_mid + m_end)

        omega_new = omega_new - omega_new.mean()
        self.omega = omega_new
        u = biot_savart(self.grid.scalar(omega_new))
        self.prev_v = (v1, v2)
        self.prev_dt = dt
        self.u1 = u.u1.values
        self.u2 = u.u2.values

    def snapshot(self):
        omega = self.grid.scalar(self.omega)
        u = self.grid.vector(self.u1 + self.mean[0], self.u2 + self.mean[1])
        return u, omega

    def diagnostics(self):
        area = (2.0 * math.pi) ** 2
        en = 0.5 * (
            float(np.mean(self.u1**2 + self.u2**2)) + float(self.mean @ self.mean)
        ) * area
        ens = 0.5 * float(np.mean(self.omega**2)) * area
        div = divergence(self.grid.vector(self.u1, self.u2)).c0_norm()
        return self.umax(), en, ens, div


# ---------------------------------------------------------------------------
# driver


def _collect_breaks(triple: Triple, snapshot_times):
    T = triple.horizon
    breaks = {0.0, T}
    for path in (triple.z, triple.f):
        for b in getattr(path, "breakpoints", ()):
            if 0.0 < b < T:
                breaks.add(float(b))
    for t in snapshot_times:
        if 0.0 < t < T:
            breaks.add(float(t))
    return sorted(breaks)


def _resolve_snapshots(config: SolverConfig, T: float):
    if config.snapshot_times is None:
        times = [0.0, T]
    else:
        times = sorted(float(t) for t in config.snapshot_times)
        if any(t < 0.0 or t > T + 1e-12 for t in times):
            raise OutOfRange("snapshot times must lie in [0, T]")
        if not times or times[0] > 0.0:
            times.insert(0, 0.0)
        if abs(times[-1] - T) > 1e-12:
            times.append(T)
        else:
            times[-1] = T
    return times


def _config_dict(config: SolverConfig):
    d = dataclasses.asdict(config)
    d["grid"] = config.grid.n
    if d.get("snapshot_times") is not None:
        d["snapshot_times"] = list(d["snapshot_times"])
    return d


def solve(
    triple: Triple,
    config: SolverConfig,
    checkpoint_dir=None,
    checkpoint_every: int = 0,
) -> SolutionTrajectory:
    """Integrate the controlled Euler system over [0, horizon].

    Returns snapshots at config.snapshot_times (always including 0 and the
    horizon).  Raises CflViolation if the adaptive step underflows min_dt and
    Divergence if the evolved velocity exceeds blowup_factor times the data
    scale.  If checkpoint_dir is given, every checkpoint_every-th step dumps
    the current velocity and vorticity in the binary field format plus a JSON
    manifest at the end.
    """
    grid = config.grid
    if triple.grid.n != grid.n:
        raise ValueError("triple and config grids disagree")
    T = triple.horizon
    z, f = triple.z, triple.f
    substitution = config.z_mode == "substitution"

    if substitution:
        w0 = triple.u0 if z.is_zero else triple.u0 + z.eval(0.0)
        g_paths = [f] if z.is_zero else [f, z.derivative()]
    else:
        w0 = triple.u0
        g_paths = [f]

    if config.method == "spectral":
        engine = _SpectralEngine(config, w0)
    else:
        if not substitution:
            raise ValueError("z_mode='direct' requires the spectral method")
        engine = _SemiLagrangianEngine(config, w0)

    c0 = lambda field: field.c0_norm()
    scale = w0.c0_norm() + sum(p.l1_norm(c0, 0.0, T) for p in g_paths if not p.is_zero)
    blowup_cap = config.blowup_factor * max(scale, 1e-12)

    snapshot_times = _resolve_snapshots(config, T)
    snap_set = set(snapshot_times)
    breaks = _collect_breaks(triple, snapshot_times)

    log = {k: [] for k in ("t", "dt", "umax", "energy", "enstrophy", "max_div")}
    checkpoints = []
    snapshots = {}

    def emit_snapshot(t):
        u, _omega = engine.snapshot()
        if substitution and not z.is_zero:
            u = u - z.eval(t)
        snapshots[t] = (u, curl2d(u))

    def emit_checkpoint(step_idx, t):
        u, omega = engine.snapshot()
        u_path = os.path.join(checkpoint_dir, f"chk_{step_idx:06d}_u.fld")
        w_path = os.path.join(checkpoint_dir, f"chk_{step_idx:06d}_omega.fld")
        save_field(u, u_path)
        save_field(omega, w_path)
        checkpoints.append({"step": step_idx, "t": t, "u": u_path, "omega": w_path})

    emit_snapshot(0.0)
    if checkpoint_dir is not None and checkpoint_every > 0:
        os.makedirs(checkpoint_dir, exist_ok=True)
        emit_checkpoint(0, 0.0)

    h = grid.h
    tiny = 1e-14 * max(1.0, T)
    step_idx = 0
    for a, b in zip(breaks, breaks[1:]):
        force_sampler = _StageSampler(g_paths, a, b)
        z_sampler = (
            _StageSampler([z], a, b)
            if (not substitution and not z.is_zero)
            else None
        )
        t = a
        while b - t > tiny:
            cur = engine.c0_norm()
            if not math.isfinite(cur) or cur > blowup_cap:
                raise Divergence(
                    f"velocity C0 norm {cur:.3e} exceeded the blow-up guard "
                    f"{blowup_cap:.3e} at t={t:.6f}"
                )
            umax = engine.umax()
            dt = min(config.dt_max, config.cfl * h / max(umax, 1e-300))
            if dt < config.min_dt:
                raise CflViolation(
                    f"adaptive step {dt:.3e} fell below min_dt={config.min_dt:.0e} "
                    f"at t={t:.6f} (max speed {umax:.3e})"
                )
            remaining = b - t
            if dt >= remaining - tiny:
                dt = remaining
                t_next = b
            elif remaining - dt < 0.25 * dt:
                # split the tail evenly instead of leaving a sliver step
                dt = 0.5 * remaining
                t_next = t + dt
            else:
                t_next = t + dt
            engine.step(t, dt, force_sampler, z_sampler)
            step_idx += 1
            umax_new, en, ens, div = engine.diagnostics()
            log["t"].append(t_next)
            log["dt"].append(dt)
            log["umax"].append(umax_new)
            log["energy"].append(en)
            log["enstrophy"].append(ens)
            log["max_div"].append(div)
            if (
                checkpoint_dir is not None
                and checkpoint_every > 0
                and step_idx % checkpoint_every == 0
            ):
                emit_checkpoint(step_idx, t_next)
            t = t_next
        if b in snap_set:
            emit_snapshot(b)

    step_log = {k: np.asarray(v) for k, v in log.items()}
    times = sorted(snapshots)
    fields = [snapshots[t][0] for t in times]
    omegas = [snapshots[t][1] for t in times]
    traj = SolutionTrajectory(times, fields, omegas, step_log=step_log, config=config)

    if checkpoint_dir is not None and checkpoint_every > 0:
        manifest = {
            "config": _config_dict(config),
            "horizon": T,
            "time_mesh": step_log["t"].tolist(),
            "norms": {
                "umax": step_log["umax"].tolist(),
                "energy": step_log["energy"].tolist(),
                "enstrophy": step_log["enstrophy"].tolist(),
                "max_div": step_log["max_div"].tolist(),
            },
            "checkpoints": checkpoints,
        }
        with open(os.path.join(checkpoint_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)
    return traj


def resolving_endpoint(
    u0: VectorField2D, f_total: FieldPath, T: float, config: SolverConfig = None
) -> VectorField2D:
    """Endpoint u(T) of the standard Euler system (no drift) forced by
    f_total; T=0 returns the initial state unchanged."""
    if T < 0:
        raise OutOfRange("T must be non-negative")
    if T == 0:
        return u0
    if config is None:
        config = SolverConfig(grid=u0.grid)
    triple = Triple(u0, ZeroPath(u0.grid), f_total, T)
    return solve(triple, config).final_u


# ---------------------------------------------------------------------------
# flow maps, pressure, conserved quantities


def flow_map(
    traj: SolutionTrajectory,
    t0: float,
    t1: float,
    substeps: int = None,
    order: int = 3,
    upsample: int = 4,
) -> FlowMap:
    """Back-trace characteristics of the trajectory's velocity from time t1
    to time t0 <= t1 with an explicit midpoint rule; spatial evaluation uses
    periodic cubic interpolation on spectrally upsampled snapshots."""
    lo, hi = traj.times[0], traj.times[-1]
    if not (lo - 1e-12 <= t0 <= t1 <= hi + 1e-12):
        raise OutOfRange(f"need {lo} <= t0 <= t1 <= {hi}, got ({t0}, {t1})")
    grid = traj.grid
    n = grid.n
    x1, x2 = grid.coords()
    if t1 - t0 < 1e-14:
        zeros = np.zeros((n, n))
        return FlowMap(grid, t0, t1, zeros, zeros.copy())

    vmax = max(u.c0_norm() for u in traj.fields)
    if substeps is None:
        ds_target = min(0.01, 0.25 * grid.h / max(vmax, 1e-12))
        substeps = max(1, int(math.ceil((t1 - t0) / ds_target)))
    ds = (t1 - t0) / substeps
    hf = grid.h / upsample

    fine_cache = {}

    def fine(idx):
        hit = fine_cache.get(idx)
        if hit is None:
            u = traj.fields[idx]
            hit = (
                spectral_upsample(u.u1.values, upsample),
                spectral_upsample(u.u2.values, upsample),
            )
            fine_cache[idx] = hit
        return hit

    times = traj.times

    def velocity_fine(s):
        s = min(max(s, lo), hi)
        k = max(min(bisect_right(times, s) - 1, len(times) - 2), 0)
        ta, tb = times[k], times[k + 1]
        theta = (s - ta) / (tb - ta)
        a1, a2 = fine(k)
        b1, b2 = fine(k + 1)
        if theta == 0.0:
            return a1, a2
        return (1 - theta) * a1 + theta * b1, (1 - theta) * a2 + theta * b2

    p1 = x1.copy()
    p2 = x2.copy()
    s = t1
    for _ in range(substeps):
        v1, v2 = velocity_fine(s)
        k1 = gather_interp(v1, p1 / hf, p2 / hf, order)
        k2 = gather_interp(v2, p1 / hf, p2 / hf, order)
        m1, m2 = velocity_fine(s - 0.5 * ds)
        q1 = (p1 - 0.5 * ds * k1) / hf
        q2 = (p2 - 0.5 * ds * k2) / hf
        p1 = p1 - ds * gather_interp(m1, q1, q2, order)
        p2 = p2 - ds * gather_interp(m2, q1, q2, order)
        s -= ds
    return FlowMap(grid, t0, t1, p1 - x1, p2 - x2)


def recover_pressure(
    u: VectorField2D, z: VectorField2D = None, f: VectorField2D = None
) -> ScalarField2D:
    """Zero-mean pressure solving Laplace(p) = div(f - <(u+z), grad>(u+z))."""
    grid = u.grid
    if z is not None:
        w1 = u.u1.values + z.u1.values
        w2 = u.u2.values + z.u2.values
        w = grid.vector(w1, w2)
    else:
        w = u
    d1w1 = w.u1.deriv(1, 0).values
    d2w1 = w.u1.deriv(0, 1).values
    d1w2 = w.u2.deriv(1, 0).values
    d2w2 = w.u2.deriv(0, 1).values
    a1 = w.u1.values * d1w1 + w.u2.values * d2w1
    a2 = w.u1.values * d1w2 + w.u2.values * d2w2
    if f is not None:
        a1 = f.u1.values - a1
        a2 = f.u2.values - a2
    else:
        a1 = -a1
        a2 = -a2
    rhs = divergence(grid.vector(a1, a2))
    return inv_laplacian(rhs)


def conserved_quantities(traj: SolutionTrajectory):
    """Energy and enstrophy series over the snapshot times: E = half the
    mean square speed times the torus area, Z likewise for vorticity."""
    if not traj.times:
        raise ValueError("empty trajectory")
    pairs = [_energy_enstrophy(u, w) for u, w in zip(traj.fields, traj.omegas)]
    times = np.asarray(traj.times)
    energy = np.array([p[0] for p in pairs])
    enstrophy = np.array([p[1] for p in pairs])
    return times, energy, enstrophy
