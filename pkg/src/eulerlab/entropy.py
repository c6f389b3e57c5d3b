"""Metric-entropy machinery: packing counts on finite metric clouds, entropy
curves with slope fits, the constructive quantizer net for balls of
absolutely continuous scalar functions, and the Lipschitz-image covering
inequality.

Packing is the computational primitive: a greedy maximal eps-separated
subset is exact and brackets the covering entropy both ways,
ln P(2 eps) <= H_eps <= ln P(eps), while minimal covering is NP-hard.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFit, OutOfBall
from ._kernels import greedy_pack, holder_distance_matrix


# ---------------------------------------------------------------------------
# metric clouds


class MetricCloud:
    """Finite pseudo-metric space: either a cached N x N distance matrix or a
    row oracle returning all distances from one point (used when the matrix
    would not fit in memory)."""

    def __init__(self, size: int, matrix=None, row_oracle=None, labels=None):
        if (matrix is None) == (row_oracle is None):
            raise ValueError("provide exactly one of matrix, row_oracle")
        if matrix is not None:
            matrix = np.asarray(matrix, dtype=float)
            if matrix.shape != (size, size):
                raise ValueError(f"matrix shape {matrix.shape} != ({size}, {size})")
            if np.any(np.abs(np.diag(matrix)) > 1e-12):
                raise ValueError("distance matrix must have zero diagonal")
            if np.any(matrix < 0):
                raise ValueError("distances must be non-negative")
            if np.abs(matrix - matrix.T).max() > 1e-9 * max(matrix.max(), 1.0):
                raise ValueError("distance matrix must be symmetric")
            matrix = 0.5 * (matrix + matrix.T)
        self.size = size
        self.matrix = matrix
        self.row_oracle = row_oracle
        self.labels = labels

    def row(self, i: int):
        if self.matrix is not None:
            return self.matrix[i]
        return np.asarray(self.row_oracle(i), dtype=float)

    def diameter_bound(self, sample: int = 64, seed: int = 0) -> float:
        if self.matrix is not None:
            return float(self.matrix.max())
        rng = np.random.default_rng(seed)
        idx = rng.choice(self.size, size=min(sample, self.size), replace=False)
        return float(max(self.row(int(i)).max() for i in idx))

    def spot_check_triangle(self, trials: int = 200, seed: int = 0, tol: float = 1e-9):
        """Largest violation of d(i,k) <= d(i,j) + d(j,k) over random triples;
        raises ValueError beyond tol (scaled by the typical distance)."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        scale = 0.0
        for _ in range(trials):
            i, j, k = (int(v) for v in rng.integers(0, self.size, size=3))
            dij = float(self.row(i)[j])
            djk = float(self.row(j)[k])
            dik = float(self.row(i)[k])
            worst = max(worst, dik - dij - djk)
            scale = max(scale, dik)
        if worst > tol * max(scale, 1.0):
            raise ValueError(f"triangle inequality violated by {worst:.3e}")
        return worst

    @classmethod
    def from_matrix(cls, matrix, labels=None) -> "MetricCloud":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix.shape[0], matrix=matrix, labels=labels)

    @classmethod
    def from_points(
        cls, points, metric: str = "euclidean", materialize: bool = None, labels=None
    ) -> "MetricCloud":
        """Cloud over rows of an (N, d) array with the sup or Euclidean
        metric; large clouds stay oracle-backed."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        n = points.shape[0]
        if metric == "sup":
            row_fn = lambda i: np.abs(points - points[i]).max(axis=1)
        elif metric == "euclidean":
            row_fn = lambda i: np.sqrt(((points - points[i]) ** 2).sum(axis=1))
        else:
            raise ValueError("metric must be 'sup' or 'euclidean'")
        if materialize is None:
            materialize = n <= 4096
        if materialize:
            mat = np.stack([row_fn(i) for i in range(n)])
            return cls(n, matrix=mat, labels=labels)
        return cls(n, row_oracle=row_fn, labels=labels)

    @classmethod
    def from_field_stacks(cls, stacks, h: float, gamma: float, shifts, labels=None):
        """Cloud of vector fields in the discrete order-(1+gamma) Holder
        metric, from (N, 6, n, n) derivative stacks."""
        mat = holder_distance_matrix(stacks, h, gamma, shifts)
        return cls(mat.shape[0], matrix=mat, labels=labels)


def greedy_packing(cloud: MetricCloud, eps: float):
    """Size and member indices of the greedy first-index maximal
    eps-separated subset (pairwise distances strictly greater than eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if cloud.matrix is not None:
        idx = greedy_pack(cloud.matrix, eps)
        return len(idx), np.asarray(idx, dtype=np.int64)
    alive = np.ones(cloud.size, dtype=bool)
    reps = []
    while True:
        rest = np.flatnonzero(alive)
        if rest.size == 0:
            break
        i = int(rest[0])
        reps.append(i)
        alive &= cloud.row(i) > eps
    return len(reps), np.asarray(reps, dtype=np.int64)


_BRUTE_LIMIT = 16


def brute_force_packing(cloud: MetricCloud, eps: float) -> int:
    """Exact maximum size of an eps-separated subset, by enumerating all
    subsets; exponential, guarded to clouds of at most 16 points."""
    n = cloud.size
    if n > _BRUTE_LIMIT:
        raise ValueError(f"exact packing needs <= {_BRUTE_LIMIT} points")
    if eps <= 0:
        raise ValueError("eps must be positive")
    rows = [cloud.row(i) for i in range(n)]
    far = [sum(1 << j for j in range(n) if j != i and rows[i][j] > eps)
           for i in range(n)]
    best = 0
    for mask in range(1, 1 << n):
        if mask.bit_count() <= best:
            continue
        members = mask
        ok = True
        while members:
            i = (members & -members).bit_length() - 1
            members &= members - 1
            if members & ~far[i]:
                ok = False
                break
        if ok:
            best = mask.bit_count()
    return best


def brute_force_covering(cloud: MetricCloud, eps: float) -> int:
    """Exact minimum number of closed eps-balls centred at cloud points that
    cover the cloud; exponential, guarded to clouds of at most 16 points."""
    n = cloud.size
    if n > _BRUTE_LIMIT:
        raise ValueError(f"exact covering needs <= {_BRUTE_LIMIT} points")
    if eps <= 0:
        raise ValueError("eps must be positive")
    rows = [cloud.row(i) for i in range(n)]
    ball = [sum(1 << j for j in range(n) if rows[i][j] <= eps) | (1 << i)
            for i in range(n)]
    full = (1 << n) - 1
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            union = 0
            for i in combo:
                union |= ball[i]
            if union == full:
                return size
    return n


# ---------------------------------------------------------------------------
# entropy curves


@dataclass(frozen=True)
class EntropyCurve:
    """Packing counts over a descending eps grid with the covering-entropy
    sandwich ln P(2 eps) <= H_eps <= ln P(eps) and a least-squares slope of
    ln P(eps) against ln(1/eps) over the trimmed fit window."""

    eps: np.ndarray
    counts: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    slope: float
    intercept: float
    residual: float
    fit_mask: np.ndarray

    def as_rows(self):
        return [
            (
                float(e),
                int(p),
                float(np.log(1.0 / e)),
                float(np.log(p)),
                float(lo),
                float(up),
                bool(m),
            )
            for e, p, lo, up, m in zip(
                self.eps, self.counts, self.lower, self.upper, self.fit_mask
            )
        ]


def entropy_curve(
    cloud: MetricCloud, eps_grid, trim=(2, 2), min_fit_points: int = 5
) -> EntropyCurve:
    """Packing curve over a descending eps grid spanning at least a decade.

    The slope fit drops trim[0] points at the large-eps end and trim[1] at
    the small-eps end (finite clouds saturate at both); DegenerateFit if all
    counts coincide or fewer than min_fit_points remain.
    """
    eps = np.asarray([float(e) for e in eps_grid])
    if eps.size < 2 or np.any(np.diff(eps) >= 0):
        raise ValueError("eps grid must be strictly descending")
    if eps[0] / eps[-1] < 10.0 * (1.0 - 1e-9):
        raise ValueError("eps grid must span at least one decade")
    counts = np.empty(eps.size, dtype=np.int64)
    twice = np.empty(eps.size, dtype=np.int64)
    for i, e in enumerate(eps):
        counts[i], _ = greedy_packing(cloud, e)
        twice[i], _ = greedy_packing(cloud, 2.0 * e)
    if np.all(counts == counts[0]):
        raise DegenerateFit(f"all packing counts equal {counts[0]}; no slope")
    mask = np.zeros(eps.size, dtype=bool)
    lo, hi = trim
    mask[lo : eps.size - hi if hi else eps.size] = True
    if int(mask.sum()) < min_fit_points:
        raise DegenerateFit(
            f"only {int(mask.sum())} fit points after trimming; need {min_fit_points}"
        )
    x = np.log(1.0 / eps[mask])
    y = np.log(counts[mask].astype(float))
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([slope, intercept])
    residual = float(np.sqrt(np.mean((y - pred) ** 2)))
    return EntropyCurve(
        eps=eps,
        counts=counts,
        lower=np.log(twice.astype(float)),
        upper=np.log(counts.astype(float)),
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        fit_mask=mask,
    )


def entropy_curve_to_csv(curve: EntropyCurve, path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["eps", "packing", "ln_inv_eps", "ln_packing", "ln_pack_2eps", "in_fit"]
        )
        for e, p, lie, lp, lo, _up, m in curve.as_rows():
            writer.writerow(
                [f"{e:.12g}", p, f"{lie:.12g}", f"{lp:.12g}", f"{lo:.12g}", int(m)]
            )


# ---------------------------------------------------------------------------
# scalar functions on [0, 1]: the quantizer net


class PiecewiseLinear1D:
    """Continuous piecewise-linear function on [0, 1] given by nodal values
    at strictly increasing times starting at 0 and ending at 1."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.size != self.values.size or self.times.size < 2:
            raise ValueError("need matching times and values, at least two")
        if abs(self.times[0]) > 1e-12 or abs(self.times[-1] - 1.0) > 1e-12:
            raise ValueError("domain must be [0, 1]")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must strictly increase")

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def l1_norm(self) -> float:
        total = 0.0
        for k in range(self.times.size - 1):
            total += _segment_abs_integral(
                self.times[k], self.times[k + 1], self.values[k], self.values[k + 1]
            )
        return total

    def derivative_l1(self) -> float:
        return float(np.abs(np.diff(self.values)).sum())

    def w11_norm(self) -> float:
        return self.l1_norm() + self.derivative_l1()

    def scaled(self, c: float) -> "PiecewiseLinear1D":
        return PiecewiseLinear1D(self.times, c * self.values)


class StepFunction1D:
    """Right-open step function on [0, 1]: value levels[k] on
    [k/L, (k+1)/L)."""

    def __init__(self, levels):
        self.levels = np.asarray(levels, dtype=float)
        if self.levels.size < 1:
            raise ValueError("need at least one level")

    @property
    def intervals(self) -> int:
        return self.levels.size

    def __call__(self, t):
        L = self.levels.size
        idx = np.minimum((np.asarray(t, dtype=float) * L).astype(int), L - 1)
        return self.levels[idx]


def _segment_abs_integral(a, b, ga, gb) -> float:
    """Exact integral of |g| over [a, b] for g linear with endpoint values
    ga, gb (splits at the sign change)."""
    if ga * gb >= 0.0:
        return 0.5 * (abs(ga) + abs(gb)) * (b - a)
    return 0.5 * (ga * ga + gb * gb) / (abs(ga) + abs(gb)) * (b - a)


def l1_distance(u: PiecewiseLinear1D, f: StepFunction1D) -> float:
    """Exact L^1([0,1]) distance between a piecewise-linear function and a
    step function (integrated on the merged breakpoint mesh)."""
    L = f.intervals
    cuts = np.union1d(u.times, np.linspace(0.0, 1.0, L + 1))
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= 0:
            continue
        level = f.levels[min(int(a * L + 1e-12), L - 1)]
        total += _segment_abs_integral(a, b, u(a) - level, u(b) - level)
    return float(total)


@dataclass(frozen=True)
class W11NetParams:
    """Net parameters for quantizing the radius-R ball of absolutely
    continuous functions to accuracy eps in L^1: L intervals, levels
    2jR/M for j = -M..M, so the net has (2M+1)^L elements."""

    R: float
    eps: float
    L: int = field(init=False, default=0)
    M: int = field(init=False, default=0)

    def __post_init__(self):
        if self.R <= 0 or self.eps <= 0:
            raise ValueError("R and eps must be positive")
        L = int(math.floor(2.0 * self.R / self.eps)) + 1
        M = int(math.floor(4.0 * self.R * L / self.eps)) + 1
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "M", M)

    @property
    def cardinality(self) -> int:
        return (2 * self.M + 1) ** self.L

    @property
    def error_bound(self) -> float:
        return self.R / self.L + 2.0 * self.R * self.L / self.M


def w11_net_params(R: float, eps: float) -> W11NetParams:
    """L = floor(2R/eps)+1 intervals, M = floor(4RL/eps)+1 half-levels; the
    guaranteed quantization error R/L + 2RL/M never exceeds eps."""
    params = W11NetParams(R=float(R), eps=float(eps))
    if params.error_bound > params.eps * (1.0 + 1e-12):
        raise AssertionError(
            f"net parameter bound violated: {params.error_bound} > {params.eps}"
        )
    return params


def w11_quantize(u: PiecewiseLinear1D, params: W11NetParams) -> StepFunction1D:
    """Nearest-level step function: constant 2jR/M on [t_{k-1}, t_k) with j
    matched to u(t_{k-1}); the L^1 error is at most params.eps whenever u
    lies in the radius-R ball (re-measured here, OutOfBall otherwise)."""
    norm = u.w11_norm()
    if norm > params.R * (1.0 + 1e-9):
        raise OutOfBall(f"W^{{1,1}} norm {norm:.6f} exceeds radius {params.R}")
    L, M, R = params.L, params.M, params.R
    starts = np.arange(L) / L
    vals = u(starts)
    j = np.clip(np.round(vals * M / (2.0 * R)), -M, M)
    return StepFunction1D(2.0 * j * R / M)


def sample_w11_ball(R: float, count: int, seed: int, nodes: int = 17):
    """Deterministic piecewise-linear samples with w11_norm <= R: Gaussian
    nodal values rescaled to a uniform radius fraction."""
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, 1.0, nodes)
    out = []
    for _ in range(count):
        vals = rng.standard_normal(nodes)
        u = PiecewiseLinear1D(times, vals)
        norm = u.w11_norm()
        target = R * rng.uniform()
        out.append(u.scaled(target / norm if norm > 0 else 0.0))
    return out


# ---------------------------------------------------------------------------
# covering inequalities


def lipschitz_image_bound(
    cloud_source: MetricCloud, cloud_image: MetricCloud, L_lip: float, eps_grid
):
    """Check the image-covering inequality H_eps(f(K)) <= H_{eps/L}(K)
    through the packing sandwich: P_image(2 eps) <= P_source(eps / L_lip)
    at every eps.  Returns a report dict; 'ok' is False on any violation."""
    if cloud_source.size != cloud_image.size:
        raise ValueError("clouds must be index-aligned with equal cardinality")
    if L_lip <= 0:
        raise ValueError("L_lip must be positive")
    rows = []
    ok = True
    for e in eps_grid:
        p_img, _ = greedy_packing(cloud_image, 2.0 * float(e))
        p_src, _ = greedy_packing(cloud_source, float(e) / L_lip)
        good = p_img <= p_src
        ok = ok and good
        rows.append(
            {
                "eps": float(e),
                "image_packing_2eps": int(p_img),
                "source_packing_eps_over_L": int(p_src),
                "ok": bool(good),
            }
        )
    return {"L_lip": float(L_lip), "rows": rows, "ok": bool(ok)}


def finite_dim_ball_entropy(n_dim: int, R: float, eps: float) -> int:
    """Covering count ceil(R/eps)^n for the sup-norm cube of radius R, the
    standard finite-dimensional surrogate (exact up to norm constants)."""
    if n_dim < 1:
        raise ValueError("n_dim must be >= 1")
    return int(math.ceil(R / eps)) ** n_dim
