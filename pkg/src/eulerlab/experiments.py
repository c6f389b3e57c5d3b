"""Reproducible experiment pipelines over the solver and entropy toolkits.

Four pipelines, each writing CSV outputs plus a JSON manifest into its own
directory:

  stability      endpoint drift over data-perturbation size across shrinking
                 perturbation scales, for pairs inside the unit data ball;
  entropy gap    packing-entropy slope of an attainable-endpoint cloud
                 against a Holder-ball cloud in the same metric at matched
                 scales;
  quantizer      membership and accuracy audit of the path quantizer plus
                 the growth curve of its net cardinality;
  validation     exact small-cloud packing/covering cross-checks, the
                 image-covering inequality on random Lipschitz pairs, and
                 slope recovery on configurations with known answers.

Every random object is seeded from explicit integers in the experiment
config.  A worker pool only changes the execution schedule, never a random
stream, so CSV outputs are byte-identical for any worker count.
"""

import csv
import dataclasses
import hashlib
import json
import math
import multiprocessing as mp
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .control import (
    ControlPath,
    ball_draws,
    endpoint_map,
    finish_ball_draw,
    make_control_space,
    primitive,
)
from .entropy import (
    MetricCloud,
    brute_force_covering,
    brute_force_packing,
    entropy_curve,
    entropy_curve_to_csv,
    greedy_packing,
    l1_distance,
    lipschitz_image_bound,
    sample_w11_ball,
    w11_net_params,
    w11_quantize,
)
from .fields import (
    TorusGrid,
    derivative_stack,
    dyadic_separations,
    holder_norm,
    sample_holder_ball,
)
from .solver import SolverConfig, Triple, solve, spectral_restrict


# ---------------------------------------------------------------------------
# shared infrastructure


def _noninteger(s: float) -> float:
    # integer orders are outside the discrete Holder-norm family
    return s + 1e-3 if float(s).is_integer() else s


def derived_seed(root: int, *key) -> int:
    """Stable 64-bit child seed for (root, key); keys name the purpose and
    item index so streams never collide across pipeline stages."""
    ss = np.random.SeedSequence(int(root), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _tupled(v):
    if isinstance(v, list):
        return tuple(_tupled(x) for x in v)
    return v


def config_from_dict(cls, data: dict):
    """Build a config dataclass from a JSON-style dict; unknown keys are an
    error so config typos fail loudly."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    return cls(**{k: _tupled(v) for k, v in data.items()})


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_csv(path, header, rows) -> str:
    """Write rows with %.12g floats; returns the file's sha256 hex digest."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return file_sha256(path)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, experiment: str, config, outputs, summary) -> dict:
    """Persist the run record: config echo, output hashes, summary verdicts.

    The manifest carries a timestamp; determinism guarantees apply to the CSV
    outputs, which the manifest identifies by content hash.
    """
    manifest = {
        "experiment": experiment,
        "config": dataclasses.asdict(config),
        "outputs": outputs,
        "summary": summary,
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return manifest


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def _fanout(worker, payloads, workers: int, initializer, initargs):
    """Order-preserving parallel map.  Results are collected in payload
    order and each payload's computation is seeded independently, so the
    worker count cannot affect any output value."""
    payloads = list(payloads)
    if workers <= 1 or len(payloads) <= 1:
        initializer(*initargs)
        return [worker(p) for p in payloads]
    methods = mp.get_all_start_methods()
    ctx = mp.get_context("fork" if "fork" in methods else "spawn")
    chunk = max(1, len(payloads) // (workers * 4))
    with ProcessPoolExecutor(
        max_workers=workers, mp_context=ctx, initializer=initializer,
        initargs=initargs,
    ) as pool:
        return list(pool.map(worker, payloads, chunksize=chunk))


def _metric_stack(u, factor: int) -> np.ndarray:
    """Derivative stack of u, optionally after spectral restriction to the
    coarser metric grid."""
    if factor > 1:
        coarse = TorusGrid(u.grid.n // factor)
        u = coarse.vector(
            spectral_restrict(u.u1.values, factor),
            spectral_restrict(u.u2.values, factor),
        )
    return derivative_stack(u)


# ---------------------------------------------------------------------------
# stability scan: endpoint drift over perturbation size


@dataclass(frozen=True)
class StabilityConfig:
    """Perturbation-ratio scan of the endpoint map near random base data.

    Bases are random (u0, z, f) triples rescaled to data norm base_norm;
    perturbations touch all three components with exact total size equal to
    the scale, so every (base, perturbed) pair stays in the unit data ball
    for scales up to 1 - base_norm."""

    grid_n: int = 64
    method: str = "spectral"
    dt_max: float = 0.02
    horizon: float = 1.0
    smoothness: float = 2.5
    bases: int = 40
    scales: tuple = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    base_norm: float = 0.8
    intervals: int = 8
    growth_tolerance: float = 0.2
    seed: int = 101
    workers: int = 1


_TAG_U0, _TAG_ETA, _TAG_F, _TAG_DU0, _TAG_DETA, _TAG_DF = range(6)

_STAB: dict = {}


def _stability_init(cfg_dict, base_endpoints):
    cfg = config_from_dict(StabilityConfig, cfg_dict)
    grid = TorusGrid(cfg.grid_n)
    _STAB.update(
        cfg=cfg,
        grid=grid,
        space=make_control_space(grid=grid),
        solver_cfg=SolverConfig(grid=grid, method=cfg.method, dt_max=cfg.dt_max),
        times=tuple(
            cfg.horizon * k / cfg.intervals for k in range(cfg.intervals + 1)
        ),
        base_endpoints=base_endpoints,
    )


def _stability_base(b: int) -> "Triple":
    cfg, space, times = _STAB["cfg"], _STAB["space"], _STAB["times"]
    s = cfg.smoothness
    u0 = sample_holder_ball(s, 1.0, derived_seed(cfg.seed, _TAG_U0, b), _STAB["grid"])
    rng_eta = np.random.default_rng(derived_seed(cfg.seed, _TAG_ETA, b))
    rng_f = np.random.default_rng(derived_seed(cfg.seed, _TAG_F, b))
    z = primitive(
        ControlPath(space, times, rng_eta.standard_normal((cfg.intervals, space.dim)))
    )
    f = ControlPath(space, times, rng_f.standard_normal((cfg.intervals, space.dim)))
    triple = Triple(u0, z, f, cfg.horizon)
    scale = cfg.base_norm / triple.data_norm(s)
    return Triple(u0 * scale, z * scale, f * scale, cfg.horizon)


def _stability_perturbation(b: int, si: int):
    """Perturbation with component sizes (0.4, 0.3, 0.3) * scale measured in
    the strong data norms, so the perturbed triple's data norm exceeds the
    base by at most the scale."""
    cfg, space, times = _STAB["cfg"], _STAB["space"], _STAB["times"]
    s, sigma, T = cfg.smoothness, cfg.scales[si], cfg.horizon
    hn = lambda g: holder_norm(g, s)
    du0 = sample_holder_ball(
        s, 0.4 * sigma, derived_seed(cfg.seed, _TAG_DU0, b, si), _STAB["grid"]
    )
    rng_de = np.random.default_rng(derived_seed(cfg.seed, _TAG_DETA, b, si))
    dz_raw = primitive(
        ControlPath(space, times, rng_de.standard_normal((cfg.intervals, space.dim)))
    )
    dz = dz_raw * (0.3 * sigma / dz_raw.w11_norm(hn, 0.0, T))
    rng_df = np.random.default_rng(derived_seed(cfg.seed, _TAG_DF, b, si))
    df_raw = ControlPath(
        space, times, rng_df.standard_normal((cfg.intervals, space.dim))
    )
    df = df_raw * (0.3 * sigma / df_raw.l1_norm(hn, 0.0, T))
    return du0, dz, df


def _stability_base_job(b: int) -> np.ndarray:
    end = solve(_stability_base(b), _STAB["solver_cfg"]).final_u
    return np.stack([end.u1.values, end.u2.values])


def _stability_pair_job(payload):
    b, si = payload
    cfg = _STAB["cfg"]
    s, weak, T = cfg.smoothness, cfg.smoothness - 1.0, cfg.horizon
    base = _stability_base(b)
    du0, dz, df = _stability_perturbation(b, si)
    pert = Triple(base.u0 + du0, base.z + dz, base.f + df, T)
    end = solve(pert, _STAB["solver_cfg"]).final_u
    ref = _STAB["base_endpoints"][b]
    numerator = holder_norm(end - _STAB["grid"].vector(ref[0], ref[1]), weak)
    denominator = (
        holder_norm(du0, weak)
        + dz.l1_norm(lambda g: holder_norm(g, s), 0.0, T)
        + df.l1_norm(lambda g: holder_norm(g, weak), 0.0, T)
    )
    return b, si, numerator, denominator


def run_stability(cfg: StabilityConfig, out_dir) -> dict:
    """Run the scan and write stability_pairs.csv / stability_scales.csv.

    Pass criterion: going from the largest scale down, the per-scale maximum
    ratio never exceeds the running maximum by more than growth_tolerance."""
    os.makedirs(out_dir, exist_ok=True)
    cfg_dict = dataclasses.asdict(cfg)
    ends = _fanout(
        _stability_base_job, range(cfg.bases), cfg.workers, _stability_init,
        (cfg_dict, None),
    )
    base_endpoints = np.stack(ends)
    jobs = [(b, si) for si in range(len(cfg.scales)) for b in range(cfg.bases)]
    results = _fanout(
        _stability_pair_job, jobs, cfg.workers, _stability_init,
        (cfg_dict, base_endpoints),
    )

    pair_rows = []
    per_scale = {si: [] for si in range(len(cfg.scales))}
    for b, si, num, den in results:
        ratio = num / den
        pair_rows.append((b, cfg.scales[si], num, den, ratio))
        per_scale[si].append(ratio)

    scale_rows = []
    running = None
    passed = True
    for si, sigma in enumerate(cfg.scales):
        ratios = np.asarray(per_scale[si])
        m = float(ratios.max())
        ok = running is None or m <= (1.0 + cfg.growth_tolerance) * running
        passed &= ok
        running = m if running is None else max(running, m)
        scale_rows.append((sigma, m, float(np.median(ratios)), int(ok)))

    outputs = [
        {
            "file": "stability_pairs.csv",
            "sha256": write_csv(
                os.path.join(out_dir, "stability_pairs.csv"),
                ["base", "scale", "numerator", "denominator", "ratio"],
                pair_rows,
            ),
        },
        {
            "file": "stability_scales.csv",
            "sha256": write_csv(
                os.path.join(out_dir, "stability_scales.csv"),
                ["scale", "max_ratio", "median_ratio", "no_growth"],
                scale_rows,
            ),
        },
    ]
    summary = {
        "pass": bool(passed),
        "pairs": len(pair_rows),
        "max_ratio": max(r[1] for r in scale_rows),
        "per_scale_max": {f"{s:g}": m for s, m, _, _ in scale_rows},
    }
    write_manifest(out_dir, "stability", cfg, outputs, summary)
    return summary


# ---------------------------------------------------------------------------
# entropy gap: attainable-endpoint cloud against a Holder-ball cloud


@dataclass(frozen=True)
class EntropyGapConfig:
    """Slope comparison of two equal-count clouds in one metric.

    The attainable cloud consists of endpoint-map images of uniform samples
    from the composite-norm control ball; the reference cloud samples the
    Holder ball of order smoothness + gamma.  Both clouds are measured in
    the discrete order-(1 + gamma) metric on the restricted grid, each
    normalized by its own median pairwise distance, over one shared relative
    eps window."""

    grid_n: int = 64
    metric_factor: int = 2
    method: str = "spectral"
    dt_max: float = 0.02
    horizon: float = 1.0
    smoothness: float = 2.5
    gamma: float = 0.5
    initial_norm: float = 1.0
    ball_budget: float = 1.0
    count: int = 1000
    intervals: int = 16
    ball_radius: float = 1.0
    window_percentile: float = 99.0
    window_ratio: float = 10.0
    window_points: int = 14
    required_gap: float = 0.3
    seed_initial: int = 4242
    seed_controls: int = 777
    seed_ball: int = 5000
    workers: int = 1


_GAP: dict = {}


def _gap_init(cfg_dict, vecs, radii):
    cfg = config_from_dict(EntropyGapConfig, cfg_dict)
    grid = TorusGrid(cfg.grid_n)
    _GAP.update(
        cfg=cfg,
        grid=grid,
        space=make_control_space(grid=grid),
        u0=sample_holder_ball(
            cfg.smoothness, cfg.initial_norm, cfg.seed_initial, grid
        ),
        solver_cfg=SolverConfig(grid=grid, method=cfg.method, dt_max=cfg.dt_max),
        times=tuple(
            cfg.horizon * k / cfg.intervals for k in range(cfg.intervals + 1)
        ),
        vecs=vecs,
        radii=radii,
    )


def _gap_endpoint_job(i: int) -> np.ndarray:
    cfg = _GAP["cfg"]
    y, eta = finish_ball_draw(
        _GAP["space"], _GAP["times"], _GAP["vecs"][i], _GAP["radii"][i],
        s=cfg.smoothness,
    )
    w = endpoint_map(
        _GAP["space"], y, primitive(eta), _GAP["u0"], T=cfg.horizon,
        config=_GAP["solver_cfg"],
    )
    return _metric_stack(w, cfg.metric_factor)


def run_entropy_gap(cfg: EntropyGapConfig, out_dir) -> dict:
    """Run the comparison and write both entropy curves plus a report.

    Pass criterion: Holder-cloud slope minus attainable-cloud slope is at
    least required_gap over the shared relative window."""
    os.makedirs(out_dir, exist_ok=True)
    cfg_dict = dataclasses.asdict(cfg)
    grid = TorusGrid(cfg.grid_n)
    space = make_control_space(grid=grid)
    draws = ball_draws(
        space, cfg.ball_budget, cfg.count, cfg.seed_controls, cfg.intervals
    )
    vecs = np.stack([v for v, _ in draws])
    radii = np.array([r for _, r in draws])

    stacks_a = np.stack(
        _fanout(
            _gap_endpoint_job, range(cfg.count), cfg.workers, _gap_init,
            (cfg_dict, vecs, radii),
        )
    )
    ball_s = _noninteger(cfg.smoothness + cfg.gamma)
    stacks_h = np.stack(
        [
            _metric_stack(
                sample_holder_ball(ball_s, cfg.ball_radius, cfg.seed_ball + i, grid),
                cfg.metric_factor,
            )
            for i in range(cfg.count)
        ]
    )

    metric_n = cfg.grid_n // cfg.metric_factor
    h = TorusGrid(metric_n).h
    shifts = dyadic_separations(metric_n)
    cloud_a = MetricCloud.from_field_stacks(stacks_a, h, cfg.gamma, shifts)
    cloud_h = MetricCloud.from_field_stacks(stacks_h, h, cfg.gamma, shifts)

    iu = np.triu_indices(cfg.count, 1)
    da, dh = cloud_a.matrix[iu], cloud_h.matrix[iu]
    med_a, med_h = float(np.median(da)), float(np.median(dh))
    top = max(
        float(np.percentile(da / med_a, cfg.window_percentile)),
        float(np.percentile(dh / med_h, cfg.window_percentile)),
    )
    eps = np.geomspace(top, top / cfg.window_ratio, cfg.window_points)
    curve_a = entropy_curve(MetricCloud.from_matrix(cloud_a.matrix / med_a), eps)
    curve_h = entropy_curve(MetricCloud.from_matrix(cloud_h.matrix / med_h), eps)
    gap = curve_h.slope - curve_a.slope
    passed = gap >= cfg.required_gap

    entropy_curve_to_csv(curve_a, os.path.join(out_dir, "curve_attainable.csv"))
    entropy_curve_to_csv(curve_h, os.path.join(out_dir, "curve_holder.csv"))
    summary_rows = [
        ("attainable", cfg.count, med_a, curve_a.slope),
        ("holder_ball", cfg.count, med_h, curve_h.slope),
    ]
    outputs = [
        {"file": "curve_attainable.csv",
         "sha256": file_sha256(os.path.join(out_dir, "curve_attainable.csv"))},
        {"file": "curve_holder.csv",
         "sha256": file_sha256(os.path.join(out_dir, "curve_holder.csv"))},
        {
            "file": "gap_summary.csv",
            "sha256": write_csv(
                os.path.join(out_dir, "gap_summary.csv"),
                ["cloud", "count", "median_distance", "slope"],
                summary_rows,
            ),
        },
    ]

    report = [
        "entropy gap report",
        "==================",
        f"metric: discrete Holder order {1.0 + cfg.gamma:g} on the "
        f"{metric_n}x{metric_n} grid, each cloud normalized by its median "
        "pairwise distance",
        f"shared relative window: [{eps[-1]:.6g}, {eps[0]:.6g}] "
        f"({cfg.window_points} points, fitted without the edge points)",
        f"attainable cloud ({cfg.count} endpoint samples, control budget "
        f"{cfg.ball_budget:g}): slope {curve_a.slope:.4f}",
        f"Holder-ball cloud ({cfg.count} samples of order {ball_s:g}, radius "
        f"{cfg.ball_radius:g}): slope {curve_h.slope:.4f}",
        f"slope gap: {gap:.4f} (required: >= {cfg.required_gap:g}) -> "
        f"{'PASS' if passed else 'FAIL'}",
        "",
        "note: this compares packing-entropy growth of finite sample clouds",
        "at matched scales; it is a property-based substitute for the",
        "set-level entropy comparison, not a computation of it.",
    ]
    report_path = os.path.join(out_dir, "report.txt")
    with open(report_path, "w") as fh:
        fh.write("\n".join(report) + "\n")
    outputs.append({"file": "report.txt", "sha256": file_sha256(report_path)})

    summary = {
        "pass": bool(passed),
        "slope_attainable": float(curve_a.slope),
        "slope_holder": float(curve_h.slope),
        "gap": float(gap),
        "required_gap": cfg.required_gap,
        "window": [float(eps[-1]), float(eps[0])],
    }
    write_manifest(out_dir, "entropy-gap", cfg, outputs, summary)
    return summary


# ---------------------------------------------------------------------------
# quantizer audit


@dataclass(frozen=True)
class QuantizerConfig:
    """Monte Carlo audit of the path quantizer plus its cardinality curve.

    Each case (R, eps) draws mc_samples random paths in the ball, quantizes
    them, and checks net membership and the accuracy guarantee.  The
    cardinality curve records ln(net size) against the scaled entropy rate
    over [ratio_lo, ratio_hi]."""

    cases: tuple = ((1.0, 0.5), (1.0, 0.1), (2.0, 0.2))
    mc_samples: int = 1000
    nodes: int = 17
    seed: int = 303
    ratio_radius: float = 1.0
    ratio_lo: float = 0.01
    ratio_hi: float = 0.5
    ratio_points: int = 25
    ratio_bound: float = 17.0


def run_quantizer(cfg: QuantizerConfig, out_dir) -> dict:
    """Run the audit and write quantizer_cases.csv / cardinality.csv.

    Pass criterion: zero violations in every case and the cardinality ratio
    stays within (0, ratio_bound] across the whole eps range."""
    os.makedirs(out_dir, exist_ok=True)
    case_rows = []
    all_ok = True
    for ci, (R, eps) in enumerate(cfg.cases):
        params = w11_net_params(R, eps)
        samples = sample_w11_ball(R, cfg.mc_samples, derived_seed(cfg.seed, ci),
                                  nodes=cfg.nodes)
        step = 2.0 * R / params.M
        max_err = 0.0
        violations = 0
        for u in samples:
            q = w11_quantize(u, params)
            err = l1_distance(u, q)
            max_err = max(max_err, err)
            levels = q.levels / step
            member = (
                q.intervals == params.L
                and np.all(np.abs(levels - np.round(levels)) < 1e-9)
                and np.all(np.abs(np.round(levels)) <= params.M)
            )
            if err > params.error_bound * (1.0 + 1e-12) or not member:
                violations += 1
        ok = violations == 0 and max_err <= eps
        all_ok &= ok
        case_rows.append(
            (R, eps, params.L, params.M, params.error_bound, max_err,
             cfg.mc_samples, violations, int(ok))
        )

    card_rows = []
    ratio_min, ratio_max = math.inf, 0.0
    for eps in np.geomspace(cfg.ratio_hi, cfg.ratio_lo, cfg.ratio_points):
        params = w11_net_params(cfg.ratio_radius, float(eps))
        ln_card = params.L * math.log(2 * params.M + 1)
        rate = (1.0 / eps) * math.log(1.0 / eps)
        ratio = ln_card / rate
        ratio_min, ratio_max = min(ratio_min, ratio), max(ratio_max, ratio)
        card_rows.append((eps, params.L, params.M, ln_card, ratio))
    ratio_ok = 0.0 < ratio_min and ratio_max <= cfg.ratio_bound
    all_ok &= ratio_ok

    outputs = [
        {
            "file": "quantizer_cases.csv",
            "sha256": write_csv(
                os.path.join(out_dir, "quantizer_cases.csv"),
                ["R", "eps", "L", "M", "error_bound", "max_error", "samples",
                 "violations", "ok"],
                case_rows,
            ),
        },
        {
            "file": "cardinality.csv",
            "sha256": write_csv(
                os.path.join(out_dir, "cardinality.csv"),
                ["eps", "L", "M", "ln_cardinality", "ratio"],
                card_rows,
            ),
        },
    ]
    summary = {
        "pass": bool(all_ok),
        "cases": [
            {"R": r[0], "eps": r[1], "max_error": r[5], "violations": r[7]}
            for r in case_rows
        ],
        "cardinality_ratio_range": [float(ratio_min), float(ratio_max)],
        "ratio_bound": cfg.ratio_bound,
    }
    write_manifest(out_dir, "quantizer", cfg, outputs, summary)
    return summary


# ---------------------------------------------------------------------------
# toolkit validation


@dataclass(frozen=True)
class ValidationConfig:
    """Cross-checks with exactly known answers.

    Small random clouds validate the packing/covering sandwich against
    exhaustive counts; random linear maps validate the image-covering
    inequality; uniform grids and a Holder-ball cloud validate slope
    recovery."""

    sandwich_trials: int = 50
    lipschitz_trials: int = 50
    max_points: int = 12
    seed: int = 404
    grid1d_m: int = 1024
    grid1d_hi: float = 0.1
    grid1d_lo: float = 0.01
    grid1d_points: int = 12
    band1d: tuple = (0.85, 1.15)
    grid2d_m: int = 256
    grid2d_hi: float = 0.25
    grid2d_lo: float = 0.025
    grid2d_points: int = 14
    band2d: tuple = (1.85, 2.15)
    cloud_count: int = 2000
    cloud_grid_n: int = 32
    cloud_smoothness: float = 3.0
    cloud_gamma: float = 0.5
    cloud_radius: float = 1.0
    cloud_seed: int = 9000
    cloud_percentile: float = 85.0
    cloud_ratio: float = 20.0
    cloud_points: int = 14
    cloud_min_slope: float = 0.83


def _sandwich_trial(rng, max_points: int):
    n = int(rng.integers(4, max_points + 1))
    dim = int(rng.integers(2, 4))
    pts = rng.uniform(0.0, 1.0, (n, dim))
    cloud = MetricCloud.from_points(pts, metric="euclidean")
    dists = cloud.matrix[np.triu_indices(n, 1)]
    rows = []
    for q in (0.25, 0.5, 0.75):
        eps = float(np.quantile(dists, q))
        if eps <= 0.0:
            continue
        pack2 = brute_force_packing(cloud, 2.0 * eps)
        cover = brute_force_covering(cloud, eps)
        greedy, _ = greedy_packing(cloud, eps)
        pack1 = brute_force_packing(cloud, eps)
        ok = pack2 <= cover <= greedy <= pack1
        rows.append((n, dim, eps, pack2, cover, greedy, pack1, int(ok)))
    return rows


def _lipschitz_trial(rng, max_points: int):
    n = int(rng.integers(4, max_points + 1))
    dim_in = int(rng.integers(2, 4))
    dim_out = int(rng.integers(2, 4))
    pts = rng.uniform(0.0, 1.0, (n, dim_in))
    A = rng.standard_normal((dim_out, dim_in))
    L = float(np.linalg.norm(A, 2))
    source = MetricCloud.from_points(pts, metric="euclidean")
    image = MetricCloud.from_points(pts @ A.T, metric="euclidean")
    dists = image.matrix[np.triu_indices(n, 1)]
    positive = dists[dists > 0]
    if positive.size == 0:
        return [], True
    eps_grid = np.quantile(positive, [0.75, 0.5, 0.25])
    report = lipschitz_image_bound(source, image, L, eps_grid)
    rows = [
        (n, dim_in, dim_out, L, r["eps"], r["image_packing_2eps"],
         r["source_packing_eps_over_L"], int(r["ok"]))
        for r in report["rows"]
    ]
    return rows, report["ok"]


def run_validation(cfg: ValidationConfig, out_dir) -> dict:
    """Run all cross-checks; writes one CSV per check family plus a summary.

    Pass criterion: every sandwich and image-covering row holds, both grid
    slopes land in their bands, and the Holder-cloud slope clears its floor.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(derived_seed(cfg.seed, 0))
    sandwich_rows = []
    sandwich_ok = True
    for trial in range(cfg.sandwich_trials):
        for row in _sandwich_trial(rng, cfg.max_points):
            sandwich_rows.append((trial,) + row)
            sandwich_ok &= bool(row[-1])

    rng = np.random.default_rng(derived_seed(cfg.seed, 1))
    lipschitz_rows = []
    lipschitz_ok = True
    for trial in range(cfg.lipschitz_trials):
        rows, ok = _lipschitz_trial(rng, cfg.max_points)
        lipschitz_rows.extend((trial,) + r for r in rows)
        lipschitz_ok &= ok

    ax = np.linspace(0.0, 1.0, cfg.grid1d_m)
    curve_1d = entropy_curve(
        MetricCloud.from_points(ax, metric="sup"),
        np.geomspace(cfg.grid1d_hi, cfg.grid1d_lo, cfg.grid1d_points),
    )
    X, Y = np.meshgrid(
        np.linspace(0.0, 1.0, cfg.grid2d_m),
        np.linspace(0.0, 1.0, cfg.grid2d_m),
        indexing="ij",
    )
    curve_2d = entropy_curve(
        MetricCloud.from_points(
            np.stack([X.ravel(), Y.ravel()], axis=1), metric="sup",
            materialize=False,
        ),
        np.geomspace(cfg.grid2d_hi, cfg.grid2d_lo, cfg.grid2d_points),
    )

    grid = TorusGrid(cfg.cloud_grid_n)
    ball_s = _noninteger(cfg.cloud_smoothness)
    stacks = np.stack(
        [
            derivative_stack(
                sample_holder_ball(ball_s, cfg.cloud_radius, cfg.cloud_seed + i, grid)
            )
            for i in range(cfg.cloud_count)
        ]
    )
    cloud = MetricCloud.from_field_stacks(
        stacks, grid.h, cfg.cloud_gamma, dyadic_separations(cfg.cloud_grid_n)
    )
    dists = cloud.matrix[np.triu_indices(cfg.cloud_count, 1)]
    med = float(np.median(dists))
    top = float(np.percentile(dists / med, cfg.cloud_percentile))
    curve_cloud = entropy_curve(
        MetricCloud.from_matrix(cloud.matrix / med),
        np.geomspace(top, top / cfg.cloud_ratio, cfg.cloud_points),
    )

    ok_1d = cfg.band1d[0] <= curve_1d.slope <= cfg.band1d[1]
    ok_2d = cfg.band2d[0] <= curve_2d.slope <= cfg.band2d[1]
    ok_cloud = curve_cloud.slope >= cfg.cloud_min_slope
    passed = sandwich_ok and lipschitz_ok and ok_1d and ok_2d and ok_cloud

    entropy_curve_to_csv(curve_1d, os.path.join(out_dir, "grid1d.csv"))
    entropy_curve_to_csv(curve_2d, os.path.join(out_dir, "grid2d.csv"))
    entropy_curve_to_csv(curve_cloud, os.path.join(out_dir, "cloud.csv"))
    summary_rows = [
        ("sandwich", float(len(sandwich_rows)), 0.0, 0.0, int(sandwich_ok)),
        ("image_covering", float(len(lipschitz_rows)), 0.0, 0.0,
         int(lipschitz_ok)),
        ("grid1d_slope", curve_1d.slope, cfg.band1d[0], cfg.band1d[1], int(ok_1d)),
        ("grid2d_slope", curve_2d.slope, cfg.band2d[0], cfg.band2d[1], int(ok_2d)),
        ("cloud_slope", curve_cloud.slope, cfg.cloud_min_slope, math.inf,
         int(ok_cloud)),
    ]

    outputs = [
        {
            "file": "sandwich.csv",
            "sha256": write_csv(
                os.path.join(out_dir, "sandwich.csv"),
                ["trial", "points", "dim", "eps", "pack_2eps", "cover",
                 "greedy_pack", "pack_eps", "ok"],
                sandwich_rows,
            ),
        },
        {
            "file": "lipschitz.csv",
            "sha256": write_csv(
                os.path.join(out_dir, "lipschitz.csv"),
                ["trial", "points", "dim_in", "dim_out", "lipschitz_constant",
                 "eps", "image_pack_2eps", "source_pack_eps_over_L", "ok"],
                lipschitz_rows,
            ),
        },
        {
            "file": "validation_summary.csv",
            "sha256": write_csv(
                os.path.join(out_dir, "validation_summary.csv"),
                ["check", "value", "bound_lo", "bound_hi", "ok"],
                summary_rows,
            ),
        },
    ]
    for name in ("grid1d.csv", "grid2d.csv", "cloud.csv"):
        outputs.append(
            {"file": name, "sha256": file_sha256(os.path.join(out_dir, name))}
        )

    summary = {
        "pass": bool(passed),
        "sandwich_rows": len(sandwich_rows),
        "image_covering_rows": len(lipschitz_rows),
        "grid1d_slope": float(curve_1d.slope),
        "grid2d_slope": float(curve_2d.slope),
        "cloud_slope": float(curve_cloud.slope),
    }
    write_manifest(out_dir, "validation", cfg, outputs, summary)
    return summary
