"""End-to-end acceptance checks.

One test per shipped guarantee, each printing a single pass/fail line with
the measured value and its tolerance (visible via the -rP report section or
with -s).  Heavy pipeline runs execute once in module-scoped fixtures and
feed the per-criterion assertions.
"""

import csv
import math
import time

import numpy as np
import pytest

from eulerlab import (
    EntropyGapConfig,
    QuantizerConfig,
    SolverConfig,
    StabilityConfig,
    TorusGrid,
    Triple,
    ValidationConfig,
    ZeroPath,
    conserved_quantities,
    endpoint_map,
    make_control_space,
    primitive,
    resolving_endpoint,
    run_entropy_gap,
    run_quantizer,
    run_stability,
    run_validation,
    sample_Bm,
    sample_holder_ball,
    solve,
)
from eulerlab.experiments import file_sha256
from eulerlab.paths import SmoothPath

import dataclasses


METHODS = ("semi_lagrangian", "spectral")


def verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


@pytest.fixture(scope="module")
def validation_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("validation")
    start = time.monotonic()
    summary = run_validation(ValidationConfig(), out)
    elapsed = time.monotonic() - start
    return summary, out, elapsed


class TestAcceptance:
    def test_c1_exact_solutions(self):
        start = time.monotonic()
        grid = TorusGrid(64)
        _, x2 = grid.coords()
        shear = grid.vector(np.sin(x2), np.zeros((64, 64)))
        zeros = grid.vector(np.zeros((64, 64)), np.zeros((64, 64)))
        worst = 0.0
        for method in METHODS:
            cfg = SolverConfig(grid=grid, method=method)
            traj = solve(Triple(shear, ZeroPath(grid), ZeroPath(grid), 1.0), cfg)
            worst = max(worst, (traj.final_u - shear).c0_norm())
            force = SmoothPath(
                lambda t: shear * math.cos(t),
                derivative_fn=lambda t: shear * (-math.sin(t)),
            )
            traj = solve(Triple(zeros, ZeroPath(grid), force, math.pi / 2), cfg)
            worst = max(worst, (traj.final_u - shear).c0_norm())
        elapsed = time.monotonic() - start
        ok = worst <= 1e-6 and elapsed < 30.0
        print(
            f"criterion 1: exact-solution endpoint error {worst:.3e} <= 1e-06 "
            f"in {elapsed:.1f}s (< 30s), both methods -> {verdict(ok)}"
        )
        assert worst <= 1e-6
        assert elapsed < 30.0

    def test_c2_conservation_128(self):
        grid = TorusGrid(128)
        u0 = sample_holder_ball(2.5, 1.0, 11, grid)
        worst = 0.0
        for method in METHODS:
            cfg = SolverConfig(grid=grid, method=method)
            traj = solve(Triple(u0, ZeroPath(grid), ZeroPath(grid), 1.0), cfg)
            _, energy, enstrophy = conserved_quantities(traj)
            worst = max(
                worst,
                abs(energy[-1] - energy[0]) / energy[0],
                abs(enstrophy[-1] - enstrophy[0]) / enstrophy[0],
            )
        ok = worst <= 1e-4
        print(
            f"criterion 2: unforced 128^2 energy/enstrophy drift {worst:.3e} "
            f"<= 1e-04, both methods -> {verdict(ok)}"
        )
        assert ok

    def test_c3_two_path_identity_128(self):
        grid = TorusGrid(128)
        space = make_control_space(grid=grid)
        u0 = sample_holder_ball(2.5, 0.8, 21, grid)
        samples = sample_Bm(space, 1.0, 20, seed=606, L_intervals=8)
        cfg_sl = SolverConfig(grid=grid, method="semi_lagrangian")
        cfg_sp = SolverConfig(grid=grid, method="spectral")
        worst = 0.0
        for _, eta in samples:
            z = primitive(eta)
            direct = resolving_endpoint(u0, eta, 1.0, cfg_sl)
            shifted = endpoint_map(
                space, z.coeff_at(1.0), z, u0, T=1.0, config=cfg_sp
            )
            worst = max(worst, (direct - shifted).c0_norm())
        ok = worst <= 1e-4
        print(
            f"criterion 3: two-path endpoint mismatch {worst:.3e} <= 1e-04 "
            f"over 20 controls at 128^2 -> {verdict(ok)}"
        )
        assert ok

    def test_c4_stability_scan_defaults(self, tmp_path):
        summary = run_stability(StabilityConfig(), tmp_path)
        ok = (
            summary["pass"]
            and summary["pairs"] == 200
            and summary["max_ratio"] == pytest.approx(0.6396704733593168, rel=1e-6)
        )
        print(
            f"criterion 4: stability scan max ratio "
            f"{summary['max_ratio']:.4f} with no growth across scales "
            f"{sorted(summary['per_scale_max'])} over {summary['pairs']} pairs "
            f"-> {verdict(ok)}"
        )
        assert summary["pass"] is True
        assert summary["pairs"] == 200
        assert summary["max_ratio"] == pytest.approx(0.6396704733593168, rel=1e-6)
        expected = {
            "0.1": 0.6157,
            "0.03": 0.5768,
            "0.01": 0.6226,
            "0.003": 0.6397,
            "0.001": 0.5761,
        }
        for key, value in expected.items():
            assert summary["per_scale_max"][key] == pytest.approx(value, abs=2e-4)

    def test_c5_quantizer_audit_defaults(self, tmp_path):
        summary = run_quantizer(QuantizerConfig(), tmp_path)
        lo, hi = summary["cardinality_ratio_range"]
        ok = (
            summary["pass"]
            and all(c["violations"] == 0 for c in summary["cases"])
            and hi <= 17.0
        )
        print(
            f"criterion 5: quantizer audit 0 violations across "
            f"{len(summary['cases'])} cases x 1000 samples, cardinality ratio "
            f"range [{lo:.3f}, {hi:.3f}] <= 17.0 -> {verdict(ok)}"
        )
        assert summary["pass"] is True
        assert all(c["violations"] == 0 for c in summary["cases"])
        assert lo == pytest.approx(5.232325617580069, rel=1e-9)
        assert hi == pytest.approx(15.937598578367313, rel=1e-9)

    def test_c6_packing_cross_checks(self, validation_run):
        summary, out, _ = validation_run
        with open(out / "validation_summary.csv") as fh:
            rows = {r["check"]: r for r in csv.DictReader(fh)}
        sandwich_ok = rows["sandwich"]["ok"] == "1"
        image_ok = rows["image_covering"]["ok"] == "1"
        ok = sandwich_ok and image_ok
        print(
            f"criterion 6: exhaustive packing/covering sandwich "
            f"({summary['sandwich_rows']} rows) and image-covering bound "
            f"({summary['image_covering_rows']} rows) all hold -> {verdict(ok)}"
        )
        assert sandwich_ok
        assert image_ok

    def test_c7_slope_recovery(self, validation_run):
        summary, _, elapsed = validation_run
        s1, s2, sc = (
            summary["grid1d_slope"],
            summary["grid2d_slope"],
            summary["cloud_slope"],
        )
        ok = (
            summary["pass"]
            and 0.85 <= s1 <= 1.15
            and 1.85 <= s2 <= 2.15
            and sc >= 0.83
            and elapsed < 600.0
        )
        print(
            f"criterion 7: recovered slopes 1-d {s1:.4f} in [0.85, 1.15], "
            f"2-d {s2:.4f} in [1.85, 2.15], field cloud {sc:.4f} >= 0.83 "
            f"in {elapsed:.0f}s (< 600s) -> {verdict(ok)}"
        )
        assert summary["pass"] is True
        assert s1 == pytest.approx(0.955633, abs=1e-4)
        assert s2 == pytest.approx(1.9139, abs=1e-3)
        assert sc == pytest.approx(1.8071, abs=1e-3)
        assert elapsed < 600.0

    def test_c8_entropy_gap_defaults(self, tmp_path):
        summary = run_entropy_gap(EntropyGapConfig(), tmp_path)
        ok = summary["pass"] and summary["gap"] >= 0.3
        print(
            f"criterion 8: entropy slope gap {summary['gap']:.4f} >= 0.3 "
            f"(attainable {summary['slope_attainable']:.4f}, Holder ball "
            f"{summary['slope_holder']:.4f}) -> {verdict(ok)}"
        )
        assert summary["pass"] is True
        assert summary["gap"] >= 0.3
        assert summary["slope_attainable"] == pytest.approx(
            3.1072138149525634, rel=1e-6
        )
        assert summary["slope_holder"] == pytest.approx(
            3.5900129556600837, rel=1e-6
        )
        report = (tmp_path / "report.txt").read_text()
        assert "property-based substitute" in report

    def test_c9_worker_invariance(self, tmp_path):
        cfg = StabilityConfig(
            grid_n=32,
            dt_max=0.05,
            horizon=0.5,
            bases=4,
            scales=(1e-1, 3e-2),
            intervals=4,
            seed=81,
        )
        run_stability(dataclasses.replace(cfg, workers=1), tmp_path / "w1")
        run_stability(dataclasses.replace(cfg, workers=8), tmp_path / "w8")
        names = ("stability_pairs.csv", "stability_scales.csv")
        same = all(
            file_sha256(tmp_path / "w1" / n) == file_sha256(tmp_path / "w8" / n)
            for n in names
        )
        print(
            f"criterion 9: stability CSVs byte-identical for 1 vs 8 workers "
            f"-> {verdict(same)}"
        )
        assert same
