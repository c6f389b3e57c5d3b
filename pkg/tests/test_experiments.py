"""Experiment pipelines: manifests, determinism across worker counts, and
the command-line interface."""

import dataclasses
import json
import os

import numpy as np
import pytest

from eulerlab import (
    EntropyGapConfig,
    QuantizerConfig,
    StabilityConfig,
    TorusGrid,
    ValidationConfig,
    config_from_dict,
    derived_seed,
    load_field,
    run_entropy_gap,
    run_quantizer,
    run_stability,
    run_validation,
)
from eulerlab.cli import main
from eulerlab.control import ControlPath, control_to_csv, make_control_space
from eulerlab.experiments import file_sha256, write_csv, write_manifest
from eulerlab.fields import sample_holder_ball
from eulerlab.plotting import plot_experiment

import oracles


TINY_STABILITY = dict(
    grid_n=32,
    dt_max=0.05,
    horizon=0.5,
    bases=2,
    scales=(1e-1, 3e-2),
    intervals=4,
    seed=71,
)

TINY_VALIDATION = dict(
    sandwich_trials=6,
    lipschitz_trials=6,
    max_points=8,
    seed=72,
    grid1d_m=256,
    grid2d_m=64,
    band2d=(1.55, 2.15),
    cloud_count=60,
    cloud_grid_n=16,
    cloud_seed=73,
    cloud_min_slope=0.1,
)

TINY_GAP = dict(
    grid_n=32,
    dt_max=0.05,
    horizon=0.5,
    count=24,
    intervals=4,
    window_ratio=12.0,
    window_points=11,
    required_gap=-10.0,
    seed_initial=74,
    seed_controls=75,
    seed_ball=76,
)


def manifest_of(out_dir) -> dict:
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return json.load(fh)


def check_output_hashes(out_dir, manifest):
    for entry in manifest["outputs"]:
        path = os.path.join(out_dir, entry["file"])
        assert os.path.exists(path)
        assert file_sha256(path) == entry["sha256"]


# ---------------------------------------------------------------------------
# shared infrastructure


class TestInfrastructure:
    def test_derived_seed_deterministic_and_distinct(self):
        assert derived_seed(5, 1, 2) == derived_seed(5, 1, 2)
        seen = {derived_seed(5, a, b) for a in range(4) for b in range(4)}
        assert len(seen) == 16
        assert derived_seed(5, 1) != derived_seed(6, 1)
        assert 0 <= derived_seed(5, 1) < 2**64

    def test_config_from_dict_round_trip(self):
        cfg = StabilityConfig(bases=3, scales=(0.1, 0.01), seed=9)
        data = json.loads(json.dumps(dataclasses.asdict(cfg)))
        assert config_from_dict(StabilityConfig, data) == cfg

    def test_config_from_dict_defaults_and_unknown_keys(self):
        cfg = config_from_dict(QuantizerConfig, {"mc_samples": 7})
        assert cfg.mc_samples == 7
        assert cfg.seed == QuantizerConfig().seed
        with pytest.raises(ValueError, match="unknown config keys"):
            config_from_dict(QuantizerConfig, {"mc_sample": 7})

    def test_write_csv_formatting_and_hash(self, tmp_path):
        path = tmp_path / "t.csv"
        digest = write_csv(
            path, ["a", "b", "c"], [(1, 0.123456789012345, True), (2, 0.5, False)]
        )
        assert digest == file_sha256(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "a,b,c"
        assert lines[1] == "1,0.123456789012,1"
        assert lines[2] == "2,0.5,0"

    def test_write_manifest_structure(self, tmp_path):
        cfg = QuantizerConfig(mc_samples=3)
        manifest = write_manifest(
            tmp_path, "quantizer", cfg, [{"file": "x.csv", "sha256": "0" * 64}],
            {"pass": True},
        )
        on_disk = manifest_of(tmp_path)
        assert on_disk["experiment"] == "quantizer"
        assert on_disk["config"]["mc_samples"] == 3
        assert on_disk["summary"] == {"pass": True}
        assert on_disk["outputs"][0]["file"] == "x.csv"
        assert set(on_disk["environment"]) == {"python", "numpy"}
        assert manifest["experiment"] == "quantizer"


# ---------------------------------------------------------------------------
# quantizer pipeline


class TestQuantizerRun:
    def test_default_run_passes_with_frozen_ratio_range(self, tmp_path):
        summary = run_quantizer(QuantizerConfig(), tmp_path)
        assert summary["pass"] is True
        assert all(c["violations"] == 0 for c in summary["cases"])
        lo, hi = summary["cardinality_ratio_range"]
        assert lo == pytest.approx(5.232325617580069, rel=1e-12)
        assert hi == pytest.approx(15.937598578367313, rel=1e-12)
        manifest = manifest_of(tmp_path)
        assert manifest["experiment"] == "quantizer"
        check_output_hashes(tmp_path, manifest)

    def test_case_rows_match_net_params(self, tmp_path):
        cfg = QuantizerConfig(mc_samples=20, ratio_points=6)
        run_quantizer(cfg, tmp_path)
        with open(tmp_path / "quantizer_cases.csv") as fh:
            rows = fh.read().splitlines()
        assert rows[0] == "R,eps,L,M,error_bound,max_error,samples,violations,ok"
        for row, (R, eps) in zip(rows[1:], cfg.cases):
            cells = row.split(",")
            L, M = oracles.quantizer_params_oracle(R, eps)
            assert (int(cells[2]), int(cells[3])) == (L, M)
            assert int(cells[6]) == 20
            assert cells[8] == "1"


# ---------------------------------------------------------------------------
# stability pipeline


class TestStabilityRun:
    def test_tiny_run_structure(self, tmp_path):
        cfg = config_from_dict(StabilityConfig, TINY_STABILITY)
        summary = run_stability(cfg, tmp_path)
        assert summary["pairs"] == cfg.bases * len(cfg.scales)
        assert set(summary["per_scale_max"]) == {"0.1", "0.03"}
        assert summary["max_ratio"] > 0.0
        manifest = manifest_of(tmp_path)
        assert manifest["experiment"] == "stability"
        assert manifest["config"]["bases"] == 2
        check_output_hashes(tmp_path, manifest)
        with open(tmp_path / "stability_pairs.csv") as fh:
            header = fh.readline().strip()
        assert header == "base,scale,numerator,denominator,ratio"

    def test_worker_count_does_not_change_outputs(self, tmp_path):
        base = config_from_dict(StabilityConfig, TINY_STABILITY)
        dir1 = tmp_path / "w1"
        dir2 = tmp_path / "w2"
        run_stability(dataclasses.replace(base, workers=1), dir1)
        run_stability(dataclasses.replace(base, workers=2), dir2)
        for name in ("stability_pairs.csv", "stability_scales.csv"):
            assert file_sha256(dir1 / name) == file_sha256(dir2 / name)


# ---------------------------------------------------------------------------
# entropy-gap pipeline


class TestEntropyGapRun:
    def test_tiny_run_structure(self, tmp_path):
        cfg = config_from_dict(EntropyGapConfig, TINY_GAP)
        summary = run_entropy_gap(cfg, tmp_path)
        # required_gap is disabled here; this checks plumbing, not the verdict
        assert summary["pass"] is True
        assert np.isfinite(summary["slope_attainable"])
        assert np.isfinite(summary["slope_holder"])
        assert summary["gap"] == pytest.approx(
            summary["slope_holder"] - summary["slope_attainable"], abs=1e-12
        )
        assert summary["window"][0] < summary["window"][1]
        manifest = manifest_of(tmp_path)
        assert manifest["experiment"] == "entropy-gap"
        check_output_hashes(tmp_path, manifest)
        report = (tmp_path / "report.txt").read_text()
        assert "property-based substitute" in report
        assert "slope gap" in report
        for name in ("curve_attainable.csv", "curve_holder.csv"):
            with open(tmp_path / name) as fh:
                assert fh.readline().strip() == (
                    "eps,packing,ln_inv_eps,ln_packing,ln_pack_2eps,in_fit"
                )


# ---------------------------------------------------------------------------
# validation pipeline


class TestValidationRun:
    def test_tiny_run_passes(self, tmp_path):
        cfg = config_from_dict(ValidationConfig, TINY_VALIDATION)
        summary = run_validation(cfg, tmp_path)
        assert summary["pass"] is True
        assert summary["sandwich_rows"] > 0
        assert summary["image_covering_rows"] > 0
        # frozen closed-form slopes for these grid sizes and windows
        assert summary["grid1d_slope"] == pytest.approx(0.958121, abs=1e-4)
        assert summary["grid2d_slope"] == pytest.approx(1.693904, abs=1e-4)
        assert summary["cloud_slope"] >= cfg.cloud_min_slope
        manifest = manifest_of(tmp_path)
        assert manifest["experiment"] == "validation"
        check_output_hashes(tmp_path, manifest)
        with open(tmp_path / "validation_summary.csv") as fh:
            rows = fh.read().splitlines()
        assert rows[0] == "check,value,bound_lo,bound_hi,ok"
        assert all(row.endswith(",1") for row in rows[1:])


# ---------------------------------------------------------------------------
# command-line interface


class TestCliSolve:
    def test_steady_shear_run(self, tmp_path):
        out = tmp_path / "run"
        code = main(
            [
                "solve",
                "--grid", "32",
                "--method", "spectral",
                "--t-final", "0.2",
                "--dt-max", "0.05",
                "--initial", "shear",
                "--out", str(out),
            ]
        )
        assert code == 0
        for name in (
            "endpoint_u.fld",
            "endpoint_u.csv",
            "steps.csv",
            "solve_manifest.json",
        ):
            assert (out / name).exists()
        grid = TorusGrid(32)
        _, x2 = grid.coords()
        end = load_field(out / "endpoint_u.fld")
        shear = grid.vector(np.sin(x2), np.zeros((32, 32)))
        assert (end - shear).c0_norm() < 1e-10
        with open(out / "solve_manifest.json") as fh:
            report = json.load(fh)
        assert report["grid"] == 32
        assert report["steps"] > 0
        assert report["max_divergence"] < 1e-10

    def test_control_file_and_checkpoints(self, tmp_path):
        grid = TorusGrid(32)
        space = make_control_space(grid=grid)
        rng = np.random.default_rng(20)
        eta = ControlPath(
            space, (0.0, 0.1, 0.2), rng.standard_normal((2, space.dim))
        )
        control_csv = tmp_path / "control.csv"
        control_to_csv(eta, control_csv)
        out = tmp_path / "run"
        ck = tmp_path / "ck"
        code = main(
            [
                "solve",
                "--grid", "32",
                "--method", "spectral",
                "--t-final", "0.2",
                "--dt-max", "0.02",
                "--initial", "zero",
                "--control-file", str(control_csv),
                "--checkpoint-dir", str(ck),
                "--checkpoint-every", "3",
                "--out", str(out),
            ]
        )
        assert code == 0
        with open(ck / "manifest.json") as fh:
            ck_manifest = json.load(fh)
        assert len(ck_manifest["checkpoints"]) >= 2
        first = ck_manifest["checkpoints"][0]
        assert first["step"] == 0
        load_field(first["u"])
        load_field(first["omega"])
        # forced run must move the endpoint away from zero
        end = load_field(out / "endpoint_u.fld")
        assert end.c0_norm() > 1e-6

    def test_snapshots_recorded(self, tmp_path):
        out = tmp_path / "run"
        code = main(
            [
                "solve",
                "--grid", "32",
                "--t-final", "0.2",
                "--dt-max", "0.05",
                "--initial", "zero",
                "--snapshots", "4",
                "--out", str(out),
            ]
        )
        assert code == 0
        with open(out / "solve_manifest.json") as fh:
            report = json.load(fh)
        assert report["snapshots"] == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])


class TestCliExperiments:
    def test_epsnet_set_overrides_and_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "q"
        code = main(
            [
                "e3-epsnet",
                "--set", "mc_samples=30",
                "--set", "ratio_points=6",
                "--out", str(out),
            ]
        )
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["pass"] is True
        manifest = manifest_of(out)
        assert manifest["config"]["mc_samples"] == 30
        assert manifest["config"]["ratio_points"] == 6

    def test_failing_property_exits_two(self, tmp_path, capsys):
        out = tmp_path / "q"
        code = main(
            [
                "e3-epsnet",
                "--set", "mc_samples=10",
                "--set", "ratio_bound=1.0",
                "--out", str(out),
            ]
        )
        assert code == 2
        summary = json.loads(capsys.readouterr().out)
        assert summary["pass"] is False

    def test_config_file_plus_set_precedence(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"mc_samples": 10, "ratio_points": 6}))
        out = tmp_path / "q"
        code = main(
            [
                "e3-epsnet",
                "--config", str(cfg_file),
                "--set", "mc_samples=25",
                "--out", str(out),
            ]
        )
        assert code == 0
        manifest = manifest_of(out)
        assert manifest["config"]["mc_samples"] == 25
        assert manifest["config"]["ratio_points"] == 6

    def test_xlab_seed_rederives_seeds(self, tmp_path, monkeypatch):
        monkeypatch.setenv("XLAB_SEED", "4321")
        out = tmp_path / "q"
        code = main(
            ["e3-epsnet", "--set", "mc_samples=10", "--out", str(out)]
        )
        assert code == 0
        manifest = manifest_of(out)
        seed_index = [
            f.name for f in dataclasses.fields(QuantizerConfig)
        ].index("seed")
        assert manifest["config"]["seed"] == derived_seed(4321, seed_index)
        assert manifest["config"]["seed"] != QuantizerConfig().seed

    def test_seed_flag_matches_env(self, tmp_path, monkeypatch):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        main(["e3-epsnet", "--set", "mc_samples=10", "--seed", "99",
              "--out", str(out_a)])
        monkeypatch.setenv("XLAB_SEED", "99")
        main(["e3-epsnet", "--set", "mc_samples=10", "--out", str(out_b)])
        assert (
            file_sha256(out_a / "quantizer_cases.csv")
            == file_sha256(out_b / "quantizer_cases.csv")
        )

    def test_unknown_config_key_exits_one(self, tmp_path, capsys):
        code = main(
            ["e3-epsnet", "--set", "bogus=1", "--out", str(tmp_path / "q")]
        )
        assert code == 1
        assert "unknown config keys" in capsys.readouterr().err

    def test_debug_flag_reraises(self, tmp_path):
        with pytest.raises(ValueError, match="unknown config keys"):
            main(
                ["--debug", "e3-epsnet", "--set", "bogus=1",
                 "--out", str(tmp_path / "q")]
            )

    def test_malformed_set_exits_one(self, tmp_path, capsys):
        code = main(["e3-epsnet", "--set", "novalue", "--out", str(tmp_path)])
        assert code == 1
        assert "KEY=VALUE" in capsys.readouterr().err


class TestCliPlot:
    def test_plot_quantizer_run(self, tmp_path, capsys):
        out = tmp_path / "q"
        main(
            ["e3-epsnet", "--set", "mc_samples=10", "--set", "ratio_points=6",
             "--out", str(out)]
        )
        capsys.readouterr()
        code = main(["plot", str(out)])
        assert code == 0
        printed = capsys.readouterr().out.strip()
        assert printed.endswith("cardinality.svg")
        assert (out / "cardinality.svg").exists()

    def test_plot_validation_and_stability(self, tmp_path):
        vdir = tmp_path / "v"
        run_validation(config_from_dict(ValidationConfig, TINY_VALIDATION), vdir)
        assert plot_experiment(vdir) == [str(vdir / "slopes.svg")]
        sdir = tmp_path / "s"
        run_stability(config_from_dict(StabilityConfig, TINY_STABILITY), sdir)
        assert plot_experiment(sdir) == [str(sdir / "stability.svg")]

    def test_plot_unknown_kind(self, tmp_path):
        with open(tmp_path / "manifest.json", "w") as fh:
            json.dump({"experiment": "nope"}, fh)
        with pytest.raises(ValueError, match="unknown experiment kind"):
            plot_experiment(tmp_path)
