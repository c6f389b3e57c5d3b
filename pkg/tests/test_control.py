"""Control spaces, piecewise-constant controls, primitives, ball samplers,
and the endpoint map."""

import numpy as np
import pytest

from eulerlab import (
    ControlPath,
    DegenerateBasis,
    PrimitivePath,
    SolverConfig,
    TorusGrid,
    ZeroPath,
    composite_norm,
    control_from_csv,
    control_from_json,
    control_to_csv,
    control_to_json,
    endpoint_map,
    holder_norm,
    leray_project,
    make_control_space,
    primitive,
    relaxation_norm,
    sample_Bm,
)
from eulerlab.control import ball_draws, finish_ball_draw

GRID = TorusGrid(32)
SPACE = make_control_space(grid=GRID)


def c0(field) -> float:
    return field.c0_norm()


class TestControlSpace:
    def test_single_wave_vector_closed_form(self):
        sp = make_control_space(((1, 0),), GRID)
        assert sp.dim == 2
        x1, _ = GRID.coords()
        # grad_perp(cos x1) = (0, -sin x1), grad_perp(sin x1) = (0, cos x1)
        assert np.allclose(sp.basis[0].u1.values, 0.0)
        assert np.allclose(sp.basis[0].u2.values, -np.sin(x1), atol=1e-12)
        assert np.allclose(sp.basis[1].u1.values, 0.0)
        assert np.allclose(sp.basis[1].u2.values, np.cos(x1), atol=1e-12)

    def test_default_space(self):
        assert SPACE.dim == 6
        assert SPACE.wave_vectors == ((1, 0), (0, 1), (1, 1))
        for e in SPACE.basis:
            assert e.is_divergence_free()
        assert np.linalg.det(SPACE.gram) > 1e-12
        assert np.allclose(SPACE.gram, SPACE.gram.T)

    def test_duplicates_rejected(self):
        with pytest.raises(DegenerateBasis):
            make_control_space(((1, 0), (1, 0)), GRID)
        # k and -k span the same plane and count as duplicates
        with pytest.raises(DegenerateBasis):
            make_control_space(((1, 0), (-1, 0)), GRID)
        with pytest.raises(ValueError):
            make_control_space(((0, 0),), GRID)

    def test_projection_fixes_basis(self):
        for e in SPACE.basis:
            proj = leray_project(e)
            assert (proj - e).c0_norm() < 1e-10

    def test_field_from_coeffs(self):
        coeffs = np.zeros(6)
        coeffs[0] = 2.0
        f = SPACE.field_from_coeffs(coeffs)
        assert (f - SPACE.basis[0] * 2.0).c0_norm() < 1e-14
        with pytest.raises(ValueError):
            SPACE.field_from_coeffs(np.zeros(5))

    def test_immutable(self):
        with pytest.raises(AttributeError):
            SPACE.dim = 7


def unit_coeffs(k: int, value: float = 1.0):
    c = np.zeros(SPACE.dim)
    c[k] = value
    return c


class TestControlPath:
    def test_validation(self):
        with pytest.raises(ValueError):
            ControlPath(SPACE, (0.0, 0.0, 1.0), np.zeros((2, 6)))
        with pytest.raises(ValueError):
            ControlPath(SPACE, (0.0, 1.0), np.zeros((2, 6)))

    def test_eval_segments(self):
        eta = ControlPath(SPACE, (0.0, 0.5, 1.0),
                          [unit_coeffs(0, 1.0), unit_coeffs(0, -2.0)])
        assert (eta.eval(0.25) - SPACE.basis[0]).c0_norm() < 1e-14
        assert (eta.eval(0.75) - SPACE.basis[0] * (-2.0)).c0_norm() < 1e-14
        assert (eta.eval(0.5, left=True) - SPACE.basis[0]).c0_norm() < 1e-14

    def test_l1_norm_exact(self):
        eta = ControlPath(SPACE, (0.0, 0.5, 1.0),
                          [unit_coeffs(0, 1.0), unit_coeffs(0, -2.0)])
        # basis[0] has C0 norm 1, so the L1 norm is 0.5*1 + 0.5*2
        assert eta.l1_norm(c0, 0.0, 1.0) == pytest.approx(1.5, rel=1e-12)

    def test_add_same_times(self):
        a = ControlPath(SPACE, (0.0, 1.0), [unit_coeffs(0)])
        b = ControlPath(SPACE, (0.0, 1.0), [unit_coeffs(1, 2.0)])
        s = a + b
        assert np.allclose(s.coeffs, [[1.0, 2.0, 0, 0, 0, 0]])

    def test_add_merges_breakpoints(self):
        a = ControlPath(SPACE, (0.0, 0.5, 1.0), [unit_coeffs(0), unit_coeffs(0)])
        b = ControlPath(SPACE, (0.0, 0.25, 1.0), [unit_coeffs(1), unit_coeffs(2)])
        s = a + b
        assert s.times == (0.0, 0.25, 0.5, 1.0)
        assert np.allclose(s.coeffs[0], unit_coeffs(0) + unit_coeffs(1))
        assert np.allclose(s.coeffs[1], unit_coeffs(0) + unit_coeffs(2))
        assert np.allclose(s.coeffs[2], unit_coeffs(0) + unit_coeffs(2))

    def test_scalar_multiply(self):
        a = ControlPath(SPACE, (0.0, 1.0), [unit_coeffs(0)])
        assert np.allclose((3.0 * a).coeffs, 3.0 * a.coeffs)


class TestPrimitive:
    def test_constant_control(self):
        eta = ControlPath(SPACE, (0.0, 1.0), [unit_coeffs(0)])
        z = primitive(eta)
        assert np.allclose(z.coeff_at(0.0), 0.0)
        assert np.allclose(z.coeff_at(0.4), unit_coeffs(0, 0.4))
        assert np.allclose(z.coeff_at(1.0), unit_coeffs(0, 1.0))
        assert (z.eval(1.0) - SPACE.basis[0]).c0_norm() < 1e-14

    def test_telescoping(self):
        eta = ControlPath(SPACE, (0.0, 0.5, 1.0),
                          [unit_coeffs(0, 1.0), unit_coeffs(0, -1.0)])
        z = primitive(eta)
        assert np.allclose(z.coeff_at(1.0), 0.0)
        assert np.allclose(z.coeff_at(0.5), unit_coeffs(0, 0.5))

    def test_zero_control(self):
        eta = ControlPath(SPACE, (0.0, 1.0), [np.zeros(6)])
        z = primitive(eta)
        assert z.eval(0.7).c0_norm() == 0.0

    def test_derivative_returns_source(self):
        eta = ControlPath(SPACE, (0.0, 0.3, 1.0),
                          [unit_coeffs(2, 1.5), unit_coeffs(4, -0.5)])
        z = primitive(eta)
        assert z.derivative() is eta

    def test_linearity_exact(self):
        rng = np.random.default_rng(1)
        times = (0.0, 0.25, 0.5, 1.0)
        e1 = ControlPath(SPACE, times, rng.standard_normal((3, 6)))
        e2 = ControlPath(SPACE, times, rng.standard_normal((3, 6)))
        lhs = primitive(2.0 * e1 + (-3.0) * e2)
        rhs = primitive(e1) * 2.0 + primitive(e2) * (-3.0)
        # linear to rounding (the integration itself is interval-exact)
        assert np.allclose(lhs.node_coeffs, rhs.node_coeffs, atol=1e-13)

    def test_primitive_must_vanish_at_start(self):
        with pytest.raises(ValueError):
            PrimitivePath(SPACE, (0.0, 1.0), np.ones((2, 6)))

    def test_arithmetic_keeps_source(self):
        eta = ControlPath(SPACE, (0.0, 1.0), [unit_coeffs(0)])
        z = primitive(eta)
        scaled = z * 2.0
        d = scaled.derivative()
        assert np.allclose(d.coeffs, 2.0 * eta.coeffs)
        summed = z + z
        assert np.allclose(summed.derivative().coeffs, 2.0 * eta.coeffs)


class TestRelaxationNorm:
    def test_constant_control(self):
        eta = ControlPath(SPACE, (0.0, 1.0), [unit_coeffs(0)])
        assert relaxation_norm(eta) == pytest.approx(1.0, rel=1e-12)

    def test_cancelling_control(self):
        eta = ControlPath(SPACE, (0.0, 0.5, 1.0),
                          [unit_coeffs(0, 1.0), unit_coeffs(0, -1.0)])
        assert relaxation_norm(eta) == pytest.approx(0.5, rel=1e-12)

    def test_homogeneity(self):
        rng = np.random.default_rng(3)
        eta = ControlPath(SPACE, (0.0, 0.3, 0.7, 1.0),
                          rng.standard_normal((3, 6)))
        base = relaxation_norm(eta)
        assert relaxation_norm(eta * 2.5) == pytest.approx(2.5 * base, rel=1e-12)

    def test_bounded_by_l1(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            eta = ControlPath(SPACE, (0.0, 0.2, 0.6, 1.0),
                              rng.standard_normal((3, 6)))
            assert relaxation_norm(eta) <= eta.l1_norm(c0, 0.0, 1.0) + 1e-12


class TestCompositeNorm:
    def test_matches_parts(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal(6)
        eta = ControlPath(SPACE, (0.0, 0.5, 1.0), rng.standard_normal((2, 6)))
        z = primitive(eta)
        hn = lambda f: holder_norm(f, 2.5)
        expect = (hn(SPACE.field_from_coeffs(y))
                  + eta.l1_norm(hn, 0.0, 1.0)
                  + z.w11_norm(hn, 0.0, 1.0))
        assert composite_norm(SPACE, y, eta) == pytest.approx(expect, rel=1e-12)

    def test_homogeneous(self):
        rng = np.random.default_rng(6)
        y = rng.standard_normal(6)
        eta = ControlPath(SPACE, (0.0, 1.0), rng.standard_normal((1, 6)))
        base = composite_norm(SPACE, y, eta)
        assert composite_norm(SPACE, 2.0 * y, eta * 2.0) == pytest.approx(
            2.0 * base, rel=1e-12)


class TestSampleBm:
    def test_norm_within_radius(self):
        samples = sample_Bm(SPACE, 1.5, 6, seed=42, L_intervals=4)
        assert len(samples) == 6
        for y, eta in samples:
            norm = composite_norm(SPACE, y, eta)
            assert norm <= 1.5 * (1 + 1e-9)
            assert norm > 0.0

    def test_deterministic(self):
        a = sample_Bm(SPACE, 1.0, 3, seed=9, L_intervals=4)
        b = sample_Bm(SPACE, 1.0, 3, seed=9, L_intervals=4)
        for (ya, ea), (yb, eb) in zip(a, b):
            assert np.array_equal(ya, yb)
            assert np.array_equal(ea.coeffs, eb.coeffs)
        c = sample_Bm(SPACE, 1.0, 3, seed=10, L_intervals=4)
        assert not np.array_equal(a[0][1].coeffs, c[0][1].coeffs)

    def test_zero_radius(self):
        for y, eta in sample_Bm(SPACE, 0.0, 2, seed=1, L_intervals=4):
            assert np.array_equal(y, np.zeros(6))
            assert not eta.coeffs.any()

    def test_breakpoint_mesh(self):
        (y, eta), = sample_Bm(SPACE, 1.0, 1, seed=2, L_intervals=8, T=2.0)
        assert eta.times == tuple(2.0 * k / 8 for k in range(9))

    def test_split_matches_combined(self):
        # ball_draws + finish_ball_draw is exactly the sample_Bm pipeline
        times = tuple(k / 4 for k in range(5))
        draws = ball_draws(SPACE, 1.0, 2, seed=11, L_intervals=4)
        direct = sample_Bm(SPACE, 1.0, 2, seed=11, L_intervals=4)
        for (vec, radius), (y, eta) in zip(draws, direct):
            y2, eta2 = finish_ball_draw(SPACE, times, vec, radius)
            assert np.array_equal(y, y2)
            assert np.array_equal(eta.coeffs, eta2.coeffs)

    def test_validation(self):
        with pytest.raises(ValueError):
            ball_draws(SPACE, -1.0, 1, seed=0)
        with pytest.raises(ValueError):
            ball_draws(SPACE, 1.0, 0, seed=0)


class TestEndpointMap:
    def test_steady_zero_control(self):
        _, x2 = GRID.coords()
        u0 = GRID.vector(np.sin(x2), np.zeros((32, 32)))
        zero_z = primitive(ControlPath(SPACE, (0.0, 1.0), [np.zeros(6)]))
        out = endpoint_map(SPACE, np.zeros(6), zero_z, u0,
                           config=SolverConfig(grid=GRID))
        assert (out - u0).c0_norm() < 1e-12

    def test_y_shift_with_zero_drift(self):
        _, x2 = GRID.coords()
        u0 = GRID.vector(np.sin(x2), np.zeros((32, 32)))
        zero_z = primitive(ControlPath(SPACE, (0.0, 1.0), [np.zeros(6)]))
        y = unit_coeffs(3, 0.7)
        out = endpoint_map(SPACE, y, zero_z, u0, config=SolverConfig(grid=GRID))
        expect = SPACE.field_from_coeffs(y) + u0
        assert (out - expect).c0_norm() < 1e-12


class TestSerialization:
    def _eta(self):
        rng = np.random.default_rng(8)
        return ControlPath(SPACE, (0.0, 0.25, 0.75, 1.0),
                           rng.standard_normal((3, 6)))

    def test_csv_round_trip(self, tmp_path):
        eta = self._eta()
        p = tmp_path / "eta.csv"
        control_to_csv(eta, p)
        back = control_from_csv(SPACE, p)
        assert back.times == eta.times
        assert np.allclose(back.coeffs, eta.coeffs, atol=1e-12)
        header = p.read_text().split("\n")[0]
        assert header == "interval,t_start,t_end,c_1,c_2,c_3,c_4,c_5,c_6"

    def test_json_round_trip(self, tmp_path):
        eta = self._eta()
        p = tmp_path / "eta.json"
        control_to_json(eta, p)
        back = control_from_json(p)  # self-describing: rebuilds the space
        assert back.space.wave_vectors == SPACE.wave_vectors
        assert back.space.grid.n == 32
        assert np.allclose(back.coeffs, eta.coeffs, atol=1e-15)

    def test_json_with_explicit_space(self, tmp_path):
        eta = self._eta()
        p = tmp_path / "eta.json"
        control_to_json(eta, p)
        back = control_from_json(p, SPACE)
        assert back.space is SPACE
