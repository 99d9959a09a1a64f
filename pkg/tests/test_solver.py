"""Duhamel operators, Picard iteration, reference integrator, field dumps."""

import numpy as np
import pytest

from rnlab.cutoffs import CutoffSpec, free_evolution_data
from rnlab.grid import FrequencyGrid, SpaceTimeField, time_slices
from rnlab.norms import spatial_hs_norm, zsb_norm
from rnlab.solver import (
    DivergenceError,
    SolverParams,
    continuous_dependence,
    dump_field,
    duhamel_n1,
    duhamel_n2,
    duhamel_n3,
    duhamel_rhs,
    duhamel_time_integral,
    load_field,
    nonlinear_fourier_data,
    picard_solve,
    reference_integrate,
    rough_initial_data,
)


@pytest.fixture
def duhamel_grid():
    # generous window so the cutoff-transform tails stay below the tolerances
    return FrequencyGrid(2, 2, 240.0, 0.25)


def smooth_pair(grid, seed, decay=2.0):
    rng = np.random.default_rng(seed)
    ns = grid.box_index
    mk = lambda: (rng.standard_normal(len(ns)) + 1j * rng.standard_normal(len(ns))) \
        * (1.0 + FrequencyGrid.norm_sq(ns).astype(float)) ** -decay
    u = free_evolution_data(grid, (ns, mk()), prune=False)
    v = free_evolution_data(grid, (ns, mk()), prune=False)
    return u, v


class TestSolverParams:
    def test_regularity_floor(self):
        with pytest.raises(ValueError, match="-2/3"):
            SolverParams(s=-0.7, T=0.1)

    def test_time_scale(self):
        with pytest.raises(ValueError, match="1/4"):
            SolverParams(s=-0.6, T=0.3)


class TestDuhamelOperators:
    def test_zero_inputs(self, duhamel_grid):
        cut = CutoffSpec(T=0.125)
        z = SpaceTimeField.zero(duhamel_grid)
        for op in (duhamel_n1, duhamel_n2, duhamel_n3):
            assert op(z, z, cut).max_abs() == 0.0

    def test_n1_output_columns_single_mode(self, duhamel_grid):
        # conjugates add frequencies negatively: u = v at n0 -> column -2 n0
        cut = CutoffSpec(T=0.125)
        ns = np.array([[1, 0]])
        u = free_evolution_data(duhamel_grid, (ns, np.array([1.0 + 0j])))
        out = duhamel_n1(u, u, cut).pruned(1e-14)
        assert out.index.tolist() == [[-2, 0]]

    def test_n2_n3_vanish_on_low_modulation_product(self, duhamel_grid):
        # a product supported where |sigma| <= 1 is annihilated by 1 - psi
        cut = CutoffSpec(T=0.125)
        prof = np.zeros(duhamel_grid.n_tau, complex)
        j0 = duhamel_grid.tau_index(-2.0)
        j1 = duhamel_grid.tau_index(-1.0)  # sigma = tau + 2 in [0, 1]
        prof[j0:j1 + 1] = 1.0
        fhat = SpaceTimeField.from_columns(duhamel_grid, [[1, 1]], [prof])
        z = SpaceTimeField.zero(duhamel_grid)
        assert duhamel_n2(z, z, cut, fhat).max_abs() == 0.0
        assert duhamel_n3(z, z, cut, fhat).max_abs() == 0.0

    def test_n3_multiplier_values(self, duhamel_grid):
        cut = CutoffSpec(T=0.125)
        prof = np.zeros(duhamel_grid.n_tau, complex)
        j = duhamel_grid.tau_index(3.0)  # sigma = 3 + 2 = 5 on column (1,1)
        prof[j] = 2.0
        fhat = SpaceTimeField.from_columns(duhamel_grid, [[1, 1]], [prof])
        z = SpaceTimeField.zero(duhamel_grid)
        out = duhamel_n3(z, z, cut, fhat)
        # -i * F * (1 - psi(5)) / (i 5) = -F / 5 since psi(5) = 0
        assert out.column([1, 1])[j] == pytest.approx(-2.0 / 5.0, rel=1e-12)

    def test_series_handles_zero_modulation(self, duhamel_grid):
        # data exactly on the paraboloid: sigma = 0 must stay finite
        cut = CutoffSpec(T=0.125)
        prof = np.zeros(duhamel_grid.n_tau, complex)
        prof[duhamel_grid.tau_index(-1.0)] = 1.0  # sigma = 0 at n = (1, 0)
        fhat = SpaceTimeField.from_columns(duhamel_grid, [[1, 0]], [prof])
        z = SpaceTimeField.zero(duhamel_grid)
        out = duhamel_n1(z, z, cut, fhat)
        assert np.isfinite(out.data).all()
        assert out.max_abs() > 0.0

    def test_duhamel_identity_against_quadrature(self, duhamel_grid):
        # N1+N2+N3 synthesized in time equals the adaptive-quadrature Duhamel
        # integral of the same product data, on [-T, T]
        cut = CutoffSpec(T=0.125)
        u, v = smooth_pair(duhamel_grid, seed=42)
        fhat = nonlinear_fourier_data(u, v, cut)
        total = (duhamel_n1(u, v, cut, fhat) + duhamel_n2(u, v, cut, fhat)
                 + duhamel_n3(u, v, cut, fhat))
        times = np.linspace(-cut.T, cut.T, 7)
        lhs = time_slices(total, times)
        rhs = duhamel_time_integral(fhat, times)
        assert np.abs(lhs - rhs).max() <= 1e-6 * np.abs(rhs).max()


class TestPicard:
    def test_zero_data_fixed_at_zero(self, duhamel_grid):
        params = SolverParams(s=-0.6, T=0.125, max_iterations=3, ball_radius=1.0)
        ns = duhamel_grid.box_index
        trace = picard_solve((ns, np.zeros(len(ns), complex)), params, duhamel_grid)
        assert trace.converged
        assert all(z == 0.0 for z in trace.z_norms)

    def test_contraction_on_rough_data(self):
        grid = FrequencyGrid.for_box(1, 8, 0.25)
        u0 = rough_initial_data(grid, -0.6, seed=7)
        params = SolverParams(s=-0.6, T=0.0625, max_iterations=8,
                              contraction_tolerance=1e-12)
        trace = picard_solve(u0, params, grid)
        ratios = trace.contraction_ratios()
        assert len(ratios) >= 5
        assert all(r < 1.0 for r in ratios)

    def test_fixed_point_residual(self):
        grid = FrequencyGrid.for_box(1, 8, 0.25)
        u0 = rough_initial_data(grid, -0.6, seed=7)
        params = SolverParams(s=-0.6, T=0.0625, max_iterations=25,
                              contraction_tolerance=1e-9)
        trace = picard_solve(u0, params, grid)
        assert trace.converged
        # converged iterate satisfies || u - Gamma[u] || <= tolerance
        cut = CutoffSpec(T=params.T)
        linear = free_evolution_data(grid, u0, prune=False)
        u = trace.iterates[-1]
        resid = zsb_norm(linear + duhamel_rhs(u, u, cut) - u, params.norm_params())
        assert resid <= params.contraction_tolerance

    def test_uniqueness_under_perturbed_initialization(self):
        grid = FrequencyGrid.for_box(1, 8, 0.25)
        u0 = rough_initial_data(grid, -0.6, seed=3)
        params = SolverParams(s=-0.6, T=0.0625, max_iterations=30,
                              contraction_tolerance=1e-10)
        t1 = picard_solve(u0, params, grid)
        linear = free_evolution_data(grid, u0, prune=False)
        rng = np.random.default_rng(5)
        bump = SpaceTimeField(grid, linear.index.copy(),
                              0.05 * (rng.standard_normal(linear.data.shape)
                                      + 1j * rng.standard_normal(linear.data.shape))
                              * np.exp(-np.abs(linear.mod_array()) / 4.0))
        t2 = picard_solve(u0, params, grid, initial=linear + bump)
        assert t1.converged and t2.converged
        from rnlab.norms import ct_hs_norm
        gap = ct_hs_norm(t1.iterates[-1] - t2.iterates[-1], params.s,
                         (-params.T, params.T))
        assert gap <= 10.0 * params.contraction_tolerance

    def test_time_restriction_consistency(self):
        # the T-solve restricted to [-T/2, T/2] matches the T/2-solve there;
        # the two canonical extensions differ outside the common interval, so
        # agreement is limited by the window tail of the cutoff transforms
        # (measured ~3e-4 at pad 8, ~3e-6 at pad 100), not by the contraction
        # tolerance
        grid = FrequencyGrid.for_box(1, 8, 0.25, tau_pad=100.0)
        u0 = rough_initial_data(grid, -0.6, seed=13)
        tol = 1e-9
        big = picard_solve(u0, SolverParams(s=-0.6, T=0.125, max_iterations=30,
                                            contraction_tolerance=tol), grid)
        small = picard_solve(u0, SolverParams(s=-0.6, T=0.0625, max_iterations=30,
                                              contraction_tolerance=tol), grid)
        assert big.converged and small.converged
        times = np.linspace(-0.0625, 0.0625, 9)
        a = time_slices(big.iterates[-1], times)
        b = time_slices(small.iterates[-1], times)
        w = (1.0 + big.iterates[-1].norm_sq_columns().astype(float)) ** -0.6
        gap = np.sqrt((w[:, None] * np.abs(a - b) ** 2).sum(axis=0)).max()
        scale = np.sqrt((w[:, None] * np.abs(a) ** 2).sum(axis=0)).max()
        assert gap <= 1e-4 * scale

    def test_divergence_raises_with_trace(self):
        grid = FrequencyGrid.for_box(1, 8, 0.25)
        ns, vals = rough_initial_data(grid, -0.6, seed=1)
        params = SolverParams(s=-0.6, T=0.25, max_iterations=25,
                              contraction_tolerance=1e-12, ball_radius=1.0)
        with pytest.raises(DivergenceError) as err:
            picard_solve((ns, 40.0 * vals), params, grid)
        assert len(err.value.trace.z_norms) >= 2

    def test_trace_json_schema(self):
        import json
        grid = FrequencyGrid.for_box(1, 4, 0.25)
        u0 = rough_initial_data(grid, -0.6, seed=2)
        trace = picard_solve(u0, SolverParams(s=-0.6, T=0.0625, max_iterations=3,
                                              contraction_tolerance=1e-12), grid)
        obj = json.loads(trace.to_json_text())
        assert set(obj) == {"z_norms", "successive_diffs", "contraction_ratios",
                            "converged", "iterations"}
        assert obj["iterations"] == len(obj["z_norms"])


class TestContinuousDependence:
    def test_identical_data(self):
        grid = FrequencyGrid.for_box(1, 8, 0.25)
        u0 = rough_initial_data(grid, -0.6, seed=9)
        params = SolverParams(s=-0.6, T=0.0625, max_iterations=6,
                              contraction_tolerance=1e-12)
        din, dout, q = continuous_dependence(u0, u0, params, grid)
        assert din == 0.0 and dout == 0.0

    def test_small_perturbation_quotient(self):
        grid = FrequencyGrid.for_box(1, 8, 0.25)
        ns, vals = rough_initial_data(grid, -0.6, seed=9)
        rng = np.random.default_rng(1)
        pert = rng.standard_normal(len(vals)) + 1j * rng.standard_normal(len(vals))
        pert *= 1e-3 / spatial_hs_norm(ns, pert, -0.6)
        params = SolverParams(s=-0.6, T=0.0625, max_iterations=8,
                              contraction_tolerance=1e-12)
        din, dout, q = continuous_dependence((ns, vals), (ns, vals + pert),
                                             params, grid)
        assert din == pytest.approx(1e-3, rel=1e-9)
        assert 0.2 < q < 5.0

    def test_quotient_stable_under_lattice_refinement(self):
        # grid-refinement consistency: the Lipschitz quotient stays bounded
        # as the spatial truncation doubles 8 -> 16 -> 32
        params = SolverParams(s=-0.6, T=0.0625, max_iterations=7,
                              contraction_tolerance=1e-12)
        quotients = []
        for n_max in (8, 16, 32):
            grid = FrequencyGrid.for_box(1, n_max, 0.25)
            ns, vals = rough_initial_data(grid, -0.6, seed=21)
            rng = np.random.default_rng(2)
            pert = rng.standard_normal(len(vals)) + 1j * rng.standard_normal(len(vals))
            pert *= 1e-3 / spatial_hs_norm(ns, pert, -0.6)
            _, _, q = continuous_dependence((ns, vals), (ns, vals + pert),
                                            params, grid)
            quotients.append(q)
        assert max(quotients) <= 3.0 * min(quotients)
        assert max(quotients) < 10.0


class TestReferenceIntegrator:
    def test_zero_data(self):
        grid = FrequencyGrid.for_box(1, 4, 0.25)
        ns = grid.box_index
        traj = reference_integrate((ns, np.zeros(len(ns), complex)), grid,
                                   T=0.1, steps=8)
        assert traj.reliable
        assert np.abs(traj.states).max() == 0.0

    def test_linear_flow_mass_conserved(self):
        grid = FrequencyGrid.for_box(1, 4, 0.25)
        rng = np.random.default_rng(4)
        ns = grid.box_index
        vals = rng.standard_normal(len(ns)) + 1j * rng.standard_normal(len(ns))
        traj = reference_integrate((ns, vals), grid, T=0.2, steps=16,
                                   include_nonlinearity=False)
        mass = np.linalg.norm(traj.states, axis=1)
        assert np.abs(mass - mass[0]).max() <= 1e-10 * mass[0]

    def test_first_picard_iterate_matches_reference(self):
        # single small mode: the first iterate agrees with the true solution
        # to O(a^3) + discretization, inside 1e-6 relative
        grid = FrequencyGrid(2, 2, 400.0, 0.25)
        a = 1e-3
        n0 = np.array([[1, 0]])
        params = SolverParams(s=0.0, T=0.125, max_iterations=1,
                              contraction_tolerance=1e-15)
        trace = picard_solve((n0, np.array([a + 0j])), params, grid)
        first = trace.iterates[1]
        traj = reference_integrate((n0, np.array([a + 0j])), grid,
                                   T=params.T, steps=24)
        assert traj.reliable
        sel = np.linspace(-params.T, params.T, 9)
        approx = time_slices(first, sel)
        box_rows = grid.flat_keys(first.index)
        idx = [int(np.argmin(np.abs(traj.times - t))) for t in sel]
        exact = traj.states[idx][:, box_rows].T
        err = np.abs(approx - exact).max()
        assert err <= 1e-6 * np.abs(exact).max()


class TestFieldDumps:
    def test_roundtrip(self, tmp_path):
        grid = FrequencyGrid.for_box(1, 4, 0.25)
        u0 = rough_initial_data(grid, -0.6, seed=2)
        u = free_evolution_data(grid, u0, prune=False)
        path = tmp_path / "field.bin"
        dump_field(u, path)
        back = load_field(path)
        assert back.grid == grid
        # payload is complex64, so round-trip is exact at single precision
        assert np.abs(back.data - u.data).max() <= 1e-6 * np.abs(u.data).max()
