import math

import numpy as np
import pytest

from fraclab import (BetaSweepConfig, CarlemanWeightParams, HolmgrenMap,
                     MultiTermSpec, SpaceTimeGrid, CompactBump, TimeGrid,
                     beta_sweep, carleman_lhs, carleman_rhs,
                     conjugated_operator, default_bump_family, identity_field,
                     pushforward_operator, sweep_rows_csv)

X = 0.1


def layer_grid(n_steps, n_nodes):
    return SpaceTimeGrid(bounds=((0.0, X),), shape=(n_nodes,),
                         time=TimeGrid.from_interval(1.0, n_steps))


def setup(alpha=0.5, m=1):
    orders = (alpha,) if m == 1 else (alpha, alpha / 2.0)
    weights = (1.0,) if m == 1 else (1.0, 0.5)
    spec = MultiTermSpec(orders=orders, weights=weights)
    hmap = HolmgrenMap(y_hat=np.zeros(1), c=1.0, X=X, T=1.0)
    frame = pushforward_operator(identity_field(1), hmap)
    weight = CarlemanWeightParams(X=X)
    return spec, frame, weight


def single_bump(grid):
    return CompactBump(centers=(X / 2.0,), halfwidths=(X / 3.0,),
                    t_span=grid.time.t_final)


class TestSides:
    def test_zero_function(self):
        spec, frame, weight = setup()
        grid = layer_grid(32, 33)
        v = np.zeros((33, 33))
        assert carleman_lhs(v, grid, 50.0, weight, spec.alpha) == 0.0
        assert carleman_rhs(v, grid, 50.0, weight, spec, frame) == 0.0

    def test_rhs_quadratic_scaling(self):
        spec, frame, weight = setup()
        grid = layer_grid(48, 49)
        v = single_bump(grid).values(grid.time.nodes, grid.mesh())
        r1 = carleman_rhs(v, grid, 50.0, weight, spec, frame)
        r2 = carleman_rhs(2.0 * v, grid, 50.0, weight, spec, frame)
        assert abs(r2 - 4.0 * r1) < 1e-10 * abs(r1)

    def test_lhs_against_dense_quadrature_oracle(self):
        # exact-derivative dense-grid evaluation vs the centered-difference
        # pipeline; agreement at 1e-6 needs a fine pipeline grid
        spec, frame, weight = setup()
        beta = 50.0
        grid = layer_grid(192, 8193)
        bump = single_bump(grid)
        mesh = grid.mesh()
        v = bump.values(grid.time.nodes, mesh)
        pipeline = carleman_lhs(v, grid, beta, weight, spec.alpha)

        fine = layer_grid(384, 4097)
        mesh_f = fine.mesh()
        v_f = bump.values(fine.time.nodes, mesh_f)
        grads = bump.space_gradient(fine.time.nodes, mesh_f)
        oracle = carleman_lhs(v_f, fine, beta, weight, spec.alpha,
                              gradient=grads)
        assert abs(pipeline - oracle) / oracle < 1e-6

    def test_weight_shift_cancels_in_ratio(self):
        spec, frame, weight = setup()
        grid = layer_grid(40, 41)
        v = single_bump(grid).values(grid.time.nodes, grid.mesh())
        beta = 50.0
        base = (carleman_lhs(v, grid, beta, weight, spec.alpha)
                / carleman_rhs(v, grid, beta, weight, spec, frame))
        shifted_weight = CarlemanWeightParams(X=X, psi_shift=0.005)
        shifted = (carleman_lhs(v, grid, beta, shifted_weight, spec.alpha)
                   / carleman_rhs(v, grid, beta, shifted_weight, spec, frame))
        assert abs(shifted - base) / base < 1e-12

    def test_quadrature_convergence(self):
        spec, frame, weight = setup()
        vals = []
        for n in (64, 128):
            grid = layer_grid(n, n + 1)
            v = single_bump(grid).values(grid.time.nodes, grid.mesh())
            lhs = carleman_lhs(v, grid, 100.0, weight, spec.alpha)
            rhs = carleman_rhs(v, grid, 100.0, weight, spec, frame)
            vals.append((lhs, rhs))
        assert abs(vals[1][0] - vals[0][0]) / vals[1][0] < 0.01
        assert abs(vals[1][1] - vals[0][1]) / vals[1][1] < 0.01

    def test_upper_branch_adds_time_block(self):
        _, frame, weight = setup()
        grid = layer_grid(40, 41)
        v = single_bump(grid).values(grid.time.nodes, grid.mesh())
        low = carleman_lhs(v, grid, 30.0, weight, alpha=0.5)
        high = carleman_lhs(v, grid, 30.0, weight, alpha=1.5)
        assert high > low

    def test_drift_block_is_small_perturbation(self):
        spec, frame, weight = setup()
        grid = layer_grid(48, 49)
        v = single_bump(grid).values(grid.time.nodes, grid.mesh())
        with_drift = conjugated_operator(v, grid, spec, frame,
                                         include_drift=True)
        without = conjugated_operator(v, grid, spec, frame,
                                      include_drift=False)
        delta = np.abs(with_drift - without).max()
        assert 0.0 < delta < 0.5 * np.abs(without).max()


class TestBumpShapes:
    def test_supported_inside(self):
        grid = layer_grid(32, 65)
        mesh = grid.mesh()
        for bump in default_bump_family(CarlemanWeightParams(X=X), grid):
            v = bump.values(grid.time.nodes, mesh)
            assert v[0].max() == 0.0              # vanishes at t = 0
            assert abs(v[:, 0]).max() == 0.0      # vanishes on the wall
            assert abs(v[:, -1]).max() == 0.0
            assert v.max() > 0.0

    def test_gradient_matches_finite_differences(self):
        grid = layer_grid(64, 257)
        mesh = grid.mesh()
        bump = single_bump(grid)
        v = bump.values(grid.time.nodes, mesh)
        g_exact = bump.space_gradient(grid.time.nodes, mesh)[..., 0]
        g_fd = np.gradient(v, grid.spacing[0], axis=1, edge_order=2)
        assert np.abs(g_exact - g_fd).max() < 2e-3 * np.abs(g_exact).max()

    def test_time_derivative_matches(self):
        grid = layer_grid(256, 33)
        mesh = grid.mesh()
        bump = single_bump(grid)
        v = bump.values(grid.time.nodes, mesh)
        d_exact = bump.time_derivative(grid.time.nodes, mesh)
        d_fd = np.gradient(v, grid.time.dt, axis=0, edge_order=2)
        assert np.abs(d_exact - d_fd).max() < 2e-3 * np.abs(d_exact).max()


class TestSweep:
    def test_config_validation(self):
        weight = CarlemanWeightParams(X=X)
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        with pytest.raises(ValueError):
            BetaSweepConfig(betas=(25.0, 50.0), weight=weight, spec=spec)
        with pytest.raises(ValueError):
            BetaSweepConfig(betas=(400.0, 25.0), weight=weight, spec=spec)

    def test_small_sweep_bounded(self):
        # thickness 0.3 puts the whole beta decade inside the concentration
        # regime where the ratio plateaus and then decays
        X_wide = 0.3
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        hmap = HolmgrenMap(y_hat=np.zeros(1), c=1.0, X=X_wide, T=1.0)
        frame = pushforward_operator(identity_field(1), hmap)
        weight = CarlemanWeightParams(X=X_wide)
        grid = SpaceTimeGrid(bounds=((0.0, X_wide),), shape=(81,),
                             time=TimeGrid.from_interval(1.0, 64))
        config = BetaSweepConfig(betas=(25.0, 50.0, 100.0, 200.0, 400.0),
                                 weight=weight, spec=spec)
        bumps = default_bump_family(weight, grid, count=2)
        result = beta_sweep(config, bumps, grid, frame)
        assert result.flagged == 0
        assert math.isfinite(result.max_ratio)
        assert result.max_ratio / result.min_ratio <= 100.0
        assert not result.top_half_monotone_growth()

    def test_discrete_kernel_element_is_flagged(self):
        # a boundary-forced homogeneous solution of the effective equation,
        # times e^{-t}, lies in the discrete kernel of the conjugated
        # operator (drift off); the sweep must flag such rows, not average
        # them into the certificate
        from fraclab import LowerOrderTerm, solve
        spec, frame, weight = setup()
        grid = layer_grid(32, 33)
        tilt = LowerOrderTerm(b=frame.tilt_drift, b0=None)
        result = solve(spec, frame.effective_field(), tilt,
                       lambda t, Y: np.zeros(Y.shape[:-1]), grid,
                       bc=lambda t, Yb: t**2 * np.ones(Yb.shape[0]),
                       check_residual=False)
        w = result.field.values * np.exp(-grid.time.nodes)[:, None]
        config = BetaSweepConfig(betas=(25.0, 250.0), weight=weight,
                                 spec=spec, include_drift=False)

        class Premade:
            def values(self, times, mesh):
                return w

        result = beta_sweep(config, [Premade()], grid, frame)
        assert result.flagged == len(result.rows)

    def test_two_dimensional_operator_application(self):
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        hmap = HolmgrenMap(y_hat=np.zeros(2), c=1.0, X=X, T=1.0)
        frame = pushforward_operator(identity_field(2), hmap)
        weight = CarlemanWeightParams(X=X)
        grid = SpaceTimeGrid(bounds=((-0.1, 0.1), (0.0, X)),
                             shape=(21, 21),
                             time=TimeGrid.from_interval(1.0, 24))
        config = BetaSweepConfig(betas=(25.0, 250.0), weight=weight,
                                 spec=spec)
        bumps = default_bump_family(weight, grid, count=1)
        result = beta_sweep(config, bumps, grid, frame)
        assert result.flagged == 0
        assert all(math.isfinite(r.ratio) and r.ratio > 0.0
                   for r in result.rows)

    def test_zero_image_rows_flagged(self):
        spec, frame, weight = setup()
        grid = layer_grid(24, 25)
        config = BetaSweepConfig(betas=(25.0, 250.0), weight=weight, spec=spec)
        bumps = default_bump_family(weight, grid, count=1)
        result = beta_sweep(config, bumps, grid, frame,
                            operator=lambda v: np.zeros_like(v))
        assert result.flagged == len(result.rows)

    def test_csv_and_json(self, tmp_path):
        spec, frame, weight = setup()
        grid = layer_grid(32, 41)
        config = BetaSweepConfig(betas=(25.0, 250.0), weight=weight, spec=spec)
        result = beta_sweep(config, default_bump_family(weight, grid, count=1),
                            grid, frame)
        csv_path = tmp_path / "rows.csv"
        sweep_rows_csv(result, str(csv_path))
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "beta,lhs,rhs,ratio,test_id"
        assert len(lines) == 1 + len(result.rows)
        doc = result.to_json()
        assert "max_ratio" in doc
