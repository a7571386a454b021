import math

import numpy as np
import pytest

from mol.amfw_integrator import (AMFW_3_8, AMFW_HV, NO_CORRECTION, OPERATOR_EXTENSION, AMFWTableau,
                                 BoundaryCorrection, IntegrationError, ODESystem, StepContext, amfw_step,
                                 get_method, integrate, interpolant_correction, ode_errors, observed_ode_order,
                                 rosenbrock_step, step_count)
from mol.linalg_banded import SingularMatrixError
from mol.space_disc import PLAIN, DiagonalJacobian, SplitSystem
from mol.stability import dahlquist_amplification, eval_R
from mol.tensor_grid import GridField, grid_for_h
from problems.catalog import problem1
from problems.error_lib import global_error


def exponential_system():
    return ODESystem(lambda t, y: y, lambda t, y: np.ones_like(y))


def riccati_system():
    return ODESystem(lambda t, y: -y ** 2, lambda t, y: -2.0 * y)


class TestTableaux:
    @pytest.mark.parametrize('tableau', [AMFW_HV, AMFW_3_8])
    def test_derived_coefficients(self, tableau):
        assert np.allclose((np.eye(tableau.s) - tableau.L) @ tableau.rho, 1.0)
        assert np.allclose(tableau.c, tableau.A @ tableau.rho)
        assert tableau.b @ tableau.rho == pytest.approx(1.0)

    def test_hv_coefficients(self):
        assert AMFW_HV.rho.tolist() == pytest.approx([1.0, -1.0 / 3.0])
        assert AMFW_HV.c.tolist() == pytest.approx([0.0, 2.0 / 3.0])
        assert AMFW_HV.theta == pytest.approx(0.7886751345948129)

    def test_three_eighths_coefficients(self):
        assert AMFW_3_8.rho.tolist() == pytest.approx([1.0, -1.0 / 3.0, -1.0 / 3.0, 1.0])
        assert AMFW_3_8.c.tolist() == pytest.approx([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
        assert AMFW_3_8.theta == 0.5

    def test_three_eighths_explicit_limit_is_three_eighths_rule(self):
        # Arrange
        inverse = np.linalg.inv(np.eye(4) - AMFW_3_8.L)

        # Act
        stage_matrix = AMFW_3_8.A @ inverse
        weights = AMFW_3_8.b @ inverse

        # Assert
        assert np.allclose(stage_matrix, [[0.0, 0.0, 0.0, 0.0],
                                          [1.0 / 3.0, 0.0, 0.0, 0.0],
                                          [-1.0 / 3.0, 1.0, 0.0, 0.0],
                                          [1.0, -1.0, 1.0, 0.0]])
        assert np.allclose(weights, [1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0])

    @pytest.mark.parametrize('tableau, order', [(AMFW_HV, 3), (AMFW_3_8, 4)])
    def test_declared_order(self, tableau, order):
        assert tableau.order == order

    def test_rejects_non_strictly_lower_triangular(self):
        with pytest.raises(ValueError, match='strictly lower triangular'):
            AMFWTableau(name='bad', A=[[1.0, 0.0], [0.0, 0.0]], L=np.zeros((2, 2)), b=[0.5, 0.5], theta=0.5)

    @pytest.mark.parametrize('name, expectation', [
        ('amfw-hv', None),
        ('amfw-3/8', None),
        ('amfw-2', pytest.raises(ValueError, match='Unknown method')),
    ])
    def test_get_method(self, name, expectation):
        if expectation is None:
            assert get_method(name).name == name
        else:
            with expectation:
                get_method(name)

    def test_unknown_correction(self):
        with pytest.raises(ValueError, match='Unknown correction'):
            BoundaryCorrection('reflection')


class TestODEOrder:
    def test_exponential_growth_with_hv(self):
        errors = ode_errors(AMFW_HV, exponential_system(), [1.0], 1.0, math.e, [1000])

        assert errors[0] <= 5e-10

    @pytest.mark.parametrize('tableau, expected', [(AMFW_HV, 3.0), (AMFW_3_8, 4.0)])
    def test_observed_order_on_nonlinear_ode(self, tableau, expected):
        # Act
        orders = observed_ode_order(tableau, riccati_system(), [1.0], 1.0, 0.5, [10, 20, 40, 80])

        # Assert
        assert orders[-1] == pytest.approx(expected, abs=0.2)
        assert orders[-2] == pytest.approx(expected, abs=0.3)

    @pytest.mark.parametrize('tableau', [AMFW_HV, AMFW_3_8])
    @pytest.mark.parametrize('d', [1, 2, 3])
    def test_one_step_on_split_scalar_problem_matches_stability_function(self, tableau, d):
        rng = np.random.default_rng(d)

        for _ in range(20):
            z = -np.abs(rng.standard_normal(d)) * 10.0 ** rng.uniform(-2, 3) + 1j * rng.standard_normal(d)

            assert dahlquist_amplification(tableau, z) == pytest.approx(eval_R(tableau, z), rel=1e-12, abs=1e-13)


class TestSingleStep:
    def test_amfw_step_equals_rosenbrock_step_without_reaction_jacobian(self):
        # Arrange
        problem = problem1(C=1.0, d=1)
        grid = grid_for_h(16, 1)
        t_n, dt = 0.25, 0.05
        V_n = GridField.from_function(grid, problem.exact, t_n).as_array() + 0.01
        system = SplitSystem(problem, grid, PLAIN, t_n, V_n)
        ctx = StepContext.freeze(system, dt, AMFW_HV.theta)
        W = system.jacobian(1).line_matrix().to_dense()

        # Act
        factored = amfw_step(ctx, AMFW_HV, t_n, V_n)
        unfactored = rosenbrock_step(AMFW_HV, t_n, V_n, W, sum(ctx.fdots), system.rhs, dt)

        # Assert
        assert np.allclose(factored, unfactored, rtol=1e-12, atol=1e-13)

    def test_step_returns_grid_field_for_grid_field_input(self):
        problem = problem1(C=0.0, d=2)
        grid = grid_for_h(8, 2)
        V_n = GridField.from_function(grid, problem.initial_values)
        ctx = StepContext.freeze(SplitSystem(problem, grid, PLAIN, 0.0, V_n), 0.125, AMFW_HV.theta)

        result = amfw_step(ctx, AMFW_HV, 0.0, V_n)

        assert isinstance(result, GridField)
        assert result.grid is grid

    def test_singular_solve_is_reported_with_stage_and_direction(self, mocker):
        # Arrange
        mocker.patch.object(DiagonalJacobian, 'factorize', side_effect=SingularMatrixError(0))
        system = exponential_system().at(0.0, np.ones(1))
        ctx = StepContext.freeze(system, 0.1, AMFW_HV.theta, step_index=7)

        # Act
        with pytest.raises(IntegrationError) as error:
            amfw_step(ctx, AMFW_HV, 0.0, np.ones(1))

        # Assert
        assert error.value.step_index == 7
        assert error.value.stage == 1
        assert error.value.direction == 0

    def test_rosenbrock_step_limits_dimension(self):
        size = 4097

        with pytest.raises(ValueError, match='limited'):
            rosenbrock_step(AMFW_HV, 0.0, np.zeros(size), np.zeros((1, 1)), np.zeros(size), None, 0.1)


class TestIntegrate:
    @pytest.mark.parametrize('t_end, dt, expectation', [
        (1.0, 0.25, 4),
        (1.0, 1.0 / 3.0, 3),
        (1.0, 0.3, pytest.raises(ValueError, match='whole number')),
        (1.0, 2.0, pytest.raises(ValueError, match='whole number')),
    ])
    def test_step_count(self, t_end, dt, expectation):
        if isinstance(expectation, int):
            assert step_count(t_end, dt) == expectation
        else:
            with expectation:
                step_count(t_end, dt)

    def test_requires_step_size(self):
        problem = problem1()

        with pytest.raises(ValueError, match='step size'):
            integrate(problem, grid_for_h(8, 3), AMFW_HV)

    def test_extension_needs_boundary_points(self):
        problem = problem1()

        with pytest.raises(ValueError, match='does not match'):
            integrate(problem, grid_for_h(8, 3), AMFW_HV, OPERATOR_EXTENSION, dt=0.125)

    def test_non_finite_values_raise(self, mocker):
        problem = problem1(d=1)
        mocker.patch('mol.amfw_integrator.amfw_step', return_value=np.full(7, np.nan))

        with pytest.raises(IntegrationError, match='non-finite'):
            integrate(problem, grid_for_h(8, 1), AMFW_HV, dt=0.125)

    @pytest.mark.parametrize('h_inverse, ge_l2, ge_max', [
        (8, 0.60e-1, 0.11e+0),
        (16, 0.97e-2, 0.20e-1),
    ])
    def test_homogeneous_problem1_errors(self, h_inverse, ge_l2, ge_max):
        # Arrange
        problem = problem1(C=0.0)

        # Act
        V = integrate(problem, grid_for_h(h_inverse, 3), AMFW_HV, NO_CORRECTION, dt=1.0 / h_inverse)

        # Assert
        error_l2, error_max = global_error(problem, V)
        assert error_l2 == pytest.approx(ge_l2, rel=0.15)
        assert error_max == pytest.approx(ge_max, rel=0.15)

    @pytest.mark.parametrize('h_inverse, ge_l2, ge_max', [
        (8, 0.58e-1, 0.11e+0),
        (16, 0.95e-2, 0.20e-1),
    ])
    def test_extension_corrected_problem1_errors(self, h_inverse, ge_l2, ge_max):
        # Arrange
        problem = problem1(C=1.0)
        grid = grid_for_h(h_inverse, 3, include_boundary=True)

        # Act
        V = integrate(problem, grid, AMFW_HV, OPERATOR_EXTENSION, dt=1.0 / h_inverse)

        # Assert
        error_l2, error_max = global_error(problem, V)
        assert error_l2 == pytest.approx(ge_l2, rel=0.15)
        assert error_max == pytest.approx(ge_max, rel=0.15)

    def test_extension_keeps_boundary_exact(self):
        problem = problem1(C=1.0)
        grid = grid_for_h(8, 3, include_boundary=True)

        V = integrate(problem, grid, AMFW_HV, OPERATOR_EXTENSION, dt=0.125)

        mask = grid.boundary_mask()
        exact = GridField.from_function(grid, problem.exact, 1.0).as_array()
        assert np.allclose(V.as_array()[mask], exact[mask], rtol=1e-14)

    @pytest.mark.parametrize('h_inverse, ge_l2', [(8, 0.60e-1), (16, 0.97e-2)])
    def test_interpolant_corrected_problem1_errors(self, h_inverse, ge_l2):
        # Arrange
        problem = problem1(C=1.0)

        # Act
        V = integrate(problem, grid_for_h(h_inverse, 3), AMFW_HV, interpolant_correction(), dt=1.0 / h_inverse)

        # Assert
        error_l2, _ = global_error(problem, V)
        assert ge_l2 / 2.0 <= error_l2 <= ge_l2 * 2.0

    def test_uncorrected_boundary_data_loses_accuracy(self):
        problem = problem1(C=1.0)
        grid = grid_for_h(16, 3)

        _, plain = global_error(problem, integrate(problem, grid, AMFW_HV, NO_CORRECTION, dt=1.0 / 16))
        _, corrected = global_error(problem, integrate(problem, grid.with_boundary(True), AMFW_HV,
                                                       OPERATOR_EXTENSION, dt=1.0 / 16))

        assert plain > 2.0 * corrected

    @pytest.mark.slow
    @pytest.mark.parametrize('tableau, correction', [
        (AMFW_HV, NO_CORRECTION),
        (AMFW_HV, OPERATOR_EXTENSION),
        (AMFW_3_8, OPERATOR_EXTENSION),
    ])
    def test_errors_shrink_at_finer_grids(self, tableau, correction):
        problem = problem1(C=1.0 if correction is OPERATOR_EXTENSION else 0.0)
        errors = []
        for h_inverse in (16, 32):
            grid = grid_for_h(h_inverse, 3, include_boundary=correction.needs_boundary_points)
            errors.append(global_error(problem, integrate(problem, grid, tableau, correction, dt=1.0 / h_inverse))[0])

        assert math.log2(errors[0] / errors[1]) > 2.3
