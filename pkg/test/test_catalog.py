from dataclasses import replace

import numpy as np
import pytest

from mol.amfw_integrator import AMFW_HV, integrate
from mol.tensor_grid import grid_for_h
from problems.catalog import PROBLEMS, get_problem, pde_residual, problem1, problem2, problem3, traveling_wave_problem


def random_points(d, count=50, seed=0):
    rng = np.random.default_rng(seed)
    return tuple(rng.uniform(0.0, 1.0, count) for _ in range(d)), rng.uniform(0.0, 1.0, count)


class TestCatalog:
    @pytest.mark.parametrize('problem', [
        problem1(C=0.0),
        problem1(C=1.0),
        problem1(C=0.5, d=2),
        problem2(),
        problem3(),
        traveling_wave_problem(1),
    ], ids=lambda problem: problem.name + str(problem.params))
    def test_exact_solution_solves_the_pde(self, problem):
        x, t = random_points(problem.d)

        residual = pde_residual(problem, x, t)

        assert np.max(np.abs(residual)) <= 1e-9

    @pytest.mark.parametrize('problem', [problem1(C=1.0), problem2(), problem3()])
    def test_time_derivatives_match_finite_differences(self, problem):
        # Arrange
        x, t = random_points(problem.d, seed=1)
        delta = 1e-5

        # Act
        first = problem.boundary_dt(x, t)
        second = problem.boundary_dt2(x, t)

        # Assert
        assert np.allclose(first, (problem.exact(x, t + delta) - problem.exact(x, t - delta)) / (2 * delta),
                           atol=1e-8)
        assert np.allclose(second, (problem.boundary_dt(x, t + delta) -
                                    problem.boundary_dt(x, t - delta)) / (2 * delta), atol=1e-8)

    def test_problem1_with_homogeneous_data_vanishes_on_boundary(self):
        problem = problem1(C=0.0)
        face = (np.zeros(5), np.linspace(0.0, 1.0, 5), np.full(5, 0.3))

        assert np.all(problem.boundary(face, 0.7) == 0.0)
        assert problem.spatially_exact

    def test_reaction_derivative_matches_finite_differences(self):
        problem = problem3()
        x, t = random_points(3, seed=2)
        u = np.linspace(0.1, 0.9, 50)
        step = 1e-7

        expected = (problem.reaction(x, t, u + step) - problem.reaction(x, t, u - step)) / (2 * step)

        assert np.allclose(problem.reaction_du(x, t, u), expected, atol=1e-7)

    def test_catalog_names(self):
        assert set(PROBLEMS) == {'problem1', 'problem2', 'problem3', 'traveling-wave'}
        assert get_problem('problem2').d == 2
        assert get_problem('problem3').d == 3
        assert get_problem('traveling-wave', {'d': 4}).d == 4
        assert get_problem('problem1', {'C': 1.0}).params == {'C': 1.0, 'd': 3}

    @pytest.mark.parametrize('name, params, message', [
        ('problem4', {}, 'Unknown problem'),
        ('problem2', {'C': 1.0}, 'does not take parameters'),
        ('traveling-wave', {}, 'needs the parameter'),
    ])
    def test_get_problem_errors(self, name, params, message):
        with pytest.raises(ValueError, match=message):
            get_problem(name, params)


class TestProblemInvariants:
    @pytest.mark.parametrize('problem', [problem1(C=1.0), problem1(C=0.0, d=4), problem2(), problem3()],
                             ids=lambda problem: problem.name + str(problem.params))
    def test_catalog_problems_pass(self, problem):
        problem.check_invariants()

    @pytest.mark.parametrize('coefficient', [0.0, -1.0])
    def test_non_positive_diffusion_is_rejected(self, coefficient):
        problem = replace(problem1(C=1.0, d=2), diffusion=(lambda x, t: 1.0, lambda x, t: coefficient))

        with pytest.raises(ValueError, match='a_2 of problem "problem1" must be positive'):
            problem.check_invariants()

    def test_diffusion_vanishing_late_is_rejected(self):
        problem = replace(problem1(d=1), diffusion=(lambda x, t: 1.0 - t,))

        with pytest.raises(ValueError, match='a_1'):
            problem.check_invariants()

    def test_initial_condition_off_the_boundary_data_is_rejected(self):
        # Arrange
        base = problem1(C=1.0, d=2)
        problem = replace(base, initial=lambda x: base.exact(x, 0.0) + 0.1)

        # Act / Assert
        with pytest.raises(ValueError, match='does not match the initial condition'):
            problem.check_invariants()

    def test_initial_condition_may_differ_inside(self):
        base = problem1(C=1.0, d=2)

        def bumped(x):
            return base.exact(x, 0.0) + np.prod([xj * (1.0 - xj) for xj in np.broadcast_arrays(*x)], axis=0)

        problem = replace(base, initial=bumped)

        problem.check_invariants()

    def test_integration_checks_invariants(self):
        problem = replace(problem1(d=1), diffusion=(lambda x, t: -1.0,))

        with pytest.raises(ValueError, match='must be positive'):
            integrate(problem, grid_for_h(8, 1), AMFW_HV, dt=0.125)
