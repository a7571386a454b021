"""
Test problems with known solutions on the unit hypercube.

problem1: u = 64 eᵗ ∏ x_j(1 - x_j) + C eᵗ Σ (x_j + 1/(j + 2))², linear source.
problem2, problem3: traveling waves u = 1/(1 + exp(Σx - t)) with a cubic reaction.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from problems.pde_problem import PDEProblem, zero_function


def _broadcast(x):
    return np.broadcast_arrays(*[np.asarray(xj, dtype=np.float64) for xj in x])


def _bubble_factors(x):
    return [xj * (1.0 - xj) for xj in _broadcast(x)]


def _product_without(factors, skip):
    result = np.ones_like(factors[0])
    for l, factor in enumerate(factors):
        if l != skip:
            result = result * factor
    return result


def _offset_square(x, C):
    if C == 0.0:
        return 0.0
    return C * sum((xj + 1.0 / (j + 3)) ** 2 for j, xj in enumerate(_broadcast(x)))


def problem1(C=0.0, d=3):
    """
    Linear heat problem whose solution is quadratic in each direction.

    C = 0 gives homogeneous boundary data; C ≠ 0 gives time-dependent data.
    """
    C = float(C)
    d = int(d)

    def exact(x, t):
        factors = _bubble_factors(x)
        return np.exp(t) * (64.0 * _product_without(factors, -1) + _offset_square(x, C))

    def laplacian(x, t):
        factors = _bubble_factors(x)
        total = sum(_product_without(factors, j) for j in range(d))
        return np.exp(t) * (-128.0 * total + 2.0 * C * d)

    def source(x, t, u=None):
        return exact(x, t) - laplacian(x, t)

    def reaction(x, t, u):
        return source(x, t)

    def derivatives(x, t):
        factors = _bubble_factors(x)
        coordinates = _broadcast(x)
        first = [np.exp(t) * (64.0 * (1.0 - 2.0 * xj) * _product_without(factors, j) +
                              2.0 * C * (xj + 1.0 / (j + 3)))
                 for j, xj in enumerate(coordinates)]
        second = [np.exp(t) * (-128.0 * _product_without(factors, j) + 2.0 * C) for j in range(d)]
        return {'t': exact(x, t), 'x': first, 'xx': second}

    return PDEProblem(name='problem1',
                      d=d,
                      boundary=exact,
                      boundary_dt=exact,
                      boundary_dt2=exact,
                      reaction=reaction,
                      reaction_du=zero_function,
                      reaction_dt=source,
                      exact=exact,
                      exact_derivatives=derivatives,
                      spatially_exact=True,
                      params={'C': C, 'd': d})


def traveling_wave_problem(d, name=None):
    """
    u = 1/(1 + exp(Σx - t)) solves u_t = Δu + u(1 - u)(2du - d + 1).

    d = 2 gives u(1 - u)(4u - 1) and d = 3 gives 2u(1 - u)(3u - 1).
    """
    d = int(d)

    def exact(x, t):
        return expit(t - sum(_broadcast(x)))

    def exact_dt(x, t):
        u = exact(x, t)
        return u * (1.0 - u)

    def exact_dt2(x, t):
        u = exact(x, t)
        return u * (1.0 - u) * (1.0 - 2.0 * u)

    def reaction(x, t, u):
        return u * (1.0 - u) * (2.0 * d * u - d + 1.0)

    def reaction_du(x, t, u):
        return (1.0 - 2.0 * u) * (2.0 * d * u - d + 1.0) + 2.0 * d * u * (1.0 - u)

    def reaction_dt(x, t, u):
        return np.zeros(np.shape(u))

    def derivatives(x, t):
        u = exact(x, t)
        slope = u * (1.0 - u)
        return {'t': slope,
                'x': [-slope] * d,
                'xx': [slope * (1.0 - 2.0 * u)] * d}

    return PDEProblem(name=name or f'traveling-wave-{d}d',
                      d=d,
                      boundary=exact,
                      boundary_dt=exact_dt,
                      boundary_dt2=exact_dt2,
                      reaction=reaction,
                      reaction_du=reaction_du,
                      reaction_dt=reaction_dt,
                      exact=exact,
                      exact_derivatives=derivatives,
                      params={'d': d})


def problem2():
    return traveling_wave_problem(2, name='problem2')


def problem3():
    return traveling_wave_problem(3, name='problem3')


PROBLEMS = {
    'problem1': problem1,
    'problem2': problem2,
    'problem3': problem3,
    'traveling-wave': traveling_wave_problem,
}

PROBLEM_PARAMETERS = {
    'problem1': ('C', 'd'),
    'problem2': (),
    'problem3': (),
    'traveling-wave': ('d',),
}


def get_problem(name, params=None):
    params = dict(params or {})
    if name not in PROBLEMS:
        raise ValueError(f'Unknown problem "{name}", expected one of {sorted(PROBLEMS)}')

    unknown = set(params) - set(PROBLEM_PARAMETERS[name])
    if unknown:
        raise ValueError(f'Problem "{name}" does not take parameters {sorted(unknown)}')

    if name == 'traveling-wave' and 'd' not in params:
        raise ValueError('Problem "traveling-wave" needs the parameter "d"')

    return PROBLEMS[name](**params)


def pde_residual(problem, x, t):
    """u_t - Σ_j (a_j u_{x_j x_j} + b_j u_{x_j}) - r(x, t, u) for the exact solution."""
    if problem.exact is None or problem.exact_derivatives is None:
        raise ValueError(f'Problem "{problem.name}" has no analytic solution derivatives')

    u = problem.exact(x, t)
    derivatives = problem.exact_derivatives(x, t)
    shape = np.shape(u)

    residual = np.asarray(derivatives['t'], dtype=np.float64)
    for j in range(1, problem.d + 1):
        residual = residual - problem.diffusion_values(j, x, t, shape) * derivatives['xx'][j - 1]
        advection = problem.advection_values(j, x, t, shape)
        if advection is not None:
            residual = residual - advection * derivatives['x'][j - 1]

    if problem.reaction is not None:
        residual = residual - problem.reaction(x, t, u)

    return residual
