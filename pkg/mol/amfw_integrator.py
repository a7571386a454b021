"""
AMF-W time stepping for split semidiscrete systems.

Each stage forms K^(-1) = Δt·F(t_n + c_iΔt, V_n + Σ a_ij K_j) + Σ l_ij K_j and
then solves (I - θΔt D_j) K^(j) = K^(j-1) + θρ_iΔt² Ḟ_j for j = 0, 1, ..., d,
with D_j and Ḟ_j frozen at (t_n, V_n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from mol.boundary_correction import build_interpolant, homogenize, problem_face_bc
from mol.linalg_banded import SingularMatrixError
from mol.space_disc import EXTENSION, INTERPOLANT, PLAIN, DiagonalJacobian, SplitSystem
from mol.tensor_grid import GridField

ROSENBROCK_MAX_DIMENSION = 4096
STEP_COUNT_TOLERANCE = 1e-12


class IntegrationError(RuntimeError):
    def __init__(self, message, step_index=None, stage=None, direction=None):
        self.step_index = step_index
        self.stage = stage
        self.direction = direction
        super().__init__(message)


@dataclass(eq=False)
class AMFWTableau:
    name: str
    A: np.ndarray
    L: np.ndarray
    b: np.ndarray
    theta: float
    # Classical order with the exact Jacobian.
    order: int = 1

    def __post_init__(self):
        self.A = np.array(self.A, dtype=np.float64)
        self.L = np.array(self.L, dtype=np.float64)
        self.b = np.array(self.b, dtype=np.float64)
        s = self.b.size

        for label, matrix in (('A', self.A), ('L', self.L)):
            if matrix.shape != (s, s):
                raise ValueError(f'Tableau {self.name}: {label} must be {s}x{s}')
            if np.any(np.triu(matrix) != 0.0):
                raise ValueError(f'Tableau {self.name}: {label} must be strictly lower triangular')

        self.rho, self.c = derived_coefficients(self)

    @property
    def s(self):
        return self.b.size


def derived_coefficients(tableau):
    """ρ = (I - L)^-1 𝟏 by forward substitution, c = Aρ."""
    s = tableau.b.size
    rho = scipy.linalg.solve_triangular(np.eye(s) - tableau.L, np.ones(s), lower=True, unit_diagonal=True)
    return rho, tableau.A @ rho


AMFW_HV = AMFWTableau(name='amfw-hv',
                      A=[[0.0, 0.0],
                         [2.0 / 3.0, 0.0]],
                      L=[[0.0, 0.0],
                         [-4.0 / 3.0, 0.0]],
                      b=[5.0 / 4.0, 3.0 / 4.0],
                      theta=(3.0 + math.sqrt(3.0)) / 6.0,
                      order=3)

AMFW_3_8 = AMFWTableau(name='amfw-3/8',
                       A=[[0.0, 0.0, 0.0, 0.0],
                          [1.0 / 3.0, 0.0, 0.0, 0.0],
                          [1.0, 1.0, 0.0, 0.0],
                          [4.0 / 3.0, 0.0, 1.0, 0.0]],
                       L=[[0.0, 0.0, 0.0, 0.0],
                          [-4.0 / 3.0, 0.0, 0.0, 0.0],
                          [-5.0 / 3.0, -1.0, 0.0, 0.0],
                          [-3.0, -3.0, -6.0, 0.0]],
                       b=[13.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 1.0 / 8.0],
                       theta=0.5,
                       order=4)

METHODS = {tableau.name: tableau for tableau in (AMFW_HV, AMFW_3_8)}


def get_method(name):
    if name not in METHODS:
        raise ValueError(f'Unknown method "{name}", expected one of {sorted(METHODS)}')
    return METHODS[name]


CORRECTION_MODES = ('none', 'interpolant', 'extension')


@dataclass(frozen=True)
class BoundaryCorrection:
    mode: str = 'none'
    interpolant: object = None

    def __post_init__(self):
        if self.mode not in CORRECTION_MODES:
            raise ValueError(f'Unknown correction "{self.mode}", expected one of {CORRECTION_MODES}')

    @property
    def split_mode(self):
        return {'none': PLAIN, 'interpolant': INTERPOLANT, 'extension': EXTENSION}[self.mode]

    @property
    def needs_boundary_points(self):
        return self.mode == 'extension'


NO_CORRECTION = BoundaryCorrection('none')
OPERATOR_EXTENSION = BoundaryCorrection('extension')


def interpolant_correction(interpolant=None):
    return BoundaryCorrection('interpolant', interpolant)


@dataclass
class StepContext:
    """Jacobians, time derivatives and factorizations frozen at (t_n, V_n) for one step."""
    system: object
    t: float
    dt: float
    theta: float
    jacobians: list
    fdots: list
    factorizations: dict = field(default_factory=dict)
    step_index: int = 0

    @classmethod
    def freeze(cls, system, dt, theta, step_index=0):
        jacobians = [system.jacobian(j) for j in range(system.d + 1)]
        return cls(system=system,
                   t=system.t,
                   dt=dt,
                   theta=theta,
                   jacobians=jacobians,
                   fdots=system.time_derivatives(),
                   step_index=step_index)

    def solve(self, j, rhs):
        factors = self.factorizations.get(j)
        if factors is None:
            factors = self.jacobians[j].factorize(self.theta * self.dt)
            self.factorizations[j] = factors
        return factors.solve(rhs)


def amfw_step(ctx, tableau, t_n, V_n):
    """
    One AMF-W step.
    :return: V_{n+1}, as a GridField when ``V_n`` is one, else as an array
    """
    values = V_n.as_array() if isinstance(V_n, GridField) else np.asarray(V_n)
    dt = ctx.dt
    A, L, b = tableau.A, tableau.L, tableau.b
    stages = []

    for i in range(tableau.s):
        stage_value = values
        for l in range(i):
            if A[i, l] != 0.0:
                stage_value = stage_value + A[i, l] * stages[l]

        k = dt * ctx.system.rhs(t_n + tableau.c[i] * dt, stage_value)
        for l in range(i):
            if L[i, l] != 0.0:
                k = k + L[i, l] * stages[l]

        increment = tableau.theta * tableau.rho[i] * dt ** 2
        for j in range(ctx.system.d + 1):
            try:
                k = ctx.solve(j, k + increment * ctx.fdots[j])
            except SingularMatrixError as error:
                raise IntegrationError(f'Singular solve in stage {i + 1}, direction {j}: {error}',
                                       step_index=ctx.step_index, stage=i + 1, direction=j) from error
        stages.append(k)

    result = values
    for i in range(tableau.s):
        result = result + b[i] * stages[i]

    result = ctx.system.finalize_step(t_n + dt, result)

    if isinstance(V_n, GridField):
        return GridField(V_n.grid, result)
    return result


def rosenbrock_step(tableau, t_n, V_n, W, fdot, F, dt):
    """
    One step of the unfactored W-method with a dense LU of (I - θΔt W).
    :param F: callable F(t, V) returning an array like ``V_n``
    """
    values = np.asarray(V_n)
    size = values.size
    if size > ROSENBROCK_MAX_DIMENSION:
        raise ValueError(f'Dense reference stepper is limited to {ROSENBROCK_MAX_DIMENSION} unknowns, got {size}')

    matrix = np.eye(size) - tableau.theta * dt * np.asarray(W).reshape(size, size)
    lu, piv = scipy.linalg.lu_factor(matrix, check_finite=True)
    singular = np.flatnonzero(np.abs(np.diag(lu)) < 1e-300)
    if singular.size:
        raise SingularMatrixError(int(singular[0]))

    flat = values.reshape(-1)
    fdot = np.asarray(fdot).reshape(-1)
    stages = []

    for i in range(tableau.s):
        stage_value = flat + sum(tableau.A[i, l] * stages[l] for l in range(i))
        rhs = dt * np.asarray(F(t_n + tableau.c[i] * dt, stage_value.reshape(values.shape))).reshape(-1)
        rhs = rhs + sum(tableau.L[i, l] * stages[l] for l in range(i))
        rhs = rhs + tableau.theta * tableau.rho[i] * dt ** 2 * fdot
        stages.append(scipy.linalg.lu_solve((lu, piv), rhs))

    result = flat + sum(tableau.b[i] * stages[i] for i in range(tableau.s))
    return result.reshape(values.shape)


def step_count(t_end, dt):
    steps = int(round(t_end / dt))
    if steps < 1 or abs(steps * dt - t_end) > STEP_COUNT_TOLERANCE * max(1.0, abs(t_end)):
        raise ValueError(f'Final time {t_end} is not a whole number of steps of size {dt}')
    return steps


def _march(problem, grid, tableau, mode, dt, steps):
    values = GridField.from_function(grid, problem.initial_values).as_array()
    if mode == EXTENSION:
        values = SplitSystem(problem, grid, mode, 0.0, values).finalize_step(0.0, values)

    for n in range(steps):
        t_n = n * dt
        try:
            system = SplitSystem(problem, grid, mode, t_n, values)
            ctx = StepContext.freeze(system, dt, tableau.theta, step_index=n)
            values = amfw_step(ctx, tableau, t_n, values)
        except IntegrationError:
            raise
        except (SingularMatrixError, FloatingPointError, np.linalg.LinAlgError) as error:
            raise IntegrationError(f'Step {n} failed: {error}', step_index=n) from error

        if not np.all(np.isfinite(values)):
            raise IntegrationError(f'Step {n} produced non-finite values', step_index=n)

    return GridField(grid, values)


def integrate(problem, grid, tableau, correction=NO_CORRECTION, dt=None, t_end=None):
    """
    March a problem from its initial condition to ``t_end`` with fixed steps.

    :param correction: BoundaryCorrection; extension mode needs a grid that stores boundary points
    :return: GridField on ``grid`` at ``t_end``
    """
    if dt is None:
        raise ValueError('A step size is required')

    t_end = problem.t_end if t_end is None else t_end
    steps = step_count(t_end, dt)
    problem.check_invariants()

    if correction.needs_boundary_points != grid.include_boundary:
        raise ValueError(f'Correction "{correction.mode}" does not match a grid with '
                         f'include_boundary={grid.include_boundary}')

    if correction.mode == 'interpolant':
        bc = problem_face_bc(problem)
        if not bc.is_dirichlet():
            raise ValueError('Interpolant-corrected integration supports Dirichlet faces only')

        interpolant = correction.interpolant or build_interpolant(bc)
        w_problem = homogenize(problem, interpolant, grid)
        w = _march(w_problem, grid, tableau, INTERPOLANT, dt, steps)
        return w_problem.untransform(w, t_end)

    return _march(problem, grid, tableau, correction.split_mode, dt, steps)


class ODESystem:
    """
    y' = f(t, y) with an elementwise Jacobian, as a split system with only a reaction part.

    Used for ODE-order checks of the tableaux.
    """
    d = 0

    def __init__(self, f, f_y, f_t=None, t=0.0, y=None):
        self.f = f
        self.f_y = f_y
        self.f_t = f_t
        self.t = t
        self.y = y

    def at(self, t, y):
        return ODESystem(self.f, self.f_y, self.f_t, t, np.asarray(y))

    def rhs(self, t, y):
        return self.f(t, y)

    def jacobian(self, j):
        return DiagonalJacobian(np.broadcast_to(self.f_y(self.t, self.y), np.shape(self.y)))

    def time_derivatives(self):
        if self.f_t is None:
            return [np.zeros(np.shape(self.y))]
        return [np.asarray(self.f_t(self.t, self.y))]

    def finalize_step(self, t, y):
        return y


def ode_errors(tableau, system, y0, t_end, exact, step_counts):
    errors = []
    for steps in step_counts:
        dt = t_end / steps
        y = np.asarray(y0, dtype=np.float64)
        for n in range(steps):
            ctx = StepContext.freeze(system.at(n * dt, y), dt, tableau.theta, step_index=n)
            y = amfw_step(ctx, tableau, n * dt, y)
        errors.append(float(np.max(np.abs(y - exact))))
    return errors


def observed_ode_order(tableau, system, y0, t_end, exact, step_counts):
    """log2 ratios of errors between consecutive step counts (each double the previous)."""
    errors = ode_errors(tableau, system, y0, t_end, exact, step_counts)
    return [math.log2(coarse / fine) for coarse, fine in zip(errors, errors[1:])]
