"""
Finite-difference semidiscretization and its directional splitting.

Second and first derivatives use central 3-point rows at points adjacent to
the boundary and central 5-point rows elsewhere. The split right-hand side is
F = F_0 + Σ_j F_j with F_0 the reaction and F_j = a_j ∂²_j V + b_j ∂_j V.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mol import linalg_banded
from mol.linalg_banded import BAND_WIDTH, LOWER_BANDWIDTH, BandedLineMatrix, band_mask
from mol.tensor_grid import GridField, check_direction

PLAIN = 'plain'
INTERPOLANT = 'interpolant'
EXTENSION = 'extension'
MODES = (PLAIN, INTERPOLANT, EXTENSION)

FD_JACOBIAN_STEP = 1e-7


@dataclass(frozen=True)
class StencilSpec:
    kind: str
    power: int
    boundary_row: tuple
    interior_row: tuple

    def lattice_table(self, n, dx):
        """
        Scaled stencil rows for lattice points 0..n+1 of one line.

        Rows 0 and n+1 are zero; rows 1 and n use the 3-point row.
        """
        table = np.zeros((n + 2, BAND_WIDTH))
        table[1] = self.boundary_row
        table[n] = self.boundary_row
        table[2:n] = self.interior_row
        return table / dx ** self.power


SECOND_DERIVATIVE = StencilSpec(kind='second-derivative', power=2,
                                boundary_row=(0.0, 1.0, -2.0, 1.0, 0.0),
                                interior_row=tuple(c / 12.0 for c in (-1.0, 16.0, -30.0, 16.0, -1.0)))

FIRST_DERIVATIVE = StencilSpec(kind='first-derivative', power=1,
                               boundary_row=(0.0, -0.5, 0.0, 0.5, 0.0),
                               interior_row=tuple(c / 12.0 for c in (1.0, -8.0, 0.0, 8.0, -1.0)))


def difference_on_lattice(stencil, lattice_values, dx):
    """
    Apply ``stencil`` along the last axis of values given on lattice 0..n+1.
    :return: values at lattice points 1..n
    """
    values = np.asarray(lattice_values)
    n = values.shape[-1] - 2
    low, high = stencil.boundary_row, stencil.interior_row
    result = np.empty(values.shape[:-1] + (n,), dtype=values.dtype)

    result[..., 0] = low[1] * values[..., 0] + low[2] * values[..., 1] + low[3] * values[..., 2]
    result[..., -1] = low[1] * values[..., n - 1] + low[2] * values[..., n] + low[3] * values[..., n + 1]

    if n > 2:
        interior = high[0] * values[..., 0:n - 2]
        for c in range(1, BAND_WIDTH):
            interior = interior + high[c] * values[..., c:c + n - 2]
        result[..., 1:-1] = interior

    return result / dx ** stencil.power


def _apply(stencil, grid, direction, V, face_values):
    check_direction(grid, direction)
    axis = direction - 1
    dx = grid.dx[axis]
    moved = np.moveaxis(V.as_array(), axis, -1)

    if grid.include_boundary:
        result = np.zeros_like(moved)
        result[..., 1:-1] = difference_on_lattice(stencil, moved, dx)
    else:
        if face_values is None:
            raise ValueError('Face values are required when the field stores interior points only')
        left, right = (np.broadcast_to(face, moved.shape[:-1])[..., None] for face in face_values)
        result = difference_on_lattice(stencil, np.concatenate((left, moved, right), axis=-1), dx)

    return GridField(grid, np.moveaxis(result, -1, axis))


def apply_second_derivative(grid, direction, V, face_values=None):
    """
    Discrete ∂²/∂x_j² of a field.

    On closed grids the rows of points saturated in ``direction`` are zero.
    :param face_values: (left, right) boundary values on the transverse lattice, interior-only grids
    """
    return _apply(SECOND_DERIVATIVE, grid, direction, V, face_values)


def apply_first_derivative(grid, direction, V, face_values=None):
    return _apply(FIRST_DERIVATIVE, grid, direction, V, face_values)


def face_values_from_lattice(lattice_values, direction, include_boundary):
    """Boundary values at x_j = 0 and x_j = 1, restricted to the stored transverse points."""
    d = lattice_values.ndim
    axis = direction - 1

    if include_boundary:
        transverse = lattice_values
    else:
        transverse = lattice_values[tuple(slice(None) if l == axis else slice(1, -1) for l in range(d))]

    moved = np.moveaxis(transverse, axis, -1)
    return moved[..., 0], moved[..., -1]


@dataclass
class DirectionalOperator:
    """
    Frozen linear part of F_j: per-line pentadiagonal rows in band storage.

    ``bands`` has the grid shape with ``direction``'s axis moved last, plus a
    trailing axis of length 5. ``inflow`` is grid-shaped.
    """
    direction: int
    bands: np.ndarray
    t: float
    inflow: np.ndarray

    def matvec(self, values):
        axis = self.direction - 1
        moved = np.moveaxis(np.asarray(values), axis, -1)
        m = moved.shape[-1]
        padded = np.zeros(moved.shape[:-1] + (m + 2 * LOWER_BANDWIDTH,), dtype=moved.dtype)
        padded[..., LOWER_BANDWIDTH:LOWER_BANDWIDTH + m] = moved

        result = self.bands[..., 0] * padded[..., 0:m]
        for c in range(1, BAND_WIDTH):
            result = result + self.bands[..., c] * padded[..., c:c + m]

        return np.moveaxis(result, -1, axis)

    def apply(self, values):
        return self.matvec(values) + self.inflow

    def line_matrix(self, line=()):
        return BandedLineMatrix(self.bands[tuple(line)])

    def factorize(self, theta_dt):
        return linalg_banded.factorize_direction(self, theta_dt)


class DiagonalJacobian:
    def __init__(self, values):
        self.values = np.asarray(values)

    def matvec(self, values):
        return self.values * values

    def factorize(self, theta_dt):
        return DiagonalFactorization(1.0 - theta_dt * self.values)


class DiagonalFactorization:
    def __init__(self, denominator):
        self.denominator = denominator

    def solve(self, rhs):
        return rhs / self.denominator


def build_directional_operator(grid, direction, t, diffusion, advection=None, faces=None):
    """
    Assemble a DirectionalOperator from sampled coefficients.
    :param diffusion: grid-shaped a_j values
    :param advection: grid-shaped b_j values or None
    :param faces: (left, right) Dirichlet values for interior-only grids, None for zero data
    """
    check_direction(grid, direction)
    axis = direction - 1
    n = grid.n[axis]
    dx = grid.dx[axis]
    rows = slice(None) if grid.include_boundary else slice(1, n + 1)

    a = np.moveaxis(diffusion, axis, -1)[..., None]
    bands = a * SECOND_DERIVATIVE.lattice_table(n, dx)[rows]
    if advection is not None:
        b = np.moveaxis(advection, axis, -1)[..., None]
        bands = bands + b * FIRST_DERIVATIVE.lattice_table(n, dx)[rows]

    m = bands.shape[-2]
    inflow = np.zeros(bands.shape[:-1])

    if not grid.include_boundary and faces is not None:
        left, right = (np.broadcast_to(face, inflow.shape[:-1]) for face in faces)
        # Entries reaching lattice 0 or n+1 act on known boundary values.
        inflow[..., 0] += bands[..., 0, 1] * left
        inflow[..., 1] += bands[..., 1, 0] * left
        inflow[..., m - 1] += bands[..., m - 1, 3] * right
        inflow[..., m - 2] += bands[..., m - 2, 4] * right

    bands = bands * band_mask(m)

    return DirectionalOperator(direction=direction,
                               bands=bands,
                               t=t,
                               inflow=np.moveaxis(inflow, -1, axis))


def check_mode(grid, mode):
    if mode not in MODES:
        raise ValueError(f'Unknown split mode "{mode}", expected one of {MODES}')
    if (mode == EXTENSION) != grid.include_boundary:
        raise ValueError(f'Split mode "{mode}" does not match a grid with include_boundary={grid.include_boundary}')


class SplitSystem:
    """
    F(t, V) = F_0(t, V) + Σ_j F_j(t, V) for a problem on a grid, frozen at (t, V).

    Every evaluation method takes grid-shaped arrays. Plain and interpolant
    modes store interior points only and receive Dirichlet data through
    inflow vectors; extension mode stores the closed lattice and evolves
    boundary points with the tangential operators.
    """

    def __init__(self, problem, grid, mode, t, V):
        check_mode(grid, mode)

        if problem.d != grid.d:
            raise ValueError(f'Problem "{problem.name}" is {problem.d}D but the grid is {grid.d}D')
        if mode == INTERPOLANT and not problem.homogenized:
            raise ValueError('Interpolant mode integrates a homogenized problem, see homogenize()')
        if not problem.is_dirichlet():
            raise ValueError(f'Split mode "{mode}" supports Dirichlet faces only')

        self.problem = problem
        self.grid = grid
        self.mode = mode
        self.t = t
        self.V = np.array(V.as_array() if isinstance(V, GridField) else V, dtype=np.float64)

        self.lattice_grid = grid.with_boundary(True)
        self.x = grid.coordinates()
        self.lattice_x = self.lattice_grid.coordinates()
        self.boundary_mask = grid.boundary_mask()

    @property
    def d(self):
        return self.grid.d

    def boundary_lattice(self, t, order=0):
        func = (self.problem.boundary, self.problem.boundary_dt, self.problem.boundary_dt2)[order]
        if func is None:
            raise ValueError(f'Problem "{self.problem.name}" does not supply boundary time derivative {order}')
        return np.broadcast_to(func(self.lattice_x, t), self.lattice_grid.shape)

    def _faces(self, lattice, direction):
        if self.mode == EXTENSION:
            return None
        return face_values_from_lattice(lattice, direction, include_boundary=False)

    def operator(self, direction, t, lattice=None):
        if lattice is None and self.mode != EXTENSION:
            lattice = self.boundary_lattice(t)

        shape = self.grid.shape
        faces = None if lattice is None else self._faces(lattice, direction)

        return build_directional_operator(self.grid, direction, t,
                                          self.problem.diffusion_values(direction, self.x, t, shape),
                                          self.problem.advection_values(direction, self.x, t, shape),
                                          faces)

    def _operator_dt(self, direction, t, lattice):
        shape = self.grid.shape
        faces = None if lattice is None else self._faces(lattice, direction)

        return build_directional_operator(self.grid, direction, t,
                                          self.problem.diffusion_dt_values(direction, self.x, t, shape),
                                          self.problem.advection_dt_values(direction, self.x, t, shape),
                                          faces)

    def extended_boundary_rhs(self, t):
        from mol.boundary_correction import extend_operator
        return extend_operator(self.problem, self.grid, t)

    def reaction_term(self, t, values):
        result = np.zeros(self.grid.shape)
        if self.problem.reaction is not None:
            result = result + self.problem.reaction(self.x, t, values)

        if self.mode == EXTENSION:
            result[self.boundary_mask] = self.extended_boundary_rhs(t).values[self.boundary_mask]

        return result

    def terms(self, t, values):
        lattice = None if self.mode == EXTENSION else self.boundary_lattice(t)
        return [self.reaction_term(t, values)] + \
            [self.operator(j, t, lattice).apply(values) for j in range(1, self.d + 1)]

    def rhs(self, t, values):
        terms = self.terms(t, values)
        result = terms[0]
        for term in terms[1:]:
            result = result + term
        return result

    def reaction_jacobian(self, t, values):
        problem = self.problem
        if problem.reaction is None:
            return np.zeros(self.grid.shape)

        if problem.reaction_du is not None:
            jacobian = np.broadcast_to(problem.reaction_du(self.x, t, values), self.grid.shape).copy()
        else:
            step = np.maximum(FD_JACOBIAN_STEP, FD_JACOBIAN_STEP * np.abs(values))
            jacobian = (problem.reaction(self.x, t, values + step) -
                        problem.reaction(self.x, t, values - step)) / (2.0 * step)
            jacobian = np.broadcast_to(jacobian, self.grid.shape).copy()

        if self.mode == EXTENSION:
            jacobian[self.boundary_mask] = 0.0

        return jacobian

    def jacobian(self, j):
        if j == 0:
            return DiagonalJacobian(self.reaction_jacobian(self.t, self.V))
        check_direction(self.grid, j)
        return self.operator(j, self.t)

    def time_derivatives(self):
        if self.problem.has_analytic_time_derivatives(extension=self.mode == EXTENSION):
            return self._analytic_time_derivatives()
        return self._finite_difference_time_derivatives()

    def _analytic_time_derivatives(self):
        t, values = self.t, self.V
        problem = self.problem

        fdot_0 = np.zeros(self.grid.shape)
        if problem.reaction is not None:
            fdot_0 = fdot_0 + problem.reaction_dt(self.x, t, values)

        lattice = None if self.mode == EXTENSION else self.boundary_lattice(t)
        lattice_dt = None if self.mode == EXTENSION else self.boundary_lattice(t, order=1)

        fdots = [fdot_0]
        for j in range(1, self.d + 1):
            fdot_j = self._operator_dt(j, t, lattice).apply(values) if not problem.time_independent_coefficients \
                else np.zeros(self.grid.shape)
            if lattice_dt is not None:
                fdot_j = fdot_j + self.operator(j, t, lattice_dt).inflow
            fdots.append(fdot_j)

        if self.mode == EXTENSION:
            fdot_0[self.boundary_mask] = self._extended_boundary_rhs_dt(t)[self.boundary_mask]

        return fdots

    def _extended_boundary_rhs_dt(self, t):
        from mol.boundary_correction import extend_operator

        beta_dt = self.boundary_lattice(t, order=1)
        beta_dt2 = self.boundary_lattice(t, order=2)
        values = extend_operator(self.problem, self.grid, t, beta=beta_dt, beta_dt=beta_dt2).values

        if not self.problem.time_independent_coefficients:
            beta = self.boundary_lattice(t)
            for j in range(1, self.d + 1):
                values = values - self._operator_dt(j, t, None).matvec(beta)

        return values

    def _finite_difference_time_derivatives(self):
        t, values = self.t, self.V
        delta = np.finfo(np.float64).eps ** (1.0 / 3.0) * max(1.0, abs(t))

        ahead = self.terms(t + delta, values)
        behind = self.terms(t - delta, values)
        return [(f_ahead - f_behind) / (2.0 * delta) for f_ahead, f_behind in zip(ahead, behind)]

    def finalize_step(self, t, values):
        if self.mode == EXTENSION:
            values = values.copy()
            values[self.boundary_mask] = self.boundary_lattice(t)[self.boundary_mask]
        return values


def assemble_split_system(problem, grid, t, V, mode):
    return SplitSystem(problem, grid, mode, t, V)


def directional_jacobian(system, j):
    """D_j = ∂F_j/∂V at the system's freeze point: DirectionalOperator (j ≥ 1) or DiagonalJacobian (j = 0)."""
    if not 0 <= j <= system.d:
        raise ValueError(f'Invalid split index {j} for a {system.d}D system')
    return system.jacobian(j)


def split_time_derivatives(problem, grid, t, V, mode):
    return assemble_split_system(problem, grid, t, V, mode).time_derivatives()


def discrete_elliptic(problem, grid, t, lattice_values):
    """
    L^(h) applied to values given on the closed lattice, returned at the grid's stored points.

    Interior rows see the boundary values as ordinary neighbours; on closed
    grids, boundary rows carry the tangential terms only.
    """
    closed = grid.with_boundary(True)
    x = closed.coordinates()
    result = np.zeros(closed.shape)

    for j in range(1, grid.d + 1):
        operator = build_directional_operator(closed, j, t,
                                              problem.diffusion_values(j, x, t, closed.shape),
                                              problem.advection_values(j, x, t, closed.shape))
        result = result + operator.matvec(lattice_values)

    if grid.include_boundary:
        return result
    return result[closed.interior_slice()]
