"""
Boundary corrections that avoid order reduction under time-dependent boundary data.

Interpolant correction: build φ with Bφ = β on every face, then integrate the
homogenized unknown w = u - φ. Operator extension: evolve boundary points by
the tangential operators with source β̇ - tilde-L β and project the boundary
back onto β after every step.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial

from mol.space_disc import discrete_elliptic
from mol.tensor_grid import GridField
from problems.pde_problem import PDEProblem, zero_function

# Monomial index pairs tried in order of increasing degree.
BASIS_PAIRS = ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3))
SINGULAR_TOLERANCE = 1e-12

TIME_STEP_SCALE = np.finfo(np.float64).eps ** (1.0 / 3.0)
CENTRAL_WEIGHTS = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))


@dataclass(frozen=True)
class Face:
    """
    B-operator p·u + q·∂u/∂x_j on one face and its data.

    ``value(x, t)`` receives full coordinate tuples with x_j already set to
    the face's end. ``derivative(x, t, directions)`` optionally returns
    tangential derivatives ∂_D of the data for a tuple D of directions.
    """
    p: float
    q: float
    value: Callable
    value_dt: Optional[Callable] = None
    derivative: Optional[Callable] = None
    derivative_dt: Optional[Callable] = None

    @property
    def is_dirichlet(self):
        return self.q == 0.0


@dataclass
class FaceBCSpec:
    d: int
    faces: dict = field(default_factory=dict)

    def __post_init__(self):
        for j in range(1, self.d + 1):
            for k in (0, 1):
                if (j, k) not in self.faces:
                    raise ValueError(f'Missing face data for direction {j}, end {k}')
                face = self.faces[(j, k)]
                if abs(face.p) + abs(face.q) == 0.0:
                    raise ValueError(f'Face (direction {j}, end {k}) needs |p| + |q| > 0')

    @classmethod
    def dirichlet(cls, d, boundary, boundary_dt=None):
        faces = {(j, k): Face(1.0, 0.0, boundary, boundary_dt)
                 for j in range(1, d + 1) for k in (0, 1)}
        return cls(d, faces)

    def face(self, direction, end):
        return self.faces[(direction, end)]

    def is_dirichlet(self):
        return all(face.is_dirichlet for face in self.faces.values())

    def has_time_derivatives(self):
        return all(face.value_dt is not None for face in self.faces.values())


@dataclass
class EdgePolynomials:
    direction: Optional[int]
    P: Polynomial
    Q: Polynomial

    @property
    def degree(self):
        return max(self.P.trim().degree(), self.Q.trim().degree())

    def weight(self, end, xi, derivative=False):
        poly = self.P if end == 0 else self.Q
        if derivative:
            poly = poly.deriv()
        return poly(xi)


def _boundary_functionals(p0, q0, p1, q1, poly):
    d_poly = poly.deriv()
    return (p0 * poly(0.0) + q0 * d_poly(0.0),
            p1 * poly(1.0) + q1 * d_poly(1.0))


def _lowest_degree_solution(p0, q0, p1, q1, basis, target):
    for pair in BASIS_PAIRS:
        columns = [_boundary_functionals(p0, q0, p1, q1, basis[i]) for i in pair]
        matrix = np.array(columns).T
        scale = max(np.abs(matrix).max(), 1.0)

        if abs(np.linalg.det(matrix)) <= SINGULAR_TOLERANCE * scale ** 2:
            continue

        coefficients = np.linalg.solve(matrix, target)
        return coefficients[0] * basis[pair[0]] + coefficients[1] * basis[pair[1]]

    raise ValueError(f'No edge polynomial of degree <= 3 for (p0, q0, p1, q1) = {(p0, q0, p1, q1)}')


def build_edge_polynomials(p0, q0, p1, q1, direction=None):
    """
    P, Q with p0·P(0)+q0·P'(0)=1, p1·P(1)+q1·P'(1)=0 and the mirrored conditions for Q.

    P is expanded in powers of (ξ-1) and Q in powers of ξ, so each one
    vanishes to the highest possible order at the end it must not affect.
    """
    if abs(p0) + abs(q0) == 0.0 or abs(p1) + abs(q1) == 0.0:
        raise ValueError('Both ends need |p| + |q| > 0')

    xi = Polynomial([0.0, 1.0])
    shifted = Polynomial([-1.0, 1.0])

    P = _lowest_degree_solution(p0, q0, p1, q1, [shifted ** i for i in range(4)], np.array([1.0, 0.0]))
    Q = _lowest_degree_solution(p0, q0, p1, q1, [xi ** i for i in range(4)], np.array([0.0, 1.0]))

    return EdgePolynomials(direction, P, Q)


def _subsets(items):
    for size in range(len(items) + 1):
        for subset in itertools.combinations(items, size):
            yield subset


def _nested_central_difference(func, x, t, directions, step):
    if not directions:
        return func(tuple(x), t)

    axis = directions[0] - 1
    total = 0.0
    for offset, weight in CENTRAL_WEIGHTS:
        shifted = list(x)
        shifted[axis] = x[axis] + offset * step
        total = total + weight * _nested_central_difference(func, shifted, t, directions[1:], step)

    return total / step


class Interpolant:
    """
    φ = Σ_j φ_j with Bφ = β on every face.

    The face sweep u^[j] = u^[j-1] - φ_j is evaluated in closed form: φ_j sums
    the corner projections Π_S u over S = T ∪ {j}, T ⊆ {1..j-1}, with sign
    (-1)^|T|. Each projection needs the B-products of u at corners of the
    faces in S, read from the data of one face in S and differentiated
    tangentially for the remaining non-Dirichlet directions.
    """

    def __init__(self, bc, polynomials):
        self.bc = bc
        self.d = bc.d
        self.polynomials = polynomials
        self.compatibility_defect = 0.0

    def _face_data(self, face, x, t, directions, time_derivative):
        func = face.value_dt if time_derivative else face.value
        if not directions:
            return func(tuple(x), t)

        analytic = face.derivative_dt if time_derivative else face.derivative
        if analytic is not None:
            return analytic(tuple(x), t, directions)

        step = np.finfo(np.float64).eps ** (1.0 / (4 + len(directions)))
        return _nested_central_difference(func, list(x), t, directions, step)

    def _base_direction(self, subset, ends):
        for direction, end in zip(subset, ends):
            if not self.bc.face(direction, end).is_dirichlet:
                return direction
        return subset[0]

    def corner_data(self, subset, ends, x, t, extra=(), time_derivative=False, base=None):
        """(∏_{l∈S} B^(l)_{k_l}) u at x with x_l = k_l for l in S."""
        end_of = dict(zip(subset, ends))
        base = self._base_direction(subset, ends) if base is None else base
        face = self.bc.face(base, end_of[base])
        others = [l for l in subset if l != base]

        corner = list(x)
        for direction in subset:
            corner[direction - 1] = float(end_of[direction])

        total = 0.0
        for derived in _subsets(others):
            weight = 1.0
            for l in others:
                other_face = self.bc.face(l, end_of[l])
                weight *= other_face.q if l in derived else other_face.p
            if weight == 0.0:
                continue

            directions = tuple(sorted(set(derived) | set(extra)))
            total = total + weight * self._face_data(face, corner, t, directions, time_derivative)

        return total

    def _projection(self, subset, x, t, time_derivative, gradient):
        extra = () if gradient is None or gradient in subset else (gradient,)
        total = 0.0

        for ends in itertools.product((0, 1), repeat=len(subset)):
            weight = 1.0
            for direction, end in zip(subset, ends):
                weight = weight * self.polynomials[direction - 1].weight(end, x[direction - 1],
                                                                         derivative=gradient == direction)
            total = total + weight * self.corner_data(subset, ends, x, t, extra, time_derivative)

        return total

    def _component(self, j, x, t, time_derivative=False, gradient=None):
        total = 0.0
        for earlier in _subsets(tuple(range(1, j))):
            sign = -1.0 if len(earlier) % 2 else 1.0
            total = total + sign * self._projection(earlier + (j,), x, t, time_derivative, gradient)
        return total

    def _broadcast(self, x, value):
        shape = np.broadcast_shapes(*(np.shape(c) for c in x))
        return np.broadcast_to(value, shape)

    def component(self, j, x, t):
        return self._broadcast(x, self._component(j, x, t))

    def __call__(self, x, t):
        return self._broadcast(x, sum(self._component(j, x, t) for j in range(1, self.d + 1)))

    def gradient(self, x, t, direction):
        return self._broadcast(x, sum(self._component(j, x, t, gradient=direction)
                                      for j in range(1, self.d + 1)))

    def time_derivative(self, x, t):
        if self.bc.has_time_derivatives():
            return self._broadcast(x, sum(self._component(j, x, t, time_derivative=True)
                                          for j in range(1, self.d + 1)))

        delta = TIME_STEP_SCALE * max(1.0, abs(t))
        return (self(x, t + delta) - self(x, t - delta)) / (2.0 * delta)

    def boundary_operator(self, direction, end, x, t):
        """B^(j)_k φ at the points of ``x`` moved onto face x_j = k."""
        face = self.bc.face(direction, end)
        on_face = list(x)
        on_face[direction - 1] = np.full_like(np.asarray(x[direction - 1], dtype=np.float64), float(end))

        result = face.p * self(on_face, t)
        if face.q != 0.0:
            result = result + face.q * self.gradient(on_face, t, direction)
        return result

    def check_compatibility(self, samples=(0.3, 0.7), times=(0.0, 0.5, 1.0)):
        """
        Largest disagreement of B-products read from either face of an edge.
        :return: max absolute mismatch over sampled edge points and times
        """
        worst = 0.0
        axes = np.array(samples)

        for first, second in itertools.combinations(range(1, self.d + 1), 2):
            x = [axes] * self.d
            x = list(np.meshgrid(*x, indexing='ij', sparse=True))
            for ends in itertools.product((0, 1), repeat=2):
                for t in times:
                    via_first = self.corner_data((first, second), ends, x, t, base=first)
                    via_second = self.corner_data((first, second), ends, x, t, base=second)
                    worst = max(worst, float(np.max(np.abs(np.asarray(via_first - via_second)))))

        return worst


def build_interpolant(bc):
    polynomials = [build_edge_polynomials(bc.face(j, 0).p, bc.face(j, 0).q,
                                          bc.face(j, 1).p, bc.face(j, 1).q, direction=j)
                   for j in range(1, bc.d + 1)]

    interpolant = Interpolant(bc, polynomials)
    interpolant.compatibility_defect = interpolant.check_compatibility()
    return interpolant


def problem_face_bc(problem):
    if problem.face_bc is not None:
        return problem.face_bc
    return FaceBCSpec.dirichlet(problem.d, problem.boundary, problem.boundary_dt)


@dataclass
class HomogenizedProblem(PDEProblem):
    source: Optional[PDEProblem] = None
    interpolant: Optional[Interpolant] = None
    grid: object = None

    def untransform(self, w, t):
        """u = w + φ on the points of ``w``'s grid."""
        phi = GridField.from_function(w.grid, self.interpolant, t)
        return w + phi


class _HomogenizedSource:
    """r*(x, t, w) = L^(h)φ + r(x, t, w + φ) - ∂_tφ on the interior points of one grid."""

    def __init__(self, problem, interpolant, grid):
        self.problem = problem
        self.interpolant = interpolant
        self.grid = grid.with_boundary(False)
        self.lattice_grid = grid.with_boundary(True)
        self.x = self.grid.coordinates()
        self.lattice_x = self.lattice_grid.coordinates()
        self._cached_t = None
        self._cached = None

    def _parts(self, t):
        if self._cached_t != t:
            phi_lattice = self.interpolant(self.lattice_x, t)
            elliptic = discrete_elliptic(self.problem, self.grid, t, phi_lattice)
            phi = phi_lattice[self.lattice_grid.interior_slice()]
            phi_dt = self.interpolant.time_derivative(self.x, t)
            self._cached = (elliptic, phi, phi_dt)
            self._cached_t = t
        return self._cached

    def reaction(self, x, t, w):
        elliptic, phi, phi_dt = self._parts(t)
        result = elliptic - phi_dt
        if self.problem.reaction is not None:
            result = result + self.problem.reaction(self.x, t, w + phi)
        return result

    def reaction_du(self, x, t, w):
        _, phi, _ = self._parts(t)
        return self.problem.reaction_du(self.x, t, w + phi)


def homogenize(problem, interpolant, grid):
    """
    Problem for w = u - φ with homogeneous Dirichlet data.

    The Lφ term of r* is the discrete L^(h)φ on ``grid``, so the returned
    problem's reaction must be evaluated on that grid's interior points.
    """
    source = _HomogenizedSource(problem, interpolant, grid)

    if problem.reaction is None:
        reaction_du = zero_function
    elif problem.reaction_du is not None:
        reaction_du = source.reaction_du
    else:
        reaction_du = None

    def initial(x):
        return problem.initial_values(x) - interpolant(x, 0.0)

    exact = None
    if problem.exact is not None:
        def exact(x, t):
            return problem.exact(x, t) - interpolant(x, t)

    return HomogenizedProblem(name=f'{problem.name}-homogenized',
                              d=problem.d,
                              boundary=zero_function,
                              diffusion=problem.diffusion,
                              advection=problem.advection,
                              reaction=source.reaction,
                              reaction_du=reaction_du,
                              reaction_dt=None,
                              boundary_dt=zero_function,
                              boundary_dt2=zero_function,
                              initial=initial,
                              exact=exact,
                              diffusion_dt=problem.diffusion_dt,
                              advection_dt=problem.advection_dt,
                              time_independent_coefficients=problem.time_independent_coefficients,
                              t_end=problem.t_end,
                              homogenized=True,
                              params=dict(problem.params),
                              source=problem,
                              interpolant=interpolant,
                              grid=grid)


@dataclass
class ExtendedBoundaryRHS:
    """r̃ = β̇ - tilde-L β on the boundary points of a closed grid (zero elsewhere)."""
    problem: PDEProblem
    grid: object
    t: float
    values: np.ndarray
    mask: np.ndarray

    def tangential(self, lattice_values):
        return discrete_elliptic(self.problem, self.grid, self.t, lattice_values)


def extend_operator(problem, grid, t, beta=None, beta_dt=None):
    """
    Boundary source of the extended system.
    :param beta: closed-lattice array (or GridField) of boundary values, sampled from the problem if None
    :param beta_dt: matching time derivative, from the problem's β̇ if None
    """
    if not grid.include_boundary:
        raise ValueError('Operator extension needs a grid that stores boundary points')
    if not problem.is_dirichlet():
        raise ValueError('Operator extension supports Dirichlet faces only')

    x = grid.coordinates()
    if beta is None:
        beta = problem.boundary(x, t)
    if beta_dt is None:
        if problem.boundary_dt is not None:
            beta_dt = problem.boundary_dt(x, t)
        else:
            delta = TIME_STEP_SCALE * max(1.0, abs(t))
            beta_dt = (problem.boundary(x, t + delta) - problem.boundary(x, t - delta)) / (2.0 * delta)

    beta = np.broadcast_to(beta.as_array() if isinstance(beta, GridField) else beta, grid.shape)
    beta_dt = np.broadcast_to(beta_dt.as_array() if isinstance(beta_dt, GridField) else beta_dt, grid.shape)

    mask = grid.boundary_mask()
    tangential = discrete_elliptic(problem, grid, t, beta)
    values = np.where(mask, beta_dt - tangential, 0.0)

    return ExtendedBoundaryRHS(problem=problem, grid=grid, t=t, values=values, mask=mask)


def project_boundary(V, beta, t):
    """Overwrite the boundary points of a closed-grid field with β(·, t)."""
    grid = V.grid
    if not grid.include_boundary:
        raise ValueError('Projection needs a grid that stores boundary points')

    mask = grid.boundary_mask()
    values = V.as_array().copy()
    values[mask] = np.broadcast_to(beta(grid.coordinates(), t), grid.shape)[mask]

    return GridField(grid, values)
