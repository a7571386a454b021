from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

INVARIANT_SAMPLES = 9
COMPATIBILITY_TOLERANCE = 1e-12


def _zero(x, t, *args):
    return 0.0


def _one(x, t):
    return 1.0


@dataclass
class PDEProblem:
    """
    u_t = Σ_j (a_j u_{x_j x_j} + b_j u_{x_j}) + r(x, t, u) on the unit hypercube.

    Callables take a tuple of broadcastable coordinate arrays ``x`` and the
    time ``t`` (and ``u`` for the reaction). ``boundary`` is the Dirichlet
    data β; it must be defined on the closed domain. ``face_bc`` overrides
    the Dirichlet faces with general B-operators (interpolant correction only).
    """
    name: str
    d: int
    boundary: Callable
    diffusion: Optional[Sequence[Callable]] = None
    advection: Optional[Sequence[Callable]] = None
    reaction: Optional[Callable] = None
    reaction_du: Optional[Callable] = None
    reaction_dt: Optional[Callable] = None
    boundary_dt: Optional[Callable] = None
    boundary_dt2: Optional[Callable] = None
    initial: Optional[Callable] = None
    exact: Optional[Callable] = None
    exact_derivatives: Optional[Callable] = None
    diffusion_dt: Optional[Sequence[Callable]] = None
    advection_dt: Optional[Sequence[Callable]] = None
    time_independent_coefficients: bool = True
    t_end: float = 1.0
    face_bc: object = None
    spatially_exact: bool = False
    homogenized: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.diffusion is None:
            self.diffusion = (_one,) * self.d
        if len(self.diffusion) != self.d:
            raise ValueError(f'Problem "{self.name}" needs {self.d} diffusion coefficients')
        if self.advection is not None and len(self.advection) != self.d:
            raise ValueError(f'Problem "{self.name}" needs {self.d} advection coefficients')

    def is_dirichlet(self):
        return self.face_bc is None or self.face_bc.is_dirichlet()

    @staticmethod
    def _sample(func, x, t, shape):
        return np.broadcast_to(np.asarray(func(x, t), dtype=np.float64), shape)

    def diffusion_values(self, direction, x, t, shape):
        return self._sample(self.diffusion[direction - 1], x, t, shape)

    def advection_values(self, direction, x, t, shape):
        if self.advection is None:
            return None
        return self._sample(self.advection[direction - 1], x, t, shape)

    def diffusion_dt_values(self, direction, x, t, shape):
        if self.time_independent_coefficients:
            return np.zeros(shape)
        return self._sample(self.diffusion_dt[direction - 1], x, t, shape)

    def advection_dt_values(self, direction, x, t, shape):
        if self.advection is None:
            return None
        if self.time_independent_coefficients:
            return np.zeros(shape)
        return self._sample(self.advection_dt[direction - 1], x, t, shape)

    def initial_values(self, x):
        if self.initial is not None:
            return self.initial(x)
        return self.boundary(x, 0.0)

    def has_analytic_time_derivatives(self, extension=False):
        if not self.time_independent_coefficients:
            if self.diffusion_dt is None:
                return False
            if self.advection is not None and self.advection_dt is None:
                return False

        if self.reaction is not None and self.reaction_dt is None:
            return False
        if self.boundary_dt is None:
            return False
        if extension and self.boundary_dt2 is None:
            return False

        return True

    def check_diffusion_positive(self, x, t):
        for j in range(1, self.d + 1):
            values = np.asarray(self.diffusion[j - 1](x, t))
            if np.any(values <= 0.0):
                raise ValueError(f'Diffusion coefficient a_{j} of problem "{self.name}" must be positive')

    def check_boundary_compatible(self, x, tolerance=COMPATIBILITY_TOLERANCE):
        """β(·, 0) must match u₀ on the boundary points among ``x``."""
        if self.initial is None or not self.is_dirichlet():
            return

        shape = np.broadcast_shapes(*(np.shape(coordinate) for coordinate in x))
        on_boundary = np.zeros(shape, dtype=bool)
        for coordinate in x:
            on_boundary |= (coordinate == 0.0) | (coordinate == 1.0)
        if not on_boundary.any():
            return

        boundary = self._sample(self.boundary, x, 0.0, shape)[on_boundary]
        initial = np.broadcast_to(np.asarray(self.initial(x), dtype=np.float64), shape)[on_boundary]
        gap = float(np.max(np.abs(initial - boundary)))
        if gap > tolerance * max(1.0, float(np.max(np.abs(boundary)))):
            raise ValueError(f'Boundary data of problem "{self.name}" does not match the initial condition '
                             f'at t = 0 (largest gap {gap:.3g})')

    def check_invariants(self, samples=INVARIANT_SAMPLES):
        """Checks a_j > 0 over [0, t_end] and β(·, 0) = u₀ on a lattice of the closed domain."""
        axis = np.linspace(0.0, 1.0, samples)
        x = tuple(np.meshgrid(*([axis] * self.d), indexing='ij'))

        for t in (0.0, 0.5 * self.t_end, self.t_end):
            self.check_diffusion_positive(x, t)
        self.check_boundary_compatible(x)


zero_function = _zero
