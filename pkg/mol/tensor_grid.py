"""
Tensor-product grids of the unit hypercube.

Points are stored in lexicographic order with the last direction fastest, so
a GridField's flat values reshape (C order) to ``grid.shape``. Directions are
numbered 1..d throughout the package; direction 0 is reserved for the
reaction term of a split system.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

MIN_NODES = 3
MAX_DIMENSION = 4


@dataclass(frozen=True)
class Grid:
    n: tuple
    include_boundary: bool = False
    dx: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'dx', tuple(1.0 / (1 + n_l) for n_l in self.n))

    @property
    def d(self):
        return len(self.n)

    @property
    def shape(self):
        if self.include_boundary:
            return tuple(n_l + 2 for n_l in self.n)
        return tuple(self.n)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def index_offset(self):
        # Lattice index of the first stored point along each direction.
        return 0 if self.include_boundary else 1

    @property
    def h(self):
        return max(self.dx)

    def axis_coordinates(self, direction):
        check_direction(self, direction)
        n_l = self.n[direction - 1]
        first = self.index_offset
        last = n_l + 1 if self.include_boundary else n_l
        return np.arange(first, last + 1) * self.dx[direction - 1]

    def coordinates(self):
        """
        Broadcastable coordinate arrays, one per direction.
        :return: tuple of d arrays whose broadcast shape is ``self.shape``
        """
        axes = [self.axis_coordinates(j) for j in range(1, self.d + 1)]
        return tuple(np.meshgrid(*axes, indexing='ij', sparse=True))

    def interior_slice(self):
        if self.include_boundary:
            return tuple(slice(1, -1) for _ in self.n)
        return tuple(slice(None) for _ in self.n)

    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        if not self.include_boundary:
            return mask

        for axis in range(self.d):
            index = [slice(None)] * self.d
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True

        return mask

    def with_boundary(self, include_boundary=True):
        return Grid(self.n, include_boundary=include_boundary)


@dataclass(frozen=True)
class MultiIndex:
    idx: tuple

    def __iter__(self):
        return iter(self.idx)


@dataclass
class GridField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size != self.grid.size:
            raise ValueError(f'GridField needs {self.grid.size} values, got {self.values.size}')

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid, func, t=None):
        x = grid.coordinates()
        values = func(x) if t is None else func(x, t)
        return cls(grid, np.broadcast_to(values, grid.shape).copy())

    def as_array(self):
        return self.values.reshape(self.grid.shape)

    def interior_values(self):
        return self.as_array()[self.grid.interior_slice()]

    def copy(self):
        return GridField(self.grid, self.values.copy())

    def _check_same_grid(self, other):
        if other.grid != self.grid:
            raise ValueError('GridField arithmetic needs fields on the same grid')

    def __add__(self, other):
        self._check_same_grid(other)
        return GridField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check_same_grid(other)
        return GridField(self.grid, self.values - other.values)

    def scale(self, alpha):
        return GridField(self.grid, alpha * self.values)

    def axpy(self, alpha, other):
        """In-place ``self += alpha * other``."""
        self._check_same_grid(other)
        self.values += alpha * other.values
        return self


def build_grid(n, include_boundary=False):
    n = tuple(int(n_l) for n_l in np.atleast_1d(n))

    if not 1 <= len(n) <= MAX_DIMENSION:
        raise ValueError(f'Grid dimension must be between 1 and {MAX_DIMENSION}, got {len(n)}')

    for n_l in n:
        if n_l < MIN_NODES:
            raise ValueError(f'Each direction needs at least {MIN_NODES} interior nodes, got {n_l}')

    return Grid(n, include_boundary=include_boundary)


def grid_for_h(h_inverse, d, include_boundary=False):
    """Uniform grid with Δx = 1/h_inverse in every direction."""
    return build_grid((int(h_inverse) - 1,) * d, include_boundary=include_boundary)


def check_direction(grid, direction):
    if not 1 <= direction <= grid.d:
        raise ValueError(f'Invalid direction {direction} for a {grid.d}D grid')


def _check_index(grid, idx):
    idx = tuple(idx)
    if len(idx) != grid.d:
        raise ValueError(f'Index {idx} does not have {grid.d} entries')

    low = grid.index_offset
    for j_l, n_l in zip(idx, grid.n):
        high = n_l + 1 if grid.include_boundary else n_l
        if not low <= j_l <= high:
            raise IndexError(f'Index {idx} is out of range for grid n={grid.n}')

    return idx


def flatten(grid, idx):
    idx = _check_index(grid, idx)
    storage = tuple(j_l - grid.index_offset for j_l in idx)
    return int(np.ravel_multi_index(storage, grid.shape))


def unflatten(grid, flat_index):
    if not 0 <= flat_index < grid.size:
        raise IndexError(f'Flat index {flat_index} is out of range for {grid.size} points')

    storage = np.unravel_index(flat_index, grid.shape)
    return MultiIndex(tuple(int(s) + grid.index_offset for s in storage))


def classify(grid, idx):
    """
    Boundary classification of a lattice point.
    :return: frozenset of saturated directions (1-based); empty for interior points
    """
    idx = _check_index(grid, idx)
    return frozenset(j for j, (j_l, n_l) in enumerate(zip(idx, grid.n), start=1)
                     if j_l in (0, n_l + 1))


def lines(grid, direction) -> Iterator[np.ndarray]:
    """Yields the flat point indices of every line in ``direction``, ordered by increasing x_j."""
    for line in line_index_table(grid, direction):
        yield line


def line_index_table(grid, direction):
    check_direction(grid, direction)
    flat = np.arange(grid.size).reshape(grid.shape)
    moved = np.moveaxis(flat, direction - 1, -1)
    return moved.reshape(-1, grid.shape[direction - 1])
