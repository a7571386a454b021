"""
Banded LU with partial pivoting for the per-line systems (I - θΔt D_j) x = rhs.

Band storage: ``bands[..., i, k + 2]`` holds A[i, i + k] for k = -2..2. The
leading axes index independent lines; every operation is vectorized across
lines and loops only along the line, so each line's arithmetic is the same
regardless of how many lines are processed together.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mol.tensor_grid import GridField, check_direction

LOWER_BANDWIDTH = 2
UPPER_BANDWIDTH = 2
BAND_WIDTH = LOWER_BANDWIDTH + UPPER_BANDWIDTH + 1
FILL_BANDWIDTH = LOWER_BANDWIDTH + UPPER_BANDWIDTH
PIVOT_TOLERANCE = 1e-300


class SingularMatrixError(ArithmeticError):
    def __init__(self, row, line=None):
        self.row = row
        self.line = line

        message = f'Singular banded matrix: zero pivot at row {row}'
        if line is not None:
            message += f' on line {line}'

        super().__init__(message)


@dataclass
class BandedLineMatrix:
    bands: np.ndarray

    def __post_init__(self):
        self.bands = np.asarray(self.bands, dtype=np.float64)
        if self.bands.ndim < 2 or self.bands.shape[-1] != BAND_WIDTH:
            raise ValueError(f'Band storage must have shape (..., m, {BAND_WIDTH}), got {self.bands.shape}')
        if self.size < 1:
            raise ValueError('Banded matrices need at least one row')

    @property
    def size(self):
        return self.bands.shape[-2]

    @property
    def batch_shape(self):
        return self.bands.shape[:-2]

    @classmethod
    def identity(cls, m, batch_shape=()):
        bands = np.zeros(tuple(batch_shape) + (m, BAND_WIDTH))
        bands[..., LOWER_BANDWIDTH] = 1.0
        return cls(bands)

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float64)
        m = dense.shape[-1]
        bands = np.zeros(dense.shape[:-2] + (m, BAND_WIDTH))

        for k in range(-LOWER_BANDWIDTH, UPPER_BANDWIDTH + 1):
            rows = np.arange(max(0, -k), min(m, m - k))
            bands[..., rows, k + LOWER_BANDWIDTH] = dense[..., rows, rows + k]

        return cls(bands)

    def to_dense(self):
        m = self.size
        dense = np.zeros(self.batch_shape + (m, m))
        masked = self.bands * band_mask(m)

        for k in range(-LOWER_BANDWIDTH, UPPER_BANDWIDTH + 1):
            rows = np.arange(max(0, -k), min(m, m - k))
            dense[..., rows, rows + k] = masked[..., rows, k + LOWER_BANDWIDTH]

        return dense

    def shifted_identity(self, scale):
        """The matrix I + scale * A in band storage."""
        bands = scale * self.bands
        bands[..., LOWER_BANDWIDTH] += 1.0
        return BandedLineMatrix(bands)


def band_mask(m):
    """1.0 where a band slot references a column inside the matrix, else 0.0."""
    rows = np.arange(m)[:, None]
    columns = rows + np.arange(-LOWER_BANDWIDTH, UPPER_BANDWIDTH + 1)[None, :]
    return ((columns >= 0) & (columns < m)).astype(np.float64)


def _line_label(batch_shape, line):
    if not batch_shape:
        return None
    return tuple(int(i) for i in np.unravel_index(line, batch_shape))


@dataclass
class BandedFactorization:
    """
    Row-interchange LU factors of a batch of banded lines.

    ``upper[b, i, c]`` holds U[i, i + c] (c = 0..4), ``multipliers[b, k]`` the
    eliminators of the two rows below pivot k and ``pivots[b, k]`` the offset
    (0, 1 or 2) of the row swapped into position k.
    """
    upper: np.ndarray
    multipliers: np.ndarray
    pivots: np.ndarray
    batch_shape: tuple

    @property
    def size(self):
        return self.upper.shape[1]

    def solve(self, rhs):
        rhs = np.asarray(rhs)
        m = self.size
        count = self.upper.shape[0]

        if rhs.shape != self.batch_shape + (m,):
            raise ValueError(f'Right-hand side shape {rhs.shape} does not match {self.batch_shape + (m,)}')

        lanes = np.arange(count)
        y = np.zeros((count, m + FILL_BANDWIDTH), dtype=np.result_type(rhs, self.upper))
        y[:, :m] = rhs.reshape(count, m)

        for k in range(m):
            target = k + self.pivots[:, k]
            swapped = y[lanes, target].copy()
            y[lanes, target] = y[:, k]
            y[:, k] = swapped
            y[:, k + 1] -= self.multipliers[:, k, 0] * y[:, k]
            y[:, k + 2] -= self.multipliers[:, k, 1] * y[:, k]

        x = np.zeros_like(y)
        for i in range(m - 1, -1, -1):
            row = self.upper[:, i]
            partial = row[:, 1] * x[:, i + 1] + row[:, 2] * x[:, i + 2] \
                + row[:, 3] * x[:, i + 3] + row[:, 4] * x[:, i + 4]
            x[:, i] = (y[:, i] - partial) / row[:, 0]

        return x[:, :m].reshape(rhs.shape)


def factorize(matrix):
    """
    Gaussian elimination with partial pivoting inside the band.

    Rows are padded with two identity rows so every elimination step sees
    three candidate rows; row k's working window spans columns k-2..k+4.
    """
    m = matrix.size
    batch_shape = matrix.batch_shape
    bands = matrix.bands.reshape(-1, m, BAND_WIDTH) * band_mask(m)
    count = bands.shape[0]

    zero_rows = ~np.any(bands != 0.0, axis=-1)
    if zero_rows.any():
        line, row = np.argwhere(zero_rows)[0]
        raise SingularMatrixError(int(row), _line_label(batch_shape, line))

    work = np.zeros((count, m + LOWER_BANDWIDTH, BAND_WIDTH + UPPER_BANDWIDTH))
    work[:, :m, :BAND_WIDTH] = bands
    work[:, m:, LOWER_BANDWIDTH] = 1.0

    multipliers = np.zeros((count, m, LOWER_BANDWIDTH))
    pivots = np.zeros((count, m), dtype=np.intp)
    lanes = np.arange(count)

    for k in range(m):
        # Candidate rows k, k+1, k+2 aligned on columns k..k+4.
        window = np.stack((work[:, k, 2:7], work[:, k + 1, 1:6], work[:, k + 2, 0:5]), axis=1)

        offset = np.argmax(np.abs(window[:, :, 0]), axis=1)
        pivot_row = window[lanes, offset].copy()

        singular = np.abs(pivot_row[:, 0]) < PIVOT_TOLERANCE
        if singular.any():
            raise SingularMatrixError(k, _line_label(batch_shape, int(np.flatnonzero(singular)[0])))

        window[lanes, offset] = window[:, 0]
        window[:, 0] = pivot_row

        factors = window[:, 1:, 0] / pivot_row[:, :1]
        window[:, 1:] -= factors[:, :, None] * pivot_row[:, None, :]
        window[:, 1:, 0] = 0.0

        work[:, k, 2:7] = window[:, 0]
        work[:, k + 1, 1:6] = window[:, 1]
        work[:, k + 2, 0:5] = window[:, 2]

        multipliers[:, k] = factors
        pivots[:, k] = offset

    return BandedFactorization(upper=work[:, :m, 2:7].copy(),
                               multipliers=multipliers,
                               pivots=pivots,
                               batch_shape=batch_shape)


class DirectionalFactorization:
    """Factors of (I - θΔt D_j) for every line of one direction, applied to grid-shaped arrays."""

    def __init__(self, direction, theta_dt, factorization, operator=None, step_index=None):
        self.direction = direction
        self.theta_dt = theta_dt
        self.factorization = factorization
        self.operator = operator
        self.step_index = step_index

    def matches(self, operator, theta_dt, step_index=None):
        return self.operator is operator and self.theta_dt == theta_dt and self.step_index == step_index

    def solve(self, rhs):
        axis = self.direction - 1
        moved = np.moveaxis(np.asarray(rhs), axis, -1)
        solution = self.factorization.solve(np.ascontiguousarray(moved))
        return np.moveaxis(solution, -1, axis)


def factorize_direction(operator, theta_dt, step_index=None):
    matrix = BandedLineMatrix(operator.bands).shifted_identity(-theta_dt)
    return DirectionalFactorization(operator.direction, theta_dt, factorize(matrix), operator, step_index)


def solve_direction(grid, direction, theta_dt, operator, rhs, cache=None, step_index=None):
    """
    Solve (I - θΔt D_j) x = rhs on every line of ``direction``.
    :param cache: optional dict keyed by direction; factors are reused only for the same
        operator object, θΔt and step index
    :return: GridField on ``grid``
    """
    check_direction(grid, direction)
    if operator.direction != direction:
        raise ValueError(f'Operator for direction {operator.direction} used to solve direction {direction}')
    if rhs.grid != grid:
        raise ValueError('Right-hand side lives on a different grid')

    factors = None if cache is None else cache.get(direction)
    if factors is None or not factors.matches(operator, theta_dt, step_index):
        factors = factorize_direction(operator, theta_dt, step_index)
        if cache is not None:
            cache[direction] = factors

    return GridField(grid, factors.solve(rhs.as_array()))
