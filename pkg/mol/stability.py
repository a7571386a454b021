"""
Stability function of AMF-W methods on the split scalar test y' = (λ_1 + ... + λ_d) y.

R(z_1, ..., z_d) = 1 + z·bᵀ(Π·I - L - z·A)^-1 𝟏 with z = Σ z_j and
Π = ∏ (1 - θ z_j).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mol.amfw_integrator import StepContext, amfw_step
from mol.space_disc import DiagonalJacobian

SAMPLE_EXPONENT_RANGE = (-4.0, 8.0)
CONDITION_TOLERANCE = 1e-12


@dataclass
class StabilityEvaluation:
    tableau: object
    z: np.ndarray
    value: complex
    total: complex
    product: complex


def _system_matrices(tableau, z):
    z = np.asarray(z, dtype=np.complex128)
    total = z.sum(axis=-1)
    product = np.prod(1.0 - tableau.theta * z, axis=-1)
    s = tableau.s
    matrices = product[..., None, None] * np.eye(s) - tableau.L - total[..., None, None] * tableau.A
    return total, product, matrices


def evaluate_stability(tableau, z):
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    total, product, matrix = _system_matrices(tableau, z)

    try:
        x = np.linalg.solve(matrix, np.ones(tableau.s, dtype=np.complex128))
    except np.linalg.LinAlgError as error:
        raise ValueError(f'Stability system is singular at z = {z}') from error

    value = 1.0 + total * (tableau.b @ x)
    return StabilityEvaluation(tableau=tableau, z=z, value=complex(value), total=complex(total),
                               product=complex(product))


def eval_R(tableau, z):
    return evaluate_stability(tableau, z).value


def eval_R_batch(tableau, z):
    """R at every row of a (samples, d) array of arguments."""
    total, _, matrices = _system_matrices(tableau, z)
    ones = np.ones(matrices.shape[:-1] + (1,), dtype=np.complex128)

    try:
        x = np.linalg.solve(matrices, ones)[..., 0]
    except np.linalg.LinAlgError as error:
        raise ValueError('Stability system is singular at one of the samples') from error

    return 1.0 + total * (x @ tableau.b)


class SplitDahlquistSystem:
    """F_0 = 0 and F_j(y) = λ_j y: one AMF-W step from y = 1 with Δt = 1 returns R(λ_1, ..., λ_d)."""

    def __init__(self, lambdas, t=0.0, y=None):
        self.lambdas = np.asarray(lambdas, dtype=np.complex128)
        self.t = t
        self.y = np.ones(1, dtype=np.complex128) if y is None else y

    @property
    def d(self):
        return self.lambdas.size

    def rhs(self, t, y):
        return self.lambdas.sum() * y

    def jacobian(self, j):
        if j == 0:
            return DiagonalJacobian(np.zeros(1, dtype=np.complex128))
        return DiagonalJacobian(np.full(1, self.lambdas[j - 1]))

    def time_derivatives(self):
        return [np.zeros(1, dtype=np.complex128) for _ in range(self.d + 1)]

    def finalize_step(self, t, y):
        return y


def dahlquist_amplification(tableau, z):
    system = SplitDahlquistSystem(z)
    ctx = StepContext.freeze(system, 1.0, tableau.theta)
    return complex(amfw_step(ctx, tableau, 0.0, system.y)[0])


@dataclass
class ConditionReport:
    """
    Sampled check of -1 <= R(x) <= 1 + C·Σx/∏(1 - θx) on the negative orthant.

    ``critical_c`` is the largest C for which the upper bound holds at every
    sample (the bound term is negative, so larger C is stricter).
    Valid constants form the ray C <= critical_c, so "the smallest C making
    the bound hold" has no finite value and this endpoint is what is reported.
    """
    tableau_name: str
    d: int
    c_trial: float
    samples: np.ndarray
    values: np.ndarray
    bound_terms: np.ndarray
    upper_gaps: np.ndarray
    lower_gaps: np.ndarray
    seed: int = 0

    @property
    def max_violation(self):
        return float(self.upper_gaps.max())

    @property
    def min_lower_gap(self):
        return float(self.lower_gaps.min())

    @property
    def satisfied(self):
        return (self.upper_gaps <= CONDITION_TOLERANCE) & (self.lower_gaps >= -CONDITION_TOLERANCE)

    @property
    def satisfied_fraction(self):
        return float(np.mean(self.satisfied))

    @property
    def critical_c(self):
        return float(np.min((self.values - 1.0) / self.bound_terms))

    @property
    def violated(self):
        return self.min_lower_gap < -CONDITION_TOLERANCE or self.critical_c <= 0.0

    def rows(self):
        for index in range(self.values.size):
            yield index, float(self.values[index]), float(self.upper_gaps[index])


def sample_negative_orthant(d, sample_count, seed=0):
    rng = np.random.default_rng(seed)
    exponents = rng.uniform(*SAMPLE_EXPONENT_RANGE, size=(sample_count, d))
    return -(10.0 ** exponents)


def check_stability_condition(tableau, d, sample_count, c_trial=1.0, seed=0):
    if sample_count < 1:
        raise ValueError('At least one sample is required')

    samples = sample_negative_orthant(d, sample_count, seed)
    values = eval_R_batch(tableau, samples).real
    bound_terms = samples.sum(axis=1) / np.prod(1.0 - tableau.theta * samples, axis=1)

    return ConditionReport(tableau_name=tableau.name,
                           d=d,
                           c_trial=c_trial,
                           samples=samples,
                           values=values,
                           bound_terms=bound_terms,
                           upper_gaps=values - 1.0 - c_trial * bound_terms,
                           lower_gaps=values + 1.0,
                           seed=seed)
