"""
Discrete norms, global errors and convergence-order estimation.

A sweep is planned as one LevelPlan per grid level, each level is solved
independently (``run_level``) and the results are combined into an
ErrorReport by ``assemble_report``. The three estimators wrap these steps.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from mol.amfw_integrator import NO_CORRECTION, OPERATOR_EXTENSION, integrate
from mol.tensor_grid import GridField, grid_for_h

ESTIMATORS = ('simultaneous', 'spatial', 'temporal-fixed-h')
DT_RULES = ('equal-to-h', 'kappa-h', 'kappa-h53', 'fixed')
POINTS_WEIGHTING = 'points'
MESH_WEIGHTING = 'mesh'
L2_WEIGHTINGS = (POINTS_WEIGHTING, MESH_WEIGHTING)
SPATIALLY_EXACT_FLAG = 'spatially-exact'
ZERO_ERROR_FLAG = 'zero-error'
SPATIAL_MIN_ORDER = 3


def _interior(field):
    if isinstance(field, GridField):
        return field.interior_values()
    return np.asarray(field)


def weighted_l2_norm(field, grid=None, weighting=MESH_WEIGHTING):
    """
    √(w · Σ V²) over interior points.

    ``mesh`` weighs each point by ∏Δx_l, ``points`` by 1/∏n_l (root mean square).
    The two differ by the factor ∏(n_l + 1)/n_l, visible only on coarse grids.
    """
    if weighting not in L2_WEIGHTINGS:
        raise ValueError(f'Unknown l2 weighting "{weighting}", expected one of {L2_WEIGHTINGS}')

    grid = field.grid if grid is None else grid
    values = _interior(field)
    if weighting == POINTS_WEIGHTING:
        return math.sqrt(float(np.mean(values * values))) if values.size else 0.0
    return math.sqrt(float(np.prod(grid.dx)) * float(np.sum(values * values)))


def max_norm(field):
    values = _interior(field)
    return float(np.max(np.abs(values))) if values.size else 0.0


def global_error(problem, V, t=None, l2_weighting=POINTS_WEIGHTING):
    """
    GE = u(x_G, t) - V at the interior points of V's grid.
    :return: (GE₂, GE_∞)
    """
    if problem.exact is None:
        raise ValueError(f'Problem "{problem.name}" has no exact solution')

    t = problem.t_end if t is None else t
    exact = GridField.from_function(V.grid, problem.exact, t)
    difference = exact - V
    return weighted_l2_norm(difference, weighting=l2_weighting), max_norm(difference)


def estimate_order_simultaneous(coarse_error, fine_error):
    """p ≃ log₂(‖GE(2h, 2Δt)‖/‖GE(h, Δt)‖)"""
    if coarse_error <= 0.0 or fine_error <= 0.0:
        raise ValueError(f'Order estimation needs positive errors, got {coarse_error} and {fine_error}')
    return math.log2(coarse_error / fine_error)


def temporal_order_from_differences(coarse_difference, fine_difference):
    """p ≃ log₂(‖V(2Δt) - V(Δt)‖/‖V(Δt) - V(Δt/2)‖)"""
    if coarse_difference <= 0.0 or fine_difference <= 0.0:
        raise ValueError('Temporal order estimation needs nonzero solution differences')
    return math.log2(coarse_difference / fine_difference)


def adjust_step(dt, t_end=1.0):
    """
    Shrink Δt so that t_end is a whole number of steps.
    :return: (adjusted Δt, adjusted/requested ratio)
    """
    if dt <= 0.0:
        raise ValueError(f'Step size must be positive, got {dt}')

    steps = math.ceil(t_end / dt - 1e-9)
    adjusted = t_end / steps
    return adjusted, adjusted / dt


def step_size(rule, h_inverse, kappa=1.0, t_end=1.0, fixed=None):
    h = 1.0 / h_inverse
    if rule == 'equal-to-h':
        dt = h
    elif rule == 'kappa-h':
        dt = kappa * h
    elif rule == 'kappa-h53':
        dt = kappa * h ** (5.0 / 3.0)
    elif rule == 'fixed':
        if fixed is None:
            raise ValueError('The fixed step rule needs an explicit step size')
        dt = fixed
    else:
        raise ValueError(f'Unknown step rule "{rule}", expected one of {DT_RULES}')

    return adjust_step(dt, t_end)


@dataclass
class LevelPlan:
    h_inverse: int
    dt: float
    adjustment: float = 1.0
    # Step sizes actually integrated; the first one carries the reported GE.
    dts: tuple = ()

    def __post_init__(self):
        if not self.dts:
            self.dts = (self.dt,)

    @property
    def h(self):
        return 1.0 / self.h_inverse


@dataclass
class LevelResult:
    plan: LevelPlan
    ge_l2: float = math.nan
    ge_max: float = math.nan
    differences_l2: tuple = ()
    differences_max: tuple = ()
    skipped: bool = False
    reason: str = ''
    runtime: float = 0.0

    @classmethod
    def skip(cls, plan, reason):
        return cls(plan=plan, skipped=True, reason=reason)


@dataclass
class ErrorRow:
    h_inverse: int
    dt: float
    ge_l2: float = math.nan
    p_l2: float = math.nan
    ge_max: float = math.nan
    p_max: float = math.nan
    skipped: bool = False
    flag: str = ''
    adjustment: float = 1.0
    runtime: float = 0.0

    @property
    def h(self):
        return 1.0 / self.h_inverse


@dataclass
class ErrorReport:
    """
    Rows of (h, Δt, GE₂, p₂, GE_∞, p_∞), one per grid level in input order.

    Order entries are NaN on the first row and next to skipped rows.
    """
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def row_for(self, h_inverse):
        for row in self.rows:
            if row.h_inverse == h_inverse:
                return row
        raise KeyError(f'No row for h = 1/{h_inverse}')

    @property
    def adjusted(self):
        return any(abs(row.adjustment - 1.0) > 1e-12 for row in self.rows)


def plan_levels(estimator, h_inverses, dt_rule='equal-to-h', kappa=1.0, dt_values=None, t_end=1.0):
    if estimator not in ESTIMATORS:
        raise ValueError(f'Unknown estimator "{estimator}", expected one of {ESTIMATORS}')
    if dt_rule == 'fixed' and (dt_values is None or len(dt_values) != len(h_inverses)):
        raise ValueError('The fixed step rule needs one step size per grid level')

    plans = []
    for index, h_inverse in enumerate(h_inverses):
        fixed = dt_values[index] if dt_rule == 'fixed' else None
        dt, adjustment = step_size(dt_rule, h_inverse, kappa, t_end, fixed)

        dts = (dt,)
        if estimator == 'temporal-fixed-h':
            # 2Δt must divide t_end too
            steps = int(round(t_end / dt))
            if steps % 2:
                requested = dt / adjustment
                dt = t_end / (steps + 1)
                adjustment = dt / requested
            dts = (dt, 2.0 * dt, dt / 2.0)

        plans.append(LevelPlan(h_inverse=h_inverse, dt=dt, adjustment=adjustment, dts=dts))

    return plans


def level_grid(problem, correction, h_inverse):
    return grid_for_h(h_inverse, problem.d, include_boundary=correction.needs_boundary_points)


def run_level(problem, tableau, correction, plan, l2_weighting=POINTS_WEIGHTING):
    """Solve one grid level at every step size of its plan and measure it."""
    started = time.perf_counter()
    grid = level_grid(problem, correction, plan.h_inverse)

    solutions = [integrate(problem, grid, tableau, correction, dt=dt) for dt in plan.dts]
    result = LevelResult(plan=plan)

    if problem.exact is not None:
        result.ge_l2, result.ge_max = global_error(problem, solutions[0], l2_weighting=l2_weighting)

    if len(solutions) == 3:
        main, coarse, fine = solutions
        result.differences_l2 = (weighted_l2_norm(coarse - main, weighting=l2_weighting),
                                  weighted_l2_norm(main - fine, weighting=l2_weighting))
        result.differences_max = (max_norm(coarse - main), max_norm(main - fine))

    result.runtime = time.perf_counter() - started
    return result


def _ratio_order(coarse, fine):
    if not (coarse > 0.0 and fine > 0.0) or not (math.isfinite(coarse) and math.isfinite(fine)):
        return math.nan
    return estimate_order_simultaneous(coarse, fine)


def assemble_report(estimator, results, spatially_exact=False, metadata=None):
    report = ErrorReport(metadata=dict(metadata or {}))
    report.metadata['estimator'] = estimator

    previous = None
    for result in results:
        plan = result.plan
        row = ErrorRow(h_inverse=plan.h_inverse, dt=plan.dt, adjustment=plan.adjustment,
                       skipped=result.skipped, runtime=result.runtime)

        if result.skipped:
            row.flag = result.reason
            report.rows.append(row)
            previous = None
            continue

        row.ge_l2, row.ge_max = result.ge_l2, result.ge_max

        if estimator == 'temporal-fixed-h':
            row.p_l2 = temporal_order_from_differences(*result.differences_l2)
            row.p_max = temporal_order_from_differences(*result.differences_max)
        elif estimator == 'spatial' and spatially_exact:
            row.flag = SPATIALLY_EXACT_FLAG
        elif previous is not None:
            row.p_l2 = _ratio_order(previous.ge_l2, row.ge_l2)
            row.p_max = _ratio_order(previous.ge_max, row.ge_max)
            if math.isnan(row.p_l2) or math.isnan(row.p_max):
                row.flag = ZERO_ERROR_FLAG

        report.rows.append(row)
        previous = row

    return report


def run_sweep(problem, tableau, correction, estimator, plans, map_func=map, metadata=None,
              l2_weighting=POINTS_WEIGHTING):
    results = list(map_func(lambda plan: run_level(problem, tableau, correction, plan, l2_weighting=l2_weighting),
                            plans))
    metadata = dict(metadata or {}, l2_weighting=l2_weighting)
    return assemble_report(estimator, results, spatially_exact=problem.spatially_exact, metadata=metadata)


def estimate_simultaneous_orders(problem, tableau, h_inverses, correction=NO_CORRECTION,
                                 dt_rule='equal-to-h', kappa=1.0, map_func=map, l2_weighting=POINTS_WEIGHTING):
    plans = plan_levels('simultaneous', h_inverses, dt_rule, kappa, t_end=problem.t_end)
    return run_sweep(problem, tableau, correction, 'simultaneous', plans, map_func, l2_weighting=l2_weighting)


def check_spatial_method(tableau):
    """Δt = κh^{5/3} hides the time error behind O(h²) only for methods of order three or more."""
    if tableau.order < SPATIAL_MIN_ORDER:
        raise ValueError(f'Spatial order estimation needs a method of order >= {SPATIAL_MIN_ORDER}, '
                         f'"{tableau.name}" has order {tableau.order}')


def estimate_spatial_order(problem, tableau, h_inverses, kappa=1.0, correction=OPERATOR_EXTENSION,
                           map_func=map, l2_weighting=POINTS_WEIGHTING):
    """
    Δt = κh^{5/3}, shrunk to hit the final time; p from consecutive levels.

    Problems without spatial error report NaN orders flagged as spatially exact.
    """
    check_spatial_method(tableau)
    plans = plan_levels('spatial', h_inverses, 'kappa-h53', kappa, t_end=problem.t_end)
    return run_sweep(problem, tableau, correction, 'spatial', plans, map_func,
                     metadata={'kappa': kappa}, l2_weighting=l2_weighting)


def estimate_temporal_order_fixed_h(problem, tableau, h_inverses, kappa=1.0, correction=NO_CORRECTION,
                                    map_func=map, l2_weighting=POINTS_WEIGHTING):
    """Runs Δt ∈ {2κh, κh, κh/2} per level; p needs no exact solution."""
    plans = plan_levels('temporal-fixed-h', h_inverses, 'kappa-h', kappa, t_end=problem.t_end)
    return run_sweep(problem, tableau, correction, 'temporal-fixed-h', plans, map_func,
                     metadata={'kappa': kappa}, l2_weighting=l2_weighting)
