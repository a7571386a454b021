import math
import traceback
from concurrent.futures import ThreadPoolExecutor

from lib import console_lib
from lib.config_lib import ConfigError
from mol.amfw_integrator import BoundaryCorrection, IntegrationError, get_method
from mol.linalg_banded import SingularMatrixError
from problems.catalog import get_problem
from problems.error_lib import LevelResult, assemble_report, check_spatial_method, plan_levels, run_level
from result.reporter import Reporter

BYTES_PER_VALUE = 8
GIB = 1024 ** 3

# Finest 1/h run by default per dimension; long_runs lifts the cap.
DESK_CAPS = {3: 64, 4: 16, 2: 256}


class MemoryCapError(RuntimeError):
    pass


def estimate_memory(d, h_inverse, stages):
    """Bytes for one level: stage vectors, operator bands and LU work arrays on the closed lattice."""
    points = (h_inverse + 1) ** d
    return points * BYTES_PER_VALUE * (stages + 8 + 9 * d)


def desk_cap_reason(d, h_inverse, long_runs=False):
    cap = DESK_CAPS.get(d)
    if long_runs or cap is None or h_inverse <= cap:
        return None
    return f'desk cap 1/h <= {cap} for {d}D (enable long_runs)'


def build_problem(config):
    try:
        problem = get_problem(config['problem'], config['problem_params'])
        problem.check_invariants()
        return problem
    except ValueError as e:
        raise ConfigError(f'ERROR: {e}') from e


class ExperimentRunner:
    verify_failure_exit_code = 1
    config_error_exit_code = 2
    memory_cap_exit_code = 3
    solver_error_exit_code = 4

    def __init__(self, config, skip_over_memory=False):
        self.config = config
        self.skip_over_memory = skip_over_memory
        self.report = None

    def main(self):
        exit_code = 0

        try:
            console_lib.print_divider('Running experiment')
            self.report = self.run_experiment()

            console_lib.print_divider('Writing report')
            self.print_report(self.report)
            if self.config['output_file']:
                self.write_report(self.report)

        except ConfigError as e:
            print(e)
            exit_code = self.config_error_exit_code

        except MemoryCapError as e:
            print(f'ERROR: {e}')
            exit_code = self.memory_cap_exit_code

        except (IntegrationError, SingularMatrixError, FloatingPointError) as e:
            print(f'ERROR: Solver failure: {e}')
            exit_code = self.solver_error_exit_code

        except Exception:
            traceback.print_exc()
            exit_code = self.solver_error_exit_code

        return exit_code

    def plan(self, problem):
        config = self.config
        return plan_levels(config['estimator'], config['grid'], config['dt_rule'], config['kappa'],
                           config['dt_values'], t_end=problem.t_end)

    def check_level(self, problem, tableau, plan):
        """:return: reason the level is skipped, or None"""
        reason = desk_cap_reason(problem.d, plan.h_inverse, self.config['long_runs'])
        if reason:
            return reason

        required = estimate_memory(problem.d, plan.h_inverse, tableau.s)
        cap = self.config['memory_cap_gb'] * GIB
        if required > cap:
            message = f'h = 1/{plan.h_inverse} needs about {required / GIB:.1f} GiB, over the {cap / GIB:g} GiB cap'
            if not self.skip_over_memory:
                raise MemoryCapError(message)
            return message

        return None

    def run_experiment(self):
        config = self.config
        problem = build_problem(config)
        tableau = get_method(config['method'])
        correction = BoundaryCorrection(config['correction'])
        if config['estimator'] == 'spatial':
            try:
                check_spatial_method(tableau)
            except ValueError as e:
                raise ConfigError(f'ERROR: {e}') from e

        plans = self.plan(problem)
        skipped = {plan.h_inverse: self.check_level(problem, tableau, plan) for plan in plans}
        runnable = [plan for plan in plans if not skipped[plan.h_inverse]]

        if config.get('debug'):
            for plan in plans:
                print(console_lib.print_debug({'h': f'1/{plan.h_inverse}', 'dts': plan.dts,
                                               'dt_adjusted': plan.adjustment, 'skipped': skipped[plan.h_inverse]}))

        with ThreadPoolExecutor(max_workers=config['threads']) as executor:
            solved = list(executor.map(
                lambda plan: run_level(problem, tableau, correction, plan, l2_weighting=config['l2_weighting']),
                runnable))

        by_level = {result.plan.h_inverse: result for result in solved}
        results = [by_level.get(plan.h_inverse) or LevelResult.skip(plan, skipped[plan.h_inverse])
                   for plan in plans]

        metadata = {
            'problem': config['problem'],
            'problem_params': config['problem_params'],
            'method': tableau.name,
            'correction': correction.mode,
            'dt_rule': config['dt_rule'],
            'kappa': config['kappa'],
            'l2_weighting': config['l2_weighting'],
        }

        return assemble_report(config['estimator'], results, spatially_exact=problem.spatially_exact,
                               metadata=metadata)

    def print_report(self, report):
        rows = []
        for row in report.rows:
            if row.skipped:
                rows.append([f'1/{row.h_inverse}', f'{row.dt:.4e}', 'SKIPPED', '', 'SKIPPED', '', row.flag])
                continue
            rows.append([f'1/{row.h_inverse}', f'{row.dt:.4e}', _short(row.ge_l2), _order(row.p_l2),
                         _short(row.ge_max), _order(row.p_max), row.flag])

        console_lib.print_table(['h', 'dt', 'GE_2', '(p_2)', 'GE_inf', '(p_inf)', 'note'], rows)

    def write_report(self, report):
        reporter = Reporter(self.config['output_file'])
        return reporter.write_csv(report, self.config['norms'], self.config['record_runtime'])


def _short(value):
    return '' if math.isnan(value) else f'{value:.4e}'


def _order(value):
    return '---' if math.isnan(value) else f'{value:.2f}'


def run_experiment(config):
    """
    Run one validated config.
    :return: ErrorReport; the CSV is written when the config names an output file
    """
    runner = ExperimentRunner(config)
    report = runner.run_experiment()
    if config['output_file']:
        runner.write_report(report)
    return report
