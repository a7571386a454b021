import math

import pytest

from lib.config_lib import normalize_config
from main.presets import Preset
from main.table_verifier import (FAIL, PASS, SKIPPED, RowCheck, VerificationSummary, check_value, compare_rows,
                                 format_check, get_summary_lines, magnitude_deviation, verify_tables)
from mol.amfw_integrator import IntegrationError
from problems.error_lib import ErrorReport, ErrorRow


class FakeRegistry:
    def __init__(self, presets):
        self.presets = {preset.name: preset for preset in presets}

    def names(self):
        return list(self.presets)

    def get(self, name):
        return self.presets[name]


class TestTableVerifier:
    tolerance = {'magnitude': 0.15, 'order': 0.15}

    @pytest.fixture
    def preset(self):
        return Preset(name='table1', label='table1', description='',
                      config=normalize_config({'grid': [4, 8]}),
                      expected=[{'h': 4, 'ge_l2': 0.33, 'ge_max': 0.52},
                                {'h': 8, 'ge_l2': 0.060, 'p_l2': 2.45, 'ge_max': 0.11, 'p_max': 2.19},
                                {'h': 16, 'ge_l2': 0.0097}],
                      tolerance=dict(self.tolerance))

    @pytest.fixture
    def report(self):
        return ErrorReport(rows=[ErrorRow(h_inverse=4, dt=0.25, ge_l2=0.34, ge_max=0.50),
                                 ErrorRow(h_inverse=8, dt=0.125, ge_l2=0.058, p_l2=2.55, ge_max=0.14, p_max=1.84)])

    @pytest.mark.parametrize('column, expected, produced, factor, passed', [
        ('ge_l2', 0.10, 0.11, 1.0, True),
        ('ge_l2', 0.10, 0.086, 1.0, True),
        ('ge_l2', 0.10, 0.12, 1.0, False),
        ('ge_l2', 0.10, 0.11, 0.5, False),
        ('p_max', 2.90, 3.01, 1.0, True),
        ('p_max', 2.90, 3.10, 1.0, False),
        ('p_l2', 2.90, math.nan, 1.0, False),
        ('ge_max', 0.10, 0.10, 0.0, False),
    ])
    def test_check_value(self, column, expected, produced, factor, passed):
        _, _, result = check_value(column, expected, produced, self.tolerance, factor)

        assert result == passed

    @pytest.mark.parametrize('produced, passed', [
        (0.025, False),
        (0.06, True),
        (0.19, True),
        (0.21, False),
        (-0.1, False),
    ])
    def test_magnitude_factor_tolerance_bounds_both_sides(self, produced, passed):
        tolerance = {'magnitude': 0.15, 'magnitude_factor': 2.0, 'order': 0.3}

        _, _, result = check_value('ge_l2', 0.10, produced, tolerance, 1.0)

        assert result == passed

    @pytest.mark.parametrize('expected, produced, deviation', [
        (0.10, 0.20, math.log(2.0)),
        (0.10, 0.05, math.log(2.0)),
        (0.10, 0.025, math.log(4.0)),
        (0.0, 0.1, math.inf),
    ])
    def test_magnitude_deviation(self, expected, produced, deviation):
        assert magnitude_deviation(expected, produced) == pytest.approx(deviation)

    def test_compare_rows(self, preset, report):
        # Act
        checks = compare_rows(preset, report, 1.0)

        # Assert
        statuses = {(check.h_inverse, check.column): check.status for check in checks}
        assert statuses == {
            (4, 'ge_l2'): PASS,
            (4, 'ge_max'): PASS,
            (8, 'ge_l2'): PASS,
            (8, 'ge_max'): FAIL,
            (8, 'p_l2'): PASS,
            (8, 'p_max'): FAIL,
        }

    def test_skipped_rows_are_not_failures(self, preset, report):
        report.rows[1] = ErrorRow(h_inverse=8, dt=0.125, skipped=True, flag='desk cap')

        checks = compare_rows(preset, report, 1.0)

        assert [check.status for check in checks if check.h_inverse == 8] == [SKIPPED] * 4
        assert VerificationSummary(checks=checks).passed

    def test_verify_tables(self, mocker, preset, report):
        # Arrange
        mocker.patch('lib.console_lib.print_divider')
        mocker.patch('lib.console_lib.print_table')
        mock_run_experiment = mocker.patch('main.experiment_runner.ExperimentRunner.run_experiment',
                                           return_value=report)

        # Act
        summary = verify_tables(registry=FakeRegistry([preset]), threads=2)

        # Assert
        mock_run_experiment.assert_called_once()
        assert len(summary.checks) == 6
        assert len(summary.failures) == 2
        assert not summary.passed

    def test_exact_profile_never_passes(self, mocker, preset, report):
        mocker.patch('lib.console_lib.print_divider')
        mocker.patch('lib.console_lib.print_table')
        mocker.patch('main.experiment_runner.ExperimentRunner.run_experiment', return_value=report)

        summary = verify_tables(profile='exact', registry=FakeRegistry([preset]))

        assert summary.count(PASS) == 0
        assert get_summary_lines(summary)[-1] == 'RESULT: FAIL'

    def test_solver_errors_are_collected(self, mocker, preset):
        mocker.patch('lib.console_lib.print_divider')
        mocker.patch('builtins.print')
        mocker.patch('main.experiment_runner.ExperimentRunner.run_experiment',
                     side_effect=IntegrationError('diverged'))

        summary = verify_tables(registry=FakeRegistry([preset]))

        assert summary.errors == {'table1': 'diverged'}
        assert 'Preset table1 failed to run: diverged' in get_summary_lines(summary)

    def test_unknown_profile(self):
        with pytest.raises(ValueError, match='Unknown tolerance profile'):
            verify_tables(profile='loose', registry=FakeRegistry([]))

    def test_summary_lines(self):
        summary = VerificationSummary(checks=[
            RowCheck('table1', 8, 'ge_l2', 0.06, 0.058, 0.033, 0.15, PASS),
            RowCheck('table1', 16, 'ge_l2', 0.0097, math.nan, math.nan, math.nan, SKIPPED),
        ])

        assert get_summary_lines(summary) == ['Checks passed: 1', 'Checks failed: 0', 'Checks skipped: 1',
                                              'RESULT: PASS']

    def test_format_check(self):
        check = RowCheck('table1', 16, 'p_l2', 2.64, math.nan, math.nan, math.nan, SKIPPED)

        assert format_check(check) == ['1/16', 'p_l2', '2.6400e+00', '', '', '', SKIPPED]
