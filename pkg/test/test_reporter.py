import math

import numpy as np
import pytest

from mol.amfw_integrator import AMFW_HV
from mol.stability import check_stability_condition
from problems.error_lib import ErrorReport, ErrorRow
from result.reporter import CSV_HEADER, Reporter, format_number


class TestReporter:
    test_report_path = '/test/path/to/report.csv'

    @pytest.fixture
    def reporter(self):
        return Reporter(self.test_report_path)

    @pytest.fixture
    def report(self):
        rows = [ErrorRow(h_inverse=4, dt=0.25, ge_l2=0.33, ge_max=0.52, runtime=0.5),
                ErrorRow(h_inverse=8, dt=0.125, ge_l2=0.06, p_l2=2.45, ge_max=0.11, p_max=2.19, runtime=1.25),
                ErrorRow(h_inverse=16, dt=0.0625, skipped=True, flag='desk cap 1/h <= 8 for 3D (enable long_runs)')]
        return ErrorReport(rows=rows, metadata={'problem': 'problem1', 'problem_params': {'C': 0.0},
                                                'estimator': 'simultaneous'})

    @pytest.mark.parametrize('value, expected', [
        (0.1, '1.0000000000000001e-01'),
        (math.nan, ''),
        (None, ''),
        (3, '3.0000000000000000e+00'),
    ])
    def test_format_number(self, value, expected):
        assert format_number(value) == expected

    def test_format_number_keeps_full_precision(self):
        value = 1.0 / 3.0

        assert float(format_number(value)) == value

    def test_render_csv(self, reporter, report):
        # Act
        lines = reporter.render_csv(report).splitlines()

        # Assert
        assert lines[:3] == ['# estimator: simultaneous',
                             '# problem: problem1',
                             '# problem_params: C=0.0']
        assert lines[3] == '# flag: h=1/16 desk cap 1/h <= 8 for 3D (enable long_runs)'

        header_index = lines.index(','.join(CSV_HEADER))
        first, second, skipped = [line.split(',') for line in lines[header_index + 1:]]
        assert first[0] == '2.5000000000000000e-01'
        assert first[3] == '' and first[5] == ''
        assert float(second[3]) == 2.45
        assert skipped[2:] == ['SKIPPED', '', 'SKIPPED', '']

    def test_single_norm_leaves_other_columns_empty(self, reporter, report):
        lines = reporter.render_csv(report, norms=('max',)).splitlines()

        second = lines[-2].split(',')
        assert second[2] == '' and second[3] == ''
        assert float(second[4]) == 0.11

    def test_adjusted_steps_and_runtime_are_recorded(self, reporter, report):
        report.rows[1].adjustment = 0.96

        lines = reporter.render_csv(report, record_runtime=True).splitlines()

        assert '# dt_adjusted: h=1/8 factor=9.5999999999999996e-01' in lines
        assert '# runtime_s: h=1/4 0.500' in lines
        assert '# runtime_s: h=1/8 1.250' in lines
        assert not any(line.startswith('# runtime_s: h=1/16') for line in lines)

    def test_write_csv(self, mocker, reporter, report):
        # Arrange
        mock_open = mocker.patch('builtins.open', mocker.mock_open())
        mock_print = mocker.patch('builtins.print')

        # Act
        content = reporter.write_csv(report)

        # Assert
        mock_open.assert_called_once_with(self.test_report_path, 'w')
        mock_open().write.assert_called_once_with(content)
        mock_print.assert_called_once_with(f'CSV report generated: {self.test_report_path}')

    def test_write_stability_csv(self, tmp_path):
        # Arrange
        path = tmp_path / 'stability.csv'
        condition_report = check_stability_condition(AMFW_HV, 2, 5, seed=1)

        # Act
        Reporter(str(path)).write_stability_csv(condition_report)

        # Assert
        lines = path.read_text().splitlines()
        assert lines[0] == '# method: amfw-hv'
        assert lines[2] == '# seed: 1'
        assert lines[4] == 'index,z_1,z_2,R,upper_gap'
        assert len(lines) == 5 + 5
        values = lines[5].split(',')
        assert np.isclose(float(values[3]), condition_report.values[0])
