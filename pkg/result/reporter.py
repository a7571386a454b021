import csv
import io
import math

CSV_HEADER = ('h', 'dt', 'ge_l2', 'p_l2', 'ge_max', 'p_max')
SKIPPED = 'SKIPPED'


def format_number(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''
    return format(float(value), '.16e')


def format_h(h_inverse):
    return format_number(1.0 / h_inverse)


class Reporter:
    def __init__(self, report_path):
        self.report_path = report_path

    @staticmethod
    def metadata_lines(report, record_runtime=False):
        lines = []
        for key in sorted(report.metadata):
            value = report.metadata[key]
            if isinstance(value, dict):
                value = ','.join(f'{k}={v}' for k, v in sorted(value.items()))
            elif isinstance(value, (list, tuple)):
                value = ','.join(str(v) for v in value)
            lines.append(f'# {key}: {value}')

        for row in report.rows:
            if abs(row.adjustment - 1.0) > 1e-12:
                lines.append(f'# dt_adjusted: h=1/{row.h_inverse} factor={format_number(row.adjustment)}')
            if row.flag:
                lines.append(f'# flag: h=1/{row.h_inverse} {row.flag}')
            if record_runtime and not row.skipped:
                lines.append(f'# runtime_s: h=1/{row.h_inverse} {row.runtime:.3f}')

        return lines

    @staticmethod
    def row_cells(row, norms=('l2', 'max')):
        if row.skipped:
            return [format_h(row.h_inverse), format_number(row.dt), SKIPPED, '', SKIPPED, '']

        l2 = 'l2' in norms
        maximum = 'max' in norms
        return [format_h(row.h_inverse),
                format_number(row.dt),
                format_number(row.ge_l2) if l2 else '',
                format_number(row.p_l2) if l2 else '',
                format_number(row.ge_max) if maximum else '',
                format_number(row.p_max) if maximum else '']

    def render_csv(self, report, norms=('l2', 'max'), record_runtime=False):
        buffer = io.StringIO()
        for line in self.metadata_lines(report, record_runtime):
            buffer.write(line + '\n')

        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for row in report.rows:
            writer.writerow(self.row_cells(row, norms))

        return buffer.getvalue()

    def write_csv(self, report, norms=('l2', 'max'), record_runtime=False):
        content = self.render_csv(report, norms, record_runtime)
        with open(self.report_path, 'w') as report_file:
            report_file.write(content)

        print(f'CSV report generated: {self.report_path}')
        return content

    def write_stability_csv(self, condition_report):
        d = condition_report.d
        with open(self.report_path, 'w') as report_file:
            report_file.write(f'# method: {condition_report.tableau_name}\n')
            report_file.write(f'# c_trial: {format_number(condition_report.c_trial)}\n')
            report_file.write(f'# seed: {condition_report.seed}\n')
            report_file.write(f'# critical_c: {format_number(condition_report.critical_c)}\n')

            writer = csv.writer(report_file, lineterminator='\n')
            writer.writerow(['index'] + [f'z_{j}' for j in range(1, d + 1)] + ['R', 'upper_gap'])
            for index, value, gap in condition_report.rows():
                sample = [format_number(z) for z in condition_report.samples[index]]
                writer.writerow([index] + sample + [format_number(value), format_number(gap)])

        print(f'Stability report generated: {self.report_path}')
