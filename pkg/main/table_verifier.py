import math
from dataclasses import dataclass, field

from lib import console_lib
from main.experiment_runner import ExperimentRunner
from main.presets import PresetRegistry
from mol.amfw_integrator import IntegrationError

# Multipliers on each preset's own tolerances. With 0 nothing passes: the
# reference values carry two to four digits and are not bit-exact targets.
TOLERANCE_PROFILES = {
    'default': 1.0,
    'strict': 0.5,
    'exact': 0.0,
}

MAGNITUDE_COLUMNS = ('ge_l2', 'ge_max')
ORDER_COLUMNS = ('p_l2', 'p_max')

PASS = 'PASS'
FAIL = 'FAIL'
SKIPPED = 'SKIPPED'


@dataclass
class RowCheck:
    preset: str
    h_inverse: int
    column: str
    expected: float
    produced: float
    delta: float
    allowed: float
    status: str


@dataclass
class VerificationSummary:
    checks: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    @property
    def failures(self):
        return [check for check in self.checks if check.status == FAIL]

    @property
    def passed(self):
        return not self.failures and not self.errors

    def count(self, status):
        return sum(1 for check in self.checks if check.status == status)


def magnitude_deviation(expected, produced):
    """|ln(produced/expected)|: 2× and 0.5× deviate equally."""
    if math.isnan(produced):
        return math.nan
    if expected == 0.0 or produced / expected <= 0.0:
        return math.inf
    return abs(math.log(produced / expected))


def check_value(column, expected, produced, tolerance, factor):
    """
    :return: (delta, allowed, passed)

    Magnitudes compare relatively, or within ``magnitude_factor`` in either direction
    when the preset sets one; orders compare absolutely.
    """
    if column in MAGNITUDE_COLUMNS and tolerance.get('magnitude_factor'):
        allowed = math.log(tolerance['magnitude_factor']) * factor
        delta = magnitude_deviation(expected, produced)
    elif column in MAGNITUDE_COLUMNS:
        allowed = tolerance['magnitude'] * factor
        delta = abs(produced / expected - 1.0) if expected != 0.0 else math.inf
    else:
        allowed = tolerance['order'] * factor
        delta = abs(produced - expected)

    if math.isnan(delta):
        return delta, allowed, False
    return delta, allowed, allowed > 0.0 and delta <= allowed


def compare_rows(preset, report, factor):
    checks = []
    for expected_row in preset.expected:
        h_inverse = expected_row['h']
        if h_inverse not in preset.config['grid']:
            continue

        row = report.row_for(h_inverse)
        for column in MAGNITUDE_COLUMNS + ORDER_COLUMNS:
            if column not in expected_row:
                continue

            expected = float(expected_row[column])
            if row.skipped:
                checks.append(RowCheck(preset.name, h_inverse, column, expected, math.nan, math.nan, math.nan,
                                       SKIPPED))
                continue

            produced = getattr(row, column)
            delta, allowed, passed = check_value(column, expected, produced, preset.tolerance, factor)
            checks.append(RowCheck(preset.name, h_inverse, column, expected, produced, delta, allowed,
                                   PASS if passed else FAIL))

    return checks


def verify_tables(names=None, profile='default', registry=None, long_runs=False, threads=1):
    if profile not in TOLERANCE_PROFILES:
        raise ValueError(f'Unknown tolerance profile "{profile}", expected one of {sorted(TOLERANCE_PROFILES)}')

    registry = registry or PresetRegistry()
    names = names or registry.names()
    factor = TOLERANCE_PROFILES[profile]
    summary = VerificationSummary()

    for name in names:
        preset = registry.get(name)
        console_lib.print_divider(f'Verifying {name} ({preset.label})')

        config = dict(preset.config, output_file=None, long_runs=long_runs, threads=threads)
        try:
            report = ExperimentRunner(config, skip_over_memory=True).run_experiment()
        except IntegrationError as e:
            summary.errors[name] = str(e)
            print(f'ERROR: {name}: {e}')
            continue

        checks = compare_rows(preset, report, factor)
        console_lib.print_table(['h', 'column', 'expected', 'produced', 'delta', 'allowed', 'status'],
                                [format_check(check) for check in checks])
        summary.checks.extend(checks)

    return summary


def format_check(check):
    def number(value, spec):
        return '' if math.isnan(value) else format(value, spec)

    return [f'1/{check.h_inverse}', check.column, number(check.expected, '.4e'), number(check.produced, '.4e'),
            number(check.delta, '.3f'), number(check.allowed, '.3f'), check.status]


def get_summary_lines(summary):
    lines = [f'Checks passed: {summary.count(PASS)}',
             f'Checks failed: {summary.count(FAIL)}',
             f'Checks skipped: {summary.count(SKIPPED)}']

    for name, error in summary.errors.items():
        lines.append(f'Preset {name} failed to run: {error}')

    lines.append('RESULT: PASS' if summary.passed else 'RESULT: FAIL')
    return lines
