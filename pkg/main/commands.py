"""Subcommand handlers behind amfw-mol.py; each returns the process exit code."""
from pprint import pprint

from lib import console_lib
from lib.config_lib import ConfigError, ExperimentConfig
from main.experiment_runner import ExperimentRunner
from main.presets import PresetRegistry, list_presets
from main.table_verifier import get_summary_lines, verify_tables
from mol.amfw_integrator import get_method
from mol.stability import check_stability_condition
from result.reporter import Reporter

RUN_OVERRIDES = ('output_file', 'threads', 'long_runs', 'record_runtime', 'debug')


def _overrides(args):
    return {name: getattr(args, name, None) for name in RUN_OVERRIDES}


def _run_config(config_manager, file_config=None):
    console_lib.print_divider('Loading config')
    try:
        config = config_manager.update_config(file_config)
    except ConfigError as e:
        print(e)
        return ExperimentRunner.config_error_exit_code

    if config['debug']:
        console_lib.print_divider('Config')
        pprint(config)

    return ExperimentRunner(config).main()


def run_command(args):
    overrides = _overrides(args)
    overrides[ExperimentConfig.config_file_arg_name] = args.config
    return _run_config(ExperimentConfig(overrides))


def preset_command(args):
    try:
        registry = PresetRegistry()
        preset = registry.get(args.name)
    except ConfigError as e:
        print(e)
        return ExperimentRunner.config_error_exit_code

    if args.dump:
        registry.dump(args.name, args.dump)
        return 0

    return _run_config(ExperimentConfig(_overrides(args)), file_config=dict(preset.config))


def list_command(args):
    print(list_presets())
    return 0


def verify_command(args):
    names = [name.strip() for name in args.tables.split(',')] if args.tables else None

    try:
        summary = verify_tables(names, args.tolerance_profile, long_runs=args.long_runs, threads=args.threads)
    except (ConfigError, ValueError) as e:
        print(e)
        return ExperimentRunner.config_error_exit_code

    console_lib.print_divider('Summary')
    for line in get_summary_lines(summary):
        if line.startswith('RESULT'):
            console_lib.color_print(line)
        else:
            print(line)

    return 0 if summary.passed else ExperimentRunner.verify_failure_exit_code


def stability_seed(args):
    """The --seed option, else the config file's seed, else the default one."""
    config_manager = ExperimentConfig({ExperimentConfig.config_file_arg_name: getattr(args, 'config', None),
                                       'seed': args.seed})
    return config_manager.update_config()['seed']


def stability_command(args):
    try:
        tableau = get_method(args.method)
        seed = stability_seed(args)
        report = check_stability_condition(tableau, args.d, args.samples, c_trial=args.c_trial, seed=seed)
    except ConfigError as e:
        print(e)
        return ExperimentRunner.config_error_exit_code
    except ValueError as e:
        print(f'ERROR: {e}')
        return ExperimentRunner.config_error_exit_code

    console_lib.print_divider(f'Stability of {tableau.name} for d = {args.d}')
    print(f'Samples: {args.samples} (seed {seed})')
    print(f'Satisfied with C = {args.c_trial:g}: {report.satisfied_fraction * 100:.2f}%')
    print(f'Largest admissible C over the samples: {report.critical_c:.6g}')
    print(f'Smallest R + 1: {report.min_lower_gap:.6g}')

    if args.output_file:
        Reporter(args.output_file).write_stability_csv(report)

    return 0
