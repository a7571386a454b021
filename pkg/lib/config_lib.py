import os

import yaml

from mol.amfw_integrator import CORRECTION_MODES, METHODS
from problems.catalog import PROBLEM_PARAMETERS, PROBLEMS
from problems.error_lib import DT_RULES, ESTIMATORS, L2_WEIGHTINGS

NORMS = ('l2', 'max')
MIN_H_INVERSE = 4


class ConfigError(ValueError):
    pass


def _require(condition, message):
    if not condition:
        raise ConfigError(f'ERROR: {message}')


class ExperimentConfig:
    config_path = None
    command_line_args = {}

    config_file_arg_name = 'config_file'

    env_overrides = {
        'AMFW_THREADS': ('threads', int),
        'AMFW_MEMORY_CAP_GB': ('memory_cap_gb', float),
    }

    def __init__(self, args_dict: dict = None):
        if args_dict is None:
            return

        args_dict = dict(args_dict)
        self.config_path = args_dict.pop(self.config_file_arg_name, None)
        self.command_line_args = args_dict

    def load_config_file(self, path=None):
        path = path or self.config_path
        try:
            with open(path) as config_file:
                config = yaml.safe_load(config_file)
        except yaml.YAMLError as e:
            raise ConfigError(f'ERROR: Failed to load the config yaml, please check the syntax.\n{e}') from e
        except OSError as e:
            raise ConfigError(f'ERROR: Cannot read config file "{path}": {e.strerror}') from e

        if config is None:
            return {}
        _require(isinstance(config, dict), f'Config file "{path}" must contain a mapping')
        return config

    def update_config(self, file_config=None):
        """
        Defaults, then the config file (or ``file_config``), then command-line
        arguments, then environment overrides.
        :return: the validated config
        """
        config = self.get_default_config()

        if file_config is None and self.config_path is not None:
            file_config = self.load_config_file()

        unknown = set(file_config or {}) - set(config)
        _require(not unknown, f'Unknown config keys: {", ".join(sorted(unknown))}')

        config.update(file_config or {})

        self.__override_config_from_cmd_line_arg(config)
        self.__override_config_from_env(config)

        self.config = self.validate_config(config)
        return self.config

    def __override_config_from_cmd_line_arg(self, config):
        for arg_name, arg_value in self.command_line_args.items():
            if arg_name not in config or arg_value is None or arg_value == config[arg_name]:
                continue

            print(f'Overriding "{arg_name}" config item with command-line argument value...')
            config[arg_name] = arg_value

    def __override_config_from_env(self, config):
        for env_var_name, (key, cast) in self.env_overrides.items():
            raw_value = os.environ.get(env_var_name)
            if raw_value is None or raw_value == '':
                continue

            try:
                config[key] = cast(raw_value)
            except ValueError:
                raise ConfigError(f'ERROR: Environment variable {env_var_name} has an invalid value "{raw_value}"')

    def validate_config(self, config):
        """Checks the schema and returns the normalized config."""
        config = dict(config)

        _require(config['problem'] in PROBLEMS,
                 f'Unknown problem "{config["problem"]}", expected one of {", ".join(sorted(PROBLEMS))}')

        params = config['problem_params'] or {}
        _require(isinstance(params, dict), 'problem_params must be a mapping')
        unknown_params = set(params) - set(PROBLEM_PARAMETERS[config['problem']])
        _require(not unknown_params,
                 f'Problem "{config["problem"]}" does not take parameters {", ".join(sorted(unknown_params))}')
        config['problem_params'] = {key: self.__as_number(key, value) for key, value in params.items()}

        _require(config['method'] in METHODS,
                 f'Unknown method "{config["method"]}", expected one of {", ".join(sorted(METHODS))}')
        _require(config['correction'] in CORRECTION_MODES,
                 f'Unknown correction "{config["correction"]}", expected one of {", ".join(CORRECTION_MODES)}')
        _require(config['estimator'] in ESTIMATORS,
                 f'Unknown estimator "{config["estimator"]}", expected one of {", ".join(ESTIMATORS)}')
        _require(config['dt_rule'] in DT_RULES,
                 f'Unknown dt_rule "{config["dt_rule"]}", expected one of {", ".join(DT_RULES)}')

        grid = config['grid']
        _require(isinstance(grid, list) and len(grid) > 0, 'Please provide a non-empty grid list of 1/h values')
        _require(all(isinstance(value, int) and not isinstance(value, bool) for value in grid),
                 'Grid levels must be integers (inverse mesh widths 1/h)')
        _require(all(value >= MIN_H_INVERSE for value in grid),
                 f'Grid levels must be at least {MIN_H_INVERSE}')
        _require(all(coarse < fine for coarse, fine in zip(grid, grid[1:])),
                 'Grid levels must be strictly increasing')

        config['kappa'] = self.__as_number('kappa', config['kappa'])
        _require(config['kappa'] > 0.0, 'kappa must be positive')

        if config['dt_rule'] == 'fixed':
            dt_values = config['dt_values']
            _require(isinstance(dt_values, list) and len(dt_values) == len(grid),
                     'dt_values must list one step size per grid level for the fixed dt_rule')
            config['dt_values'] = [self.__as_number('dt_values', value) for value in dt_values]
            _require(all(value > 0.0 for value in config['dt_values']), 'dt_values must be positive')
        else:
            _require(config['dt_values'] is None, 'dt_values is only used with the fixed dt_rule')

        _require(config['estimator'] != 'spatial' or config['dt_rule'] == 'kappa-h53',
                 'The spatial estimator needs dt_rule kappa-h53')

        norms = config['norms']
        _require(isinstance(norms, list) and norms and set(norms) <= set(NORMS),
                 f'norms must be a non-empty subset of {", ".join(NORMS)}')
        config['norms'] = [norm for norm in NORMS if norm in norms]
        _require(config['l2_weighting'] in L2_WEIGHTINGS,
                 f'Unknown l2_weighting "{config["l2_weighting"]}", expected one of {", ".join(L2_WEIGHTINGS)}')

        _require(isinstance(config['threads'], int) and config['threads'] >= 1, 'threads must be at least 1')
        _require(isinstance(config['seed'], int), 'seed must be an integer')

        config['memory_cap_gb'] = self.__as_number('memory_cap_gb', config['memory_cap_gb'])
        _require(config['memory_cap_gb'] > 0.0, 'memory_cap_gb must be positive')

        for flag in ('long_runs', 'record_runtime', 'debug'):
            _require(isinstance(config[flag], bool), f'{flag} must be true or false')

        return config

    @staticmethod
    def __as_number(key, value):
        _require(isinstance(value, (int, float)) and not isinstance(value, bool), f'{key} must be a number')
        return float(value)

    def write_config(self, config_to_write, path=None):
        with open(path or self.config_path, 'w+') as config_file:
            config_file.write(self.dump(config_to_write))

    @staticmethod
    def dump(config):
        return yaml.safe_dump(config, sort_keys=True, default_flow_style=False)

    def get_config(self):
        return self.config

    def get_default_config(self):
        config_defaults = {
            'problem': 'problem1',
            'problem_params': {},
            'method': 'amfw-hv',
            'correction': 'none',
            'grid': [8, 16, 32, 64],
            'dt_rule': 'equal-to-h',
            'kappa': 1.0,
            'dt_values': None,
            'estimator': 'simultaneous',
            'norms': ['l2', 'max'],
            'l2_weighting': 'points',
            'output_file': None,
            'threads': 1,
            'seed': 0,
            'long_runs': False,
            'memory_cap_gb': 16.0,
            'record_runtime': False,
            'debug': False,
        }

        return config_defaults


def normalize_config(config):
    """Fills defaults and validates a config mapping without touching files or the environment."""
    manager = ExperimentConfig()
    defaults = manager.get_default_config()

    unknown = set(config) - set(defaults)
    _require(not unknown, f'Unknown config keys: {", ".join(sorted(unknown))}')

    defaults.update(config)
    return manager.validate_config(defaults)
