import os
import re
from dataclasses import dataclass, field

import yaml

from lib import console_lib
from lib.config_lib import ConfigError, ExperimentConfig, normalize_config

PRESET_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data', 'presets')
DEFAULT_TOLERANCE = {'magnitude': 0.15, 'order': 0.15}


def natural_key(name):
    return [int(part) if part.isdigit() else part for part in re.split(r'(\d+)', name)]


@dataclass
class Preset:
    name: str
    label: str
    description: str
    config: dict
    expected: list = field(default_factory=list)
    tolerance: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCE))

    def expected_row(self, h_inverse):
        for row in self.expected:
            if row['h'] == h_inverse:
                return row
        return None


class PresetRegistry:
    def __init__(self, preset_dir=PRESET_DIR):
        self.preset_dir = preset_dir
        self.presets = {}

        file_names = sorted(os.listdir(preset_dir), key=lambda name: natural_key(os.path.splitext(name)[0]))
        for file_name in file_names:
            if file_name.endswith('.yaml'):
                preset = self.load_preset(os.path.join(preset_dir, file_name))
                self.presets[preset.name] = preset

    @staticmethod
    def load_preset(path):
        name = os.path.splitext(os.path.basename(path))[0]

        with open(path) as preset_file:
            data = yaml.safe_load(preset_file)

        if not isinstance(data, dict) or 'config' not in data:
            raise ConfigError(f'ERROR: Preset file "{path}" has no config section')

        tolerance = dict(DEFAULT_TOLERANCE)
        tolerance.update(data.get('tolerance') or {})
        if 'magnitude_factor' in tolerance and not tolerance['magnitude_factor'] > 1.0:
            raise ConfigError(f'ERROR: Preset file "{path}" needs a magnitude_factor above 1')

        return Preset(name=name,
                      label=data.get('label', name),
                      description=data.get('description', ''),
                      config=normalize_config(data['config']),
                      expected=data.get('expected') or [],
                      tolerance=tolerance)

    def names(self):
        return list(self.presets)

    def get(self, name):
        if name not in self.presets:
            raise ConfigError(f'ERROR: Unknown preset "{name}", expected one of {", ".join(self.names())}')
        return self.presets[name]

    def get_config(self, name):
        return dict(self.get(name).config)

    def dump(self, name, path):
        ExperimentConfig().write_config(self.get_config(name), path)
        print(f'Preset "{name}" written to {path}')

    def listing_rows(self):
        for preset in self.presets.values():
            config = preset.config
            problem = config['problem']
            if config['problem_params']:
                params = ','.join(f'{k}={v:g}' for k, v in sorted(config['problem_params'].items()))
                problem = f'{problem}({params})'

            yield [preset.name, preset.label, problem, config['method'], config['correction'],
                   config['estimator']]


def list_presets(registry=None):
    registry = registry or PresetRegistry()
    return console_lib.format_table(['preset', 'table', 'problem', 'method', 'correction', 'estimator'],
                                    registry.listing_rows())
