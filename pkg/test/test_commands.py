from argparse import Namespace

import pytest
import yaml

from main import commands
from main.experiment_runner import ExperimentRunner
from main.table_verifier import VerificationSummary


def run_args(**kwargs):
    values = {'output_file': None, 'threads': None, 'long_runs': None, 'record_runtime': None, 'debug': None}
    values.update(kwargs)
    return Namespace(**values)


class TestCommands:
    @pytest.fixture(autouse=True)
    def quiet(self, mocker):
        mocker.patch('lib.console_lib.print_divider')

    @pytest.fixture
    def mock_main(self, mocker):
        return mocker.patch.object(ExperimentRunner, 'main', return_value=0)

    def test_run_command(self, mocker, tmp_path, mock_main):
        # Arrange
        path = tmp_path / 'experiment.yaml'
        path.write_text(yaml.safe_dump({'problem': 'problem2', 'correction': 'extension', 'grid': [4, 8]}))
        mock_init = mocker.spy(ExperimentRunner, '__init__')

        # Act
        exit_code = commands.run_command(run_args(config=str(path), threads=2))

        # Assert
        assert exit_code == 0
        config = mock_init.call_args.args[1]
        assert config['problem'] == 'problem2'
        assert config['threads'] == 2
        mock_main.assert_called_once()

    def test_run_command_config_error(self, mocker, tmp_path, mock_main):
        path = tmp_path / 'experiment.yaml'
        path.write_text(yaml.safe_dump({'grid': [8, 4]}))
        mock_print = mocker.patch('builtins.print')

        exit_code = commands.run_command(run_args(config=str(path)))

        assert exit_code == ExperimentRunner.config_error_exit_code
        assert 'strictly increasing' in str(mock_print.call_args.args[0])
        mock_main.assert_not_called()

    def test_debug_prints_config(self, mocker, tmp_path, mock_main):
        path = tmp_path / 'experiment.yaml'
        path.write_text(yaml.safe_dump({'grid': [4, 8]}))
        mock_pprint = mocker.patch('main.commands.pprint')

        commands.run_command(run_args(config=str(path), debug=True))

        assert mock_pprint.call_args.args[0]['debug'] is True

    def test_preset_command(self, mocker, mock_main):
        mock_init = mocker.spy(ExperimentRunner, '__init__')

        exit_code = commands.preset_command(run_args(name='table3', dump=None, output_file='/fake/table3.csv'))

        assert exit_code == 0
        config = mock_init.call_args.args[1]
        assert config['correction'] == 'extension'
        assert config['output_file'] == '/fake/table3.csv'

    def test_preset_dump(self, mocker, tmp_path, mock_main):
        path = str(tmp_path / 'table1.yaml')
        mocker.patch('builtins.print')

        exit_code = commands.preset_command(run_args(name='table1', dump=path))

        assert exit_code == 0
        with open(path) as dumped:
            assert yaml.safe_load(dumped)['problem'] == 'problem1'
        mock_main.assert_not_called()

    def test_unknown_preset(self, mocker):
        mocker.patch('builtins.print')

        assert commands.preset_command(run_args(name='table99', dump=None)) == \
            ExperimentRunner.config_error_exit_code

    def test_list_command(self, mocker):
        mock_print = mocker.patch('builtins.print')

        assert commands.list_command(Namespace()) == 0
        assert 'table1' in mock_print.call_args.args[0]

    @pytest.mark.parametrize('passed, exit_code', [(True, 0), (False, ExperimentRunner.verify_failure_exit_code)])
    def test_verify_command(self, mocker, passed, exit_code):
        # Arrange
        summary = VerificationSummary(errors={} if passed else {'table1': 'diverged'})
        mock_verify = mocker.patch('main.commands.verify_tables', return_value=summary)
        mocker.patch('builtins.print')
        mocker.patch('lib.console_lib.color_print')
        args = Namespace(tables='table1, table2', tolerance_profile='strict', long_runs=False, threads=1)

        # Act
        result = commands.verify_command(args)

        # Assert
        assert result == exit_code
        mock_verify.assert_called_once_with(['table1', 'table2'], 'strict', long_runs=False, threads=1)

    def test_stability_command(self, mocker, tmp_path):
        mocker.patch('builtins.print')
        path = tmp_path / 'stability.csv'
        args = Namespace(method='amfw-hv', d=2, samples=20, c_trial=1.0, seed=0, output_file=str(path))

        assert commands.stability_command(args) == 0
        assert path.read_text().startswith('# method: amfw-hv')

    def test_stability_command_unknown_method(self, mocker):
        mock_print = mocker.patch('builtins.print')
        args = Namespace(method='amfw-9', d=2, samples=20, c_trial=1.0, seed=0, output_file=None)

        assert commands.stability_command(args) == ExperimentRunner.config_error_exit_code
        assert mock_print.call_args.args[0].startswith('ERROR: Unknown method')

    @pytest.mark.parametrize('file_seed, cli_seed, expected', [
        (None, None, 0),
        (7, None, 7),
        (7, 3, 3),
    ])
    def test_stability_seed_comes_from_config(self, mocker, tmp_path, file_seed, cli_seed, expected):
        # Arrange
        mocker.patch('builtins.print')
        config_path = None
        if file_seed is not None:
            config_path = tmp_path / 'experiment.yaml'
            config_path.write_text(f'seed: {file_seed}\n')
            config_path = str(config_path)
        mock_check = mocker.patch('main.commands.check_stability_condition',
                                  wraps=commands.check_stability_condition)
        args = Namespace(method='amfw-hv', d=1, samples=5, c_trial=1.0, seed=cli_seed, config=config_path,
                         output_file=None)

        # Act
        result = commands.stability_command(args)

        # Assert
        assert result == 0
        assert mock_check.call_args.kwargs['seed'] == expected

    def test_stability_command_bad_config_seed(self, mocker, tmp_path):
        mock_print = mocker.patch('builtins.print')
        config_path = tmp_path / 'experiment.yaml'
        config_path.write_text('seed: many\n')
        args = Namespace(method='amfw-hv', d=1, samples=5, c_trial=1.0, seed=None, config=str(config_path),
                         output_file=None)

        assert commands.stability_command(args) == ExperimentRunner.config_error_exit_code
        assert mock_print.call_args.args[0] == 'ERROR: seed must be an integer'
