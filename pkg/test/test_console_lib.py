from lib import console_lib


class TestConsoleLib:
    def test_format_table(self):
        table = console_lib.format_table(['h', 'GE_2'], [['1/4', '3.3e-01'], ['1/16', '9.7e-03']])

        assert table.splitlines() == [
            'h     GE_2',
            '----  -------',
            '1/4   3.3e-01',
            '1/16  9.7e-03',
        ]

    def test_print_debug(self):
        assert console_lib.print_debug({'h': '1/8', 'dts': (0.125,)}) == \
            '\n----------DEBUG----------\n - h = 1/8\n - dts = (0.125,)\n----------DEBUG----------'

    def test_print_divider(self, mocker):
        mock_color_print = mocker.patch('lib.console_lib.color_print')

        console_lib.print_divider('Running experiment', length=20)

        assert mock_color_print.call_args_list == [
            mocker.call('-' * 20),
            mocker.call(' ' * 1 + 'Running experiment'),
            mocker.call('-' * 20),
        ]
