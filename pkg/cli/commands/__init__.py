from cli.commands import controls, data, filtering, forecasting, simulate, run_all

COMMANDS = [data, filtering, forecasting, controls, simulate, run_all]
