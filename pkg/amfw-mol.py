import os

from argparse import ArgumentParser, RawTextHelpFormatter
from main import commands

parser = ArgumentParser(formatter_class=RawTextHelpFormatter,
                        description="Method-of-lines solver with AMF-W time integration and boundary corrections.")
subparsers = parser.add_subparsers(dest="command", required=True)


def add_run_options(subparser):
    subparser.add_argument(
        "-o",
        "--output-file",
        help="Path of the resultant CSV report (header h,dt,ge_l2,p_l2,ge_max,p_max).",
        default=None,
    )
    subparser.add_argument(
        "-t",
        "--threads",
        help="Number of grid levels solved concurrently.\n"
        "The AMFW_THREADS environment variable takes precedence.",
        type=int,
        default=None,
    )
    subparser.add_argument(
        "--long-runs",
        help="Lift the desk-scale caps (3D: h >= 1/64, 2D: h >= 1/256).",
        action="store_true",
        default=None,
    )
    subparser.add_argument(
        "--record-runtime",
        help="Write per-level runtimes into the CSV metadata block.\n"
        "Runtimes make the CSV bytes differ between runs.",
        action="store_true",
        default=None,
    )
    subparser.add_argument(
        "-d",
        "--debug",
        help="Use this option to print the effective configuration.",
        action="store_true",
        default=None,
    )


run_parser = subparsers.add_parser("run", help="Run an experiment from a YAML config file.",
                                   formatter_class=RawTextHelpFormatter)
run_parser.add_argument("config", help="Path to the experiment config (see data/presets/ for examples).")
add_run_options(run_parser)
run_parser.set_defaults(handler=commands.run_command)

preset_parser = subparsers.add_parser("preset", help="Run a named preset that regenerates a convergence table.",
                                      formatter_class=RawTextHelpFormatter)
preset_parser.add_argument("name", help='Preset name, e.g. "table1" (see the "list" subcommand).')
preset_parser.add_argument(
    "--dump",
    help="Write the preset as a standalone config file instead of running it.",
    default=None,
)
add_run_options(preset_parser)
preset_parser.set_defaults(handler=commands.preset_command)

list_parser = subparsers.add_parser("list", help="List the available presets.")
list_parser.set_defaults(handler=commands.list_command)

verify_parser = subparsers.add_parser("verify", help="Run presets and compare them with their reference rows.",
                                      formatter_class=RawTextHelpFormatter)
verify_parser.add_argument(
    "--tables",
    help="Comma-separated preset names. All presets are verified by default.",
    default=None,
)
verify_parser.add_argument(
    "--tolerance-profile",
    help="Scaling of the per-preset tolerances:\n"
    "\t- default: as stored with each preset\n"
    "\t- strict: half of them\n"
    "\t- exact: zero (always fails, the reference values are rounded)",
    choices=["default", "strict", "exact"],
    default="default",
)
verify_parser.add_argument("--long-runs", help="Lift the desk-scale caps.", action="store_true", default=False)
verify_parser.add_argument("-t", "--threads", help="Grid levels solved concurrently.", type=int, default=1)
verify_parser.set_defaults(handler=commands.verify_command)

stability_parser = subparsers.add_parser("stability", help="Sample the stability condition of a method.",
                                         formatter_class=RawTextHelpFormatter)
stability_parser.add_argument("method", help='Method name: "amfw-hv" or "amfw-3/8".')
stability_parser.add_argument("--d", help="Number of split directions.", type=int, default=3)
stability_parser.add_argument("--samples", help="Number of samples on the negative orthant.", type=int, default=10000)
stability_parser.add_argument("--c-trial", help="Constant C checked in the upper bound.", type=float, default=1.0)
stability_parser.add_argument("--seed", help="Random seed of the samples (overrides the config).", type=int,
                              default=None)
stability_parser.add_argument("-c", "--config", help="Experiment config whose seed is used.", default=None)
stability_parser.add_argument("-o", "--output-file", help="Optional CSV with the sampled values.", default=None)
stability_parser.set_defaults(handler=commands.stability_command)

if __name__ == "__main__":
    args = parser.parse_args()

    # Add current dir abspath to PYTHONPATH to avoid issues when importing modules
    if "PYTHONPATH" not in os.environ:
        os.environ["PYTHONPATH"] = ""
    os.environ["PYTHONPATH"] = ":".join(
        [f"{os.path.dirname(__file__)}", os.environ["PYTHONPATH"]]
    )

    exit(args.handler(args))
