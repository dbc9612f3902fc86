"""Command handlers; each module registers its subcommands on the top-level parser."""

from commands import compare, diagnose, evaluate, fit, predict, simulate

COMMAND_MODULES = (simulate, fit, predict, evaluate, diagnose, compare)


def register_all(subparsers) -> None:
    for module in COMMAND_MODULES:
        module.register(subparsers)
