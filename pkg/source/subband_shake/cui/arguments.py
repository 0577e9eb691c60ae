#!/usr/bin/env python3
##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################

"""
subband-shake command line argument parser.

This extends the argparse.ArgumentParser class with one sub-command per
experiment step. Every sub-command takes the same experiment options,
one per config key, and the same output options. Logging is configured
once, after the first complete parse.
"""

import argparse
import os
from pathlib import Path
from typing import Callable, Dict, Optional

from .. import __version__ as shake_version
from ..experiment_config import FIELDS
from ..logtools import setup_logging

# sub-command name -> help
COMMANDS: Dict[str, str] = {
    "synth-data": "generate the synthetic corpus and its manifest",
    "featurize": "write a feature file for every manifest row",
    "train": "train one model per fold and seed",
    "sweep-patience": "tabulate validation UA and gap over the patience list",
    "stats": "one-sided paired t-tests between run names",
    "inspect-model": "print the layer and parameter summary of a model",
}

# config keys without a flag of their own
OUTPUT_KEYS = ("verbose", )


def full_path_type(opt: str) -> Path:
    """Path with expanded usernames and resolved symlinks.

    :param str opt: command line option
    :return: a fully resolved Path instance
    """

    return Path(opt).expanduser().resolve()


def flag_name(key: str) -> str:
    """The command line flag of a config key."""
    return "--" + key.replace("_", "-")


def _parser_wrapper(func: Callable) -> Callable:
    """Decorator to configure logging and check the namespace.

    Always run some Namespace checks after the options have been
    parsed and then return the results.

    The decorator exists outside the class to avoid problems with
    staticmethods in python < 3.10.
    """

    def inner(self, *args, **kwargs):

        result = func(self, *args, **kwargs)

        if isinstance(result, argparse.Namespace):
            # parse_args
            namespace = result
        elif isinstance(result, tuple) and isinstance(result[0], argparse.Namespace):
            # parse_known_args
            namespace = result[0]
        else:
            raise ValueError("invalid return value from wrapped function")

        # Save the name used to refer to the current program
        namespace._progname = self.prog

        self._check_config_file(namespace)
        self._configure_logging(namespace)

        return result

    return inner


class ShakeArgumentParser(argparse.ArgumentParser):
    """subband-shake command argument parser."""

    def __init__(self, *args, **kwargs):

        self.version = kwargs.pop("version", str(shake_version))

        super().__init__(*args, **kwargs)

        if self.prog == "__main__.py" and kwargs.get("prog", None) is None:
            # Try to pick up a better program name from the environment
            # or just use a default string
            self.prog = os.environ.get("__PROGNAME", "subband-shake")

        self._have_logging = False

        self._add_info_group()

        common = argparse.ArgumentParser(add_help=False)
        self._add_experiment_group(common)
        self._add_output_group(common)

        commands = self.add_subparsers(dest="command", metavar="COMMAND", required=True,
                                       parser_class=argparse.ArgumentParser)
        for name, help_text in COMMANDS.items():
            commands.add_parser(name, parents=[common], help=help_text, description=help_text)

    def _add_experiment_group(self, parser: argparse.ArgumentParser):
        """Add the config file and one flag per config key.

        Flags default to None so that an unset flag never hides a
        config file value.
        """
        group = parser.add_argument_group("experiment arguments")

        group.add_argument(
            "--config",
            type=full_path_type,
            metavar="FILE",
            help="key = value experiment config, overridden by any flag",
        )

        for key, (_, default, help_text) in FIELDS.items():
            if key in OUTPUT_KEYS:
                continue
            if isinstance(default, bool):
                group.add_argument(
                    flag_name(key),
                    action=argparse.BooleanOptionalAction,
                    default=None,
                    help=f"{help_text} (default: {default})",
                )
            else:
                group.add_argument(
                    flag_name(key),
                    type=str,
                    metavar="VALUE",
                    default=None,
                    help=f"{help_text} (default: {self._show(default)})",
                )

    @staticmethod
    def _show(default) -> str:
        if isinstance(default, list):
            return ",".join(str(v) for v in default) or "none"
        return str(default)

    def _add_output_group(self, parser: argparse.ArgumentParser):
        """Add output arguments."""

        group = parser.add_argument_group("output arguments")

        group.add_argument(
            "-d",
            "--debug",
            action="count",
            help="increase the amount of library debug output",
        )

        group.add_argument(
            "-v",
            "--verbose",
            action="count",
            help="increase the amount of experiment output",
        )

        group.add_argument(
            "-q",
            "--quiet",
            action="store_true",
            help="do not produce much output",
        )

    def _add_info_group(self):
        """Add informative options."""

        # Create an info group
        group = self.add_argument_group("info arguments")

        if "--version" not in self._option_string_actions:
            group.add_argument(
                "--version", action="version", version=f"%(prog)s {self.version}"
            )

    def _configure_logging(self, namespace: argparse.Namespace) -> None:
        """Configure output logging.

        Set various logging parameters after the first complete parse
        of the command line arguments.  Check to ensure that the user
        has not attempted to set both debug and/or verbose options at
        the same time as using the --quiet flag to suppress console
        output.

        :param namespace: parsed command line arguments
        """

        if self._have_logging:
            return

        verbose = getattr(namespace, "verbose", None)
        debug = getattr(namespace, "debug", None)
        quiet = getattr(namespace, "quiet", False)

        if quiet and (verbose is not None or debug is not None):
            self.error("--quiet conflicts with debug and verbose settings")

        setup_logging(verbose, debug, quiet)

        self._have_logging = True

    def _check_config_file(self, namespace: argparse.Namespace) -> None:
        """Raise a usage error if a named config file does not exist."""

        config = getattr(namespace, "config", None)
        if config is not None and not config.is_file():
            self.error(f"config file does not exist: '{config}'")

    @_parser_wrapper
    def parse_args(self, *args, **kwargs):

        return super().parse_args(*args, **kwargs)

    @_parser_wrapper
    def parse_known_args(self, *args, **kwargs):

        return super().parse_known_args(*args, **kwargs)


def config_overrides(namespace: argparse.Namespace) -> Dict[str, Optional[object]]:
    """The config values given as flags, None where a flag was not used."""

    overrides = {key: getattr(namespace, key, None) for key in FIELDS if key not in OUTPUT_KEYS}
    if namespace.verbose or namespace.debug:
        overrides["verbose"] = True
    return overrides
