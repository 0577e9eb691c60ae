#!/usr/bin/env python3
##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Unit tests for subband_shake.logtools.
"""

import logging
import re
from io import StringIO

import pytest

from subband_shake.logtools import EXPERIMENT, SYSTEM, make_logger, setup_logging


def emit_all():
    experiment_logger = logging.getLogger("subband_shake.experiment")
    system_logger = logging.getLogger("subband_shake.system")
    for prefix, lgr in (("experiment", experiment_logger), ("system", system_logger)):
        lgr.error(f"{prefix} error")
        lgr.warning(f"{prefix} warning")
        lgr.info(f"{prefix} info")
        lgr.debug(f"{prefix} debug")


class TestCreateLoggers:
    """Check creation of loggers works as expected."""

    def test_function_logger(self):
        logger = make_logger(EXPERIMENT)
        assert isinstance(logger, logging.Logger)
        assert ".experiment." in logger.name
        assert logger.name.endswith(".test_function_logger")

    def test_class_logger(self):

        class Trainer:
            def __init__(self):
                self.logger = make_logger(SYSTEM)

        t = Trainer()
        assert ".system." in t.logger.name
        assert t.logger.name.endswith(".Trainer")


class TestSetupLogging:
    """Test the setup_logging() function with range of settings."""

    ALWAYS = {"experiment error", "experiment warning", "system error", "system warning"}

    @pytest.mark.parametrize(
        "elevel,slevel,extra",
        [
            (0, 0, set()),
            (None, None, set()),
            (1, 0, {"experiment info"}),
            (2, 0, {"experiment info", "experiment debug"}),
            (0, 1, {"system info"}),
            (0, 2, {"system info", "system debug"}),
        ],
        ids=["nothing", "unset", "experiment info", "experiment debug", "system info", "system debug"],
    )
    def test_levels(self, elevel, slevel, extra):
        messages = StringIO()
        setup_logging(elevel, slevel, False, messages)
        emit_all()

        found = set()
        for line in messages.getvalue().split("\n"):
            # optional middle section for the system format
            match = re.match(r"^\S+\s+\S+\s+(?:subband_shake\.\S+\s+[A-Z]+\s+)?(.*)$", line)
            if match:
                found.add(match.group(1))

        assert found == self.ALWAYS | extra

    @pytest.mark.parametrize("elevel,slevel", [(0, 0), (2, 0), (0, 2)])
    def test_quiet(self, elevel, slevel):
        messages = StringIO()
        setup_logging(elevel, slevel, True, messages)
        emit_all()

        text = messages.getvalue()
        assert "experiment error" in text
        assert "system error" in text
        for hidden in ("warning", "info", "debug"):
            assert f"experiment {hidden}" not in text
            assert f"system {hidden}" not in text

    @pytest.mark.parametrize(
        "slevel,pattern",
        [
            (0, r"^\S+\s+\S+\s+test\s+message$"),
            (1, r"^\S+\s+\S+\s+subband_shake.experiment\s+INFO\s+test\s+message$"),
        ],
        ids=["experiment", "system"],
    )
    def test_formatting(self, slevel, pattern):
        messages = StringIO()
        setup_logging(1, slevel, False, messages)

        logging.getLogger("subband_shake.experiment").info("test message")

        assert re.match(pattern, messages.getvalue()) is not None

    def test_replaces_default_console(self):
        from subband_shake import console_handler

        shake_logger = logging.getLogger("subband_shake")
        assert console_handler in shake_logger.handlers

        setup_logging(0, 0, False, StringIO())
        assert console_handler not in shake_logger.handlers
        assert len(shake_logger.handlers) == 1

    def test_default_stream_is_current_stderr(self, capsys):
        setup_logging(1, 0)
        logging.getLogger("subband_shake.experiment").info("to stderr")
        assert "to stderr" in capsys.readouterr().err
