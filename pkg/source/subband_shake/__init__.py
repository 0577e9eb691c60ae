##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Shake-Shake regularised residual networks with independent spectral
sub-band shaking, and the experiment harness around them.

"""
import logging
import sys

__version__ = '0.3.dev.1'

logger = logging.getLogger(__name__)
# replaced by the filtered handler of logtools.setup_logging
console_handler = logging.StreamHandler(sys.stdout)
logger.addHandler(console_handler)
logger.setLevel(logging.INFO)


class ShakeException(Exception):
    """Base class for every error raised by this package."""


class ShapeError(ShakeException, ValueError):
    """Tensor dimensions do not agree."""


class BandTooNarrowError(ShapeError):
    """The spectral axis is too short to be split into two sub-bands."""


class ParameterError(ShakeException, ValueError):
    """A scalar parameter is outside its valid range."""


class DegenerateError(ShakeException, ValueError):
    """The data is too small or too flat for the statistic to exist."""


class LabelError(ShakeException, IndexError):
    """A class label is outside [0, K)."""


class ContractError(ShakeException, RuntimeError):
    """An API was used against its contract."""


class ConsistencyError(ShakeException):
    """Inputs that must agree with each other do not."""


class ConfigError(ShakeException):
    """The experiment configuration is invalid."""


class MissingFeatureError(ShakeException, FileNotFoundError):
    """The feature file for an utterance does not exist."""

    def __init__(self, utterance_id: str, path):
        super().__init__(f"missing features for utterance '{utterance_id}': {path}")
        self.utterance_id = utterance_id
        self.path = path

    def __reduce__(self):
        return self.__class__, (self.utterance_id, self.path)
