##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
from pytest import fixture

from tests.conftest import write_runs

VALID = [40.0, 50.0, 45.0, 48.0, 52.0]
TRAIN = [45.0, 70.0, 80.0, 90.0, 95.0]
RUNS = [(0, 0), (0, 1), (1, 0), (1, 1)]


def offset_curves(offsets):
    """The same curve for every run, raised by a per-run validation UA offset."""
    return {key: ([v + off for v in VALID], TRAIN) for key, off in zip(RUNS, offsets)}


@fixture
def two_models(config):
    """Reports of run names a and b, b better on every run by a varying margin."""
    write_runs(config, 'a', offset_curves([0, 0, 0, 0]))
    write_runs(config, 'b', offset_curves([2, 3, 4, 5]))
    config.name = 'compare'
    config.models = ['a', 'b']
    config.patience = [1, 3]
    return config
