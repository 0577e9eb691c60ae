##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Experiment steps behind the command line, and their shared plumbing.
"""
from functools import wraps

from subband_shake.metrics import send_metric
from subband_shake.util import TimerLogger, check_for_errors, run_mp

__all__ = ['check_for_errors', 'run_mp', 'step']


def step(func):
    """Function decorator for steps."""
    @wraps(func)
    def wrapper(*args, **kwargs):

        name = func.__name__

        # call the function
        with TimerLogger(name) as step:
            result = func(*args, **kwargs)

        send_metric('steps', name, step.taken)
        return result

    return wrapper
