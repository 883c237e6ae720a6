#
# Exceptions
#
# Every failure reachable from the public surface is one of the three
# SimError subclasses below; `category` names which.

import numpy as np


class SimError(Exception):
    '''
    Base simulation exception. `parameter` holds the message, `path` the
    dotted name of the offending configuration value (when there is one)
    and `inner_exception` the lower-level error that caused it.
    '''
    category = None

    def __init__(self, value, path=None, inner_exception=None):
        super(SimError, self).__init__(value)
        self.parameter = value
        self.path = path
        self.inner_exception = inner_exception

    def __str__(self):
        if self.path:
            return repr('%s: %s' % (self.path, self.parameter))
        return repr(self.parameter)


class SimConfigError(SimError):
    '''
    A configuration value breaks an invariant: non-integer samples per
    symbol, duplicate base frequencies, channel gains summing past one,
    exhausted spreading codes and the like.
    '''
    category = 'config'


class SimNumericError(SimError):
    '''
    A runtime numerical failure: a non-finite sample, a zero-energy
    waveform or a degenerate decision scale.
    '''
    category = 'numeric'


class SimDimensionError(SimError):
    '''
    Array shapes or lengths do not line up (row counts, frame lengths,
    image sizes, out-of-range sampling instants).
    '''
    category = 'dimension'


def ensure_finite(values, what='samples'):
    '''Raise SimNumericError if any entry of `values` is NaN or infinite.'''
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise SimNumericError('Non-finite value detected in %s' % what)
    return values
