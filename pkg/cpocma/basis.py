'''
Shaping, matched and correlation filter families.

All three families depend on time only through the normalized time
x = f*t and on the subcarrier only through the integer ratio f_n/f, so
every evaluation below is done in normalized units and scaled back.
'''
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from cpocma.errors import SimConfigError, SimDimensionError

log = logging.getLogger(__name__)

LN2 = math.log(2.0)

SHAPING = 'shaping'
MATCHED = 'matched'
CORRELATION = 'correlation'
FILTER_KINDS = (SHAPING, MATCHED, CORRELATION)

MIN_SAMPLES_PER_SYMBOL = 8
DEFAULT_TAIL_SYMBOLS = 20

# 1 - e^(-beta/f); beta/f is always ln 2
TAIL_GAIN = 1.0 - math.exp(-LN2)

_RATIO_TOLERANCE = 1e-9


def integer_ratio(value, base):
    ratio = value / base
    nearest = int(round(ratio))
    if nearest < 1 or abs(ratio - nearest) > _RATIO_TOLERANCE * max(1.0, abs(ratio)):
        return None
    return nearest


@dataclass(frozen=True)
class CarrierConfig(object):
    '''
    Filter-bank parameters shared by the transmitter and the receiver.

    f:               initial (symbol) frequency in Hz, T_c = 1/f
    num_subcarriers: N
    base_freqs:      N distinct positive integer multiples of f
                     (default f_n = n*f)
    sample_rate:     fs in Hz, fs/f must be an integer >= 8
                     (default 16 samples per symbol)
    tail_symbols:    K, truncation of the t<0 tail in symbol periods

    beta is derived (f*ln 2) and cannot be set.
    '''
    f: float
    num_subcarriers: int = 1
    base_freqs: tuple = None
    sample_rate: float = None
    tail_symbols: int = DEFAULT_TAIL_SYMBOLS
    ratios: tuple = field(init=False, repr=False, compare=False)
    sps: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            f = float(self.f)
        except (TypeError, ValueError) as err:
            raise SimConfigError('Initial frequency must be a number', 'carrier.f', err)
        if not math.isfinite(f) or f <= 0:
            raise SimConfigError('Initial frequency must be positive and finite', 'carrier.f')
        object.__setattr__(self, 'f', f)

        n = self.num_subcarriers
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise SimConfigError('Number of subcarriers must be a positive integer', 'carrier.num_subcarriers')
        object.__setattr__(self, 'num_subcarriers', int(n))

        if self.base_freqs is None:
            base_freqs = tuple(float(k * f) for k in range(1, n + 1))
        else:
            try:
                base_freqs = tuple(float(v) for v in self.base_freqs)
            except (TypeError, ValueError) as err:
                raise SimConfigError('Base frequencies must be numbers', 'carrier.base_freqs', err)
        if len(base_freqs) != n:
            raise SimConfigError(
                'Expected %d base frequencies, got %d' % (n, len(base_freqs)), 'carrier.base_freqs')
        ratios = []
        for value in base_freqs:
            ratio = integer_ratio(value, f)
            if ratio is None:
                raise SimConfigError(
                    'Base frequency %g Hz is not a positive integer multiple of f = %g Hz' % (value, f),
                    'carrier.base_freqs')
            ratios.append(ratio)
        if len(set(ratios)) != len(ratios):
            raise SimConfigError('Base frequencies must be pairwise distinct', 'carrier.base_freqs')
        object.__setattr__(self, 'base_freqs', base_freqs)
        object.__setattr__(self, 'ratios', tuple(ratios))

        if self.sample_rate is None:
            object.__setattr__(self, 'sample_rate', 16.0 * f)
        try:
            fs = float(self.sample_rate)
        except (TypeError, ValueError) as err:
            raise SimConfigError('Sample rate must be a number', 'carrier.sample_rate', err)
        sps = integer_ratio(fs, f) if math.isfinite(fs) else None
        if sps is None:
            raise SimConfigError(
                'Sample rate %g Hz is not an integer multiple of f = %g Hz' % (fs, f), 'carrier.sample_rate')
        if sps < MIN_SAMPLES_PER_SYMBOL:
            raise SimConfigError(
                'Need at least %d samples per symbol, got %d' % (MIN_SAMPLES_PER_SYMBOL, sps),
                'carrier.sample_rate')
        object.__setattr__(self, 'sample_rate', fs)
        object.__setattr__(self, 'sps', sps)

        k = self.tail_symbols
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
            raise SimConfigError('Tail truncation must be a positive integer', 'carrier.tail_symbols')
        object.__setattr__(self, 'tail_symbols', int(k))

    beta = property(
        lambda self: self.f * LN2,
        None,
        None,
        '''
        Envelope rate in 1/s, always f*ln 2
        '''
    )

    period = property(
        lambda self: 1.0 / self.f,
        None,
        None,
        '''
        Symbol period T_c in seconds
        '''
    )

    omegas = property(
        lambda self: tuple(2.0 * math.pi * v for v in self.base_freqs),
        None,
        None,
        '''
        Angular base frequencies 2*pi*f_n
        '''
    )

    def check_subcarrier(self, n):
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 1 <= n <= self.num_subcarriers:
            raise SimConfigError(
                'Invalid subcarrier index %r (expected 1..%d)' % (n, self.num_subcarriers), 'subcarrier')
        return int(n)

    def normalized(self):
        '''The same filter bank at f = 1 Hz, identical taps.'''
        return CarrierConfig(
            f=1.0,
            num_subcarriers=self.num_subcarriers,
            base_freqs=tuple(float(r) for r in self.ratios),
            sample_rate=float(self.sps),
            tail_symbols=self.tail_symbols,
        )


@dataclass(frozen=True, eq=False)
class FilterTaps(object):
    '''Discretized filter: taps at 1/fs spacing, taps[origin_index] sits at t = 0.'''
    taps: np.ndarray
    origin_index: int
    kind: str
    subcarrier: int

    def __post_init__(self):
        taps = np.array(self.taps, dtype=float)
        if taps.ndim != 1 or taps.size == 0:
            raise SimDimensionError('Filter taps must be a non-empty vector')
        if not np.all(np.isfinite(taps)):
            raise SimConfigError('Filter taps must be finite', 'taps')
        if not 0 <= self.origin_index < taps.size:
            raise SimDimensionError('Origin index %d outside taps' % self.origin_index)
        if self.kind not in FILTER_KINDS:
            raise SimConfigError('Unknown filter kind %r' % (self.kind,), 'kind')
        taps.setflags(write=False)
        object.__setattr__(self, 'taps', taps)

    def __len__(self):
        return self.taps.size

    def reversed(self, kind=None):
        return FilterTaps(self.taps[::-1], self.taps.size - 1 - self.origin_index,
                          kind or self.kind, self.subcarrier)


#
# Normalized-time basis functions

def _h(x, ratio):
    w = 2.0 * math.pi * ratio
    return np.cos(w * x) - (LN2 / w) * np.sin(w * x)


def _piecewise(x, ratio, body_offset):
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    tail = x < 0
    body = (x >= 0) & (x < 1)
    out[tail] = TAIL_GAIN * np.exp2(x[tail]) * _h(x[tail], ratio)
    out[body] = body_offset - np.exp2(x[body] - 1.0) * _h(x[body], ratio)
    if scalar:
        return float(out[0])
    return out


def p_normalized(x, ratio):
    '''Shaping basis p at normalized time x = f*t for f_n/f = ratio.'''
    return _piecewise(x, ratio, 1.0)


def o_normalized(x, ratio):
    '''Correlation basis o at normalized time x = f*t for f_n/f = ratio.'''
    return _piecewise(x, ratio, 0.0)


def eval_p(n, t, cfg):
    '''
    The n-th shaping basis function p_n(t): growing exponential tail for
    t < 0, 1 - e^(beta(t-1/f))(cos w_n t - (beta/w_n) sin w_n t) on
    [0, 1/f), zero from 1/f on. Accepts scalars or arrays of times.
    '''
    n = cfg.check_subcarrier(n)
    return p_normalized(np.multiply(cfg.f, t), cfg.ratios[n - 1])


def eval_o(n, t, cfg):
    '''
    The n-th correlation basis function o_n(t). Its t < 0 branch equals
    p_n's; its body is p_n - 1, so it jumps at t = 0 and t = 1/f.
    '''
    n = cfg.check_subcarrier(n)
    return o_normalized(np.multiply(cfg.f, t), cfg.ratios[n - 1])


@lru_cache(maxsize=128)
def _grid_taps(kind, ratio, sps, tail_symbols):
    origin = tail_symbols * sps
    length = (tail_symbols + 1) * sps + 1
    x = (np.arange(length) - origin) / float(sps)
    if kind == SHAPING:
        return p_normalized(x, ratio), origin
    values = o_normalized(x, ratio)
    # jump points take the midpoint of the one-sided limits
    values[origin] = 0.5 * (TAIL_GAIN + float(o_normalized(0.0, ratio)))
    values[-1] = 0.5 * float(-_h(1.0, ratio))
    return values, origin


def make_taps(kind, n, cfg):
    '''
    Sample a filter on t_k = (k - origin_index)/fs over (-K*T_c, T_c].

    shaping:     p_n, origin K*sps, last tap (t = T_c) is 0
    matched:     index reversal of the shaping taps
    correlation: o_n on the shaping grid
    '''
    if kind not in FILTER_KINDS:
        raise SimConfigError('Unknown filter kind %r' % (kind,), 'kind')
    n = cfg.check_subcarrier(n)
    base_kind = SHAPING if kind == MATCHED else kind
    values, origin = _grid_taps(base_kind, cfg.ratios[n - 1], cfg.sps, cfg.tail_symbols)
    taps = FilterTaps(values, origin, base_kind, n)
    if kind == MATCHED:
        return taps.reversed(MATCHED)
    return taps


@lru_cache(maxsize=64)
def reference_level(cfg):
    '''
    Noiseless mean matched-bank sample of a slot whose N symbols are all
    +1, ignoring inter-symbol interference: (1/N) * sum_n sum_k <p_k, p_n>.
    '''
    stack = np.vstack([make_taps(SHAPING, n, cfg).taps for n in range(1, cfg.num_subcarriers + 1)])
    gram = stack.dot(stack.T) / cfg.sample_rate
    return float(gram.sum() / cfg.num_subcarriers)
