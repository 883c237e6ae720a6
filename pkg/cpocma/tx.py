'''
Serial-to-parallel conversion, subcarrier synthesis and carrier mixing.
'''
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from cpocma.basis import SHAPING, make_taps
from cpocma.errors import SimConfigError, SimDimensionError, SimNumericError

log = logging.getLogger(__name__)

# stopband attenuation of the mixer low-pass, and its narrowest transition
MIXER_ATTENUATION_DB = 80.0
MIN_TRANSITION = 0.2


@dataclass(frozen=True, eq=False)
class BitFrame(object):
    '''
    N x M matrix of +1/-1 information symbols; row n is the sequence
    carried by subcarrier n+1, column m the m+1-th symbol slot.
    '''
    symbols: np.ndarray

    def __post_init__(self):
        symbols = np.array(self.symbols)
        if symbols.ndim == 1:
            symbols = symbols.reshape(1, -1)
        if symbols.ndim != 2 or symbols.shape[1] < 1 or symbols.shape[0] < 1:
            raise SimDimensionError('A frame needs at least one row and one slot')
        if not np.all((symbols == 1) | (symbols == -1)):
            raise SimConfigError('Frame symbols must be +1 or -1', 'frame')
        symbols = symbols.astype(np.int8)
        symbols.setflags(write=False)
        object.__setattr__(self, 'symbols', symbols)

    num_subcarriers = property(lambda self: self.symbols.shape[0])
    num_slots = property(lambda self: self.symbols.shape[1])

    def __eq__(self, other):
        if not isinstance(other, BitFrame):
            return NotImplemented
        return np.array_equal(self.symbols, other.symbols)

    __hash__ = None

    def __neg__(self):
        return BitFrame(-self.symbols)


@dataclass(frozen=True, eq=False)
class Waveform(object):
    '''
    Uniformly sampled real signal. `symbol_offset` is the sample index at
    which symbol slot m = 1 starts (t = 0 of its basis function).
    '''
    samples: np.ndarray
    sample_rate: float
    symbol_offset: int = 0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 1:
            raise SimDimensionError('Waveform samples must be one-dimensional')
        if not np.all(np.isfinite(samples)):
            raise SimNumericError('Non-finite sample detected in waveform')
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', float(self.sample_rate))
        object.__setattr__(self, 'symbol_offset', int(self.symbol_offset))

    def __len__(self):
        return self.samples.size

    def __neg__(self):
        return replace(self, samples=-self.samples)

    energy = property(
        lambda self: float(np.dot(self.samples, self.samples)) / self.sample_rate,
        None,
        None,
        '''
        Riemann-sum energy sum(x^2)/fs
        '''
    )

    duration = property(lambda self: self.samples.size / self.sample_rate)

    def time_axis(self):
        return np.arange(self.samples.size) / self.sample_rate

    def with_samples(self, samples):
        return replace(self, samples=samples)


def check_rate(w, cfg):
    if not math.isclose(w.sample_rate, cfg.sample_rate, rel_tol=1e-12):
        raise SimConfigError(
            'Waveform sampled at %g Hz, configuration expects %g Hz' % (w.sample_rate, cfg.sample_rate),
            'carrier.sample_rate')


#
# Bits and symbols

def bits_to_symbols(bits):
    '''Map 0/1 bits to -1/+1 symbols (1 -> +1).'''
    bits = np.asarray(bits)
    if not np.all((bits == 0) | (bits == 1)):
        raise SimConfigError('Bits must be 0 or 1', 'bits')
    return np.where(bits == 1, 1, -1).astype(np.int8)


def symbols_to_bits(symbols):
    return (np.asarray(symbols) > 0).astype(np.uint8)


def serial_to_parallel(bits, N):
    '''
    Distribute a serial +1/-1 stream over N subcarriers, row-major by bit
    index: bit i goes to subcarrier (i mod N)+1, slot floor(i/N)+1.
    '''
    bits = np.asarray(bits)
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
        raise SimConfigError('Number of subcarriers must be a positive integer', 'carrier.num_subcarriers')
    if bits.ndim != 1 or bits.size == 0 or bits.size % N:
        raise SimDimensionError('Bit count %d is not a positive multiple of N = %d' % (bits.size, N))
    return BitFrame(bits.reshape(-1, N).T)


def parallel_to_serial(frame):
    '''Inverse of serial_to_parallel.'''
    return np.array(frame.symbols.T.reshape(-1))


#
# Modulation

def modulate_subcarrier(row, n, cfg):
    '''
    Convolve a +1/-1 impulse train (one impulse per slot start) with the
    shaping taps of subcarrier n. The output holds K*sps guard samples
    of leading tail, the M slots, and K*sps trailing samples, so it is
    (M + 2K + 1)*sps long.
    '''
    row = BitFrame(row).symbols[0]
    taps = make_taps(SHAPING, n, cfg)
    sps = cfg.sps
    total = (row.size + 2 * cfg.tail_symbols + 1) * sps
    samples = np.zeros(total)
    shaped = signal.upfirdn(taps.taps, row.astype(float), up=sps)
    samples[:shaped.size] = shaped
    return Waveform(samples, cfg.sample_rate, symbol_offset=taps.origin_index)


def transmit(frame, cfg):
    '''Sum of the N subcarrier waveforms; all share one symbol_offset.'''
    if frame.num_subcarriers != cfg.num_subcarriers:
        raise SimDimensionError(
            'Frame has %d rows, configuration has %d subcarriers' % (frame.num_subcarriers, cfg.num_subcarriers))
    waves = [modulate_subcarrier(frame.symbols[n - 1], n, cfg) for n in range(1, cfg.num_subcarriers + 1)]
    total = np.sum([w.samples for w in waves], axis=0)
    return waves[0].with_samples(total)


def baseband_bandwidth(cfg):
    '''One-sided nominal extent (N+1)*f of the summed subcarriers.'''
    return (cfg.num_subcarriers + 1) * cfg.f


def check_carrier(fc, fs, bandwidth):
    if not math.isfinite(fc) or fc < 0:
        raise SimConfigError('Carrier frequency must be non-negative', 'carrier.carrier_frequency')
    if fc > 0 and not bandwidth > 0:
        raise SimConfigError('Mixing needs a positive signal bandwidth', 'carrier.carrier_frequency')
    if fc > 0 and fc + bandwidth >= fs / 2.0:
        raise SimConfigError(
            'Carrier %g Hz plus bandwidth %g Hz reaches the Nyquist limit %g Hz' % (fc, bandwidth, fs / 2.0),
            'carrier.carrier_frequency')


def mixer_lowpass(fc, fs, bandwidth, attenuation_db=MIXER_ATTENUATION_DB):
    '''
    Kaiser-window FIR low-pass that keeps [0, bandwidth] and stops the
    double-frequency image, which starts at min(2fc, fs - 2fc) - bandwidth.
    Bands that overlap are rejected. Touching bands get a transition of
    MIN_TRANSITION * bandwidth centred on their common edge.
    '''
    stop = min(2.0 * fc, fs - 2.0 * fc) - bandwidth
    guard = stop - bandwidth
    if guard < 0:
        raise SimConfigError(
            'Mixing image at %g Hz overlaps the %g Hz signal band' % (stop, bandwidth), 'carrier.carrier_frequency')
    width = max(guard, MIN_TRANSITION * bandwidth)
    if guard < width:
        log.warning('carrier %g Hz leaves no guard band around %g Hz; the mixer loopback is approximate',
                    fc, bandwidth)
    numtaps, beta = signal.kaiserord(attenuation_db, width / (0.5 * fs))
    numtaps |= 1
    cutoff = (bandwidth + stop) / 2.0
    log.debug('mixer low-pass fc=%g cutoff=%g numtaps=%d beta=%.2f', fc, cutoff, numtaps, beta)
    return signal.firwin(numtaps, cutoff, window=('kaiser', beta), fs=fs)


def upconvert(w, fc, bandwidth):
    '''
    Multiply by cos(2 pi fc t) on the waveform's own time grid.
    `bandwidth` is the one-sided extent of w, see baseband_bandwidth().
    '''
    check_carrier(fc, w.sample_rate, bandwidth)
    if fc == 0:
        return w
    return w.with_samples(w.samples * np.cos(2.0 * np.pi * fc * w.time_axis()))


def downconvert(w, fc, bandwidth, lowpass=None):
    '''
    Mix by 2cos(2 pi fc t) and remove the double-frequency image with a
    zero-phase pass of mixer_lowpass() (or the given taps).
    '''
    check_carrier(fc, w.sample_rate, bandwidth)
    if fc == 0:
        return w
    if lowpass is None:
        lowpass = mixer_lowpass(fc, w.sample_rate, bandwidth)
    mixed = 2.0 * w.samples * np.cos(2.0 * np.pi * fc * w.time_axis())
    padlen = min(3 * len(lowpass), mixed.size - 1)
    return w.with_samples(signal.filtfilt(lowpass, [1.0], mixed, padlen=padlen))


WORKED_EXAMPLE_S1 = (1, -1, -1, -1, 1, 1, 1, -1, 1, 1, 1, 1, 1, 1, -1, 1)
WORKED_EXAMPLE_S2 = (-1, -1, 1, -1, 1, 1, 1, -1, 1, 1, -1, -1, -1, 1, -1, -1)


def worked_example_frame():
    '''The two 16-symbol sequences of the two-subcarrier worked example.'''
    return BitFrame(np.array([WORKED_EXAMPLE_S1, WORKED_EXAMPLE_S2]))
