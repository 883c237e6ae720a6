'''
Reference modems for the comparisons: synchronous orthogonal-code CDMA,
SRRC-shaped FDMA and a rectangular BPSK control modem. All of them run
at the same symbol rate f as the chaotic system so that a frame of N x M
bits occupies M symbol periods in every system.
'''
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, signal, special

from cpocma.basis import integer_ratio
from cpocma.errors import SimConfigError, SimDimensionError
from cpocma.tx import BitFrame, Waveform, check_rate

log = logging.getLogger(__name__)

DEFAULT_SPREADING_GAIN = 16
DEFAULT_ROLLOFF = 0.25
DEFAULT_SPAN = 8


def _timing(symbol_rate, sample_rate, section):
    try:
        rate, fs = float(symbol_rate), float(sample_rate)
    except (TypeError, ValueError) as err:
        raise SimConfigError('Symbol and sample rates must be numbers', section, err)
    if not (math.isfinite(rate) and rate > 0):
        raise SimConfigError('Symbol rate must be positive', '%s.symbol_rate' % section)
    sps = integer_ratio(fs, rate) if math.isfinite(fs) else None
    if sps is None or sps < 2:
        raise SimConfigError(
            'Sample rate %g Hz is not an integer multiple (>= 2) of %g Hz' % (fs, rate), '%s.sample_rate' % section)
    return rate, fs, sps


def _check_users(n, section):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise SimConfigError('Number of users must be a positive integer', '%s.num_users' % section)
    return int(n)


def _check_frame(frame, rows):
    if frame.num_subcarriers != rows:
        raise SimDimensionError('Frame has %d rows, modem carries %d users' % (frame.num_subcarriers, rows))


def _check_slots(M):
    if isinstance(M, bool) or not isinstance(M, (int, np.integer)) or M < 1:
        raise SimConfigError('Number of symbol slots must be a positive integer', 'slots')
    return int(M)


#
# BPSK control modem

@dataclass(frozen=True)
class BpskConfig(object):
    symbol_rate: float
    sample_rate: float
    sps: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rate, fs, sps = _timing(self.symbol_rate, self.sample_rate, 'bpsk')
        object.__setattr__(self, 'symbol_rate', rate)
        object.__setattr__(self, 'sample_rate', fs)
        object.__setattr__(self, 'sps', sps)


def bpsk_modulate(frame, cfg):
    '''Rectangular NRZ, one symbol of silence on either side.'''
    _check_frame(frame, 1)
    row = frame.symbols[0].astype(float)
    samples = np.zeros((row.size + 2) * cfg.sps)
    samples[cfg.sps:cfg.sps * (row.size + 1)] = np.repeat(row, cfg.sps)
    return Waveform(samples, cfg.sample_rate, symbol_offset=cfg.sps)


def bpsk_demodulate(w, cfg, M):
    '''Integrate and dump over each symbol period, slice at zero.'''
    check_rate(w, cfg)
    M = _check_slots(M)
    start = w.symbol_offset
    if start < 0 or start + M * cfg.sps > len(w):
        raise SimDimensionError('Waveform too short for %d symbols' % M)
    dumps = w.samples[start:start + M * cfg.sps].reshape(M, cfg.sps).sum(axis=1) / cfg.sample_rate
    return BitFrame(np.where(dumps >= 0, 1, -1))


def bpsk_theory_ber(eb_n0_db):
    '''0.5 * erfc(sqrt(Eb/N0)) for antipodal signalling in AWGN.'''
    return 0.5 * special.erfc(np.sqrt(10.0 ** (np.asarray(eb_n0_db, dtype=float) / 10.0)))


#
# CDMA

def orthogonal_codes(P):
    '''P x P +1/-1 matrix with pairwise orthogonal rows (row 0 is all ones).'''
    if isinstance(P, bool) or not isinstance(P, (int, np.integer)) or P < 2 or P & (P - 1):
        raise SimConfigError('Spreading gain must be a power of two, got %r' % (P,), 'cdma.spreading_gain')
    return linalg.hadamard(int(P)).astype(np.int8)


def spread(bits, code):
    '''Each +1/-1 bit times the code: len(bits) * P chips.'''
    return np.outer(np.asarray(bits), np.asarray(code)).reshape(-1)


def despread(chips, code):
    '''Per-bit correlation with the code; despread(spread(b, c), c) == P * b.'''
    code = np.asarray(code)
    chips = np.asarray(chips)
    if chips.size % code.size:
        raise SimDimensionError('%d chips is not a multiple of P = %d' % (chips.size, code.size))
    return chips.reshape(-1, code.size).dot(code)


@dataclass(frozen=True)
class CdmaConfig(object):
    '''
    Synchronous CDMA with rectangular chips. User n spreads with code
    row n (the all-ones row is left unused), so at most P-1 users.
    '''
    symbol_rate: float
    sample_rate: float
    num_users: int = 1
    spreading_gain: int = DEFAULT_SPREADING_GAIN
    sps: int = field(init=False, repr=False, compare=False)
    samples_per_chip: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rate, fs, sps = _timing(self.symbol_rate, self.sample_rate, 'cdma')
        users = _check_users(self.num_users, 'cdma')
        P = self.spreading_gain
        orthogonal_codes(P)
        if users > P - 1:
            raise SimConfigError('Only %d codes available for %d users' % (P - 1, users), 'cdma.num_users')
        if sps % P:
            raise SimConfigError(
                '%d samples per symbol cannot hold %d chips' % (sps, P), 'cdma.spreading_gain')
        object.__setattr__(self, 'symbol_rate', rate)
        object.__setattr__(self, 'sample_rate', fs)
        object.__setattr__(self, 'num_users', users)
        object.__setattr__(self, 'sps', sps)
        object.__setattr__(self, 'samples_per_chip', sps // P)

    codes = property(
        lambda self: orthogonal_codes(self.spreading_gain)[1:self.num_users + 1],
        None,
        None,
        '''
        num_users x P code rows in use
        '''
    )


def cdma_modulate(frame, cfg):
    '''Sum of all users' spread chip streams, one symbol of guard each side.'''
    _check_frame(frame, cfg.num_users)
    chips = sum(spread(frame.symbols[n], code) for n, code in enumerate(cfg.codes))
    M = frame.num_slots
    samples = np.zeros((M + 2) * cfg.sps)
    samples[cfg.sps:cfg.sps * (M + 1)] = np.repeat(chips.astype(float), cfg.samples_per_chip)
    return Waveform(samples, cfg.sample_rate, symbol_offset=cfg.sps)


def cdma_demodulate(w, cfg, M):
    '''Integrate and dump per chip, despread with each user's code, slice.'''
    check_rate(w, cfg)
    M = _check_slots(M)
    start = w.symbol_offset
    if start < 0 or start + M * cfg.sps > len(w):
        raise SimDimensionError('Waveform too short for %d symbols' % M)
    chip_values = w.samples[start:start + M * cfg.sps].reshape(
        M * cfg.spreading_gain, cfg.samples_per_chip).sum(axis=1) / cfg.sample_rate
    decisions = np.vstack([despread(chip_values, code) for code in cfg.codes])
    return BitFrame(np.where(decisions >= 0, 1, -1))


#
# FDMA

def srrc_taps(rolloff, span, sps):
    '''
    Square-root raised cosine, `span` symbols either side of the peak
    (2*span*sps + 1 taps), normalized to unit energy sum(h^2) = 1.
    '''
    if not 0 < rolloff <= 1:
        raise SimConfigError('Roll-off must be in (0, 1]', 'fdma.rolloff')
    if isinstance(span, bool) or not isinstance(span, (int, np.integer)) or span < 1:
        raise SimConfigError('SRRC span must be a positive integer', 'fdma.span')
    t = np.arange(-span * sps, span * sps + 1) / float(sps)
    h = np.zeros_like(t)
    a = rolloff
    for i, ti in enumerate(t):
        if ti == 0:
            h[i] = 1 + a * (4 / np.pi - 1)
        elif np.isclose(abs(ti), 1 / (4 * a)):
            h[i] = (a / np.sqrt(2)) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * a))
                                       + (1 - 2 / np.pi) * np.cos(np.pi / (4 * a)))
        else:
            num = np.sin(np.pi * ti * (1 - a)) + 4 * a * ti * np.cos(np.pi * ti * (1 + a))
            den = np.pi * ti * (1 - (4 * a * ti) ** 2)
            h[i] = num / den
    return h / np.sqrt(np.sum(h ** 2))


@dataclass(frozen=True)
class FdmaConfig(object):
    '''
    SRRC-shaped BPSK per user. User k (1-based) sits on the carrier
    (k - 1/2) * spacing_factor * f, so with the default spacing 1+alpha
    neighbouring bands touch and the lowest band starts at 0 Hz.
    '''
    symbol_rate: float
    sample_rate: float
    num_users: int = 1
    rolloff: float = DEFAULT_ROLLOFF
    span: int = DEFAULT_SPAN
    spacing_factor: float = None
    sps: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rate, fs, sps = _timing(self.symbol_rate, self.sample_rate, 'fdma')
        users = _check_users(self.num_users, 'fdma')
        try:
            a = float(self.rolloff)
        except (TypeError, ValueError) as err:
            raise SimConfigError('Roll-off must be a number', 'fdma.rolloff', err)
        if not 0 < a <= 1:
            raise SimConfigError('Roll-off must be in (0, 1]', 'fdma.rolloff')
        spacing = 1.0 + a if self.spacing_factor is None else float(self.spacing_factor)
        if spacing < 1.0 + a - 1e-12:
            raise SimConfigError(
                'Carrier spacing %g f overlaps SRRC bands of width %g f' % (spacing, 1.0 + a), 'fdma.spacing_factor')
        top = (users - 0.5) * spacing * rate + 0.5 * (1.0 + a) * rate
        if top >= fs / 2.0:
            raise SimConfigError(
                'Highest FDMA band edge %g Hz reaches the Nyquist limit %g Hz' % (top, fs / 2.0), 'fdma.num_users')
        object.__setattr__(self, 'symbol_rate', rate)
        object.__setattr__(self, 'sample_rate', fs)
        object.__setattr__(self, 'num_users', users)
        object.__setattr__(self, 'rolloff', a)
        object.__setattr__(self, 'spacing_factor', spacing)
        object.__setattr__(self, 'sps', sps)
        srrc_taps(a, self.span, sps)

    carriers = property(
        lambda self: tuple((k - 0.5) * self.spacing_factor * self.symbol_rate
                           for k in range(1, self.num_users + 1)),
        None,
        None,
        '''
        Carrier frequency of each user in Hz
        '''
    )

    def taps(self):
        return srrc_taps(self.rolloff, self.span, self.sps)


def fdma_modulate(frame, cfg):
    '''Each user's SRRC pulse train mixed onto its carrier by sqrt(2) cos.'''
    _check_frame(frame, cfg.num_users)
    h = cfg.taps()
    center = cfg.span * cfg.sps
    M = frame.num_slots
    total = M * cfg.sps + 2 * center
    t = np.arange(total) / cfg.sample_rate
    samples = np.zeros(total)
    for row, fc in zip(frame.symbols, cfg.carriers):
        base = signal.upfirdn(h, row.astype(float), up=cfg.sps)
        samples[:base.size] += np.sqrt(2.0) * np.cos(2.0 * np.pi * fc * t[:base.size]) * base
    return Waveform(samples, cfg.sample_rate, symbol_offset=center)


def fdma_demodulate(w, cfg, M):
    '''
    Mix each carrier down by sqrt(2) cos, SRRC matched filter, sample at
    the pulse peaks (two filter delays after each symbol start), slice.
    '''
    check_rate(w, cfg)
    M = _check_slots(M)
    h = cfg.taps()
    center = cfg.span * cfg.sps
    index = w.symbol_offset + center + np.arange(M) * cfg.sps
    if index[-1] >= len(w) + h.size - 1:
        raise SimDimensionError('Waveform too short for %d symbols' % M)
    t = w.time_axis()
    rows = []
    for fc in cfg.carriers:
        mixed = np.sqrt(2.0) * np.cos(2.0 * np.pi * fc * t) * w.samples
        rows.append(signal.fftconvolve(mixed, h)[index])
    return BitFrame(np.where(np.vstack(rows) >= 0, 1, -1))
