'''
AWGN and tapped-delay-line multipath with Eb/N0-calibrated noise.
'''
import logging
import math
from dataclasses import dataclass

import numpy as np

from cpocma.errors import SimConfigError, SimNumericError

log = logging.getLogger(__name__)

# linear power gains, delays in seconds
SINGLE_TAP = ((1.0, 0.0),)
THREE_RAY = ((0.7, 0.0), (0.2, 0.1e-6), (0.1, 0.125e-6))

_GAIN_SLACK = 1e-9


def _normalize_taps(taps, path='channel.taps'):
    try:
        pairs = tuple((float(g), float(d)) for g, d in taps)
    except (TypeError, ValueError) as err:
        raise SimConfigError('Channel taps must be (power_gain, delay) pairs', path, err)
    if not pairs:
        raise SimConfigError('At least one channel tap is required', path)
    gains = [g for g, _ in pairs]
    delays = [d for _, d in pairs]
    if any(g < 0 or not math.isfinite(g) for g in gains):
        raise SimConfigError('Power gains must be non-negative', path)
    if sum(gains) > 1.0 + _GAIN_SLACK:
        raise SimConfigError('Power gains sum to %g, more than 1' % sum(gains), path)
    if delays[0] != 0:
        raise SimConfigError('The first tap must have zero delay', path)
    if any(b < a for a, b in zip(delays, delays[1:])) or not all(math.isfinite(d) for d in delays):
        raise SimConfigError('Tap delays must be finite and nondecreasing', path)
    return pairs


@dataclass(frozen=True)
class ChannelSpec(object):
    '''
    eb_n0_db: target per-bit SNR in dB; None (or +inf) means noiseless
    taps:     (linear power gain, delay in s) pairs, first delay 0
    seed:     noise seed, combined with the run seed by noise_seed()
    '''
    eb_n0_db: float = None
    taps: tuple = SINGLE_TAP
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'taps', _normalize_taps(self.taps))
        if self.eb_n0_db is not None:
            try:
                value = float(self.eb_n0_db)
            except (TypeError, ValueError) as err:
                raise SimConfigError('Eb/N0 must be a number', 'channel.eb_n0_db', err)
            if math.isnan(value) or value == -math.inf:
                raise SimConfigError('Eb/N0 must be a number or +inf', 'channel.eb_n0_db')
            object.__setattr__(self, 'eb_n0_db', value)
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise SimConfigError('Channel seed must be a non-negative integer', 'channel.seed')

    noiseless = property(lambda self: self.eb_n0_db is None or self.eb_n0_db == math.inf)
    flat = property(lambda self: self.taps == SINGLE_TAP)


def calibrate_noise_sigma(eb_n0_db, waveform, total_bits):
    '''
    Per-sample noise standard deviation for a target Eb/N0.

    Eb is measured on the waveform itself: (sum x^2 / fs) / total_bits.
    Then N0 = Eb / 10^(eb_n0_db/10) and sigma = sqrt(N0 * fs / 2).
    '''
    if total_bits < 1:
        raise SimConfigError('Need at least one bit to calibrate noise', 'total_bits')
    energy = waveform.energy
    if energy <= 0:
        raise SimNumericError('Cannot calibrate noise on a zero-energy waveform')
    eb = energy / total_bits
    n0 = eb / 10.0 ** (eb_n0_db / 10.0)
    sigma = math.sqrt(n0 * waveform.sample_rate / 2.0)
    log.debug('calibrated sigma=%g (Eb=%g, Eb/N0=%g dB)', sigma, eb, eb_n0_db)
    return sigma


def apply_awgn(w, sigma, seed):
    '''Add zero-mean Gaussian samples of standard deviation sigma.'''
    if not sigma >= 0:
        raise SimConfigError('Noise standard deviation must be non-negative', 'sigma')
    if sigma == 0:
        return w
    rng = np.random.default_rng(seed)
    return w.with_samples(w.samples + rng.normal(0.0, sigma, w.samples.size))


def apply_multipath(w, taps):
    '''
    output[k] = sum_i sqrt(g_i) * input[k - floor(d_i * fs + 1/2)], same
    length as the input. Half-sample delays round up.
    '''
    taps = _normalize_taps(taps)
    if taps == SINGLE_TAP:
        return w
    x = w.samples
    out = np.zeros_like(x)
    for gain, delay in taps:
        shift = int(math.floor(delay * w.sample_rate + 0.5))
        if shift >= x.size:
            continue
        out[shift:] += math.sqrt(gain) * x[:x.size - shift]
    return w.with_samples(out)


def apply_channel(w, spec, total_bits, seed=None):
    '''
    Multipath, then receiver-referred noise calibrated on the transmitted
    waveform. `seed` overrides spec.seed.
    '''
    received = apply_multipath(w, spec.taps)
    if spec.noiseless:
        return received
    sigma = calibrate_noise_sigma(spec.eb_n0_db, w, total_bits)
    return apply_awgn(received, sigma, spec.seed if seed is None else seed)


def noise_seed(spec, seed, *key):
    '''
    Noise stream for one frame. The run seed and spec.seed both enter
    the entropy, `key` spawns the per-point and per-frame children.
    '''
    return np.random.SeedSequence([int(seed), int(spec.seed)], spawn_key=key)
