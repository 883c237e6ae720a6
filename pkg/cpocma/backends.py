'''
Uniform modem backends. Every system the harness can drive is wrapped
in a backend that takes the shared carrier configuration and exposes
modulate / demodulate plus the frame geometry the harness needs.
'''
import logging
from enum import Enum

from cpocma.baselines import (
    DEFAULT_ROLLOFF, DEFAULT_SPAN, DEFAULT_SPREADING_GAIN, BpskConfig, CdmaConfig, FdmaConfig,
    bpsk_demodulate, bpsk_modulate, cdma_demodulate, cdma_modulate, fdma_demodulate, fdma_modulate)
from cpocma.errors import SimConfigError
from cpocma.rx import DELTA_LATTICE, demodulate, matched_only_decode
from cpocma.tx import baseband_bandwidth, check_carrier, downconvert, mixer_lowpass, transmit, upconvert

log = logging.getLogger(__name__)


class SystemKind(str, Enum):
    CPOCMA = 'cpocma'
    CDMA = 'cdma'
    FDMA = 'fdma'
    BPSK_CONTROL = 'bpsk'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as err:
            raise SimConfigError(
                'Unknown system %r (expected one of %s)' % (value, ', '.join(k.value for k in cls)), 'system', err)


class ModemBackend(object):
    '''
    Base backend. `carrier` is the shared CarrierConfig: its f sets the
    symbol rate, its sample_rate the sampling grid and its
    num_subcarriers the number of users or subcarriers.
    '''
    kind = None

    def __init__(self, carrier, **kwargs):
        self.carrier = carrier

    rows = property(
        lambda self: self.carrier.num_subcarriers,
        None,
        None,
        '''
        Rows of the BitFrame one modulate() call carries
        '''
    )

    # real-valued baseband output unless a backend mixes to a carrier
    passband = False

    symbol_rate = property(
        lambda self: self.config.symbol_rate,
        None,
        None,
        '''
        Symbols per second on each row, from the modem's own configuration
        '''
    )

    def bits_per_frame(self, M):
        return self.rows * M

    def payload_duration(self, M):
        '''Signal time occupied by the M symbol slots, in seconds.'''
        return M / self.symbol_rate

    def nominal_bandwidth(self):
        raise NotImplementedError

    def modulate(self, frame):
        raise NotImplementedError

    def demodulate(self, w, M):
        raise NotImplementedError


class CpocmaBackend(ModemBackend):
    kind = SystemKind.CPOCMA

    def __init__(self, carrier, carrier_frequency=0.0, delta_policy=DELTA_LATTICE, matched_only=False, **kwargs):
        super(CpocmaBackend, self).__init__(carrier, **kwargs)
        self.carrier_frequency = float(carrier_frequency or 0.0)
        self.delta_policy = delta_policy
        self.matched_only = matched_only
        if matched_only and carrier.num_subcarriers != 1:
            raise SimConfigError('Matched-only decoding needs exactly one subcarrier', 'carrier.num_subcarriers')
        self.bandwidth = baseband_bandwidth(carrier)
        check_carrier(self.carrier_frequency, carrier.sample_rate, self.bandwidth)
        self.lowpass = None
        if self.carrier_frequency:
            self.lowpass = mixer_lowpass(self.carrier_frequency, carrier.sample_rate, self.bandwidth)

    symbol_rate = property(lambda self: self.carrier.f)
    passband = property(lambda self: bool(self.carrier_frequency))

    def nominal_bandwidth(self):
        '''2fN + 2f'''
        return 2.0 * self.carrier.f * (self.carrier.num_subcarriers + 1)

    def modulate(self, frame):
        w = transmit(frame, self.carrier)
        if self.carrier_frequency:
            w = upconvert(w, self.carrier_frequency, self.bandwidth)
        return w

    def demodulate(self, w, M):
        if self.carrier_frequency:
            w = downconvert(w, self.carrier_frequency, self.bandwidth, self.lowpass)
        if self.matched_only:
            return matched_only_decode(w, self.carrier, M)
        return demodulate(w, self.carrier, M, delta_policy=self.delta_policy)


class CdmaBackend(ModemBackend):
    kind = SystemKind.CDMA

    def __init__(self, carrier, spreading_gain=DEFAULT_SPREADING_GAIN, **kwargs):
        super(CdmaBackend, self).__init__(carrier, **kwargs)
        self.config = CdmaConfig(carrier.f, carrier.sample_rate, carrier.num_subcarriers, spreading_gain)

    def nominal_bandwidth(self):
        '''P times the 4f single-carrier bandwidth'''
        return 4.0 * self.carrier.f * self.config.spreading_gain

    def modulate(self, frame):
        return cdma_modulate(frame, self.config)

    def demodulate(self, w, M):
        return cdma_demodulate(w, self.config, M)


class FdmaBackend(ModemBackend):
    kind = SystemKind.FDMA

    def __init__(self, carrier, rolloff=DEFAULT_ROLLOFF, span=DEFAULT_SPAN, spacing_factor=None, **kwargs):
        super(FdmaBackend, self).__init__(carrier, **kwargs)
        self.config = FdmaConfig(carrier.f, carrier.sample_rate, carrier.num_subcarriers,
                                 rolloff, span, spacing_factor)

    def nominal_bandwidth(self):
        '''2N times the 4f single-carrier bandwidth'''
        return 8.0 * self.carrier.f * self.carrier.num_subcarriers

    def modulate(self, frame):
        return fdma_modulate(frame, self.config)

    def demodulate(self, w, M):
        return fdma_demodulate(w, self.config, M)


class BpskBackend(ModemBackend):
    '''Single-stream control modem; ignores num_subcarriers.'''
    kind = SystemKind.BPSK_CONTROL

    def __init__(self, carrier, **kwargs):
        super(BpskBackend, self).__init__(carrier, **kwargs)
        self.config = BpskConfig(carrier.f, carrier.sample_rate)

    rows = property(lambda self: 1)

    def nominal_bandwidth(self):
        '''null-to-null width of the rectangular pulse'''
        return 2.0 * self.carrier.f

    def modulate(self, frame):
        return bpsk_modulate(frame, self.config)

    def demodulate(self, w, M):
        return bpsk_demodulate(w, self.config, M)


BACKENDS = {
    SystemKind.CPOCMA: CpocmaBackend,
    SystemKind.CDMA: CdmaBackend,
    SystemKind.FDMA: FdmaBackend,
    SystemKind.BPSK_CONTROL: BpskBackend,
}

# options each backend understands
BACKEND_OPTIONS = {
    SystemKind.CPOCMA: ('carrier_frequency', 'delta_policy', 'matched_only'),
    SystemKind.CDMA: ('spreading_gain',),
    SystemKind.FDMA: ('rolloff', 'span', 'spacing_factor'),
    SystemKind.BPSK_CONTROL: (),
}


def get_backend(system, carrier, **options):
    '''Build the backend for `system`; unknown options are ignored.'''
    kind = SystemKind.parse(system)
    accepted = dict((key, value) for key, value in options.items()
                    if key in BACKEND_OPTIONS[kind] and value is not None)
    log.debug('backend %s with %r', kind.value, accepted)
    return BACKENDS[kind](carrier, **accepted)
