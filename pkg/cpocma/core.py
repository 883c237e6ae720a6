import copy
import logging
import math
import os

import numpy as np

from cpocma import __version__
from cpocma.backends import BACKEND_OPTIONS, SystemKind, get_backend
from cpocma.baselines import bpsk_theory_ber
from cpocma.basis import DEFAULT_TAIL_SYMBOLS, CarrierConfig
from cpocma.channel import SINGLE_TAP, THREE_RAY, ChannelSpec, noise_seed
from cpocma.errors import SimConfigError, SimDimensionError, SimError, SimNumericError
from cpocma.harness import (
    BER_COLUMNS, DEFAULT_BITS_PER_POINT, DEFAULT_FRACTION, DEFAULT_FRAME_SLOTS, DEFAULT_TARGET_ERRORS, FAIL,
    INDETERMINATE, MIN_BITS_PER_POINT, PASS, BandwidthCheck, BerPoint, SpectrumEstimate, ThroughputPoint,
    bandwidth_law, binomial_interval, check_rate_parity, compare_ordering, compare_psnr, compare_throughput,
    estimate_bandwidth, image_roundtrip, measure_bandwidth, psnr, random_frame, read_pnm, run_ber_sweep, run_frame,
    seed_sequence, spectrum_slots, theory_agreement, throughput_per_hz, write_csv, write_pnm)
from cpocma.rx import DELTA_LATTICE, DELTA_POLICIES
from cpocma.theory import DEFAULT_PATTERNS, DERIVED, EXPECTATION, FORMULAS, PATTERN_POLICIES, TheoryPoint, theory_curve
from cpocma.tx import BitFrame, Waveform, bits_to_symbols, parallel_to_serial, serial_to_parallel, symbols_to_bits

# Use simplejson if it's available.
try:
    import simplejson as json
except ImportError:
    import json

log = logging.getLogger(__name__)

CONFIG_ENVIRONMENT = 'CPOCMA_CONFIG'

SECTIONS = ('preset', 'system', 'carrier', 'channel', 'sweep', 'cdma', 'fdma', 'output', 'seed')

CHANNEL_PRESETS = {
    'awgn': SINGLE_TAP,
    'three_ray': THREE_RAY,
}

PRESETS = {
    'single_carrier': {
        'system': 'cpocma',
        'carrier': {'f': 2.5e6, 'num_subcarriers': 1, 'sample_rate': 40e6, 'carrier_frequency': 5e6},
        'channel': {'eb_n0_db': [0, 2, 4, 6, 8, 10, 12], 'taps': 'awgn'},
    },
    'multipath': {
        'system': 'cpocma',
        'carrier': {'f': 0.3125e6, 'num_subcarriers': 2, 'sample_rate': 40e6},
        'channel': {'eb_n0_db': [0, 2, 4, 6, 8, 10, 12, 14], 'taps': 'three_ray'},
    },
    'awgn_pair': {
        'system': 'cpocma',
        'carrier': {'f': 0.3125e6, 'num_subcarriers': 2, 'sample_rate': 40e6},
        'channel': {'eb_n0_db': [0, 2, 4, 6, 8, 10, 12, 14], 'taps': 'awgn'},
    },
    'worked_example': {
        'system': 'cpocma',
        'carrier': {'f': 1.0, 'num_subcarriers': 2, 'base_freqs': [1.0, 2.0], 'sample_rate': 16.0},
        'channel': {'eb_n0_db': None, 'taps': 'awgn'},
    },
}

THEORY_COLUMNS = ('eb_n0_db', 'sigma', 'p_cpomf', 'p_cpocf', 'p_e', 'formula', 'pattern_policy')
SPECTRUM_COLUMNS = ('freq', 'psd')
THROUGHPUT_COLUMNS = ('system', 'eb_n0_db', 'total_bits', 'bit_errors', 'throughput', 'bandwidth', 'theta')
COMPARE_COLUMNS = BER_COLUMNS + ('verdict',)
COMPARE_THROUGHPUT_COLUMNS = THROUGHPUT_COLUMNS + ('verdict',)
COMPARE_IMAGE_COLUMNS = ('seed', 'system', 'psnr_db', 'verdict')
IMAGE_COLUMNS = ('system', 'psnr_db')
AGREEMENT_COLUMNS = ('eb_n0_db', 'total_bits', 'bit_errors', 'ber', 'p_e', 'ratio', 'verdict')
BANDWIDTH_COLUMNS = ('N', 'measured', 'nominal', 'ratio', 'verdict')

# repeated image runs behind one majority verdict
DEFAULT_IMAGE_SEEDS = 5

COMPARED_SYSTEMS = (SystemKind.CPOCMA, SystemKind.FDMA, SystemKind.CDMA)


#
# Configuration files

def load_config(source):
    '''
    Parse a JSON configuration document. `source` is a path, an open
    stream or an already parsed dict.
    '''
    if isinstance(source, dict):
        return copy.deepcopy(source)
    try:
        if hasattr(source, 'read'):
            config = json.load(source)
        else:
            with open(source) as stream:
                config = json.load(stream)
    except (IOError, OSError) as err:
        raise SimConfigError('Cannot read configuration file %r' % (source,), 'config', err)
    except ValueError as err:
        raise SimConfigError('Configuration is not valid JSON: %s' % err, 'config', err)
    if not isinstance(config, dict):
        raise SimConfigError('Configuration must be a JSON object', 'config')
    return config


def merge_config(*layers):
    '''
    Layer configuration dicts left to right; nested sections merge key by
    key, anything else in a later layer replaces the earlier value. A
    top-level None means "not given" and is skipped; inside a section
    None is a value (eb_n0_db: null selects the noiseless channel).
    '''
    merged = {}
    for layer in layers:
        for key, value in (layer or {}).items():
            if value is not None:
                merged[key] = _merge_value(merged.get(key), value)
    return merged


def _merge_value(old, new):
    if isinstance(old, dict) and isinstance(new, dict):
        out = copy.deepcopy(old)
        for key, value in new.items():
            out[key] = _merge_value(out.get(key), value)
        return out
    return copy.deepcopy(new)


def expand_preset(config):
    '''Put the named preset underneath the explicit keys of `config`.'''
    name = config.get('preset')
    if name is None:
        return copy.deepcopy(config)
    if name not in PRESETS:
        raise SimConfigError('Unknown preset %r (expected one of %s)' % (name, ', '.join(sorted(PRESETS))), 'preset')
    return merge_config(PRESETS[name], config)


#
# Validation

class ValidatedConfig(object):
    '''
    A configuration whose every value has been checked. Built only by
    validate(); the raw dict it came from stays available as `.settings`.
    '''

    def __init__(self, settings, system, carrier, grid, sweep, options, output, seed):
        self.settings = settings
        self.system = system
        self.carrier = carrier
        self.grid = grid
        self.sweep = sweep
        self.options = options
        self.output = output
        self.seed = seed

    def backend(self, system=None):
        return get_backend(system or self.system, self.carrier, **self.options)

    def __repr__(self):
        return '<ValidatedConfig %s N=%d %d grid points>' % (
            self.system.value, self.carrier.num_subcarriers, len(self.grid))


def _section(config, name):
    value = config.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise SimConfigError('Section must be an object', name)
    return value


def _check_keys(section, name, allowed):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise SimConfigError('Unknown key(s) %s' % ', '.join(unknown), name)


def _int(value, path, minimum=None, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool):
        raise SimConfigError('Expected an integer', path)
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, (int, np.integer)):
        raise SimConfigError('Expected an integer', path)
    if minimum is not None and value < minimum:
        raise SimConfigError('Must be at least %d' % minimum, path)
    return int(value)


def _float(value, path, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool):
        raise SimConfigError('Expected a number', path)
    try:
        value = float(value)
    except (TypeError, ValueError) as err:
        raise SimConfigError('Expected a number', path, err)
    if math.isnan(value):
        raise SimConfigError('Expected a number', path)
    return value


def _choice(value, path, choices):
    if value not in choices:
        raise SimConfigError('Expected one of %s, got %r' % (', '.join(choices), value), path)
    return value


def _channel_grid(channel, seed):
    _check_keys(channel, 'channel', ('eb_n0_db', 'taps', 'seed'))
    taps = channel.get('taps', 'awgn')
    if isinstance(taps, str):
        if taps not in CHANNEL_PRESETS:
            raise SimConfigError(
                'Unknown channel preset %r (expected one of %s)' % (taps, ', '.join(sorted(CHANNEL_PRESETS))),
                'channel.taps')
        taps = CHANNEL_PRESETS[taps]
    channel_seed = _int(channel.get('seed', seed), 'channel.seed', minimum=0)
    values = channel.get('eb_n0_db')
    if values is None or not isinstance(values, (list, tuple)):
        values = [values]
    if not values:
        raise SimConfigError('Eb/N0 grid is empty', 'channel.eb_n0_db')
    grid = []
    for i, value in enumerate(values):
        path = 'channel.eb_n0_db[%d]' % i if len(values) > 1 else 'channel.eb_n0_db'
        grid.append(ChannelSpec(_float(value, path, allow_none=True), taps, channel_seed))
    return tuple(grid)


def _sweep(sweep):
    _check_keys(sweep, 'sweep', ('bits_per_point', 'target_errors', 'frame_slots', 'pattern_policy', 'formula',
                                 'patterns', 'bandwidth_model', 'fraction'))
    out = {
        'bits_per_point': _int(sweep.get('bits_per_point', DEFAULT_BITS_PER_POINT), 'sweep.bits_per_point',
                               minimum=MIN_BITS_PER_POINT),
        'target_errors': _int(sweep.get('target_errors', DEFAULT_TARGET_ERRORS), 'sweep.target_errors',
                              minimum=1, allow_none=True),
        'frame_slots': _int(sweep.get('frame_slots', DEFAULT_FRAME_SLOTS), 'sweep.frame_slots', minimum=1),
        'pattern_policy': _choice(sweep.get('pattern_policy', EXPECTATION), 'sweep.pattern_policy',
                                  PATTERN_POLICIES),
        'formula': _choice(sweep.get('formula', DERIVED), 'sweep.formula', FORMULAS),
        'patterns': _int(sweep.get('patterns', DEFAULT_PATTERNS), 'sweep.patterns', minimum=1),
        'bandwidth_model': _choice(sweep.get('bandwidth_model', 'measured'), 'sweep.bandwidth_model',
                                   ('measured', 'nominal')),
        'fraction': _float(sweep.get('fraction', DEFAULT_FRACTION), 'sweep.fraction'),
    }
    if not 0 < out['fraction'] < 1:
        raise SimConfigError('Power fraction must lie in (0, 1)', 'sweep.fraction')
    return out


def _options(carrier, cdma, fdma):
    _check_keys(cdma, 'cdma', BACKEND_OPTIONS[SystemKind.CDMA])
    _check_keys(fdma, 'fdma', BACKEND_OPTIONS[SystemKind.FDMA])
    options = {
        'carrier_frequency': _float(carrier.get('carrier_frequency', 0.0), 'carrier.carrier_frequency'),
        'delta_policy': _choice(carrier.get('delta_policy', DELTA_LATTICE), 'carrier.delta_policy', DELTA_POLICIES),
        'matched_only': bool(carrier.get('matched_only', False)),
    }
    if 'spreading_gain' in cdma:
        options['spreading_gain'] = _int(cdma['spreading_gain'], 'cdma.spreading_gain', minimum=2)
    if 'rolloff' in fdma:
        options['rolloff'] = _float(fdma['rolloff'], 'fdma.rolloff')
    if 'span' in fdma:
        options['span'] = _int(fdma['span'], 'fdma.span', minimum=1)
    if fdma.get('spacing_factor') is not None:
        options['spacing_factor'] = _float(fdma['spacing_factor'], 'fdma.spacing_factor')
    return options


def validate(config):
    '''
    Check a parsed configuration eagerly and return a ValidatedConfig.
    Every module invariant the configuration can break is checked here,
    before any computation; failures raise SimConfigError naming the
    offending parameter path (e.g. "carrier.sample_rate").
    '''
    if isinstance(config, ValidatedConfig):
        return config
    if not isinstance(config, dict):
        raise SimConfigError('Configuration must be a dict', 'config')
    _check_keys(config, 'config', SECTIONS)
    settings = expand_preset(config)

    system = SystemKind.parse(settings.get('system', SystemKind.CPOCMA))
    seed = _int(settings.get('seed', 0), 'seed', minimum=0)

    carrier = _section(settings, 'carrier')
    _check_keys(carrier, 'carrier', ('f', 'num_subcarriers', 'base_freqs', 'sample_rate', 'tail_symbols',
                                     'carrier_frequency', 'delta_policy', 'matched_only'))
    if 'f' not in carrier:
        raise SimConfigError('Initial frequency is required', 'carrier.f')
    cfg = CarrierConfig(carrier['f'], carrier.get('num_subcarriers', 1), carrier.get('base_freqs'),
                        carrier.get('sample_rate'), carrier.get('tail_symbols', DEFAULT_TAIL_SYMBOLS))

    grid = _channel_grid(_section(settings, 'channel'), seed)
    sweep = _sweep(_section(settings, 'sweep'))
    options = _options(carrier, _section(settings, 'cdma'), _section(settings, 'fdma'))

    output = _section(settings, 'output')
    _check_keys(output, 'output', ('path', 'image', 'binary'))

    # build the backend now so code exhaustion or band overflow fails here
    get_backend(system, cfg, **options)

    validated = ValidatedConfig(settings, system, cfg, grid, sweep, options, dict(output), seed)
    log.debug('validated %r', validated)
    return validated


#
# One frame

def simulate_frame(system, cfg, channel, bits, seed=0, frame_slots=None, **options):
    '''
    One modulate -> channel -> demodulate pass over serial 0/1 `bits`.
    The bit count must fill whole slots of the system's frame. Returns
    (decoded serial bits, number of bit errors); the noise is drawn from
    `seed` and channel.seed, so the result is a pure function of the
    arguments.
    '''
    if not isinstance(cfg, CarrierConfig):
        raise SimConfigError('Expected a CarrierConfig', 'carrier')
    if channel is None:
        channel = ChannelSpec()
    backend = get_backend(system, cfg, **options)
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.size == 0 or bits.size % backend.rows:
        raise SimDimensionError(
            'Need a non-empty multiple of %d bits for %s, got %d' % (backend.rows, backend.kind.value, bits.size))
    frame = serial_to_parallel(bits_to_symbols(bits), backend.rows)
    if frame_slots is not None and frame.num_slots != frame_slots:
        raise SimDimensionError('Expected %d slots, got %d' % (frame_slots, frame.num_slots))
    decoded, errors = run_frame(backend, channel, frame, noise_seed(channel, seed, 0, 0, 1))
    return symbols_to_bits(parallel_to_serial(decoded)), errors


#
# Simulation object

class Simulation(object):
    '''
    A configured simulation run. Keyword arguments mirror the sections of
    the configuration file; unset ones come from `config` (a path, stream
    or dict), then from the file named by $CPOCMA_CONFIG, then from
    `preset`. Values are validated by the first run_* call.
    '''

    def __init__(self, **kwargs):
        self.__config = None
        self.__preset = None
        self.__system = None
        self.__carrier = None
        self.__channel = None
        self.__sweep = None
        self.__cdma = None
        self.__fdma = None
        self.__output = None
        self.__seed = None

        acceptable_keys = (
            'config',
            'preset',
            'system',
            'carrier',
            'channel',
            'sweep',
            'cdma',
            'fdma',
            'output',
            'seed',
        )

        for key in kwargs:
            if key in acceptable_keys:
                setattr(self, '_Simulation__%s' % key, kwargs[key])
            else:
                raise SimConfigError('Simulation.__init__: Unknown keyword argument %s' % key, key)

        # Pull the defaults from a configuration file if none were given
        if self.__config is None and os.environ.get(CONFIG_ENVIRONMENT):
            self.__config = os.environ[CONFIG_ENVIRONMENT]
            log.info('using configuration from $%s=%s', CONFIG_ENVIRONMENT, self.__config)

    config = property(
        lambda self: self.__config,
        lambda self, value: setattr(self, '_Simulation__config', value),
        lambda self: setattr(self, '_Simulation__config', None),
        '''
        Configuration file path, open stream or parsed dict. Explicit
        properties override its sections.
        '''
    )

    preset = property(
        lambda self: self.__preset,
        lambda self, value: setattr(self, '_Simulation__preset', value),
        lambda self: setattr(self, '_Simulation__preset', None),
        '''
        Name of a preset in PRESETS (single_carrier, multipath, awgn_pair,
        worked_example)
        '''
    )

    system = property(
        lambda self: self.__system,
        lambda self, value: setattr(self, '_Simulation__system', value),
        lambda self: setattr(self, '_Simulation__system', None),
        '''
        The modem to drive: cpocma, cdma, fdma or bpsk
        '''
    )

    carrier = property(
        lambda self: self.__carrier,
        lambda self, value: setattr(self, '_Simulation__carrier', value),
        lambda self: setattr(self, '_Simulation__carrier', None),
        '''
        Carrier section: f, num_subcarriers, base_freqs, sample_rate,
        tail_symbols, carrier_frequency, delta_policy, matched_only
        '''
    )

    channel = property(
        lambda self: self.__channel,
        lambda self, value: setattr(self, '_Simulation__channel', value),
        lambda self: setattr(self, '_Simulation__channel', None),
        '''
        Channel section: eb_n0_db (a number, a list or null for
        noiseless), taps (a preset name or [gain, delay] pairs), seed
        '''
    )

    sweep = property(
        lambda self: self.__sweep,
        lambda self, value: setattr(self, '_Simulation__sweep', value),
        lambda self: setattr(self, '_Simulation__sweep', None),
        '''
        Sweep section: bits_per_point, target_errors, frame_slots,
        pattern_policy, formula, patterns, bandwidth_model, fraction
        '''
    )

    cdma = property(
        lambda self: self.__cdma,
        lambda self, value: setattr(self, '_Simulation__cdma', value),
        lambda self: setattr(self, '_Simulation__cdma', None),
    )

    fdma = property(
        lambda self: self.__fdma,
        lambda self, value: setattr(self, '_Simulation__fdma', value),
        lambda self: setattr(self, '_Simulation__fdma', None),
    )

    output = property(
        lambda self: self.__output,
        lambda self, value: setattr(self, '_Simulation__output', value),
        lambda self: setattr(self, '_Simulation__output', None),
        '''
        Output section: path, image, binary
        '''
    )

    seed = property(
        lambda self: self.__seed,
        lambda self, value: setattr(self, '_Simulation__seed', value),
        lambda self: setattr(self, '_Simulation__seed', None),
    )

    def settings(self):
        '''The merged configuration dict: preset < file < properties.'''
        base = load_config(self.__config) if self.__config is not None else {}
        explicit = {
            'preset': self.__preset,
            'system': self.__system.value if isinstance(self.__system, SystemKind) else self.__system,
            'carrier': self.__carrier,
            'channel': self.__channel,
            'sweep': self.__sweep,
            'cdma': self.__cdma,
            'fdma': self.__fdma,
            'output': self.__output,
            'seed': self.__seed,
        }
        merged = merge_config(base, explicit)
        if merged.get('preset') is None:
            return merged
        preset = merged.pop('preset')
        return merge_config(expand_preset({'preset': preset}), merged)

    def _check_values(self):
        '''
        Validate the merged configuration before anything is computed.
        '''
        return validate(self.settings())

    def run_ber(self, stream=None, system=None):
        '''BER sweep over the configured Eb/N0 grid; rows go to `stream` as CSV.'''
        v = self._check_values()
        sweep = v.sweep
        points = run_ber_sweep(system or v.system, v.carrier, v.grid, sweep['bits_per_point'], v.seed,
                               sweep['target_errors'], sweep['frame_slots'], **v.options)
        if stream is not None:
            write_csv(stream, points)
        return points

    def run_theory(self, stream=None):
        '''Closed-form two-subcarrier BER over the configured Eb/N0 grid.'''
        v = self._check_values()
        if v.system != SystemKind.CPOCMA:
            raise SimConfigError('The closed form covers CPOCMA only', 'system')
        grid = [spec.eb_n0_db for spec in v.grid if not spec.noiseless]
        if not grid:
            raise SimConfigError('The theory curve needs finite Eb/N0 values', 'channel.eb_n0_db')
        sweep = v.sweep
        points = theory_curve(v.carrier, grid, sweep['frame_slots'], sweep['pattern_policy'], sweep['formula'],
                              sweep['patterns'], v.seed)
        if stream is not None:
            write_csv(stream, (dict(eb_n0_db=p.eb_n0_db, sigma=p.sigma, p_cpomf=p.p_cpomf, p_cpocf=p.p_cpocf,
                                    p_e=p.p_e, formula=sweep['formula'], pattern_policy=sweep['pattern_policy'])
                               for p in points), THEORY_COLUMNS)
        return points

    def run_spectrum(self, stream=None):
        '''Welch PSD of a long random transmission and its occupied bandwidth.'''
        v = self._check_values()
        backend = v.backend()
        slots = spectrum_slots(v.carrier.sps)
        w = backend.modulate(random_frame(backend.rows, slots, seed_sequence(v.seed, 0)))
        estimate = estimate_bandwidth(w, v.sweep['fraction'], baseband=not backend.passband)
        log.info('%s occupies %g Hz (%g%% power, nominal %g Hz)', v.system.value, estimate.bandwidth,
                 100 * estimate.fraction, backend.nominal_bandwidth())
        if stream is not None:
            write_csv(stream, (dict(freq=f, psd=p) for f, p in zip(estimate.freqs, estimate.psd)), SPECTRUM_COLUMNS)
        return estimate

    def run_throughput(self, stream=None, system=None):
        '''Throughput per Hz over the configured Eb/N0 grid.'''
        v = self._check_values()
        sweep = v.sweep
        points = throughput_per_hz(system or v.system, v.carrier, v.grid, v.seed, sweep['bandwidth_model'],
                                   sweep['bits_per_point'], sweep['target_errors'], sweep['frame_slots'],
                                   **v.options)
        if stream is not None:
            write_csv(stream, (p.__dict__ for p in points), THROUGHPUT_COLUMNS)
        return points

    def run_image(self, image, stream=None):
        '''
        Send a PGM/PPM image (bytes or an array) through the first channel
        of the grid. Returns (decoded image, PSNR in dB); the PSNR goes to
        `stream` as CSV.
        '''
        v = self._check_values()
        decoded, value = image_roundtrip(image, v.system, v.carrier, v.grid[0], v.seed, v.sweep['frame_slots'],
                                         **v.options)
        if stream is not None:
            write_csv(stream, [dict(system=v.system.value, psnr_db=value)], IMAGE_COLUMNS)
        return decoded, value

    def run_bandwidth_law(self, stream=None, counts=(1, 2, 3, 4)):
        '''Measured CPOCMA bandwidth against 2fN + 2f for each N in `counts`.'''
        v = self._check_values()
        rows = bandwidth_law(v.carrier, counts, fraction=v.sweep['fraction'], seed=v.seed)
        if stream is not None:
            write_csv(stream, rows, BANDWIDTH_COLUMNS)
        return rows

    def run_agreement(self, stream=None):
        '''
        Simulated CPOCMA BER against the closed form on the finite Eb/N0
        points of the grid. Returns (verdict, rows, shift in dB or None).
        '''
        v = self._check_values()
        theory = self.run_theory()
        grid = [spec for spec in v.grid if not spec.noiseless]
        sweep = v.sweep
        points = run_ber_sweep(SystemKind.CPOCMA, v.carrier, grid, sweep['bits_per_point'], v.seed,
                               sweep['target_errors'], sweep['frame_slots'], **v.options)
        verdict, rows, shift = theory_agreement(points, theory)
        if stream is not None:
            write_csv(stream, rows, AGREEMENT_COLUMNS)
        return verdict, rows, shift

    def _compared(self, v, systems):
        kinds = [SystemKind.parse(s) for s in systems]
        check_rate_parity([v.backend(kind) for kind in kinds], v.sweep['frame_slots'])
        return kinds

    def run_compare(self, stream=None, systems=COMPARED_SYSTEMS):
        '''
        Run every system in `systems` on the same configuration at the
        same data rate. Returns ({system: [BerPoint]}, [verdict per grid
        point]) where each verdict checks BER order in `systems` order.
        '''
        v = self._check_values()
        kinds = self._compared(v, systems)
        results = {}
        for kind in kinds:
            results[kind] = self.run_ber(system=kind)
        verdicts = [compare_ordering([results[kind][i] for kind in kinds]) for i in range(len(v.grid))]
        if stream is not None:
            rows = []
            for i, verdict in enumerate(verdicts):
                for kind in kinds:
                    row = results[kind][i].as_row()
                    row['verdict'] = verdict
                    rows.append(row)
            write_csv(stream, rows, COMPARE_COLUMNS)
        return results, verdicts

    def run_compare_throughput(self, stream=None, systems=COMPARED_SYSTEMS):
        '''
        Throughput per Hz of every system in `systems`. Verdicts check
        that theta falls in `systems` order at each grid point.
        '''
        v = self._check_values()
        kinds = self._compared(v, systems)
        results = {}
        for kind in kinds:
            results[kind] = self.run_throughput(system=kind)
        verdicts = [compare_throughput([results[kind][i] for kind in kinds]) for i in range(len(v.grid))]
        if stream is not None:
            rows = []
            for i, verdict in enumerate(verdicts):
                for kind in kinds:
                    row = dict(results[kind][i].__dict__, verdict=verdict)
                    rows.append(row)
            write_csv(stream, rows, COMPARE_THROUGHPUT_COLUMNS)
        return results, verdicts

    def run_compare_image(self, image, stream=None, systems=COMPARED_SYSTEMS, seeds=DEFAULT_IMAGE_SEEDS):
        '''
        Send `image` through every system `seeds` times (noise seeds
        seed, seed+1, ...) over the first channel of the grid. Returns
        ([[PSNR per system] per run], majority verdict on PSNR falling
        in `systems` order).
        '''
        v = self._check_values()
        if isinstance(seeds, bool) or not isinstance(seeds, int) or seeds < 1:
            raise SimConfigError('Need at least one image run', 'seeds')
        kinds = self._compared(v, systems)
        if isinstance(image, (bytes, bytearray)):
            image = read_pnm(image)
        trials = []
        rows = []
        for offset in range(seeds):
            values = []
            for kind in kinds:
                _, value = image_roundtrip(image, kind, v.carrier, v.grid[0], v.seed + offset,
                                           v.sweep['frame_slots'], **v.options)
                values.append(value)
                rows.append(dict(seed=v.seed + offset, system=kind.value, psnr_db=value))
            trials.append(values)
        verdict = compare_psnr(trials)
        log.info('image ordering %s over %d runs: %s', ' >= '.join(k.value for k in kinds), seeds, verdict)
        if stream is not None:
            write_csv(stream, (dict(row, verdict=verdict) for row in rows), COMPARE_IMAGE_COLUMNS)
        return trials, verdict
