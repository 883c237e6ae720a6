'''
Monte Carlo BER sweeps, occupied-bandwidth and throughput measurement,
the image round trip, and the small statistics and file helpers the
reports are built from.
'''
import csv
import logging
import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import signal

from cpocma import __version__
from cpocma.backends import SystemKind, get_backend
from cpocma.basis import CarrierConfig
from cpocma.channel import apply_channel, noise_seed
from cpocma.errors import SimConfigError, SimDimensionError, SimNumericError
from cpocma.tx import bits_to_symbols, parallel_to_serial, serial_to_parallel, symbols_to_bits

log = logging.getLogger(__name__)

MIN_BITS_PER_POINT = 10000
DEFAULT_BITS_PER_POINT = 1000000
DEFAULT_TARGET_ERRORS = 100
DEFAULT_FRAME_SLOTS = 64
LOW_CONFIDENCE_ERRORS = 10

MIN_SPECTRUM_SAMPLES = 2 ** 14
WELCH_SEGMENT = 4096
DEFAULT_FRACTION = 0.99
# allowed relative deviation of a measured bandwidth from 2fN + 2f
DEFAULT_LAW_TOLERANCE = 0.2

BER_COLUMNS = ('system', 'N', 'eb_n0_db', 'total_bits', 'bit_errors', 'ber', 'low_confidence')


#
# Records

@dataclass(frozen=True)
class BerPoint(object):
    system: str
    num_subcarriers: int
    eb_n0_db: float
    total_bits: int
    bit_errors: int
    seed: int

    ber = property(lambda self: self.bit_errors / float(self.total_bits))
    low_confidence = property(lambda self: self.bit_errors < LOW_CONFIDENCE_ERRORS)

    def as_row(self):
        return dict(system=self.system, N=self.num_subcarriers, eb_n0_db=self.eb_n0_db,
                    total_bits=self.total_bits, bit_errors=self.bit_errors, ber=self.ber,
                    low_confidence=int(self.low_confidence))


@dataclass(frozen=True, eq=False)
class SpectrumEstimate(object):
    freqs: np.ndarray
    psd: np.ndarray
    bandwidth: float
    center: float
    fraction: float
    lower: float
    upper: float


@dataclass(frozen=True)
class ThroughputPoint(object):
    system: str
    eb_n0_db: float
    throughput: float
    bandwidth: float
    theta: float
    total_bits: int
    bit_errors: int

    def theta_interval(self):
        '''95% interval of theta from the Wilson interval of the BER.'''
        lo, hi = binomial_interval(self.bit_errors, self.total_bits)
        return (1.0 - hi) / self.bandwidth, (1.0 - lo) / self.bandwidth


@dataclass(frozen=True)
class BandwidthCheck(object):
    num_subcarriers: int
    measured: float
    nominal: float
    ratio: float
    verdict: str

    def as_row(self):
        return dict(N=self.num_subcarriers, measured=self.measured, nominal=self.nominal,
                    ratio=self.ratio, verdict=self.verdict)


def seed_sequence(seed, *key):
    return np.random.SeedSequence(seed, spawn_key=key)


#
# Frames and sweeps

def random_frame(rows, M, seed):
    '''Uniform random +1/-1 frame from a seed or SeedSequence.'''
    bits = np.random.default_rng(seed).integers(0, 2, size=rows * M)
    return serial_to_parallel(bits_to_symbols(bits), rows)


def run_frame(backend, spec, frame, seed=None):
    '''
    One modulate -> channel -> demodulate pass. Returns the decoded frame
    and the number of serial bit errors.
    '''
    M = frame.num_slots
    w = backend.modulate(frame)
    r = apply_channel(w, spec, backend.bits_per_frame(M), seed)
    decoded = backend.demodulate(r, M)
    errors = int(np.count_nonzero(decoded.symbols != frame.symbols))
    return decoded, errors


def run_ber_sweep(system, cfg, grid, bits_per_point=DEFAULT_BITS_PER_POINT, seed=0,
                  target_errors=DEFAULT_TARGET_ERRORS, frame_slots=DEFAULT_FRAME_SLOTS, **options):
    '''
    BER at each ChannelSpec of `grid`. Frames are drawn until
    `target_errors` errors are seen or `bits_per_point` bits are spent,
    whichever comes first (target_errors=None runs the full budget).
    Frame k of point i uses bits seeded by (seed, i, k, 0) and noise by
    noise_seed(spec, seed, i, k, 1), so reruns are bit-identical and
    spec.seed selects an independent noise realisation.
    '''
    if bits_per_point < MIN_BITS_PER_POINT:
        raise SimConfigError('Need at least %d bits per point' % MIN_BITS_PER_POINT, 'sweep.bits_per_point')
    kind = SystemKind.parse(system)
    backend = get_backend(kind, cfg, **options)
    per_frame = backend.bits_per_frame(frame_slots)
    points = []
    for i, spec in enumerate(grid):
        bits = errors = 0
        k = 0
        while bits < bits_per_point and (target_errors is None or errors < target_errors):
            frame = random_frame(backend.rows, frame_slots, seed_sequence(seed, i, k, 0))
            _, frame_errors = run_frame(backend, spec, frame, noise_seed(spec, seed, i, k, 1))
            bits += per_frame
            errors += frame_errors
            k += 1
        point = BerPoint(kind.value, cfg.num_subcarriers, spec.eb_n0_db if not spec.noiseless else math.inf,
                         bits, errors, seed)
        log.info('%s N=%d Eb/N0=%s: %d/%d errors (ber=%.3e)',
                 kind.value, cfg.num_subcarriers, point.eb_n0_db, errors, bits, point.ber)
        if point.low_confidence and errors:
            log.warning('%s at %s dB has only %d errors', kind.value, point.eb_n0_db, errors)
        points.append(point)
    return points


def check_rate_parity(backends, M=DEFAULT_FRAME_SLOTS):
    '''All backends must move the same bits over the same signal time.'''
    bits = set(b.bits_per_frame(M) for b in backends)
    durations = [b.payload_duration(M) for b in backends]
    if len(bits) != 1 or not all(math.isclose(d, durations[0], rel_tol=1e-12) for d in durations):
        raise SimConfigError('Systems do not run at the same data rate', 'system')
    return True


#
# Spectrum and throughput

def estimate_bandwidth(w, fraction=DEFAULT_FRACTION, nperseg=WELCH_SEGMENT, baseband=True):
    '''
    Welch PSD (Hann, 50% overlap) and the occupied bandwidth holding
    `fraction` of the power. A real baseband signal occupies [-x, x]
    where x is the frequency below which `fraction` of the one-sided
    power lies, so its width is 2x. A passband signal occupies the band
    between the (1-fraction)/2 and (1+fraction)/2 points.
    '''
    if len(w) < MIN_SPECTRUM_SAMPLES:
        raise SimDimensionError(
            'Need at least %d samples for a spectrum, got %d' % (MIN_SPECTRUM_SAMPLES, len(w)))
    if not 0 < fraction < 1:
        raise SimConfigError('Power fraction must lie in (0, 1)', 'fraction')
    freqs, psd = signal.welch(w.samples, fs=w.sample_rate, window='hann', nperseg=nperseg,
                              noverlap=nperseg // 2, detrend=False, return_onesided=True)
    cumulative = np.cumsum(psd)
    if not cumulative[-1] > 0:
        raise SimNumericError('Cannot measure the bandwidth of a zero-power waveform')

    def edge(share):
        index = min(int(np.searchsorted(cumulative, share * cumulative[-1])), freqs.size - 1)
        return float(freqs[index])

    center = float(freqs[int(np.argmax(psd))])
    if baseband:
        lower, upper = 0.0, edge(fraction)
        bandwidth = 2.0 * upper
    else:
        lower, upper = edge((1.0 - fraction) / 2.0), edge((1.0 + fraction) / 2.0)
        bandwidth = upper - lower
    return SpectrumEstimate(freqs, psd, bandwidth, center, fraction, lower, upper)


def spectrum_slots(sps):
    return max(DEFAULT_FRAME_SLOTS, int(math.ceil(2.0 * MIN_SPECTRUM_SAMPLES / sps)))


def measure_bandwidth(system, cfg, fraction=DEFAULT_FRACTION, seed=0, **options):
    '''
    Occupied bandwidth of a long random transmission. CDMA is measured
    as P times the bandwidth of its chip pulse at the symbol rate.
    '''
    kind = SystemKind.parse(system)
    backend = get_backend(kind, cfg, **options)
    slots = spectrum_slots(cfg.sps)
    if kind == SystemKind.CDMA:
        control = get_backend(SystemKind.BPSK_CONTROL, cfg)
        w = control.modulate(random_frame(1, slots, seed_sequence(seed, 0)))
        return backend.config.spreading_gain * estimate_bandwidth(w, fraction).bandwidth
    w = backend.modulate(random_frame(backend.rows, slots, seed_sequence(seed, 0)))
    return estimate_bandwidth(w, fraction, baseband=not backend.passband).bandwidth


def bandwidth_law(cfg, counts=(1, 2, 3, 4), tolerance=DEFAULT_LAW_TOLERANCE, fraction=DEFAULT_FRACTION, seed=0):
    '''
    Measured baseband CPOCMA bandwidth against 2fN + 2f for each N in
    `counts`, at the symbol rate and sample rate of `cfg`.
    '''
    rows = []
    for count in counts:
        carrier = CarrierConfig(cfg.f, count, sample_rate=cfg.sample_rate, tail_symbols=cfg.tail_symbols)
        nominal = get_backend(SystemKind.CPOCMA, carrier).nominal_bandwidth()
        measured = measure_bandwidth(SystemKind.CPOCMA, carrier, fraction, seed)
        ratio = measured / nominal
        verdict = PASS if abs(ratio - 1.0) <= tolerance else FAIL
        log.info('N=%d: measured %.4g Hz, 2fN+2f = %.4g Hz, ratio %.3f (%s)', count, measured, nominal, ratio, verdict)
        rows.append(BandwidthCheck(count, measured, nominal, ratio, verdict))
    return rows


def throughput_per_hz(system, cfg, grid, seed=0, bandwidth_model='measured',
                      bits_per_point=DEFAULT_BITS_PER_POINT, target_errors=DEFAULT_TARGET_ERRORS,
                      frame_slots=DEFAULT_FRAME_SLOTS, **options):
    '''theta = (correctly received / transmitted bits) / occupied bandwidth.'''
    kind = SystemKind.parse(system)
    if bandwidth_model == 'measured':
        bandwidth = measure_bandwidth(kind, cfg, seed=seed, **options)
    elif bandwidth_model == 'nominal':
        bandwidth = get_backend(kind, cfg, **options).nominal_bandwidth()
    else:
        raise SimConfigError('Unknown bandwidth model %r' % (bandwidth_model,), 'bandwidth_model')
    points = []
    for point in run_ber_sweep(kind, cfg, grid, bits_per_point, seed, target_errors, frame_slots, **options):
        throughput = 1.0 - point.ber
        points.append(ThroughputPoint(kind.value, point.eb_n0_db, throughput, bandwidth, throughput / bandwidth,
                                      point.total_bits, point.bit_errors))
    return points


#
# Images

_PNM_TOKEN = re.compile(br'(?:\s|#[^\n]*\n?)*([^\s#]+)')
_PNM_CHANNELS = {b'P2': 1, b'P5': 1, b'P3': 3, b'P6': 3}


def read_pnm(data):
    '''
    Parse a plain (P2/P3) or binary (P5/P6) 8-bit portable graymap or
    pixmap. Returns an (H, W) or (H, W, 3) uint8 array; rasters with a
    maxval below 255 are rescaled to 0..255.
    '''
    if not isinstance(data, (bytes, bytearray)):
        raise SimConfigError('Image data must be bytes', 'image')
    tokens = []
    position = 0
    for _ in range(4):
        match = _PNM_TOKEN.match(data, position)
        if not match:
            raise SimConfigError('Truncated image header', 'image')
        tokens.append(match.group(1))
        position = match.end()
    magic = tokens[0]
    if magic not in _PNM_CHANNELS:
        raise SimConfigError('Unsupported image format %r' % (magic,), 'image')
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as err:
        raise SimConfigError('Malformed image header', 'image', err)
    if width < 1 or height < 1 or not 0 < maxval <= 255:
        raise SimConfigError('Only 8-bit images with positive size are supported', 'image')
    channels = _PNM_CHANNELS[magic]
    count = width * height * channels
    if magic in (b'P5', b'P6'):
        raster = np.frombuffer(bytes(data[position + 1:position + 1 + count]), dtype=np.uint8)
    else:
        try:
            raster = np.array([int(t) for t in data[position:].split()[:count]], dtype=int)
        except ValueError as err:
            raise SimConfigError('Malformed plain raster', 'image', err)
    if raster.size != count:
        raise SimConfigError('Image raster holds %d of %d values' % (raster.size, count), 'image')
    if np.any(raster < 0) or np.any(raster > maxval):
        raise SimConfigError('Pixel value outside 0..%d' % maxval, 'image')
    if maxval != 255:
        # psnr() measures against a peak of 255
        log.debug('rescaling image from maxval %d to 255', maxval)
        raster = np.rint(raster * (255.0 / maxval))
    shape = (height, width) if channels == 1 else (height, width, 3)
    return raster.astype(np.uint8).reshape(shape)


def write_pnm(image, binary=True):
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim not in (2, 3) or (image.ndim == 3 and image.shape[2] != 3):
        raise SimDimensionError('Expected an (H, W) or (H, W, 3) uint8 image')
    rgb = image.ndim == 3
    magic = {(False, False): b'P2', (False, True): b'P5', (True, False): b'P3', (True, True): b'P6'}[(rgb, bool(binary))]
    header = b'%s\n%d %d\n255\n' % (magic, image.shape[1], image.shape[0])
    if binary:
        return header + image.tobytes()
    rows = (b' '.join(b'%d' % v for v in row) for row in image.reshape(image.shape[0], -1))
    return header + b'\n'.join(rows) + b'\n'


def bits_from_image(image):
    '''Pixels to bits, most significant bit first.'''
    return np.unpackbits(np.ascontiguousarray(image, dtype=np.uint8).reshape(-1))


def image_from_bits(bits, shape):
    count = int(np.prod(shape))
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size < 8 * count:
        raise SimDimensionError('Need %d bits for a %r image, got %d' % (8 * count, tuple(shape), bits.size))
    return np.packbits(bits[:8 * count]).reshape(shape)


def psnr(a, b, peak=255.0):
    '''10 log10(peak^2 / MSE); identical images give +inf.'''
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise SimDimensionError('Image shapes differ: %r vs %r' % (a.shape, b.shape))
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def image_roundtrip(image, system, cfg, spec, seed=0, frame_slots=DEFAULT_FRAME_SLOTS, **options):
    '''
    Send an image's bits through `system` and `spec`. Returns
    (decoded image, PSNR). The last frame is padded with zero bits.
    '''
    if isinstance(image, (bytes, bytearray)):
        image = read_pnm(image)
    image = np.asarray(image)
    backend = get_backend(system, cfg, **options)
    bits = bits_from_image(image)
    per_frame = backend.bits_per_frame(frame_slots)
    frames = int(math.ceil(bits.size / float(per_frame)))
    padded = np.zeros(frames * per_frame, dtype=np.uint8)
    padded[:bits.size] = bits
    received = []
    for k in range(frames):
        chunk = bits_to_symbols(padded[k * per_frame:(k + 1) * per_frame])
        frame = serial_to_parallel(chunk, backend.rows)
        decoded, _ = run_frame(backend, spec, frame, noise_seed(spec, seed, 0, k, 1))
        received.append(symbols_to_bits(parallel_to_serial(decoded)))
    out = image_from_bits(np.concatenate(received)[:bits.size], image.shape)
    value = psnr(image, out)
    log.info('image %r through %s: PSNR %.2f dB', image.shape, SystemKind.parse(system).value, value)
    return out, value


#
# Statistics and reports

def binomial_interval(errors, total, z=1.96):
    '''Wilson score interval for an error probability.'''
    if total < 1 or not 0 <= errors <= total:
        raise SimConfigError('Need 0 <= errors <= total and total >= 1', 'total_bits')
    p = errors / float(total)
    denom = 1.0 + z * z / total
    centre = (p + z * z / (2.0 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + z * z / (4.0 * total * total)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


PASS = 'pass'
FAIL = 'fail'
INDETERMINATE = 'indeterminate'

# theory/simulation agreement
DEFAULT_AGREEMENT_FACTOR = 2.0
DEFAULT_AGREEMENT_BER = 1e-3
DEFAULT_MAX_SHIFT_DB = 1.0


def combine_verdicts(verdicts):
    '''Any failure fails; all-indeterminate stays indeterminate.'''
    verdicts = list(verdicts)
    if FAIL in verdicts:
        return FAIL
    if PASS in verdicts:
        return PASS
    return INDETERMINATE


def _ordered(intervals):
    # intervals are expected to rise: disjoint and rising passes, disjoint
    # and falling fails, overlapping is indeterminate
    verdict = PASS
    for (lo_a, hi_a), (lo_b, hi_b) in zip(intervals, intervals[1:]):
        if hi_a < lo_b:
            continue
        if lo_a > hi_b:
            return FAIL
        verdict = INDETERMINATE
    return verdict


def compare_ordering(points):
    '''
    Check BER(points[0]) <= BER(points[1]) <= ... with 95% intervals.
    A pair passes when the intervals are disjoint in the expected order,
    fails when they are disjoint the other way and is indeterminate
    otherwise.
    '''
    verdict = _ordered([binomial_interval(p.bit_errors, p.total_bits) for p in points])
    if verdict == INDETERMINATE:
        log.warning('ordering %s is indeterminate at this depth', ' <= '.join(p.system for p in points))
    return verdict


def compare_throughput(points):
    '''
    Check theta(points[0]) >= theta(points[1]) >= ... using the 95%
    BER interval of each point divided by its bandwidth.
    '''
    intervals = []
    for point in points:
        lo, hi = point.theta_interval()
        intervals.append((-hi, -lo))
    verdict = _ordered(intervals)
    if verdict == INDETERMINATE:
        log.warning('throughput ordering %s is indeterminate at this depth', ' >= '.join(p.system for p in points))
    return verdict


def compare_psnr(trials):
    '''
    Majority vote over repeated image runs. Each trial lists PSNR values
    expected to fall strictly; it counts as a pass when they do, a fail
    when some later value is higher, and as a tie otherwise.
    '''
    votes = []
    for values in trials:
        pairs = list(zip(values, values[1:]))
        if all(a > b for a, b in pairs):
            votes.append(PASS)
        elif any(a < b for a, b in pairs):
            votes.append(FAIL)
        else:
            votes.append(INDETERMINATE)
    for verdict in (PASS, FAIL):
        if 2 * votes.count(verdict) > len(votes):
            return verdict
    return INDETERMINATE


def crossing_db(eb_n0_db, values, target):
    '''
    Eb/N0 at which a falling curve first reaches `target`, interpolated
    linearly in log10 of the value. None when it never crosses.
    '''
    pairs = [(x, v) for x, v in zip(eb_n0_db, values) if math.isfinite(x)]
    for (x0, v0), (x1, v1) in zip(pairs, pairs[1:]):
        if v0 >= target > v1:
            if v1 <= 0:
                return x1
            return x0 + (x1 - x0) * (math.log10(v0) - math.log10(target)) / (math.log10(v0) - math.log10(v1))
    return None


def theory_agreement(points, theory, factor=DEFAULT_AGREEMENT_FACTOR, min_errors=DEFAULT_TARGET_ERRORS,
                     target_ber=DEFAULT_AGREEMENT_BER, max_shift_db=DEFAULT_MAX_SHIFT_DB):
    '''
    Simulated BerPoints against TheoryPoints on the same grid. A point
    with at least `min_errors` errors passes when BER / P_e lies within
    [1/factor, factor]; points with fewer errors are indeterminate. The
    curves must also reach `target_ber` within `max_shift_db` of each
    other. Returns (verdict, rows, shift in dB or None).
    '''
    by_db = dict((t.eb_n0_db, t) for t in theory)
    rows = []
    for point in points:
        if point.eb_n0_db not in by_db:
            raise SimConfigError('No theory value at %s dB' % point.eb_n0_db, 'channel.eb_n0_db')
        p_e = by_db[point.eb_n0_db].p_e
        ratio = point.ber / p_e if p_e > 0 else math.inf
        if point.bit_errors < min_errors:
            verdict = INDETERMINATE
        elif 1.0 / factor <= ratio <= factor:
            verdict = PASS
        else:
            verdict = FAIL
        rows.append(dict(eb_n0_db=point.eb_n0_db, total_bits=point.total_bits, bit_errors=point.bit_errors,
                         ber=point.ber, p_e=p_e, ratio=ratio, verdict=verdict))
    simulated = crossing_db([p.eb_n0_db for p in points], [p.ber for p in points], target_ber)
    predicted = crossing_db([t.eb_n0_db for t in theory], [t.p_e for t in theory], target_ber)
    if simulated is None or predicted is None:
        shift, shift_verdict = None, INDETERMINATE
    else:
        shift = simulated - predicted
        shift_verdict = PASS if abs(shift) <= max_shift_db else FAIL
    verdict = combine_verdicts([row['verdict'] for row in rows] + [shift_verdict])
    log.info('theory agreement: %s (shift at %g: %s dB)', verdict, target_ber, shift)
    return verdict, rows, shift


def write_csv(stream, rows, columns=BER_COLUMNS):
    '''Comma-separated rows under a "# cpocma <version>" comment line.'''
    stream.write('# cpocma %s\n' % __version__)
    writer = csv.DictWriter(stream, fieldnames=list(columns), extrasaction='ignore', lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(row if isinstance(row, dict) else row.as_row())
    return stream
