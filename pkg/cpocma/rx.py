'''
Receiver: matched and correlation filter banks, decision lines for the
per-slot bit count, and the descending sort that assigns the counted
bits to subcarriers.
'''
import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal

from cpocma.basis import CORRELATION, MATCHED, make_taps, reference_level
from cpocma.errors import SimConfigError, SimDimensionError, SimNumericError
from cpocma.tx import BitFrame, Waveform, check_rate

log = logging.getLogger(__name__)

DELTA_MAX = 'max'
DELTA_LATTICE = 'lattice'
DELTA_POLICIES = (DELTA_MAX, DELTA_LATTICE)

# lattice residuals closer than this to the best one count as ties
LATTICE_TIE_MARGIN = 0.05


@dataclass(frozen=True, eq=False)
class SampleMatrix(object):
    '''N x M slot samples of one filter bank (matched or correlation).'''
    values: np.ndarray
    kind: str

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or 0 in values.shape:
            raise SimDimensionError('Sample matrix must be a non-empty N x M array')
        if not np.all(np.isfinite(values)):
            raise SimNumericError('Non-finite filter-bank sample')
        if self.kind not in (MATCHED, CORRELATION):
            raise SimConfigError('Unknown sample matrix kind %r' % (self.kind,), 'kind')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    num_subcarriers = property(lambda self: self.values.shape[0])
    num_slots = property(lambda self: self.values.shape[1])


@dataclass(frozen=True)
class SlotDecision(object):
    slot: int
    d_index: int
    n_plus: int
    n_minus: int


#
# Filter banks

def _bank_taps(kind, n, cfg):
    # both banks correlate: convolve with the time-reversed basis
    if kind == MATCHED:
        return make_taps(MATCHED, n, cfg)
    return make_taps(CORRELATION, n, cfg).reversed()


def filter_bank(r, cfg, kind):
    '''
    Riemann-sum filtering of r through each subcarrier's filter
    (convolution scaled by 1/fs). The returned waveforms are aligned so
    that slot m's zero-lag value sits at symbol_offset + (m-1)*sps + sps//2.
    '''
    check_rate(r, cfg)
    out = []
    for n in range(1, cfg.num_subcarriers + 1):
        taps = _bank_taps(kind, n, cfg)
        y = signal.fftconvolve(r.samples, taps.taps) / cfg.sample_rate
        out.append(Waveform(y, r.sample_rate, r.symbol_offset + taps.origin_index - cfg.sps // 2))
    return out


def matched_filter_bank(r, cfg):
    '''The N matched-filter output waveforms xi_n(t).'''
    return filter_bank(r, cfg, MATCHED)


def _check_slots(M):
    if isinstance(M, bool) or not isinstance(M, (int, np.integer)) or M < 1:
        raise SimConfigError('Number of symbol slots must be a positive integer', 'slots')
    return int(M)


def sample_at_slots(w, cfg, M):
    '''Pick the mid-slot sample T_c(m-1) + T_c/2 for m = 1..M.'''
    check_rate(w, cfg)
    M = _check_slots(M)
    index = w.symbol_offset + np.arange(M) * cfg.sps + cfg.sps // 2
    if index[0] < 0 or index[-1] >= len(w):
        raise SimDimensionError(
            'Sampling instants %d..%d fall outside a %d-sample waveform' % (index[0], index[-1], len(w)))
    return w.samples[index]


def _sample_bank(waves, cfg, M, kind):
    return SampleMatrix(np.vstack([sample_at_slots(w, cfg, M) for w in waves]), kind)


def correlation_filter_bank(r, cfg, M):
    '''Slot samples y_{n,m} of the correlation bank.'''
    return _sample_bank(filter_bank(r, cfg, CORRELATION), cfg, M, CORRELATION)


def average_rows(xi):
    if xi.kind != MATCHED:
        raise SimConfigError('Only matched-filter samples are averaged', 'kind')
    return xi.values.mean(axis=0)


#
# Decisions

def _lattice_delta(xi_bar, N, peak, reference):
    candidates = []
    for extreme in range(N, 0, -2):
        step = peak / extreme
        levels = step * np.arange(-N, N + 1, 2)
        distance = np.min(np.abs(xi_bar[:, None] - levels[None, :]), axis=1) / step
        candidates.append((float(np.mean(distance ** 2)), extreme))
    best = min(residual for residual, _ in candidates)
    tied = [extreme for residual, extreme in candidates if residual <= best + LATTICE_TIE_MARGIN]
    if reference is not None and reference > 0 and len(tied) > 1:
        extreme = min(tied, key=lambda s: (abs(np.log(N * peak / s / reference)), s))
    else:
        extreme = min(tied)
    log.debug('lattice delta: extreme level %d of %d (candidates %r)', extreme, N, candidates)
    return N * peak / extreme


def estimate_delta(xi_bar, N, policy=DELTA_MAX, reference=None):
    '''
    Scale Delta of the outermost decision lines.

    max:     max |xi_bar|, taken literally
    lattice: starts from the same peak, then picks the extreme level
             (N, N-2, ...) whose evenly spaced level lattice best explains
             the slot averages; ties go to the level implying a Delta
             closest to `reference`. Same as max for N <= 2.
    '''
    if policy not in DELTA_POLICIES:
        raise SimConfigError('Unknown decision-line policy %r' % (policy,), 'delta_policy')
    xi_bar = np.atleast_1d(np.asarray(xi_bar, dtype=float))
    if xi_bar.size == 0:
        raise SimDimensionError('Cannot place decision lines on an empty vector')
    peak = float(np.max(np.abs(xi_bar)))
    if not np.isfinite(peak) or peak == 0:
        raise SimNumericError('Degenerate decision scale (max |mean output| = %r)' % peak)
    if policy == DELTA_MAX or N <= 2:
        return peak
    return _lattice_delta(xi_bar, N, peak, reference)


def decision_lines(xi_bar, N, policy=DELTA_MAX, reference=None):
    '''N+1 lines L_i = (1 - 2(i-1)/N) * Delta, i = 1..N+1.'''
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
        raise SimConfigError('Number of subcarriers must be a positive integer', 'carrier.num_subcarriers')
    delta = estimate_delta(xi_bar, N, policy, reference)
    return delta * (1.0 - 2.0 * np.arange(N + 1) / N)


def classify_slot(xi_bar_m, lines, slot=1):
    '''Nearest decision line; an exact tie goes to the upper line.'''
    lines = np.asarray(lines, dtype=float)
    N = lines.size - 1
    d_index = int(np.argmin(np.abs(lines - xi_bar_m))) + 1
    return SlotDecision(slot, d_index, N - (d_index - 1), d_index - 1)


def sort_assign(y_col, decision):
    '''
    +1 for the n_plus subcarriers with the largest correlation samples,
    -1 for the rest; equal samples keep subcarrier order.
    '''
    y_col = np.asarray(y_col, dtype=float)
    if decision.n_plus + decision.n_minus != y_col.size:
        raise SimDimensionError(
            'Slot %d decision counts %d+%d do not match %d subcarriers'
            % (decision.slot, decision.n_plus, decision.n_minus, y_col.size))
    order = np.argsort(-y_col, kind='stable')
    out = -np.ones(y_col.size, dtype=np.int8)
    out[order[:decision.n_plus]] = 1
    return out


def matched_only_decode(r, cfg, M):
    '''
    Single-subcarrier decoding from the matched bank alone: the decision
    lines collapse to a sign slicer (0 decodes as +1).
    '''
    if cfg.num_subcarriers != 1:
        raise SimConfigError('Matched-only decoding needs exactly one subcarrier', 'carrier.num_subcarriers')
    row = sample_at_slots(matched_filter_bank(r, cfg)[0], cfg, M)
    return BitFrame(np.where(row >= 0, 1, -1))


def demodulate(r, cfg, M, delta_policy=DELTA_LATTICE, reference=None):
    '''
    Full receiver: matched bank -> slot samples -> averages -> decision
    lines -> per-slot counts, then correlation bank -> descending sort to
    place the counted +1 bits. Assumes perfect symbol timing.
    '''
    M = _check_slots(M)
    N = cfg.num_subcarriers
    xi = _sample_bank(matched_filter_bank(r, cfg), cfg, M, MATCHED)
    y = correlation_filter_bank(r, cfg, M)
    xi_bar = average_rows(xi)
    if reference is None and delta_policy == DELTA_LATTICE:
        reference = reference_level(cfg)
    lines = decision_lines(xi_bar, N, delta_policy, reference)
    decoded = np.empty((N, M), dtype=np.int8)
    for m in range(M):
        decision = classify_slot(xi_bar[m], lines, slot=m + 1)
        column = sort_assign(y.values[:, m], decision)
        if int(np.sum(column == 1)) != decision.n_plus:
            raise SimNumericError('Slot %d lost its +1 count during assignment' % (m + 1))
        decoded[:, m] = column
    log.debug('demodulated %d x %d frame, delta=%g', N, M, lines[0])
    return BitFrame(decoded)
