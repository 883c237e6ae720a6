'''
Closed-form bit error probability of the two-subcarrier system in AWGN.

Every inner product the analysis needs (energies, self and cross
inter-symbol interference, correlation-filter terms) is evaluated
exactly: each piece of p_n and o_n is a short sum of complex
exponentials, so every integral is elementary. The published closed
forms are evaluated as well and compared against the exact values; any
disagreement is logged and the exact values are used.

All terms live in normalized time (f = 1). A physical noise deviation
sigma = sqrt(N0/2) maps to sigma * sqrt(f) in these units.
'''
import cmath
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from cpocma.basis import LN2, TAIL_GAIN, o_normalized, p_normalized
from cpocma.errors import SimConfigError, SimNumericError

log = logging.getLogger(__name__)

ZERO = 'zero'
EXPECTATION = 'expectation'
PATTERN_POLICIES = (ZERO, EXPECTATION)

PUBLISHED = 'published'
DERIVED = 'derived'
FORMULAS = (PUBLISHED, DERIVED)

DEFAULT_PATTERNS = 1000
DEFAULT_SLOTS = 64

_DEVIATION_LIMIT = 1e-6
_BODY_GAIN = math.exp(-LN2)


#
# Exponential-sum representation
#
# A function is a tuple of pieces (lo, hi, terms): on [lo, hi) it equals
# sum(coef * exp(s * x) for coef, s in terms), zero elsewhere.

def _h_terms(ratio, gain):
    w = 2.0 * math.pi * ratio
    c = LN2 / w
    return ((gain * (0.5 + 0.5j * c), complex(LN2, w)),
            (gain * (0.5 - 0.5j * c), complex(LN2, -w)))


def _pieces(ratio, body_offset):
    body = _h_terms(ratio, -_BODY_GAIN)
    if body_offset:
        body = body + ((complex(body_offset), 0j),)
    return ((-math.inf, 0.0, _h_terms(ratio, TAIL_GAIN)), (0.0, 1.0, body))


def _p_pieces(ratio):
    return _pieces(ratio, 1.0)


def _o_pieces(ratio):
    return _pieces(ratio, 0.0)


def _envelope_pieces(ratio):
    # e^(beta x) h(x) on x < 0
    return ((-math.inf, 0.0, _h_terms(ratio, 1.0)),)


def _shift(pieces, k):
    '''g(x) = f(x + k).'''
    return tuple((lo - k, hi - k, tuple((c * cmath.exp(s * k), s) for c, s in terms))
                 for lo, hi, terms in pieces)


def _inner(f, g):
    total = 0j
    for lo_f, hi_f, terms_f in f:
        for lo_g, hi_g, terms_g in g:
            lo, hi = max(lo_f, lo_g), min(hi_f, hi_g)
            if hi <= lo:
                continue
            for c_f, s_f in terms_f:
                for c_g, s_g in terms_g:
                    c, s = c_f * c_g, s_f + s_g
                    if abs(s) < 1e-12:
                        if lo == -math.inf:
                            raise SimNumericError('Divergent inner product')
                        total += c * (hi - lo)
                        continue
                    upper = c * cmath.exp(s * hi) / s
                    lower = 0j if lo == -math.inf else c * cmath.exp(s * lo) / s
                    total += upper - lower
    return total.real


#
# Terms

@dataclass(frozen=True, eq=False)
class TheoryTerms(object):
    '''
    Inner-product terms of the two-subcarrier analysis, normalized units.

    Pairs are indexed by subcarrier, matrices by (subcarrier, offset - 1)
    for symbol offsets 1..K. I is symmetric in the offset sign, A and X
    act on past symbols, B_fut and Y on future ones.

    E:        <p_n, p_n>
    I:        <p_n(u), p_n(u + k)>
    B_cross:  <p_1, p_2> for both subcarriers
    delta2:   2 * integral over x < 0 of e^(2 beta x) h_1 h_2
    Q:        <p_n, o_n>
    A:        <p_n(u), o_n(u - k)>
    B_fut:    <p_n(u), o_n(u + k)>
    C:        <p_other, o_n>
    X:        <p_other(u), o_n(u - k)>
    Y:        <p_other(u), o_n(u + k)>
    o_energy: <o_n, o_n>
    o_cross:  <o_1, o_2>
    sigma:    normalized noise deviation
    xi_isi, phi, delta_threshold describe one symbol pattern (see
    with_pattern); the defaults are the ISI-free pattern.
    '''
    E: np.ndarray
    I: np.ndarray
    B_cross: np.ndarray
    delta2: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    B_fut: np.ndarray
    C: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    o_energy: np.ndarray
    o_cross: float
    slots: int
    sigma: float = 0.0
    xi_isi: float = 0.0
    phi: tuple = (0.0, 0.0)
    delta_threshold: float = field(default=None)

    def __post_init__(self):
        if self.delta_threshold is None:
            object.__setattr__(self, 'delta_threshold', _delta_threshold(self.E, self.B_cross, self.xi_isi))

    offsets = property(lambda self: self.I.shape[1])

    def with_pattern(self, xi_isi, phi):
        return replace(self, xi_isi=float(xi_isi), phi=tuple(float(v) for v in phi), delta_threshold=None)

    def with_sigma(self, sigma):
        return replace(self, sigma=float(sigma))


def _delta_threshold(E, B, xi):
    # |mean output| of an equal-bits slot
    return 0.5 * (E[0] + E[1] + B[0] + B[1] + xi)


def _check_pair(cfg):
    if cfg.num_subcarriers != 2:
        raise SimConfigError(
            'The closed-form analysis covers exactly two subcarriers, got %d' % cfg.num_subcarriers,
            'carrier.num_subcarriers')


@lru_cache(maxsize=32)
def _exact(ratios, offsets):
    p = [_p_pieces(r) for r in ratios]
    o = [_o_pieces(r) for r in ratios]
    env = [_envelope_pieces(r) for r in ratios]
    ks = range(1, offsets + 1)
    other = (1, 0)
    terms = dict(
        E=np.array([_inner(p[n], p[n]) for n in (0, 1)]),
        I=np.array([[_inner(p[n], _shift(p[n], k)) for k in ks] for n in (0, 1)]),
        Q=np.array([_inner(p[n], o[n]) for n in (0, 1)]),
        A=np.array([[_inner(p[n], _shift(o[n], -k)) for k in ks] for n in (0, 1)]),
        B_fut=np.array([[_inner(p[n], _shift(o[n], k)) for k in ks] for n in (0, 1)]),
        C=np.array([_inner(p[other[n]], o[n]) for n in (0, 1)]),
        X=np.array([[_inner(p[other[n]], _shift(o[n], -k)) for k in ks] for n in (0, 1)]),
        Y=np.array([[_inner(p[other[n]], _shift(o[n], k)) for k in ks] for n in (0, 1)]),
        o_energy=np.array([_inner(o[n], o[n]) for n in (0, 1)]),
        o_cross=_inner(o[0], o[1]),
        envelope=np.array([[_inner(env[a], env[b]) for b in (0, 1)] for a in (0, 1)]),
    )
    cross = _inner(p[0], p[1])
    terms['B_cross'] = np.array([cross, cross])
    terms['delta2'] = np.full(2, 2.0 * terms['envelope'][0, 1])
    for value in terms.values():
        if isinstance(value, np.ndarray):
            value.setflags(write=False)
    return terms


def compute_terms(cfg, M=DEFAULT_SLOTS, sigma=0.0):
    '''
    Evaluate every analysis term for a two-subcarrier configuration.
    `sigma` is the physical noise deviation sqrt(N0/2).
    '''
    _check_pair(cfg)
    if isinstance(M, bool) or not isinstance(M, (int, np.integer)) or M < 1:
        raise SimConfigError('Number of symbol slots must be a positive integer', 'slots')
    if not sigma >= 0 or not math.isfinite(sigma):
        raise SimConfigError('Noise deviation must be non-negative and finite', 'sigma')
    exact = _exact(cfg.ratios, cfg.tail_symbols)
    _warn_published(cfg.ratios)
    return TheoryTerms(
        E=exact['E'], I=exact['I'], B_cross=exact['B_cross'], delta2=exact['delta2'],
        Q=exact['Q'], A=exact['A'], B_fut=exact['B_fut'], C=exact['C'], X=exact['X'], Y=exact['Y'],
        o_energy=exact['o_energy'], o_cross=exact['o_cross'], slots=int(M),
        sigma=float(sigma) * math.sqrt(cfg.f),
    )


def cross_isi_terms(cfg, offsets=None):
    '''
    Phi[n, k-1] = <p_other(u), p_n(u + k)>: the other subcarrier's
    neighbouring symbols seen by matched filter n. The probability model
    leaves these out; they are reported for comparison with B_cross.
    '''
    _check_pair(cfg)
    offsets = cfg.tail_symbols if offsets is None else offsets
    p = [_p_pieces(r) for r in cfg.ratios]
    return np.array([[_inner(p[1 - n], _shift(p[n], k)) for k in range(1, offsets + 1)] for n in (0, 1)])


#
# Published closed forms

def published_terms(ratios, offsets=3):
    '''The printed closed forms, offsets counted from 1.'''
    b = LN2
    eb = math.exp(-b)
    w1, w2 = (2.0 * math.pi * r for r in ratios)
    omegas = (w1, w2)
    m = np.arange(1, offsets + 1)

    def lorentz(w):
        return 2.0 * b / (b * b + w * w)

    d1 = np.array([(1 + b * b / w ** 2) / b + (1 - b * b / w ** 2) * b / (b * b + w * w) for w in omegas])
    d2 = []
    for n in (0, 1):
        w = w1 - w2 if n == 0 else w2 - w1
        d2.append((1 - b * b / (w1 * w2)) * 2 * b / (4 * b * b + (w1 + w2) ** 2)
                  + (1 - b * b / (w1 * w2)) * 2 * b / (4 * b * b + w * w)
                  + (b / w1 + b / w2) * (w1 + w2) / (4 * b * b + (w1 + w2) ** 2)
                  + abs(b / w1 - b / w2) * w / (4 * b * b + w * w))
    d2 = np.array(d2)
    decay = np.exp(-b * m) - np.exp(b * (1 - m))
    edge = (2 - eb - math.exp(b)) * np.exp(-b * m)
    out = dict(
        delta1=d1,
        delta2=d2,
        E=np.array([1 + (1 - eb) / 2 * (d1[n] - 3 * lorentz(omegas[n])) for n in (0, 1)]),
        I=np.array([0.25 * (d1[n] + lorentz(omegas[n])) * (1 - 4 * lorentz(omegas[n])) * (1 - eb) * decay
                    for n in (0, 1)]),
        B_cross=np.array([
            (1 - eb) * (d2[n] - 2 * b * (2 * b * b + w1 ** 2 + w2 ** 2)
                        / (b ** 4 + b * b * (w1 ** 2 + w2 ** 2) + w1 ** 2 * w2 ** 2)) + 1
            for n in (0, 1)]),
        Q=np.array([(1 - eb) / 2 * (d1[n] - lorentz(omegas[n])) for n in (0, 1)]),
        A=np.array([(d1[n] + lorentz(omegas[n])) * edge / 4
                    + (1 - eb) ** 2 * np.exp(b * (1 - m)) * lorentz(omegas[n]) for n in (0, 1)]),
        B_fut=np.array([0.25 * (d1[n] + lorentz(omegas[n])) * (1 - eb) * decay for n in (0, 1)]),
        C=np.array([(1 - eb) * (d2[n] - lorentz(omegas[n])) for n in (0, 1)]),
        X=np.array([(1 - eb) ** 2 * np.exp(b * (1 - m)) * lorentz(omegas[n]) + d2[n] * edge / 2
                    for n in (0, 1)]),
        Y=np.array([d2[n] * (np.exp(-b * m) * (1 - eb) ** 2 / 2
                             - (1 - eb) * (np.exp(b * (1 - m)) - np.exp(-b * (1 - m))) / 2)
                    for n in (0, 1)]),
    )
    return out


def published_deviations(ratios, offsets=3):
    '''Largest relative deviation of each published term from the exact value.'''
    exact = _exact(tuple(ratios), max(offsets, 1))
    published = published_terms(ratios, offsets)
    reference = dict(exact)
    omegas = [2.0 * math.pi * r for r in ratios]
    reference['delta1'] = np.array([4.0 * exact['envelope'][n, n] - 2.0 * LN2 / (LN2 ** 2 + omegas[n] ** 2)
                                    for n in (0, 1)])
    out = {}
    for name, value in published.items():
        want = np.asarray(reference[name])
        if want.ndim == 2:
            want = want[:, :offsets]
        scale = np.maximum(np.abs(want), 1e-12)
        out[name] = float(np.max(np.abs(value - want) / scale))
    return out


@lru_cache(maxsize=32)
def _warn_published(ratios):
    deviations = published_deviations(ratios)
    bad = sorted(name for name, value in deviations.items() if value > _DEVIATION_LIMIT)
    if bad:
        log.warning('published closed forms differ from exact inner products for ratios %r: %s',
                    ratios, ', '.join('%s (%.2g)' % (name, deviations[name]) for name in bad))
    return deviations


#
# Numerical oracle

def quadrature_inner(f, g, lower=-40.0, upper=1.0):
    '''
    Integral of f(x) * g(x) over [lower, upper] in normalized time, one
    adaptive quadrature per unit interval so every jump sits on an
    interval edge.
    '''
    total = 0.0
    edges = np.arange(math.floor(lower), math.ceil(upper) + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, _ = integrate.quad(lambda x: f(x) * g(x), lo, hi, epsabs=1e-15, epsrel=1e-12, limit=200)
        total += value
    return total


def quadrature_terms(cfg, offsets=3):
    '''The TheoryTerms quantities for offsets 1..offsets, by quadrature.'''
    _check_pair(cfg)
    r = cfg.ratios

    def p(n, k=0):
        return lambda x: p_normalized(x + k, r[n])

    def o(n, k=0):
        return lambda x: o_normalized(x + k, r[n])

    def env(n):
        w = 2.0 * math.pi * r[n]
        return lambda x: math.exp(LN2 * x) * (math.cos(w * x) - LN2 / w * math.sin(w * x)) if x < 0 else 0.0

    ks = range(1, offsets + 1)
    q = quadrature_inner
    cross = q(p(0), p(1))
    return dict(
        E=np.array([q(p(n), p(n)) for n in (0, 1)]),
        I=np.array([[q(p(n), p(n, k)) for k in ks] for n in (0, 1)]),
        B_cross=np.array([cross, cross]),
        delta2=np.full(2, 2.0 * q(env(0), env(1), upper=0.0)),
        Q=np.array([q(p(n), o(n)) for n in (0, 1)]),
        A=np.array([[q(p(n), o(n, -k)) for k in ks] for n in (0, 1)]),
        B_fut=np.array([[q(p(n), o(n, k)) for k in ks] for n in (0, 1)]),
        C=np.array([q(p(1 - n), o(n)) for n in (0, 1)]),
        X=np.array([[q(p(1 - n), o(n, -k)) for k in ks] for n in (0, 1)]),
        Y=np.array([[q(p(1 - n), o(n, k)) for k in ks] for n in (0, 1)]),
        o_energy=np.array([q(o(n), o(n)) for n in (0, 1)]),
        o_cross=q(o(0), o(1)),
    )


#
# Symbol patterns

def draw_patterns(terms, count=DEFAULT_PATTERNS, seed=0):
    '''
    Summed ISI for `count` random frames: a random slot j in 1..M and
    random neighbouring symbols, truncated at the frame edges.
    Returns (xi, phi) with shapes (count,) and (count, 2).
    '''
    if count < 1:
        raise SimConfigError('Need at least one symbol pattern', 'patterns')
    rng = np.random.default_rng(seed)
    M = terms.slots
    rows = np.arange(count)
    j = rng.integers(1, M + 1, size=count)
    symbols = rng.choice(np.array([-1.0, 1.0]), size=(count, 2, M))
    xi = np.zeros(count)
    phi = np.zeros((count, 2))
    for k in range(1, terms.offsets + 1):
        past = symbols[rows, :, np.clip(j - k - 1, 0, M - 1)] * (j - k >= 1)[:, None]
        future = symbols[rows, :, np.clip(j + k - 1, 0, M - 1)] * (j + k <= M)[:, None]
        xi += (past + future).dot(terms.I[:, k - 1])
        for n in (0, 1):
            other = 1 - n
            phi[:, n] += (terms.A[n, k - 1] * past[:, n] + terms.B_fut[n, k - 1] * future[:, n]
                          + terms.X[n, k - 1] * past[:, other] + terms.Y[n, k - 1] * future[:, other])
    return xi, phi


def _pattern_set(terms, pattern_policy, count, seed):
    if pattern_policy not in PATTERN_POLICIES:
        raise SimConfigError('Unknown pattern policy %r' % (pattern_policy,), 'pattern_policy')
    if pattern_policy == ZERO:
        return np.zeros(1), np.zeros((1, 2))
    return draw_patterns(terms, count, seed)


#
# Error probabilities

def _half_erfc(numerator, denominator):
    '''0.5 * erfc(numerator / denominator), with the sigma = 0 limit.'''
    numerator = np.asarray(numerator, dtype=float)
    if denominator > 0:
        return 0.5 * special.erfc(numerator / denominator)
    return np.where(numerator > 0, 0.0, np.where(numerator < 0, 1.0, 0.5))


def _check_formula(formula):
    if formula not in FORMULAS:
        raise SimConfigError('Unknown formula variant %r' % (formula,), 'formula')


def cpomf_probabilities(E, B, xi, delta, sigma, formula=DERIVED):
    '''
    Conditional count-error probabilities P_M1..P_M6 (stacked along the
    first axis; xi may be an array of patterns).

    1, 2: one error given (+1, -1) and (-1, +1)
    3, 4: one error given (+1, +1) and (-1, -1)
    5, 6: two errors given (+1, +1) and (-1, -1)
    '''
    _check_formula(formula)
    E1, E2 = E
    B1, B2 = B
    xi = np.asarray(xi, dtype=float)
    half = delta / 2.0
    if formula == PUBLISHED:
        den = math.sqrt(2.0) * math.sqrt(E1 + E2) * sigma
        same = E1 + E2 + B1 + B2
        out = [
            _half_erfc(E1 - E2 - xi + half, den),
            _half_erfc(-E1 + E2 - xi + half, den),
            0.5 * (_half_erfc(same + xi - half, den) - _half_erfc(same + xi + half, den)),
            0.5 * (_half_erfc(-same + xi - half, den) - _half_erfc(-same + xi + half, den)),
            _half_erfc(same + xi + half, den),
            _half_erfc(-same + xi + half, den),
        ]
    else:
        # averaged matched-bank noise: (sigma/2) * sqrt(E1 + E2 + 2B)
        den = math.sqrt(2.0) * 0.5 * sigma * math.sqrt(E1 + E2 + B1 + B2)
        mixed_a = 0.5 * (E1 - E2 + xi)
        mixed_b = 0.5 * (-E1 + E2 + xi)
        up = 0.5 * (E1 + E2 + B1 + B2 + xi)
        down = 0.5 * (-E1 - E2 - B1 - B2 + xi)
        out = [
            _half_erfc(half - mixed_a, den) + _half_erfc(half + mixed_a, den),
            _half_erfc(half - mixed_b, den) + _half_erfc(half + mixed_b, den),
            _half_erfc(up - half, den) - _half_erfc(up + half, den),
            _half_erfc(-half - down, den) - _half_erfc(half - down, den),
            _half_erfc(up + half, den),
            _half_erfc(half - down, den),
        ]
    return np.clip(np.array(out, dtype=float), 0.0, 1.0)


def cpocf_probabilities(Q, C, phi, sigma, o_energy=None, o_cross=0.0, formula=DERIVED):
    '''
    Conditional sort-error probabilities (P_C1, P_C2) for the mixed
    slots (+1, -1) and (-1, +1). phi may be an (R, 2) array of patterns.
    '''
    _check_formula(formula)
    Q1, Q2 = Q
    C1, C2 = C
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    spread = phi[:, 0] - phi[:, 1]
    if formula == PUBLISHED:
        den = math.sqrt(2.0) * math.sqrt(Q1 + Q2) * sigma
        out = [_half_erfc(Q1 - Q2 - C1 - C2 + spread, den),
               _half_erfc(-Q1 + Q2 - C1 - C2 - spread, den)]
    else:
        if o_energy is None:
            raise SimConfigError('The derived variant needs the correlation-filter energies', 'o_energy')
        den = math.sqrt(2.0) * sigma * math.sqrt(o_energy[0] + o_energy[1] - 2.0 * o_cross)
        margin = Q1 + Q2 - C1 - C2
        out = [_half_erfc(margin + spread, den), _half_erfc(margin - spread, den)]
    return np.clip(np.array(out, dtype=float), 0.0, 1.0)


def p_cpomf(terms, pattern_policy=EXPECTATION, formula=DERIVED, count=DEFAULT_PATTERNS, seed=0):
    '''Count-decision error probability, 1/4 * sum of P_M1..P_M6.'''
    xi, _ = _pattern_set(terms, pattern_policy, count, seed)
    delta = _delta_threshold(terms.E, terms.B_cross, float(np.mean(xi)))
    probs = cpomf_probabilities(terms.E, terms.B_cross, xi, delta, terms.sigma, formula)
    return float(np.clip(0.25 * np.mean(np.sum(probs, axis=0)), 0.0, 1.0))


def p_cpocf(terms, pattern_policy=EXPECTATION, formula=DERIVED, count=DEFAULT_PATTERNS, seed=0):
    '''
    Sort error probability, 1/4 * (P_C1 + P_C2). Equal-bit slots never
    reach the sort and are left out.
    '''
    _, phi = _pattern_set(terms, pattern_policy, count, seed)
    probs = cpocf_probabilities(terms.Q, terms.C, phi, terms.sigma, terms.o_energy, terms.o_cross, formula)
    return float(np.clip(0.25 * np.mean(np.sum(probs, axis=0)), 0.0, 1.0))


def combine(pm, pc):
    '''P_e = pm*pc + (1 - pm)*pc + pm*(1 - pc).'''
    return float(np.clip(pm * pc + (1.0 - pm) * pc + pm * (1.0 - pc), 0.0, 1.0))


def p_e(cfg, M=DEFAULT_SLOTS, sigma=0.0, pattern_policy=EXPECTATION, formula=DERIVED,
        count=DEFAULT_PATTERNS, seed=0):
    '''Bit error probability for a physical noise deviation sigma.'''
    terms = compute_terms(cfg, M, sigma)
    return combine(p_cpomf(terms, pattern_policy, formula, count, seed),
                   p_cpocf(terms, pattern_policy, formula, count, seed))


@dataclass(frozen=True)
class TheoryPoint(object):
    eb_n0_db: float
    sigma: float
    p_cpomf: float
    p_cpocf: float
    p_e: float


def theory_curve(cfg, eb_n0_grid, M=DEFAULT_SLOTS, pattern_policy=EXPECTATION, formula=DERIVED,
                 count=DEFAULT_PATTERNS, seed=0):
    '''
    Predicted BER over an Eb/N0 grid (dB). Eb is the mean symbol energy
    (E_1 + E_2)/2 per subcarrier, so sigma = sqrt(Eb / (2 * 10^(dB/10))).
    '''
    base = compute_terms(cfg, M, 0.0)
    eb = 0.5 * float(base.E[0] + base.E[1])
    points = []
    for db in eb_n0_grid:
        sigma_norm = math.sqrt(eb / (2.0 * 10.0 ** (float(db) / 10.0)))
        terms = base.with_sigma(sigma_norm)
        pm = p_cpomf(terms, pattern_policy, formula, count, seed)
        pc = p_cpocf(terms, pattern_policy, formula, count, seed)
        points.append(TheoryPoint(float(db), sigma_norm / math.sqrt(cfg.f), pm, pc, combine(pm, pc)))
        log.info('theory %s/%s Eb/N0=%g dB: P_e=%.3e', formula, pattern_policy, db, points[-1].p_e)
    return points
