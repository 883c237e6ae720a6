import json
import math
import os
import shutil
import sys
import tempfile
import unittest

if sys.version_info[0] < 3:
    from StringIO import StringIO
else:
    from io import StringIO

import mock
import numpy as np

from cpocma import (
    PRESETS, CarrierConfig, ChannelSpec, SimConfigError, SimDimensionError, SimNumericError, Simulation,
    SystemKind, simulate_frame, validate
)
from cpocma import cli
from cpocma.basis import CORRELATION, SHAPING, make_taps, o_normalized, p_normalized, eval_p
from cpocma.backends import get_backend
from cpocma.baselines import (
    CdmaConfig, bpsk_theory_ber, despread, orthogonal_codes, spread, srrc_taps
)
from cpocma.channel import THREE_RAY, apply_awgn, apply_multipath, calibrate_noise_sigma
from cpocma.harness import (
    FAIL, INDETERMINATE, PASS, BerPoint, ThroughputPoint, bandwidth_law, binomial_interval, check_rate_parity,
    compare_ordering, compare_psnr, compare_throughput, estimate_bandwidth, image_roundtrip, psnr, read_pnm,
    run_ber_sweep, theory_agreement, throughput_per_hz, write_csv, write_pnm
)
from cpocma.rx import (
    DELTA_LATTICE, DELTA_MAX, SlotDecision, classify_slot, correlation_filter_bank, decision_lines,
    demodulate, estimate_delta, matched_filter_bank, sample_at_slots, sort_assign
)
from cpocma.theory import (
    EXPECTATION, PUBLISHED, ZERO, compute_terms, cpomf_probabilities, cross_isi_terms, p_cpocf, p_cpomf, p_e,
    TheoryPoint, published_deviations, quadrature_inner, quadrature_terms, theory_curve
)
from cpocma.tx import (
    BitFrame, Waveform, baseband_bandwidth, bits_to_symbols, downconvert, mixer_lowpass, modulate_subcarrier,
    parallel_to_serial, serial_to_parallel, transmit, upconvert, worked_example_frame
)


def random_symbols(rows, slots, seed):
    rng = np.random.default_rng(seed)
    return BitFrame(rng.choice(np.array([-1, 1]), size=(rows, slots)))


class BasisTests(unittest.TestCase):
    def test_values_at_the_jumps(self):
        for ratio in (1, 2, 3):
            self.assertAlmostEqual(p_normalized(0.0, ratio), 0.5)
            self.assertAlmostEqual(p_normalized(-1e-12, ratio), 0.5, places=9)
            self.assertAlmostEqual(o_normalized(0.0, ratio), -0.5)
            self.assertAlmostEqual(o_normalized(-1e-12, ratio), 0.5, places=9)
            self.assertAlmostEqual(p_normalized(1.0 - 1e-12, ratio), 0.0, places=9)
            self.assertEqual(p_normalized(1.0, ratio), 0.0)
            self.assertEqual(p_normalized(5.0, ratio), 0.0)

    def test_eval_p_scales_with_f(self):
        cfg = CarrierConfig(2.5e6, 2, sample_rate=40e6)
        self.assertAlmostEqual(eval_p(2, 0.3 / 2.5e6, cfg), p_normalized(0.3, 2))
        values = eval_p(1, np.array([-1.0, 0.0, 0.5]) / 2.5e6, cfg)
        self.assertEqual(values.shape, (3,))

    def test_shaping_taps_length(self):
        taps = make_taps(SHAPING, 1, CarrierConfig(1.0))
        self.assertEqual(len(taps), 337)
        self.assertEqual(taps.origin_index, 320)
        self.assertAlmostEqual(taps.taps[-1], 0.0)
        self.assertAlmostEqual(taps.taps[320], 0.5)

    def test_correlation_taps_midpoint_at_origin(self):
        taps = make_taps(CORRELATION, 1, CarrierConfig(1.0))
        self.assertAlmostEqual(taps.taps[taps.origin_index], 0.0)

    def test_non_integer_samples_per_symbol(self):
        with self.assertRaises(SimConfigError) as cm:
            CarrierConfig(3e6, 1, sample_rate=40e6)
        self.assertEqual('carrier.sample_rate', cm.exception.path)

    def test_duplicate_base_frequencies(self):
        with self.assertRaises(SimConfigError) as cm:
            CarrierConfig(1.0, 2, base_freqs=(2.0, 2.0))
        self.assertEqual('carrier.base_freqs', cm.exception.path)

    def test_too_few_samples_per_symbol(self):
        self.assertRaises(SimConfigError, CarrierConfig, 1.0, 1, None, 4.0)

    def test_normalized_view(self):
        cfg = CarrierConfig(2.5e6, 2, base_freqs=(2.5e6, 7.5e6), sample_rate=40e6).normalized()
        self.assertEqual(1.0, cfg.f)
        self.assertEqual((1, 3), cfg.ratios)
        self.assertEqual(16, cfg.sps)

    def test_invalid_subcarrier(self):
        cfg = CarrierConfig(1.0, 2)
        self.assertRaises(SimConfigError, make_taps, SHAPING, 3, cfg)
        self.assertRaises(SimConfigError, make_taps, SHAPING, 0, cfg)


class TxTests(unittest.TestCase):
    def test_serial_to_parallel(self):
        frame = serial_to_parallel(np.array([1, -1, 1, 1, -1, -1]), 2)
        np.testing.assert_array_equal(frame.symbols, [[1, 1, -1], [-1, 1, -1]])
        np.testing.assert_array_equal(parallel_to_serial(frame), [1, -1, 1, 1, -1, -1])

    def test_serial_to_parallel_length_mismatch(self):
        self.assertRaises(SimDimensionError, serial_to_parallel, np.array([1, -1, 1]), 2)

    def test_bits_to_symbols(self):
        np.testing.assert_array_equal(bits_to_symbols([0, 1, 1]), [-1, 1, 1])
        self.assertRaises(SimConfigError, bits_to_symbols, [0, 2])

    def test_frame_rejects_zero(self):
        self.assertRaises(SimConfigError, BitFrame, np.array([[1, 0]]))

    def test_transmit_row_mismatch(self):
        self.assertRaises(SimDimensionError, transmit, random_symbols(3, 4, 0), CarrierConfig(1.0, 2))

    def test_waveform_rejects_nan(self):
        self.assertRaises(SimNumericError, Waveform, np.array([0.0, np.nan]), 16.0)

    def test_passband_loopback_decodes(self):
        cfg = CarrierConfig(1.0, 1, sample_rate=64.0)
        frame = random_symbols(1, 32, 3)
        w = transmit(frame, cfg)
        back = downconvert(upconvert(w, 16.0, 2.0), 16.0, 2.0)
        self.assertEqual(frame, demodulate(back, cfg, 32))

    def test_carrier_above_nyquist(self):
        w = transmit(random_symbols(1, 4, 0), CarrierConfig(1.0, 1, sample_rate=16.0))
        self.assertRaises(SimConfigError, upconvert, w, 7.5, 2.0)

    def test_carrier_needs_bandwidth(self):
        w = transmit(random_symbols(1, 4, 0), CarrierConfig(1.0, 1, sample_rate=64.0))
        self.assertRaises(SimConfigError, upconvert, w, 16.0, 0.0)
        self.assertIs(w, upconvert(w, 0.0, 0.0))

    def test_loopback_of_band_limited_waveform(self):
        fs = 1024.0
        t = np.arange(4096) / fs
        x = np.exp(-((t - 2.0) / 0.2) ** 2) * np.cos(2 * np.pi * 10.0 * t)
        w = Waveform(x, fs)
        back = downconvert(upconvert(w, 200.0, 32.0), 200.0, 32.0).samples
        error = math.sqrt(np.mean((back - x) ** 2)) / math.sqrt(np.mean(x ** 2))
        self.assertLess(error, 1e-3)

    def test_passband_energy_is_half(self):
        fs = 1024.0
        t = np.arange(4096) / fs
        w = Waveform(np.exp(-((t - 2.0) / 0.2) ** 2) * np.cos(2 * np.pi * 10.0 * t), fs)
        self.assertAlmostEqual(upconvert(w, 200.0, 32.0).energy / w.energy, 0.5, delta=0.005)
        cfg = CarrierConfig(2.5e6, 1, sample_rate=40e6)
        w = transmit(random_symbols(1, 256, 4), cfg)
        self.assertAlmostEqual(upconvert(w, 5e6, baseband_bandwidth(cfg)).energy / w.energy, 0.5, delta=0.005)

    def test_mixer_rejects_overlapping_image(self):
        with self.assertRaises(SimConfigError) as cm:
            mixer_lowpass(3.0, 64.0, 4.0)
        self.assertEqual('carrier.carrier_frequency', cm.exception.path)
        w = transmit(random_symbols(1, 4, 0), CarrierConfig(1.0, 1, sample_rate=64.0))
        self.assertRaises(SimConfigError, downconvert, w, 3.0, 4.0)

    def test_touching_image_band_warns(self):
        with self.assertLogs('cpocma.tx', level='WARNING'):
            taps = mixer_lowpass(5e6, 40e6, 5e6)
        self.assertEqual(1, len(taps) % 2)

    def test_frame_concatenation(self):
        cfg = CarrierConfig(1.0, 2)
        a = random_symbols(2, 8, 11)
        b = random_symbols(2, 8, 12)
        whole = transmit(BitFrame(np.hstack([a.symbols, b.symbols])), cfg).samples
        first = transmit(a, cfg).samples
        second = transmit(b, cfg).samples
        shift = 8 * cfg.sps
        parts = np.zeros_like(whole)
        parts[:first.size] += first
        parts[shift:shift + second.size] += second
        np.testing.assert_allclose(whole, parts, rtol=0, atol=1e-9)


class ChannelTests(unittest.TestCase):
    def test_noise_calibration(self):
        w = Waveform(np.ones(16), 16.0)
        self.assertAlmostEqual(calibrate_noise_sigma(10.0, w, 1), math.sqrt(0.8))

    def test_zero_energy(self):
        self.assertRaises(SimNumericError, calibrate_noise_sigma, 0.0, Waveform(np.zeros(8), 8.0), 1)

    def test_noise_is_seeded(self):
        w = Waveform(np.zeros(64), 16.0)
        a = apply_awgn(w, 1.0, 7)
        b = apply_awgn(w, 1.0, 7)
        c = apply_awgn(w, 1.0, 8)
        np.testing.assert_array_equal(a.samples, b.samples)
        self.assertFalse(np.array_equal(a.samples, c.samples))

    def test_three_ray_impulse_response(self):
        impulse = np.zeros(16)
        impulse[0] = 1.0
        out = apply_multipath(Waveform(impulse, 40e6), THREE_RAY).samples
        self.assertAlmostEqual(out[0], math.sqrt(0.7))
        self.assertAlmostEqual(out[4], math.sqrt(0.2))
        self.assertAlmostEqual(out[5], math.sqrt(0.1))
        self.assertAlmostEqual(float(np.sum(out ** 2)), 1.0)

    def test_gains_above_one(self):
        self.assertRaises(SimConfigError, ChannelSpec, 0.0, ((0.9, 0.0), (0.3, 1e-7)))

    def test_noiseless(self):
        self.assertTrue(ChannelSpec().noiseless)
        self.assertTrue(ChannelSpec(float('inf')).noiseless)
        self.assertFalse(ChannelSpec(3.0).noiseless)

    def test_half_sample_delay_rounds_up(self):
        impulse = np.zeros(8)
        impulse[0] = 1.0
        out = apply_multipath(Waveform(impulse, 1.0), ((0.5, 0.0), (0.5, 2.5))).samples
        self.assertEqual(0.0, out[2])
        self.assertAlmostEqual(out[3], math.sqrt(0.5))

    def test_multipath_is_shift_invariant(self):
        x = np.random.default_rng(13).standard_normal(200)
        k = 7
        a = apply_multipath(Waveform(np.concatenate([x, np.zeros(20)]), 40e6), THREE_RAY).samples
        b = apply_multipath(Waveform(np.concatenate([np.zeros(k), x, np.zeros(20 - k)]), 40e6), THREE_RAY).samples
        np.testing.assert_array_equal(b[k:], a[:a.size - k])
        np.testing.assert_array_equal(b[:k], np.zeros(k))

    def test_noise_variance_and_whiteness(self):
        n = 10 ** 6
        sigma = 2.0
        x = apply_awgn(Waveform(np.zeros(n), 1.0), sigma, 21).samples
        self.assertLess(abs(np.mean(x ** 2) / sigma ** 2 - 1.0), 0.01)
        for lag in (1, 2, 5):
            self.assertLess(abs(np.mean(x[:-lag] * x[lag:])), 3 * sigma ** 2 / math.sqrt(n), 'lag %d' % lag)

    def test_channel_seed_selects_the_noise(self):
        cfg = CarrierConfig(1.0, 2)
        bits = np.random.default_rng(3).integers(0, 2, size=512)
        first = simulate_frame('cpocma', cfg, ChannelSpec(0.0, seed=1), bits, seed=5)[0]
        again = simulate_frame('cpocma', cfg, ChannelSpec(0.0, seed=1), bits, seed=5)[0]
        other = simulate_frame('cpocma', cfg, ChannelSpec(0.0, seed=2), bits, seed=5)[0]
        np.testing.assert_array_equal(first, again)
        self.assertFalse(np.array_equal(first, other))

    def test_channel_seed_must_be_non_negative(self):
        with self.assertRaises(SimConfigError) as cm:
            ChannelSpec(0.0, seed=-1)
        self.assertEqual('channel.seed', cm.exception.path)


class RxTests(unittest.TestCase):
    def test_decision_lines(self):
        np.testing.assert_allclose(decision_lines(np.array([1.0, -0.5]), 2), [1.0, 0.0, -1.0])
        np.testing.assert_allclose(decision_lines(np.array([0.3, -2.0]), 4), [2.0, 1.0, 0.0, -1.0, -2.0])

    def test_classify_slot(self):
        lines = [1.0, 0.0, -1.0]
        decision = classify_slot(0.4, lines, slot=3)
        self.assertEqual(SlotDecision(3, 2, 1, 1), decision)
        # a tie goes to the upper line
        self.assertEqual(1, classify_slot(0.5, lines).d_index)
        self.assertEqual(3, classify_slot(-0.9, lines).d_index)

    def test_sort_assign(self):
        y = [0.3, 0.9, -0.2]
        np.testing.assert_array_equal(sort_assign(y, SlotDecision(1, 2, 2, 1)), [1, 1, -1])
        np.testing.assert_array_equal(sort_assign(y, SlotDecision(1, 3, 1, 2)), [-1, 1, -1])
        np.testing.assert_array_equal(sort_assign([0.5, 0.5], SlotDecision(1, 2, 1, 1)), [1, -1])

    def test_sort_assign_count_mismatch(self):
        self.assertRaises(SimDimensionError, sort_assign, [0.1, 0.2], SlotDecision(1, 1, 3, 0))

    def test_delta_policies(self):
        xi_bar = np.array([2.0, 0.0, -2.0, 2.0])
        self.assertEqual(2.0, estimate_delta(xi_bar, 4, DELTA_MAX))
        self.assertAlmostEqual(2.0, estimate_delta(xi_bar, 4, DELTA_LATTICE, reference=2.0))
        self.assertAlmostEqual(4.0, estimate_delta(xi_bar, 4, DELTA_LATTICE, reference=4.0))
        self.assertEqual(estimate_delta(xi_bar, 2, DELTA_MAX), estimate_delta(xi_bar, 2, DELTA_LATTICE))

    def test_degenerate_scale(self):
        self.assertRaises(SimNumericError, estimate_delta, np.zeros(4), 2)

    def test_single_symbol_responses(self):
        cfg = CarrierConfig(1.0, 1, sample_rate=64.0)
        r = transmit(BitFrame(np.array([[1]])), cfg)
        xi = sample_at_slots(matched_filter_bank(r, cfg)[0], cfg, 1)[0]
        y = correlation_filter_bank(r, cfg, 1).values[0, 0]

        def p(x):
            return p_normalized(x, 1)

        def o(x):
            return o_normalized(x, 1)

        self.assertAlmostEqual(xi, quadrature_inner(p, p), delta=1e-3)
        self.assertAlmostEqual(y, quadrature_inner(p, o), delta=1e-3)

    def test_worked_example_decodes(self):
        cfg = CarrierConfig(1.0, 2, base_freqs=(1.0, 2.0), sample_rate=16.0)
        frame = worked_example_frame()
        self.assertEqual(frame, demodulate(transmit(frame, cfg), cfg, 16))

    def test_noiseless_round_trip(self):
        for N in (1, 2, 3, 4, 5):
            cfg = CarrierConfig(1.0, N)
            for M in (16, 64):
                for k in range(100):
                    frame = random_symbols(N, M, 1000 * N + 10 * M + k)
                    self.assertEqual(frame, demodulate(transmit(frame, cfg), cfg, M),
                                     'N=%d M=%d frame %d' % (N, M, k))

    def test_negated_signal_decodes_to_negated_frame(self):
        for N in (2, 4):
            cfg = CarrierConfig(1.0, N)
            frame = random_symbols(N, 32, 40 + N)
            decoded = demodulate(-transmit(frame, cfg), cfg, 32)
            self.assertEqual(BitFrame(-frame.symbols), decoded, 'N=%d' % N)

    def test_classify_sweep_is_a_step_function(self):
        lines = np.linspace(1.0, -1.0, 5)
        midpoints = (lines[:-1] + lines[1:]) / 2
        previous = 1
        for x in np.linspace(1.5, -1.5, 3000):
            if np.min(np.abs(midpoints - x)) < 1e-9:
                continue
            d_index = classify_slot(x, lines).d_index
            self.assertEqual(1 + int(np.sum(midpoints > x)), d_index, 'xi_bar=%r' % x)
            self.assertGreaterEqual(d_index, previous)
            previous = d_index

    def test_subcarriers_are_pseudo_orthogonal(self):
        cfg = CarrierConfig(1.0, 2)
        cross = []
        own = []
        for k in range(10):
            row = random_symbols(1, 64, 300 + k).symbols[0]
            y = correlation_filter_bank(modulate_subcarrier(row, 1, cfg), cfg, 64).values
            cross.extend(y[1])
            own.extend(row * y[0])
        self.assertLess(math.sqrt(np.mean(np.square(cross))), 0.1 * np.mean(own))


class TheoryTests(unittest.TestCase):
    def test_exact_terms_match_quadrature(self):
        for base_freqs in ((1.0, 2.0), (1.0, 3.0), (2.0, 3.0)):
            cfg = CarrierConfig(1.0, 2, base_freqs=base_freqs)
            terms = compute_terms(cfg)
            oracle = quadrature_terms(cfg, offsets=3)
            for name, want in oracle.items():
                got = np.asarray(getattr(terms, name))
                if got.ndim == 2:
                    got = got[:, :3]
                np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-9, err_msg='%s %r' % (name, base_freqs))

    def test_published_energy_and_correlation_terms(self):
        deviations = published_deviations((1, 2))
        self.assertLess(deviations['E'], 1e-6)
        self.assertLess(deviations['Q'], 1e-6)

    def test_terms_need_two_subcarriers(self):
        self.assertRaises(SimConfigError, compute_terms, CarrierConfig(1.0, 3))

    def test_noiseless_probabilities_vanish(self):
        terms = compute_terms(CarrierConfig(1.0, 2)).with_sigma(0.0)
        self.assertEqual(0.0, p_cpomf(terms, ZERO))
        self.assertEqual(0.0, p_cpocf(terms, ZERO))

    def test_probabilities_in_range(self):
        cfg = CarrierConfig(1.0, 2)
        for sigma in (0.05, 0.5, 5.0):
            value = p_e(cfg, sigma=sigma, count=200, seed=1)
            self.assertTrue(0.0 <= value <= 1.0)

    def test_curve_falls_with_snr(self):
        points = theory_curve(CarrierConfig(1.0, 2), [0, 5, 10, 15], pattern_policy=ZERO)
        values = [p.p_e for p in points]
        self.assertEqual(sorted(values, reverse=True), values)
        self.assertLess(values[-1], values[0])

    def test_published_count_error_at_zero_isi(self):
        terms = compute_terms(CarrierConfig(1.0, 2))
        E1, E2 = terms.E
        delta = terms.delta_threshold
        sigma = 0.3
        got = cpomf_probabilities(terms.E, terms.B_cross, 0.0, delta, sigma, PUBLISHED)[0]
        want = 0.5 * math.erfc((E1 - E2 + delta / 2.0) / (math.sqrt(2.0) * math.sqrt(E1 + E2) * sigma))
        self.assertAlmostEqual(got, want)

    def test_cross_isi_is_small(self):
        cfg = CarrierConfig(1.0, 2)
        phi = cross_isi_terms(cfg, offsets=5)
        self.assertLess(float(np.max(np.abs(phi))), 0.1 * abs(compute_terms(cfg).B_cross[0]))

    def test_isi_terms_halve_per_symbol(self):
        terms = compute_terms(CarrierConfig(1.0, 2))
        for name in ('I', 'A', 'B_fut', 'X', 'Y'):
            values = np.asarray(getattr(terms, name))[:, :10]
            np.testing.assert_allclose(values[:, 1:], values[:, :-1] / 2, rtol=1e-7, atol=1e-15, err_msg=name)

    def test_truncating_isi_at_twenty_symbols(self):
        truncated = p_e(CarrierConfig(1.0, 2, tail_symbols=20), sigma=0.2, pattern_policy=EXPECTATION,
                        count=300, seed=3)
        longer = p_e(CarrierConfig(1.0, 2, tail_symbols=30), sigma=0.2, pattern_policy=EXPECTATION,
                     count=300, seed=3)
        self.assertGreater(truncated, 0.0)
        self.assertLess(abs(longer - truncated) / truncated, 1e-3)

    def test_agreement_verdicts(self):
        theory = [TheoryPoint(db, 0.1, 0.0, 0.0, value) for db, value in ((0.0, 1e-1), (4.0, 1e-2), (8.0, 1e-4))]

        def points(errors):
            return [BerPoint('cpocma', 2, db, 10 ** 6, e, 0) for db, e in zip((0.0, 4.0, 8.0), errors)]

        verdict, rows, shift = theory_agreement(points((120000, 15000, 150)), theory)
        self.assertEqual(PASS, verdict)
        self.assertEqual([PASS] * 3, [row['verdict'] for row in rows])
        self.assertAlmostEqual(shift, 4.0 * (math.log10(0.015) + 3) / 2.0 - 2.0, places=9)
        self.assertEqual(FAIL, theory_agreement(points((120000, 50000, 150)), theory)[0])
        verdict, rows, shift = theory_agreement(points((50, 20, 0)), theory)
        self.assertEqual(INDETERMINATE, verdict)
        self.assertIsNone(shift)

    def test_simulation_agrees_at_the_coin_flip_limit(self):
        sim = Simulation(preset='awgn_pair', carrier={'f': 1.0, 'sample_rate': 16.0}, channel={'eb_n0_db': [-30.0]},
                         sweep={'bits_per_point': 20000, 'patterns': 200})
        verdict, rows, shift = sim.run_agreement()
        self.assertEqual(PASS, verdict)
        self.assertGreaterEqual(rows[0]['bit_errors'], 100)
        self.assertIsNone(shift)


class BaselineTests(unittest.TestCase):
    def test_bpsk_theory(self):
        self.assertAlmostEqual(float(bpsk_theory_ber(0.0)), 0.0786496, places=6)

    def test_spreading_identity(self):
        code = orthogonal_codes(16)[3]
        bits = np.array([1, -1, 1])
        np.testing.assert_array_equal(despread(spread(bits, code), code), 16 * bits)

    def test_codes_are_orthogonal(self):
        codes = orthogonal_codes(8).astype(int)
        np.testing.assert_array_equal(codes.dot(codes.T), 8 * np.eye(8))
        self.assertRaises(SimConfigError, orthogonal_codes, 12)

    def test_code_exhaustion(self):
        with self.assertRaises(SimConfigError) as cm:
            CdmaConfig(1.0, 16.0, num_users=16, spreading_gain=16)
        self.assertEqual('cdma.num_users', cm.exception.path)

    def test_srrc_is_nyquist(self):
        sps = 16
        h = srrc_taps(0.25, 8, sps)
        self.assertAlmostEqual(float(np.sum(h ** 2)), 1.0)
        g = np.convolve(h, h)
        center = g.size // 2
        self.assertAlmostEqual(g[center], 1.0)
        for k in range(1, 8):
            self.assertLess(abs(g[center + k * sps]), 1e-2)

    def test_noiseless_round_trips(self):
        cfg = CarrierConfig(1.0, 2, sample_rate=16.0)
        bits = np.random.default_rng(5).integers(0, 2, size=128)
        for system in SystemKind:
            decoded, errors = simulate_frame(system, cfg, ChannelSpec(), bits, seed=1)
            self.assertEqual(0, errors, system)
            np.testing.assert_array_equal(decoded, bits)

    def test_bpsk_matches_theory(self):
        cfg = CarrierConfig(1.0, 1, sample_rate=16.0)
        grid = [ChannelSpec(float(db)) for db in (0, 2, 4, 6, 8)]
        points = run_ber_sweep('bpsk', cfg, grid, bits_per_point=10 ** 6, seed=3, target_errors=None,
                               frame_slots=1000)
        for point in points:
            want = float(bpsk_theory_ber(point.eb_n0_db))
            sd = math.sqrt(want * (1 - want) / point.total_bits)
            self.assertEqual(10 ** 6, point.total_bits)
            self.assertLess(abs(point.ber - want), 3 * sd, '%s dB' % point.eb_n0_db)

    def test_payload_duration_follows_each_modem(self):
        cfg = CarrierConfig(1.0, 2, sample_rate=32.0)
        backends = [get_backend(system, cfg) for system in ('cpocma', 'fdma', 'cdma')]
        self.assertTrue(check_rate_parity(backends))
        faster = get_backend('cdma', cfg)
        faster.config = CdmaConfig(2.0, 32.0, 2, 16)
        self.assertEqual(32.0, faster.payload_duration(64))
        self.assertRaises(SimConfigError, check_rate_parity, backends[:2] + [faster])


class HarnessTests(unittest.TestCase):
    def test_psnr(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        b = np.ones((4, 4), dtype=np.uint8)
        self.assertAlmostEqual(psnr(a, b), 10 * math.log10(255.0 ** 2))
        self.assertEqual(float('inf'), psnr(a, a))
        self.assertRaises(SimDimensionError, psnr, a, np.zeros((2, 2)))

    def test_pnm_round_trip(self):
        gray = np.arange(12, dtype=np.uint8).reshape(3, 4)
        rgb = np.arange(24, dtype=np.uint8).reshape(2, 4, 3)
        for image in (gray, rgb):
            for binary in (True, False):
                np.testing.assert_array_equal(read_pnm(write_pnm(image, binary)), image)

    def test_plain_pnm_with_comment(self):
        image = read_pnm(b'P2\n# two pixels\n2 1\n255\n0 255\n')
        np.testing.assert_array_equal(image, [[0, 255]])

    def test_bad_pnm(self):
        self.assertRaises(SimConfigError, read_pnm, b'P7\n1 1\n255\n')

    def test_low_maxval_is_rescaled(self):
        image = read_pnm(b'P2\n3 1\n15\n0 15 5\n')
        np.testing.assert_array_equal(image, [[0, 255, 85]])
        self.assertEqual(np.uint8, image.dtype)
        self.assertRaises(SimConfigError, read_pnm, b'P5\n1 1\n15\n\x14')

    def test_sinusoid_bandwidth(self):
        fs = 1024.0
        t = np.arange(2 ** 15) / fs
        w = Waveform(np.sin(2 * np.pi * 100.0 * t), fs)
        estimate = estimate_bandwidth(w, baseband=False)
        self.assertAlmostEqual(estimate.center, 100.0)
        self.assertAlmostEqual(estimate.bandwidth, 0.5)
        self.assertAlmostEqual(estimate_bandwidth(w).bandwidth, 2 * 100.25)

    def test_bandwidth_law(self):
        rows = bandwidth_law(CarrierConfig(0.3125e6, 1, sample_rate=40e6))
        self.assertEqual([1, 2, 3, 4], [row.num_subcarriers for row in rows])
        ratios = [row.ratio for row in rows]
        self.assertEqual(sorted(ratios), ratios)
        for row in rows:
            self.assertEqual(2 * 0.3125e6 * (row.num_subcarriers + 1), row.nominal)
            self.assertTrue(0.6 < row.ratio < 1.2, row)
        self.assertEqual([PASS, PASS], [row.verdict for row in rows[2:]])

    def test_short_spectrum(self):
        self.assertRaises(SimDimensionError, estimate_bandwidth, Waveform(np.ones(100), 16.0))

    def test_wilson_interval(self):
        lo, hi = binomial_interval(0, 100)
        self.assertEqual(0.0, lo)
        self.assertTrue(0.036 < hi < 0.038)
        lo, hi = binomial_interval(50, 100)
        self.assertAlmostEqual(0.5 - lo, hi - 0.5)

    def test_compare_ordering(self):
        good = [BerPoint('cpocma', 4, 6.0, 10 ** 6, 10, 0),
                BerPoint('fdma', 4, 6.0, 10 ** 6, 1000, 0),
                BerPoint('cdma', 4, 6.0, 10 ** 6, 100000, 0)]
        self.assertEqual(PASS, compare_ordering(good))
        self.assertEqual(FAIL, compare_ordering(good[::-1]))

    def test_compare_throughput(self):
        def point(system, bandwidth, errors):
            ber = errors / 1e6
            return ThroughputPoint(system, 6.0, 1 - ber, bandwidth, (1 - ber) / bandwidth, 10 ** 6, errors)

        good = [point('cpocma', 6.0, 10), point('fdma', 8.0, 1000), point('cdma', 64.0, 100)]
        self.assertEqual(PASS, compare_throughput(good))
        self.assertEqual(FAIL, compare_throughput(good[::-1]))
        self.assertEqual(INDETERMINATE, compare_throughput([point('cpocma', 8.0, 10), point('fdma', 8.0, 12)]))

    def test_compare_psnr_majority(self):
        self.assertEqual(PASS, compare_psnr([[30, 20, 10]] * 3 + [[10, 20, 30]] * 2))
        self.assertEqual(FAIL, compare_psnr([[30, 20, 10]] * 2 + [[10, 20, 30]] * 3))
        inf = float('inf')
        self.assertEqual(INDETERMINATE, compare_psnr([[inf, inf, inf]] * 5))

    def test_csv_header(self):
        stream = write_csv(StringIO(), [BerPoint('cpocma', 2, 0.0, 100, 5, 0)])
        lines = stream.getvalue().splitlines()
        self.assertTrue(lines[0].startswith('# cpocma '))
        self.assertEqual('system,N,eb_n0_db,total_bits,bit_errors,ber,low_confidence', lines[1])
        self.assertEqual('cpocma,2,0.0,100,5,0.05,1', lines[2])

    def test_too_few_bits(self):
        self.assertRaises(SimConfigError, run_ber_sweep, 'cpocma', CarrierConfig(1.0, 2), [ChannelSpec()],
                          bits_per_point=100)

    def test_coin_flip_limit(self):
        point = run_ber_sweep('cpocma', CarrierConfig(1.0, 2), [ChannelSpec(-30.0)], bits_per_point=20000,
                              seed=4, target_errors=None)[0]
        self.assertLess(abs(point.ber - 0.5), 0.05)

    def test_nominal_throughput(self):
        points = throughput_per_hz('cpocma', CarrierConfig(1.0, 2), [ChannelSpec()], bandwidth_model='nominal',
                                   bits_per_point=10000, target_errors=None)
        self.assertEqual(1, len(points))
        self.assertEqual(6.0, points[0].bandwidth)
        self.assertEqual(1.0, points[0].throughput)
        self.assertAlmostEqual(points[0].theta, 1.0 / 6)

    def test_noiseless_image_roundtrip(self):
        image = (np.arange(30, dtype=np.uint8) * 7).reshape(6, 5)
        decoded, value = image_roundtrip(write_pnm(image), 'cpocma', CarrierConfig(1.0, 2), ChannelSpec(),
                                         frame_slots=8)
        np.testing.assert_array_equal(image, decoded)
        self.assertEqual(float('inf'), value)


class CoreTests(unittest.TestCase):
    def setUp(self):
        patcher = mock.patch.dict(os.environ)
        patcher.start()
        self.addCleanup(patcher.stop)
        os.environ.pop('CPOCMA_CONFIG', None)

    def assert_config_error(self, config, path):
        with self.assertRaises(SimConfigError) as cm:
            validate(config)
        self.assertEqual(path, cm.exception.path)

    def test_presets_validate(self):
        for name in PRESETS:
            validate({'preset': name})
        v = validate({'preset': 'multipath'})
        self.assertEqual(128, v.carrier.sps)
        self.assertEqual(2, v.carrier.num_subcarriers)
        self.assertEqual(THREE_RAY, v.grid[0].taps)

    def test_validation_paths(self):
        self.assert_config_error({'carrier': {'f': 3e6, 'sample_rate': 40e6}}, 'carrier.sample_rate')
        self.assert_config_error({'carrier': {'f': 1, 'num_subcarriers': 2, 'base_freqs': [1, 1]}},
                                 'carrier.base_freqs')
        self.assert_config_error({'system': 'cdma', 'carrier': {'f': 1, 'num_subcarriers': 16, 'sample_rate': 16}},
                                 'cdma.num_users')
        self.assert_config_error({'preset': 'multipath', 'channel': {'taps': [[0.9, 0], [0.5, 1e-7]]}}, 'channel.taps')
        self.assert_config_error({'carrier': {'f': 1, 'colour': 'red'}}, 'carrier')
        self.assert_config_error({'preset': 'no_such_preset'}, 'preset')
        self.assert_config_error({'carrier': {'f': 1}, 'sweep': {'bits_per_point': 10}}, 'sweep.bits_per_point')
        self.assert_config_error({'system': 'ofdm', 'carrier': {'f': 1}}, 'system')

    def test_simulate_frame_is_deterministic(self):
        cfg = CarrierConfig(1.0, 2)
        bits = np.random.default_rng(2).integers(0, 2, size=256)
        first = simulate_frame('cpocma', cfg, ChannelSpec(2.0), bits, seed=9)
        second = simulate_frame('cpocma', cfg, ChannelSpec(2.0), bits, seed=9)
        np.testing.assert_array_equal(first[0], second[0])
        self.assertEqual(first[1], second[1])

    def test_simulate_frame_partial_slot(self):
        self.assertRaises(SimDimensionError, simulate_frame, 'cpocma', CarrierConfig(1.0, 2), None,
                          np.array([0, 1, 1]))

    def test_passband_preset_round_trip(self):
        v = validate({'preset': 'single_carrier'})
        bits = np.random.default_rng(6).integers(0, 2, size=64)
        _, errors = simulate_frame(v.system, v.carrier, ChannelSpec(), bits, **v.options)
        self.assertEqual(0, errors)

    def test_unknown_keyword(self):
        with self.assertRaises(SimConfigError) as cm:
            Simulation(colour='red')
        self.assertEqual('colour', cm.exception.path)

    def test_configuration_from_environment(self):
        os.environ['CPOCMA_CONFIG'] = '/tmp/cpocma.json'
        self.assertEqual('/tmp/cpocma.json', Simulation().config)

    def test_layering(self):
        sim = Simulation(config={'preset': 'multipath', 'carrier': {'num_subcarriers': 3}},
                         carrier={'num_subcarriers': 4})
        carrier = sim.settings()['carrier']
        self.assertEqual(4, carrier['num_subcarriers'])
        self.assertEqual(0.3125e6, carrier['f'])

    def test_run_ber_writes_csv(self):
        sim = Simulation(preset='worked_example', channel={'eb_n0_db': [5.0]},
                         sweep={'bits_per_point': 10000})
        stream = StringIO()
        points = sim.run_ber(stream)
        self.assertEqual(1, len(points))
        self.assertGreaterEqual(points[0].total_bits, 128)
        self.assertEqual(3, len(stream.getvalue().splitlines()))

    def test_run_theory_needs_noise(self):
        self.assertRaises(SimConfigError, Simulation(preset='worked_example').run_theory)

    def test_compare_throughput_orders_systems(self):
        sim = Simulation(preset='worked_example', sweep={'bits_per_point': 10000, 'bandwidth_model': 'nominal'})
        stream = StringIO()
        results, verdicts = sim.run_compare_throughput(stream)
        self.assertEqual([PASS], verdicts)
        self.assertEqual([6.0, 16.0, 64.0], [results[kind][0].bandwidth for kind in
                                             (SystemKind.CPOCMA, SystemKind.FDMA, SystemKind.CDMA)])
        self.assertEqual(5, len(stream.getvalue().splitlines()))

    def test_compare_image_ties_without_noise(self):
        image = (np.arange(30, dtype=np.uint8) * 7).reshape(6, 5)
        sim = Simulation(preset='worked_example', sweep={'frame_slots': 8})
        trials, verdict = sim.run_compare_image(write_pnm(image), seeds=2)
        self.assertEqual([[float('inf')] * 3] * 2, trials)
        self.assertEqual(INDETERMINATE, verdict)


class CliTests(unittest.TestCase):
    def setUp(self):
        patcher = mock.patch.dict(os.environ)
        patcher.start()
        self.addCleanup(patcher.stop)
        os.environ.pop('CPOCMA_CONFIG', None)

    def test_theory(self):
        stdout = StringIO()
        code = cli.main(['theory', '--preset', 'worked_example', '--eb-n0', '0', '10', '--patterns', '50'], stdout)
        self.assertEqual(cli.EXIT_OK, code)
        lines = stdout.getvalue().splitlines()
        self.assertTrue(lines[0].startswith('# cpocma'))
        self.assertEqual(4, len(lines))

    def test_configuration_error(self):
        with mock.patch('sys.stderr', new_callable=StringIO) as stderr:
            code = cli.main(['ber', '--frequency', '3', '--sample-rate', '40'], StringIO())
        self.assertEqual(cli.EXIT_CONFIG, code)
        self.assertIn('carrier.sample_rate', stderr.getvalue())

    def test_numeric_error(self):
        with mock.patch('cpocma.core.Simulation.run_ber', side_effect=SimNumericError('boom')):
            with mock.patch('sys.stderr', new_callable=StringIO):
                code = cli.main(['ber', '--preset', 'worked_example'], StringIO())
        self.assertEqual(cli.EXIT_NUMERIC, code)

    def test_flags_override_preset(self):
        args = cli.build_parser().parse_args(['ber', '--preset', 'multipath', '-N', '4', '--taps', 'awgn'])
        settings = cli.simulation_from_args(args).settings()
        self.assertEqual(4, settings['carrier']['num_subcarriers'])
        self.assertEqual('awgn', settings['channel']['taps'])
        self.assertEqual([0, 2, 4, 6, 8, 10, 12, 14], settings['channel']['eb_n0_db'])

    def test_output_path_from_configuration(self):
        workdir = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, workdir)
        target = os.path.join(workdir, 'theory.csv')
        config = os.path.join(workdir, 'run.json')
        with open(config, 'w') as handle:
            json.dump({'preset': 'worked_example', 'channel': {'eb_n0_db': [5]}, 'output': {'path': target}},
                      handle)
        stdout = StringIO()
        code = cli.main(['theory', '-c', config, '--patterns', '20'], stdout)
        self.assertEqual(cli.EXIT_OK, code)
        self.assertEqual('', stdout.getvalue())
        with open(target) as handle:
            self.assertEqual(3, len(handle.read().splitlines()))

    def test_image_result_is_csv(self):
        workdir = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, workdir)
        source = os.path.join(workdir, 'in.pgm')
        decoded = os.path.join(workdir, 'out.pgm')
        image = (np.arange(30, dtype=np.uint8) * 7).reshape(6, 5)
        with open(source, 'wb') as handle:
            handle.write(write_pnm(image))
        stdout = StringIO()
        code = cli.main(['image', source, '--preset', 'worked_example', '--frame-slots', '8',
                         '--decoded', decoded], stdout)
        self.assertEqual(cli.EXIT_OK, code)
        lines = stdout.getvalue().splitlines()
        self.assertTrue(lines[0].startswith('# cpocma '))
        self.assertEqual(['system,psnr_db', 'cpocma,inf'], lines[1:])
        with open(decoded, 'rb') as handle:
            np.testing.assert_array_equal(read_pnm(handle.read()), image)

    def test_compare_metric_flags(self):
        args = cli.build_parser().parse_args(['compare', '--metric', 'image', '--image', 'x.pgm', '--seeds', '3'])
        self.assertEqual(('image', 'x.pgm', 3), (args.metric, args.image, args.seeds))
        self.assertEqual('ber', cli.build_parser().parse_args(['compare']).metric)

    def test_compare_image_needs_a_file(self):
        with mock.patch('sys.stderr', new_callable=StringIO) as stderr:
            code = cli.main(['compare', '--metric', 'image', '--preset', 'worked_example'], StringIO())
        self.assertEqual(cli.EXIT_CONFIG, code)
        self.assertIn('image', stderr.getvalue())


if __name__ == '__main__':
    unittest.main()
