'''
Command-line entry point. Everything here goes through cpocma.core.

    cpocma ber --preset multipath --eb-n0 0 4 8 -o multipath.csv
    cpocma theory --preset worked_example --eb-n0 0 5 10
    cpocma compare --preset multipath -N 4 --bits 200000
    cpocma compare --metric image --image lena.pgm --preset multipath -N 4 --eb-n0 6
    cpocma agreement --preset awgn_pair --eb-n0 0 2 4 6 8
'''
import argparse
import logging
import sys

from cpocma.core import (
    DEFAULT_IMAGE_SEEDS, PRESETS, SimConfigError, SimDimensionError, SimNumericError, Simulation, SystemKind,
    __version__, write_pnm)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

COMMANDS = ('ber', 'theory', 'agreement', 'spectrum', 'bandwidth', 'throughput', 'image', 'compare')
METRICS = ('ber', 'throughput', 'image')


def _common(parser):
    parser.add_argument('-c', '--config', help='JSON configuration file (default: $CPOCMA_CONFIG)')
    parser.add_argument('-p', '--preset', choices=sorted(PRESETS))
    parser.add_argument('-s', '--system', choices=[k.value for k in SystemKind])
    parser.add_argument('-o', '--output', help='write CSV here instead of stdout')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for progress, -vv for debug')
    parser.add_argument('--seed', type=int)

    carrier = parser.add_argument_group('carrier')
    carrier.add_argument('-f', '--frequency', type=float, dest='f', help='initial frequency f in Hz')
    carrier.add_argument('-N', '--subcarriers', type=int, dest='num_subcarriers')
    carrier.add_argument('--base-freqs', type=float, nargs='+')
    carrier.add_argument('--sample-rate', type=float)
    carrier.add_argument('--tail-symbols', type=int)
    carrier.add_argument('--carrier-frequency', type=float, help='passband carrier fc in Hz (0 for baseband)')
    carrier.add_argument('--delta-policy', choices=('max', 'lattice'))

    channel = parser.add_argument_group('channel')
    channel.add_argument('--eb-n0', type=float, nargs='+', dest='eb_n0_db', help='Eb/N0 grid in dB')
    channel.add_argument('--noiseless', action='store_true')
    channel.add_argument('--taps', choices=('awgn', 'three_ray'))

    sweep = parser.add_argument_group('sweep')
    sweep.add_argument('--bits', type=int, dest='bits_per_point')
    sweep.add_argument('--target-errors', type=int)
    sweep.add_argument('--frame-slots', type=int)
    sweep.add_argument('--formula', choices=('derived', 'published'))
    sweep.add_argument('--pattern-policy', choices=('zero', 'expectation'))
    sweep.add_argument('--patterns', type=int)
    sweep.add_argument('--bandwidth-model', choices=('measured', 'nominal'))
    sweep.add_argument('--fraction', type=float)

    baselines = parser.add_argument_group('baselines')
    baselines.add_argument('--spreading-gain', type=int)
    baselines.add_argument('--rolloff', type=float)
    baselines.add_argument('--span', type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog='cpocma', description='Chaotic multi-access modem simulations')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True
    helps = {
        'ber': 'Monte Carlo BER sweep',
        'theory': 'closed-form two-subcarrier BER curve',
        'agreement': 'simulated CPOCMA BER against the closed form',
        'spectrum': 'Welch PSD and occupied bandwidth',
        'bandwidth': 'measured CPOCMA bandwidth against 2fN + 2f for N = 1..4',
        'throughput': 'throughput per Hz over the Eb/N0 grid',
        'image': 'send a PGM/PPM image through the link',
        'compare': 'CPOCMA, FDMA and CDMA under one configuration',
    }
    for name in COMMANDS:
        sub = commands.add_parser(name, help=helps[name])
        _common(sub)
        if name == 'image':
            sub.add_argument('image', help='input PGM/PPM file')
            sub.add_argument('--decoded', help='write the received image here')
        elif name == 'compare':
            sub.add_argument('--metric', choices=METRICS, default='ber')
            sub.add_argument('--image', help='PGM/PPM file for --metric image')
            sub.add_argument('--seeds', type=int, default=DEFAULT_IMAGE_SEEDS, help='image runs per system')
    return parser


def _pick(args, names):
    section = dict((name, getattr(args, name)) for name in names if getattr(args, name, None) is not None)
    return section or None


def simulation_from_args(args):
    '''Flags override the configuration file, which overrides the preset.'''
    channel = _pick(args, ('eb_n0_db', 'taps'))
    if args.noiseless:
        channel = dict(channel or {}, eb_n0_db=None)
    return Simulation(
        config=args.config,
        preset=args.preset,
        system=args.system,
        seed=args.seed,
        carrier=_pick(args, ('f', 'num_subcarriers', 'base_freqs', 'sample_rate', 'tail_symbols',
                             'carrier_frequency', 'delta_policy')),
        channel=channel,
        sweep=_pick(args, ('bits_per_point', 'target_errors', 'frame_slots', 'formula', 'pattern_policy',
                           'patterns', 'bandwidth_model', 'fraction')),
        cdma=_pick(args, ('spreading_gain',)),
        fdma=_pick(args, ('rolloff', 'span')),
    )


def _output(sim):
    return sim._check_values().output


def _read_image(path):
    if not path:
        raise SimConfigError('An image file is required', 'image')
    try:
        with open(path, 'rb') as handle:
            return handle.read()
    except (IOError, OSError) as err:
        raise SimConfigError('Cannot read image %r' % path, 'image', err)


def _run(args, sim, stream):
    if args.command == 'ber':
        sim.run_ber(stream)
    elif args.command == 'theory':
        sim.run_theory(stream)
    elif args.command == 'agreement':
        verdict, _, shift = sim.run_agreement(stream)
        log.warning('theory agreement: %s (shift %s dB)', verdict, shift)
    elif args.command == 'spectrum':
        estimate = sim.run_spectrum(stream)
        log.warning('occupied bandwidth %g Hz', estimate.bandwidth)
    elif args.command == 'bandwidth':
        rows = sim.run_bandwidth_law(stream)
        log.warning('bandwidth law verdicts: %s', ', '.join(row.verdict for row in rows))
    elif args.command == 'throughput':
        sim.run_throughput(stream)
    elif args.command == 'compare':
        if args.metric == 'image':
            _, verdict = sim.run_compare_image(_read_image(args.image), stream, seeds=args.seeds)
            log.warning('image ordering verdict: %s', verdict)
            return
        run = sim.run_compare_throughput if args.metric == 'throughput' else sim.run_compare
        _, verdicts = run(stream)
        log.warning('%s ordering verdicts: %s', args.metric, ', '.join(verdicts))
    elif args.command == 'image':
        decoded, _ = sim.run_image(_read_image(args.image), stream)
        output = _output(sim)
        target = args.decoded or output.get('image')
        if target:
            with open(target, 'wb') as handle:
                handle.write(write_pnm(decoded, output.get('binary', True)))


def main(argv=None, stdout=None):
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        sim = simulation_from_args(args)
        path = args.output or _output(sim).get('path')
        if path:
            with open(path, 'w') as stream:
                _run(args, sim, stream)
        else:
            _run(args, sim, stdout or sys.stdout)
    except SimNumericError as err:
        sys.stderr.write('cpocma: numeric error: %s\n' % err)
        return EXIT_NUMERIC
    except (SimConfigError, SimDimensionError) as err:
        sys.stderr.write('cpocma: %s error: %s\n' % (err.category, err))
        return EXIT_CONFIG
    except (IOError, OSError) as err:
        sys.stderr.write('cpocma: cannot write output: %s\n' % err)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
