__version__ = '0.1.0'
__author__ = "cpocma contributors"
__date__ = '2026-October-18'
__copyright__ = "(C) 2026 cpocma contributors"
__doc__ = '''

    Chaotic pseudo-orthogonal carriers multi-access (CPOCMA) simulator

    Version: ''' + __version__ + '''
    Author: ''' + __author__ + '''
    Last Updated: ''' + __date__ + '''

    USAGE:
        Build a carrier configuration and push bits through a modem:

            from cpocma import CarrierConfig, ChannelSpec, simulate_frame

            cfg = CarrierConfig(f=1.0, num_subcarriers=2, sample_rate=16.0)
            decoded, errors = simulate_frame('cpocma', cfg, ChannelSpec(eb_n0_db=8), bits, seed=1)

        Import cpocma.Simulation to run whole experiments. It takes the
        sections of a JSON configuration file as keyword arguments
        (preset, system, carrier, channel, sweep, cdma, fdma, output,
        seed) and fills unset ones from `config`, from the file named by
        the CPOCMA_CONFIG environment variable, or from a named preset
        (single_carrier, multipath, awgn_pair, worked_example):

            sim = Simulation(preset='multipath', channel={'eb_n0_db': [0, 4, 8]})
            points = sim.run_ber(sys.stdout)

        Simulation.run_theory, run_agreement, run_spectrum,
        run_bandwidth_law, run_throughput and run_image cover the
        closed-form BER curve and its match with simulation, the occupied
        bandwidth, throughput per Hz and the image round trip.
        run_compare, run_compare_throughput and run_compare_image put
        CPOCMA, FDMA and CDMA side by side at one data rate and return
        pass / fail / indeterminate verdicts. Every CSV written starts
        with a "# cpocma <version>" line.

        The same runs are available from the command line:

            cpocma ber --preset multipath --eb-n0 0 4 8 -v

        Supported systems: cpocma, cdma (Walsh-Hadamard spreading),
        fdma (root-raised-cosine subbands), bpsk (single-user control).

    EXCEPTIONS:
        SimError(Exception):
            Base simulation exception. .parameter holds the message, .path
            the offending configuration key (e.g. carrier.sample_rate) and
            .inner_exception the lower-level error, if any.

        SimConfigError(SimError):
            A configuration value breaks an invariant. The command line
            exits with status 1.

        SimDimensionError(SimError):
            Array shapes or lengths do not line up. Exit status 1.

        SimNumericError(SimError):
            Non-finite samples, zero-energy waveforms or a degenerate
            decision scale. Exit status 2.
'''

from cpocma.core import *
