"""Direct-digital-synthesis qubit control chain simulator.

Modules:
    pulse: analytic Gaussian/DRAG envelopes and the primitive gate set.
    dds: DAC sampling, carrier modulation, quantization, droop, demodulation.
    clifford: the single-qubit Clifford group and RB sequences.
    device: three-level transmon dynamics with T1/T2 and readout models.
    rb: randomized benchmarking campaigns, tune-up and parameter sweeps.
    noise: phase-noise spectra to dephasing PSD and filter-function infidelity.
    cli: the ``ddsqubit`` command line tool.
"""

__version__ = "0.1.0"
