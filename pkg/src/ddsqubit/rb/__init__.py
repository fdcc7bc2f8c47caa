"""Randomized benchmarking, automated tune-up and parameter sweeps."""

from .campaign import (DEFAULT_LENGTHS, CorrectionError, RbConfig, RbResult, SequenceOutcome,
                       background_subtract_run, depolarizing_oracle_result, run_rb)
from .fit import N_G, DecayFit, FitError, epc_from_p, epg_from_p, fit_decay, p_from_epg
from .tuneup import (TuneUpError, TuneUpReport, TuneUpResult, guess_a_pi, pulse_angle_error,
                     pulse_rotation_angle, tune_up)
from .sweep import PARAMETERS, SweepError, SweepRow, SweepTable, device_for_fraction, sweep

__all__ = ["DEFAULT_LENGTHS", "CorrectionError", "RbConfig", "RbResult", "SequenceOutcome",
           "background_subtract_run", "depolarizing_oracle_result", "run_rb",
           "N_G", "DecayFit", "FitError", "epc_from_p", "epg_from_p", "fit_decay", "p_from_epg",
           "TuneUpError", "TuneUpReport", "TuneUpResult", "guess_a_pi", "pulse_angle_error",
           "pulse_rotation_angle", "tune_up",
           "PARAMETERS", "SweepError", "SweepRow", "SweepTable", "device_for_fraction", "sweep"]
