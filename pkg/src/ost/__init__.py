"""Optimal spectral transportation: fast harmonic-invariant unmixing.

Decomposes magnitude spectra onto a dictionary of note fundamentals by
transporting each frame's mass to Dirac targets under a harmonic-invariant
cost, in closed form per frame, with entropic and group-sparse variants,
plus PLCA and exact-LP baselines and a transcription evaluation harness.
"""

from .errors import (OstError, DecodeError, UnsupportedEncodingError,
                     DataError, LpInfeasibleError, LpUnboundedError,
                     LpGuardError, NumericError)
from .frontend import (AudioBuffer, Spectrogram, NormalizedFrames,
                       decode_wav, stft_magnitude, normalize_frames)
from .dictionary import (Dictionary, HarmonicTemplateParams, midi_to_freq,
                         midi_range_fundamentals, harmonic_column,
                         make_harmonic_dictionary, make_dirac_dictionary)
from .costs import (CostMatrix, quadratic_cost, harmonic_cost,
                    append_noise_column)
from .solvers import (SolverConfig, TransportPlan, Activations, ost_frame,
                      ost_entropic_frame, ost_group_frame, ost_combined_frame,
                      unmix, transport_objective)
from .baselines import (LpProblem, PlcaState, kl_divergence, plca_unmix,
                        solve_lp, wasserstein_divergence, ot_unmix_lp)
from .evaluation import (FrameClock, NoteEvent, PianoRoll, EvalReport,
                         ToyScenario, parse_ground_truth, load_ground_truth,
                         events_to_roll, threshold_activations, f_measure,
                         l1_activation_error, make_toy_scenario)
from .synth import render_notes

__all__ = [
    "OstError", "DecodeError", "UnsupportedEncodingError", "DataError",
    "LpInfeasibleError", "LpUnboundedError", "LpGuardError", "NumericError",
    "AudioBuffer", "Spectrogram", "NormalizedFrames", "decode_wav",
    "stft_magnitude", "normalize_frames",
    "Dictionary", "HarmonicTemplateParams", "midi_to_freq",
    "midi_range_fundamentals", "harmonic_column", "make_harmonic_dictionary",
    "make_dirac_dictionary",
    "CostMatrix", "quadratic_cost", "harmonic_cost", "append_noise_column",
    "SolverConfig", "TransportPlan", "Activations", "ost_frame",
    "ost_entropic_frame", "ost_group_frame", "ost_combined_frame", "unmix",
    "transport_objective",
    "LpProblem", "PlcaState", "kl_divergence", "plca_unmix", "solve_lp",
    "wasserstein_divergence", "ot_unmix_lp",
    "FrameClock", "NoteEvent", "PianoRoll", "EvalReport", "ToyScenario",
    "parse_ground_truth", "load_ground_truth", "events_to_roll",
    "threshold_activations", "f_measure", "l1_activation_error",
    "make_toy_scenario",
    "render_notes",
]
