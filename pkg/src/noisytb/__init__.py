"""Stochastic unravellings and Lindblad dynamics of the noisy tight-binding chain."""

__version__ = "0.1.0"

from .core import (DensityMatrix, InitialState, ModelParams, NoiseStream,
                   WaveFunction, draw_complex_increments, draw_real_increments,
                   make_initial, stream_for_trajectory)
from .ensemble import (EquivalenceReport, GridSpec, RunSpec,
                       compare_unravellings, run_ensemble, run_trajectory)
from .observables import (EnsembleSummary, FitResult, TrajectoryRecord,
                          asymptotic_variance, coherence_time_estimate,
                          fit_diffusion, fit_power_law, measure)
from .unravellings import (JUMP, JUMP_EVENT_DRIVEN, QSD, QSD_WIDE_OPEN, WNP,
                           JumpLog, UnravellingKind, jump_event_driven,
                           jump_random_walk, jump_step, qsd_step,
                           qsd_wide_open_step, wnp_step)

__all__ = [
    "DensityMatrix", "InitialState", "ModelParams", "NoiseStream", "WaveFunction",
    "draw_complex_increments", "draw_real_increments", "make_initial",
    "stream_for_trajectory",
    "EquivalenceReport", "GridSpec", "RunSpec", "compare_unravellings",
    "run_ensemble", "run_trajectory",
    "EnsembleSummary", "FitResult", "TrajectoryRecord", "asymptotic_variance",
    "coherence_time_estimate", "fit_diffusion", "fit_power_law", "measure",
    "JUMP", "JUMP_EVENT_DRIVEN", "QSD", "QSD_WIDE_OPEN", "WNP",
    "JumpLog", "UnravellingKind", "jump_event_driven", "jump_random_walk",
    "jump_step", "qsd_step", "qsd_wide_open_step", "wnp_step",
    "__version__",
]
