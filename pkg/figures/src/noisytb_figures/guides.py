"""Closed-form reference guides drawn on the figures.

Guides are never fitted: slopes and amplitudes come from the model's
closed forms (diffusion constant 4/gamma, jump width 4/gamma^2, the
subdiffusion exponent 1/2, and the reported width-scaling exponent
-1.76), anchored deterministically to the data where a closed-form
amplitude does not exist.
"""

from __future__ import annotations

import numpy as np

WIDTH_SCALING_EXPONENT = -1.76


def diffusion_guide(t: np.ndarray, gamma: float) -> np.ndarray:
    """M[<x^2>] guide with the closed-form slope 4/gamma."""
    return (4.0 / gamma) * t


def sqrt_time_guide(t: np.ndarray, anchor_t: float, anchor_y: float) -> np.ndarray:
    """Slope-1/2 line through (anchor_t, anchor_y) in log-log axes."""
    return anchor_y * np.sqrt(t / anchor_t)


def jump_width(gamma: float) -> float:
    """Time-averaged packet width of the jump process, 4/gamma^2."""
    return 4.0 / gamma ** 2


def jump_width_rescaled() -> float:
    """gamma^2 * (4/gamma^2): the jump width on rescaled collapse axes."""
    return 4.0


def width_scaling_guide(gammas: np.ndarray, anchor_gamma: float,
                        anchor_y: float) -> np.ndarray:
    """Power law gamma^-1.76 through (anchor_gamma, anchor_y)."""
    return anchor_y * (gammas / anchor_gamma) ** WIDTH_SCALING_EXPONENT


def inverse_square_guide(gammas: np.ndarray) -> np.ndarray:
    """The exact jump-width power law 4 * gamma^-2."""
    return 4.0 * gammas ** -2.0
