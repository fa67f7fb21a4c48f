"""Per-trajectory and ensemble observables, and the standard curve fits.

A trajectory is summarized by four series on the output time grid: the
position expectation <x>, its second moment <x^2>, the packet variance
sigma^2 = <x^2> - <x>^2 (held to that identity by construction), and the
participation number P = 1 / sum |c_n|^4.  Ensembles carry the means
M[<x^2>], M[<x>^2], M[sigma^2], M[P] with standard errors.

Fits: a linear-through-origin fit extracts diffusion constants from
M[<x^2>]; a log-log linear regression extracts power laws; the
asymptotic packet width is the time average of M[sigma^2] over
gamma*t >= 40.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import WaveFunction
from .errors import FitError

#: Dimensionless time (in units of 1/gamma) where diffusion fits may start.
DIFFUSION_WINDOW_MIN_GT = 10.0

#: Start of the asymptotic-width averaging window, in units of 1/gamma.
ASYMPTOTIC_MIN_GT = 40.0


class FitQualityWarning(UserWarning):
    pass


def measure(psi: WaveFunction):
    """Return (<x>, <x^2>, sigma^2, P) for a normalized state."""
    w = psi.weights()
    x = psi.coords()
    mean_x = float(np.dot(w, x))
    mean_x2 = float(np.dot(w, x * x))
    var = mean_x2 - mean_x * mean_x
    pn = 1.0 / float(np.sum(w * w))
    return mean_x, mean_x2, var, pn


@dataclass
class TrajectoryRecord:
    """Observable series of one trajectory on the output grid."""

    grid: np.ndarray
    mean_x: np.ndarray
    mean_x2: np.ndarray
    var_x: np.ndarray
    pn: np.ndarray

    @classmethod
    def empty(cls, grid: np.ndarray) -> "TrajectoryRecord":
        n = len(grid)
        return cls(np.asarray(grid, dtype=np.float64), np.empty(n), np.empty(n),
                   np.empty(n), np.empty(n))

    def record(self, i: int, psi: WaveFunction) -> None:
        mx, mx2, var, pn = measure(psi)
        self.mean_x[i] = mx
        self.mean_x2[i] = mx2
        self.var_x[i] = var
        self.pn[i] = pn


@dataclass
class EnsembleSummary:
    """Ensemble means with standard errors on the output grid.

    ``mean_x_sq`` is M[<x>^2], the mean of the squared per-trajectory
    centre of mass, distinct from M[<x^2>] (``mean_x2``).
    """

    grid: np.ndarray
    mean_x2: np.ndarray
    stderr_mean_x2: np.ndarray
    mean_x_sq: np.ndarray
    stderr_mean_x_sq: np.ndarray
    mean_var: np.ndarray
    stderr_mean_var: np.ndarray
    mean_pn: np.ndarray
    stderr_mean_pn: np.ndarray
    n_trajectories: int
    meta: dict = field(default_factory=dict)

    _columns = ("mean_x2", "mean_x_sq", "mean_var", "mean_pn")

    def column(self, name: str) -> np.ndarray:
        if name not in self._columns:
            raise KeyError(f"unknown column {name!r}; choose from {self._columns}")
        return getattr(self, name)

    def stderr(self, name: str) -> np.ndarray:
        return getattr(self, "stderr_" + name)


@dataclass(frozen=True)
class FitResult:
    """Fitted model parameters with standard errors and the window used."""

    model: str
    parameters: dict
    window: tuple
    residual_norm: float
    stderr: dict


def _window_mask(t: np.ndarray, window) -> np.ndarray:
    lo, hi = window
    return (t >= lo) & (t <= hi)


def fit_diffusion(summary: EnsembleSummary, window, gamma: float | None = None,
                  intercept: bool = True) -> FitResult:
    """Least-squares slope of M[<x^2>] minus its initial value against t.

    The fit is restricted to gamma*t >= 10 where the growth is linear;
    the initial value is subtracted so a finite starting width does not
    bias the slope.  By default a free intercept is kept as a nuisance
    parameter: it absorbs the exact ballistic-transient offset -4/gamma^2
    of the transport curve and, more importantly, the ensemble's random
    constant offset (the per-trajectory chi^2 scatter of <x^2> is almost
    fully time-correlated, so forcing the line through the origin leaks
    that offset into the slope).  ``intercept=False`` gives the plain
    through-origin estimator.
    """
    if gamma is None:
        gamma = summary.meta.get("gamma")
    if gamma is not None and gamma > 0 and window[0] * gamma < DIFFUSION_WINDOW_MIN_GT - 1e-9:
        raise FitError(
            f"diffusion window must start at gamma*t >= {DIFFUSION_WINDOW_MIN_GT}; "
            f"window starts at gamma*t = {window[0] * gamma:.3g}"
        )
    t = summary.grid
    mask = _window_mask(t, window)
    if np.count_nonzero(mask) < 5:
        raise FitError(f"diffusion fit needs >= 5 points in window, got {np.count_nonzero(mask)}")
    y = summary.mean_x2 - summary.mean_x2[0]
    tw, yw = t[mask], y[mask]
    n = tw.size
    if intercept:
        res = stats.linregress(tw, yw)
        slope = float(res.slope)
        resid = yw - (res.intercept + slope * tw)
        return FitResult(
            model="linear",
            parameters={"slope": slope, "intercept": float(res.intercept)},
            window=(float(window[0]), float(window[1])),
            residual_norm=float(np.sqrt(np.dot(resid, resid))),
            stderr={"slope": float(res.stderr)},
        )
    denom = float(np.dot(tw, tw))
    slope = float(np.dot(tw, yw)) / denom
    resid = yw - slope * tw
    slope_se = float(np.sqrt(np.dot(resid, resid) / (n - 1) / denom))
    return FitResult(
        model="linear_through_origin",
        parameters={"slope": slope},
        window=(float(window[0]), float(window[1])),
        residual_norm=float(np.sqrt(np.dot(resid, resid))),
        stderr={"slope": slope_se},
    )


def fit_power_law(x: np.ndarray, y: np.ndarray, window=None) -> FitResult:
    """Linear regression in log-log coordinates: y = amplitude * x^exponent."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if window is not None:
        mask = _window_mask(x, window)
        x, y = x[mask], y[mask]
    else:
        window = (float(np.min(x)), float(np.max(x))) if x.size else (0.0, 0.0)
    if x.size < 2:
        raise FitError(f"power-law fit needs >= 2 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit requires strictly positive data")
    res = stats.linregress(np.log(x), np.log(y))
    resid = np.log(y) - (res.intercept + res.slope * np.log(x))
    return FitResult(
        model="power_law",
        parameters={"exponent": float(res.slope), "amplitude": float(np.exp(res.intercept))},
        window=(float(window[0]), float(window[1])),
        residual_norm=float(np.sqrt(np.dot(resid, resid))),
        stderr={"exponent": float(res.stderr if res.stderr is not None else np.nan)},
    )


def asymptotic_variance(summary: EnsembleSummary, gamma: float | None = None) -> float:
    """Time average of M[sigma^2] over the grid points with gamma*t >= 40."""
    if gamma is None:
        gamma = summary.meta.get("gamma")
    if gamma is None or gamma <= 0:
        raise FitError("asymptotic variance requires gamma > 0")
    t = summary.grid
    if t[-1] * gamma < ASYMPTOTIC_MIN_GT:
        raise FitError(
            f"series ends at gamma*t = {t[-1] * gamma:.3g} < {ASYMPTOTIC_MIN_GT}; "
            "run longer to measure the asymptotic variance"
        )
    mask = t * gamma >= ASYMPTOTIC_MIN_GT
    return float(np.mean(summary.mean_var[mask]))


def coherence_time_estimate(times: np.ndarray, offdiag_norms: np.ndarray,
                            residual_threshold: float = 0.05) -> float:
    """Decay time of an off-diagonal mode from an exponential fit.

    Fits log |rho_offdiag| linearly in t and returns -1/rate.  Emits a
    ``FitQualityWarning`` when the log-residuals exceed the threshold
    (non-exponential decay).
    """
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(offdiag_norms, dtype=np.float64)
    if t.size < 3:
        raise FitError("coherence-time fit needs >= 3 points")
    if np.any(y <= 0):
        raise FitError("off-diagonal norms must be positive for an exponential fit")
    res = stats.linregress(t, np.log(y))
    if res.slope >= 0:
        raise FitError(f"off-diagonal norm does not decay (rate {res.slope:.3g})")
    resid = np.max(np.abs(np.log(y) - (res.intercept + res.slope * t)))
    if resid > residual_threshold:
        warnings.warn(
            f"decay is not cleanly exponential (max log residual {resid:.3g})",
            FitQualityWarning,
        )
    return float(-1.0 / res.slope)
