"""Direct density-matrix integration of the master equation.

The ensemble of all unravellings obeys

    drho/dt = -i [H, rho] + gamma (diag[rho] - rho),

whose Lindblad operators are the projectors onto lattice sites.  This
module integrates that equation with a classical fourth-order
Runge-Kutta scheme on a dense matrix (small lattices only; the trajectory
methods cover large ones) and provides the strong-noise reductions: the
adiabatic estimate of the first off-diagonal and the classical diffusion
equation obeyed by the site weights when gamma is large.

The integrator symmetrizes and renormalizes the trace after every step;
both corrections are monitored and must stay below 1e-9 per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DensityMatrix, ModelParams
from .errors import ConfigurationError, NumericalInstabilityError
from .hamiltonian import kinetic_matrix

#: Dense integration is restricted to small lattices.
MAX_DENSE_SITES = 256

#: Default master-equation step (deterministic scheme, larger than the SDE dt).
DEFAULT_DT = 1e-3

#: Per-step ceiling for the symmetrize/renormalize corrections.
CORRECTION_GUARD = 1e-9


@dataclass
class LindbladState:
    """Density matrix plus elapsed time."""

    rho: DensityMatrix
    t: float = 0.0


@dataclass
class LindbladRun:
    """Checkpointed integration output with bookkeeping diagnostics."""

    times: np.ndarray
    states: list
    max_correction: float = 0.0
    min_eigenvalue: float = np.inf

    def first_offdiagonal_max(self) -> np.ndarray:
        """max_n |rho_{n+1,n}| at each checkpoint."""
        return np.array([
            np.max(np.abs(np.diagonal(s.rho.rho, offset=-1))) for s in self.states
        ])


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, gamma: float) -> np.ndarray:
    """-i[H, rho] + gamma (diag[rho] - rho)."""
    comm = h @ rho - rho @ h
    out = -1j * comm - gamma * rho
    idx = np.arange(rho.shape[0])
    out[idx, idx] += gamma * rho.diagonal()
    return out


def _rk4(rho: np.ndarray, h: np.ndarray, gamma: float, dt: float) -> np.ndarray:
    k1 = lindblad_rhs(rho, h, gamma)
    k2 = lindblad_rhs(rho + 0.5 * dt * k1, h, gamma)
    k3 = lindblad_rhs(rho + 0.5 * dt * k2, h, gamma)
    k4 = lindblad_rhs(rho + dt * k3, h, gamma)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lindblad_step(state: LindbladState, params: ModelParams,
                  dt: float = DEFAULT_DT) -> LindbladState:
    """One RK4 step followed by symmetrization and trace renormalization."""
    h = kinetic_matrix(state.rho.n_sites, params.periodic)
    rho, corr = _step_raw(state.rho.rho, h, params.gamma, dt)
    if corr > CORRECTION_GUARD:
        raise NumericalInstabilityError(
            f"structure-restoring correction {corr:.2e} exceeded {CORRECTION_GUARD} "
            f"in one step; reduce dt (currently {dt})"
        )
    return LindbladState(DensityMatrix(rho), state.t + dt)


def _step_raw(rho: np.ndarray, h: np.ndarray, gamma: float, dt: float):
    stepped = _rk4(rho, h, gamma, dt)
    sym = 0.5 * (stepped + stepped.conj().T)
    tr = np.trace(sym).real
    out = sym / tr
    corr = max(float(np.max(np.abs(sym - stepped))), abs(tr - 1.0))
    return out, corr


def integrate(rho0: DensityMatrix, params: ModelParams, t_checkpoints,
              dt: float = DEFAULT_DT, check_positivity: bool | None = None) -> LindbladRun:
    """Integrate from ``rho0`` and record the state at each checkpoint.

    Checkpoints are landed on exactly by shortening the final sub-step.
    Positivity (smallest eigenvalue >= -1e-8) is verified at every
    checkpoint by default for N <= 64.
    """
    n = rho0.n_sites
    if n > MAX_DENSE_SITES:
        raise ConfigurationError(
            f"dense master-equation integration is limited to N <= {MAX_DENSE_SITES}"
        )
    if check_positivity is None:
        check_positivity = n <= 64
    h = kinetic_matrix(n, params.periodic)
    times = np.asarray(t_checkpoints, dtype=np.float64)
    if times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ConfigurationError("checkpoints must be a strictly increasing sequence >= 0")
    rho = rho0.rho.copy()
    run = LindbladRun(times=times, states=[])
    t_prev = 0.0
    if times[0] == 0.0:
        run.states.append(LindbladState(DensityMatrix(rho.copy()), 0.0))
    for t_target in times[times > 0]:
        span = t_target - t_prev
        n_sub = max(1, int(np.ceil(span / dt - 1e-12)))
        h_sub = span / n_sub
        for _ in range(n_sub):
            rho, corr = _step_raw(rho, h, params.gamma, h_sub)
            run.max_correction = max(run.max_correction, corr)
            if corr > CORRECTION_GUARD:
                raise NumericalInstabilityError(
                    f"structure-restoring correction {corr:.2e} exceeded "
                    f"{CORRECTION_GUARD} at t={t_prev:.4f}; reduce dt"
                )
        t_prev = t_target
        if check_positivity:
            lowest = float(np.linalg.eigvalsh(rho)[0])
            run.min_eigenvalue = min(run.min_eigenvalue, lowest)
            if lowest < -1e-8:
                raise NumericalInstabilityError(
                    f"positivity violated at t={t_target:.4f}: "
                    f"smallest eigenvalue {lowest:.2e}"
                )
        run.states.append(LindbladState(DensityMatrix(rho.copy()), float(t_target)))
    return run


def offdiagonal_profile(state: LindbladState) -> np.ndarray:
    """Profile over k of max_n |rho_{n+k,n}| normalized by the diagonal maximum.

    Verifies the strong-noise hierarchy in which the kth off-diagonal is
    suppressed by gamma^-k relative to the diagonal.
    """
    rho = state.rho.rho
    n = rho.shape[0]
    diag_max = float(np.max(np.abs(rho.diagonal())))
    return np.array([
        float(np.max(np.abs(np.diagonal(rho, offset=-k)))) / diag_max
        for k in range(n)
    ])


def adiabatic_offdiagonals(weights: np.ndarray, gamma: float) -> np.ndarray:
    """First off-diagonal estimate (i/gamma)(rho_{n,n} - rho_{n+1,n+1}) per bond.

    Valid in the strong-noise regime where the off-diagonals slave to the
    instantaneous weights.
    """
    p = np.asarray(weights, dtype=np.float64)
    return (1j / gamma) * (p[:-1] - p[1:])


def reduced_diffusion_step(weights: np.ndarray, gamma: float, dt: float,
                           periodic: bool = True) -> np.ndarray:
    """One explicit step of dp_n/dt = (2/gamma)(p_{n+1} + p_{n-1} - 2 p_n).

    This is the classical master equation obeyed by the site weights at
    strong noise; it conserves sum(p) exactly.  The explicit scheme needs
    dt * (4/gamma) <= 0.5.
    """
    if dt * 4.0 / gamma > 0.5:
        raise ConfigurationError(
            f"explicit diffusion step unstable: dt*4/gamma = {dt * 4.0 / gamma:.3g} > 0.5"
        )
    p = np.asarray(weights, dtype=np.float64)
    if periodic:
        lap = np.roll(p, -1) + np.roll(p, 1) - 2.0 * p
    else:
        lap = np.zeros_like(p)
        lap[:-1] += p[1:]
        lap[1:] += p[:-1]
        lap[:-1] -= p[:-1]  # open chain: only existing bonds carry flux
        lap[1:] -= p[1:]
    return p + dt * (2.0 / gamma) * lap


def uniform_diagonal(n_sites: int) -> DensityMatrix:
    """The stationary state: rho = I/N."""
    return DensityMatrix(np.eye(n_sites, dtype=np.complex128) / n_sites)


def translation_invariant_mode(n_sites: int, k: int = 1,
                               amplitude: float = 0.01) -> DensityMatrix:
    """Stationary state plus a traceless translation-invariant off-diagonal mode.

    On a periodic lattice such modes are eigenmodes of the master equation
    with eigenvalue -gamma (the commutator with H vanishes for circulant
    matrices), so the perturbation decays as exp(-gamma t).
    """
    rho = np.eye(n_sites, dtype=np.complex128) / n_sites
    idx = np.arange(n_sites)
    rho[idx, (idx + k) % n_sites] += amplitude / n_sites
    rho[(idx + k) % n_sites, idx] += amplitude / n_sites
    return DensityMatrix(rho)
