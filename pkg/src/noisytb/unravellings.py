"""Single-trajectory steppers for the three unravellings.

The white-noise-potential (WNP) unravelling multiplies each amplitude by
random phases; the quantum-state-diffusion (QSD) unravelling adds the
nonlinear drift and global noise coupling that drive localization; the
jump unravelling mixes free evolution with Poissonian collapses onto
lattice sites.  All three reproduce the same master equation on ensemble
average and are stepped with the Euler-Maruyama scheme at fixed dt,
renormalizing explicitly after every step (the removed drift is of
higher order in dt).

The jump unravelling also ships in an event-driven form: waiting times
are exponential with mean 1/gamma and the state between collapses is the
analytic free propagator, so there is no integration error at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import ModelParams, NoiseStream, WaveFunction
from .errors import ConfigurationError, NumericalInstabilityError
from .hamiltonian import free_evolve, free_evolve_periodic, propagator_column

_TAGS = ("wnp", "qsd", "qsd_wide_open", "jump", "jump_event_driven")

#: gamma*dt ceiling for the time-stepped jump rule.
MAX_JUMP_PROBABILITY = 0.01


@dataclass(frozen=True)
class UnravellingKind:
    """Which stochastic process to run, plus the QSD noise variant."""

    tag: str
    noise_variant: str = "complex"

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ConfigurationError(f"unknown unravelling {self.tag!r}; choose from {_TAGS}")
        if self.noise_variant not in ("complex", "real"):
            raise ConfigurationError(f"noise_variant must be complex or real, got {self.noise_variant!r}")
        if self.noise_variant == "real" and self.tag not in ("qsd", "qsd_wide_open"):
            raise ConfigurationError("real noise variant applies to qsd unravellings only")

    @property
    def includes_kinetic(self) -> bool:
        """The wide-open variant drops the Hamiltonian term entirely."""
        return self.tag != "qsd_wide_open"

    @property
    def stream_kind(self) -> str:
        if self.tag in ("qsd", "qsd_wide_open") and self.noise_variant == "complex":
            return "complex_wiener"
        return "real_wiener"


WNP = UnravellingKind("wnp")
QSD = UnravellingKind("qsd")
QSD_REAL = UnravellingKind("qsd", noise_variant="real")
QSD_WIDE_OPEN = UnravellingKind("qsd_wide_open")
JUMP = UnravellingKind("jump")
JUMP_EVENT_DRIVEN = UnravellingKind("jump_event_driven")


@dataclass
class JumpLog:
    """Collapse record: jump times and collapse sites (lattice coordinates)."""

    times: list = field(default_factory=list)
    sites: list = field(default_factory=list)

    def append(self, t: float, site: int) -> None:
        self.times.append(float(t))
        self.sites.append(int(site))

    def waiting_times(self, t_start: float = 0.0) -> np.ndarray:
        """Intervals between consecutive collapses (first measured from t_start)."""
        t = np.asarray(self.times)
        return np.diff(np.concatenate(([t_start], t)))

    def __len__(self) -> int:
        return len(self.times)


def _raise_instability(prenorm: float, step: int, dt: float):
    raise NumericalInstabilityError(
        f"pre-renormalization norm {prenorm:.4f} deviated from 1 by more than "
        f"{kernels.NORM_GUARD} at step {step}; reduce dt (currently {dt})"
    )


def _run_kernel(psi, params, stream, n_steps, kind, include_kinetic=None,
                windowed=False, window=None, tmp=None):
    """Advance ``psi`` in place by ``n_steps``; return the active window.

    The pre-renormalization norm of the last step is stashed on the
    wave function as ``last_prenorm`` (diagnostic for drift checks).
    """
    c = psi.amps
    if tmp is None:
        tmp = np.empty_like(c)
    if window is None:
        lo, hi = kernels.support_window(c)
    else:
        lo, hi = window
    if include_kinetic is None:
        include_kinetic = kind.includes_kinetic
    if windowed and params.periodic:
        raise ConfigurationError("windowed stepping is not defined on periodic lattices")
    gen = stream.generator
    if kind.tag == "wnp":
        status, step, lo, hi, prenorm = kernels.wnp_kernel(
            c, tmp, gen, n_steps, params.gamma, params.dt, params.periodic,
            include_kinetic, windowed, lo, hi)
    else:
        status, step, lo, hi, prenorm = kernels.qsd_kernel(
            c, tmp, gen, n_steps, params.gamma, params.dt, params.periodic,
            include_kinetic, kind.noise_variant == "real", windowed, lo, hi)
    if status == 1:
        _raise_instability(prenorm, step, params.dt)
    psi.last_prenorm = prenorm
    return lo, hi


def wnp_step(psi: WaveFunction, params: ModelParams, stream: NoiseStream,
             include_kinetic: bool = True) -> WaveFunction:
    """One Euler-Maruyama step of the white-noise-potential unravelling."""
    out = psi.copy()
    _run_kernel(out, params, stream, 1, WNP, include_kinetic=include_kinetic)
    return out


def qsd_step(psi: WaveFunction, params: ModelParams, stream: NoiseStream,
             variant: str = "complex", include_kinetic: bool = True) -> WaveFunction:
    """One Euler-Maruyama step of the quantum-state-diffusion unravelling."""
    kind = UnravellingKind("qsd", noise_variant=variant)
    out = psi.copy()
    _run_kernel(out, params, stream, 1, kind, include_kinetic=include_kinetic)
    return out


def qsd_wide_open_step(psi: WaveFunction, params: ModelParams, stream: NoiseStream,
                       variant: str = "complex") -> WaveFunction:
    """One QSD step with the kinetic term dropped (wide-open limit)."""
    kind = UnravellingKind("qsd_wide_open", noise_variant=variant)
    out = psi.copy()
    _run_kernel(out, params, stream, 1, kind, include_kinetic=False)
    return out


def jump_step(psi: WaveFunction, params: ModelParams, stream: NoiseStream,
              log: JumpLog | None = None, step_index: int = 0) -> WaveFunction:
    """One step of the time-stepped jump rule.

    With probability gamma*dt the state collapses to |n> sampled from
    |c_n|^2 (inverse CDF, single uniform draw); otherwise one normalized
    free Euler step is taken.  Requires gamma*dt <= 0.01.
    """
    if params.gamma * params.dt > MAX_JUMP_PROBABILITY:
        raise ConfigurationError(
            f"jump unravelling requires gamma*dt <= {MAX_JUMP_PROBABILITY}, "
            f"got {params.gamma * params.dt:.3g}"
        )
    out = psi.copy()
    jump_steps = np.empty(4, dtype=np.int64)
    jump_sites = np.empty(4, dtype=np.int64)
    status, _, n_jumps, _ = kernels.jump_kernel(
        out.amps, np.empty_like(out.amps), stream.generator, 1, step_index,
        params.gamma, params.dt, params.periodic, jump_steps, jump_sites, 0)
    if log is not None and n_jumps:
        log.append((jump_steps[0] + 1) * params.dt,
                   jump_sites[0] + out.origin_offset)
    return out


def sample_collapse_site(psi: WaveFunction, stream: NoiseStream) -> int:
    """Collapse site (lattice coordinate) sampled from |c_n|^2 by inverse CDF."""
    u = stream.uniform()
    cdf = np.cumsum(psi.weights())
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    idx = min(idx, psi.n_sites - 1)
    return idx + psi.origin_offset


def _delta_state(template: WaveFunction, coord: int) -> WaveFunction:
    amps = np.zeros_like(template.amps)
    amps[coord - template.origin_offset] = 1.0
    return WaveFunction(amps, template.origin_offset)


def _free(psi: WaveFunction, t: float, periodic: bool) -> WaveFunction:
    if t == 0.0:
        return psi.copy()
    return free_evolve_periodic(psi, t) if periodic else free_evolve(psi, t)


def jump_event_driven(psi: WaveFunction, params: ModelParams, stream: NoiseStream,
                      grid_times: np.ndarray):
    """Event-driven jump trajectory recorded on ``grid_times``.

    Samples exponential waiting times with mean 1/gamma, applies the
    analytic free propagator between collapses, and collapses to a site
    sampled from |c_n|^2.  Returns (TrajectoryRecord, JumpLog).
    """
    from .observables import TrajectoryRecord  # local import avoids a cycle

    if params.gamma <= 0:
        raise ConfigurationError("event-driven jump unravelling requires gamma > 0")
    grid_times = np.asarray(grid_times, dtype=np.float64)
    log = JumpLog()
    record = TrajectoryRecord.empty(grid_times)
    anchor = psi.copy()
    t_anchor = 0.0
    t_max = float(grid_times[-1])
    gi = 0
    t_jump = stream.waiting_time(params.gamma)
    while gi < grid_times.size:
        if grid_times[gi] < t_jump or t_jump > t_max:
            record.record(gi, _free(anchor, grid_times[gi] - t_anchor, params.periodic))
            gi += 1
            continue
        at_jump = _free(anchor, t_jump - t_anchor, params.periodic)
        site = sample_collapse_site(at_jump, stream)
        log.append(t_jump, site)
        anchor = _delta_state(anchor, site)
        t_anchor = t_jump
        t_jump = t_jump + stream.waiting_time(params.gamma)
    return record, log


def jump_random_walk(gamma: float, n_jumps: int, stream: NoiseStream):
    """Waiting times and jump displacements of the collapse random walk.

    Starting from a freshly collapsed site, the displacement of the next
    collapse is distributed as |g_k(tau)|^2 with tau exponential of mean
    1/gamma; this is the translation-invariant reduction of the
    event-driven process, useful for jump statistics on an unbounded
    lattice.  Returns (taus, displacements).
    """
    if gamma <= 0:
        raise ConfigurationError("jump statistics require gamma > 0")
    taus = np.empty(n_jumps)
    disps = np.empty(n_jumps, dtype=np.int64)
    for k in range(n_jumps):
        tau = stream.waiting_time(gamma)
        col = propagator_column(tau)
        w = np.abs(col.g) ** 2
        cdf = np.cumsum(w)
        u = stream.uniform() * cdf[-1]
        idx = min(int(np.searchsorted(cdf, u, side="right")), w.size - 1)
        taus[k] = tau
        disps[k] = idx - col.radius
    return taus, disps


def time_averaged_variance(taus: np.ndarray) -> float:
    """Exact time average of the packet variance along a jump trajectory.

    Between collapses the variance grows from 0 as 2 t^2, so the time
    average over the whole trajectory is (2/3) sum tau^3 / sum tau.
    """
    taus = np.asarray(taus, dtype=np.float64)
    return float((2.0 / 3.0) * np.sum(taus ** 3) / np.sum(taus))
