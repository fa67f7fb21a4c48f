"""Ensemble orchestration: seeding, execution, aggregation, equivalence checks.

Work is split into fixed-size blocks of whole trajectories.  Each block
accumulates its trajectories' observables sequentially in index order,
and block partials are merged in block order afterwards, so the result
is bit-identical no matter how many workers execute the blocks.  Each
trajectory draws from its own stream derived from (base seed, index).

``compare_unravellings`` is the package's equivalence harness: the
ensemble-averaged projector M[|psi><psi|] of each unravelling is tested
elementwise against direct master-equation integration through
multiple-comparison-corrected z-scores.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm as _normal

from . import kernels, lindblad
from .core import (DensityMatrix, InitialState, ModelParams, make_initial,
                   stream_for_trajectory)
from .errors import ConfigurationError, EquivalenceFailure, NoisyTBError, TrajectoryAbort
from .observables import EnsembleSummary, TrajectoryRecord
from .unravellings import UnravellingKind, jump_event_driven, _run_kernel
from .unravellings import MAX_JUMP_PROBABILITY

#: Trajectories per work unit; fixed so aggregation order never depends on
#: the worker count.
BLOCK_SIZE = 32

#: Environment variable overriding the worker count.
WORKERS_ENV = "NOISYTB_WORKERS"

#: Open lattices larger than this run with windowed kernels by default.
WINDOW_MIN_SITES = 128

#: Rough per-run memory ceiling for the pre-launch check.
MEMORY_BUDGET_BYTES = 1 << 30

#: Scale of the deterministic discrepancy between the Euler-Maruyama
#: trajectories and the RK4 master-equation oracle, per unit dt and time;
#: enters the z-score denominator so exact (zero-scatter) comparisons are
#: judged at integration tolerance rather than machine precision.
EULER_BIAS_SCALE = 10.0


@dataclass(frozen=True)
class GridSpec:
    """Output time grid: t = 0 plus a log- or linearly-spaced set of times.

    Log grids use a fixed number of points per decade so log-log fits are
    well conditioned; times are snapped to integer multiples of dt for the
    time-stepped unravellings.
    """

    kind: str = "log"
    t_min: float | None = None
    points_per_decade: int = 40
    n_points: int = 200

    def __post_init__(self):
        if self.kind not in ("log", "linear"):
            raise ConfigurationError(f"grid kind must be log or linear, got {self.kind!r}")
        if self.points_per_decade < 1 or self.n_points < 1:
            raise ConfigurationError("grid must have at least one point")

    def times(self, params: ModelParams) -> np.ndarray:
        t_max = params.t_max
        if self.kind == "linear":
            return np.linspace(0.0, t_max, self.n_points + 1)
        t_min = self.t_min
        if t_min is None:
            t_min = 0.1 / params.gamma if params.gamma > 0 else t_max / 100.0
        t_min = min(max(t_min, params.dt), t_max)
        n_dec = math.log10(t_max / t_min)
        n_pts = max(2, int(round(self.points_per_decade * n_dec)) + 1)
        return np.concatenate(([0.0], np.geomspace(t_min, t_max, n_pts)))

    def step_indices(self, params: ModelParams) -> np.ndarray:
        """Grid as unique, increasing step counts (t = index * dt)."""
        idx = np.unique(np.round(self.times(params) / params.dt).astype(np.int64))
        return idx[idx >= 0]


@dataclass(frozen=True)
class RunSpec:
    """Complete, reproducible description of one ensemble run."""

    params: ModelParams
    unravelling: UnravellingKind
    initial: InitialState
    n_trajectories: int
    grid: GridSpec = field(default_factory=GridSpec)
    windowed: bool | None = None  # None = auto (open lattice, N > 128)
    keep_records: bool = False

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigurationError("n_trajectories must be >= 1")
        if self.unravelling.tag == "jump_event_driven" and self.params.gamma <= 0:
            raise ConfigurationError("event-driven jump unravelling requires gamma > 0")
        if self.unravelling.tag == "jump":
            if self.params.gamma * self.params.dt > MAX_JUMP_PROBABILITY:
                raise ConfigurationError(
                    f"jump unravelling requires gamma*dt <= {MAX_JUMP_PROBABILITY}"
                )

    @property
    def use_window(self) -> bool:
        if self.windowed is not None:
            return self.windowed and not self.params.periodic
        return (not self.params.periodic
                and self.params.n_sites > WINDOW_MIN_SITES
                and self.unravelling.tag in ("wnp", "qsd", "qsd_wide_open"))


def resolve_workers(n_workers: int | None = None) -> int:
    if n_workers is not None:
        return max(1, n_workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigurationError(f"{WORKERS_ENV}={env!r} is not an integer") from exc
    return os.cpu_count() or 1


def _check_memory(spec: RunSpec, n_workers: int) -> None:
    # complex state + temp buffer per in-flight trajectory, plus the grid
    per_worker = spec.params.n_sites * 16 * 4 + len(spec.grid.times(spec.params)) * 8 * 8
    if per_worker * n_workers > MEMORY_BUDGET_BYTES:
        raise ConfigurationError(
            f"run would need ~{per_worker * n_workers / 2**20:.0f} MiB "
            f"(> {MEMORY_BUDGET_BYTES / 2**20:.0f} MiB budget); reduce sites or workers"
        )


def _stepped_trajectory(spec: RunSpec, index: int, record: TrajectoryRecord) -> None:
    """Run one WNP/QSD/jump trajectory, recording at the grid indices."""
    params = spec.params
    kind = spec.unravelling
    stream = stream_for_trajectory(params.seed, index, kind.stream_kind)
    psi = make_initial(params, spec.initial)
    tmp = np.empty_like(psi.amps)
    steps = spec.grid.step_indices(params)
    window = kernels.support_window(psi.amps)
    use_window = spec.use_window
    if kind.tag == "jump":
        cap = max(256, int(params.gamma * params.t_max * 10))
        jump_steps = np.empty(cap, dtype=np.int64)
        jump_sites = np.empty(cap, dtype=np.int64)
        n_jumps = 0
    pos = 0
    if steps[0] == 0:
        record.record(0, psi)
        pos = 1
    prev = 0
    for i in range(pos, steps.size):
        n_steps = int(steps[i] - prev)
        if kind.tag == "jump":
            status, step, n_jumps, _ = kernels.jump_kernel(
                psi.amps, tmp, stream.generator, n_steps, prev, params.gamma,
                params.dt, params.periodic, jump_steps, jump_sites, n_jumps)
            if status == 2:
                raise TrajectoryAbort("jump log capacity exceeded", index,
                                      params.seed, step=prev + step)
        else:
            window = _run_kernel(psi, params, stream, n_steps, kind,
                                 windowed=use_window, window=window, tmp=tmp)
        prev = int(steps[i])
        record.record(i, psi)


def _event_trajectory(spec: RunSpec, index: int, record: TrajectoryRecord) -> None:
    params = spec.params
    stream = stream_for_trajectory(params.seed, index, "real_wiener")
    psi = make_initial(params, spec.initial)
    rec, _ = jump_event_driven(psi, params, stream, record.grid)
    record.mean_x[:] = rec.mean_x
    record.mean_x2[:] = rec.mean_x2
    record.var_x[:] = rec.var_x
    record.pn[:] = rec.pn


def run_trajectory(spec: RunSpec, index: int) -> TrajectoryRecord:
    """Run trajectory ``index`` of ``spec`` in isolation (replay entry point)."""
    params = spec.params
    if spec.unravelling.tag == "jump_event_driven":
        grid = spec.grid.times(params)
    else:
        grid = spec.grid.step_indices(params) * params.dt
    record = TrajectoryRecord.empty(grid)
    try:
        if spec.unravelling.tag == "jump_event_driven":
            _event_trajectory(spec, index, record)
        else:
            _stepped_trajectory(spec, index, record)
    except TrajectoryAbort:
        raise
    except NoisyTBError as exc:
        raise TrajectoryAbort(str(exc), index, params.seed, cause=exc) from exc
    return record


@dataclass
class _BlockPartial:
    count: int
    sums: np.ndarray     # (4, T): x2, x_sq, var, pn
    sumsq: np.ndarray    # (4, T)
    records: list


def _run_block(spec: RunSpec, start: int, stop: int, n_times: int) -> _BlockPartial:
    sums = np.zeros((4, n_times))
    sumsq = np.zeros((4, n_times))
    records = []
    for k in range(start, stop):
        rec = run_trajectory(spec, k)
        series = np.vstack((rec.mean_x2, rec.mean_x ** 2, rec.var_x, rec.pn))
        sums += series
        sumsq += series ** 2
        if spec.keep_records:
            records.append(rec)
    return _BlockPartial(stop - start, sums, sumsq, records)


def _merge_blocks(partials, grid, spec) -> tuple[EnsembleSummary, list]:
    total = np.zeros_like(partials[0].sums)
    total_sq = np.zeros_like(partials[0].sumsq)
    count = 0
    records = []
    for p in partials:  # fixed block order: bit-identical for any worker count
        total += p.sums
        total_sq += p.sumsq
        count += p.count
        records.extend(p.records)
    means = total / count
    if count > 1:
        var = np.maximum(total_sq - total ** 2 / count, 0.0) / (count - 1)
        stderr = np.sqrt(var / count)
    else:
        stderr = np.zeros_like(means)
    meta = {
        "gamma": spec.params.gamma,
        "dt": spec.params.dt,
        "n_sites": spec.params.n_sites,
        "boundary": spec.params.boundary,
        "seed": spec.params.seed,
        "t_max": spec.params.t_max,
        "unravelling": spec.unravelling.tag,
        "noise": spec.unravelling.noise_variant,
        "initial": spec.initial.kind,
        "variance": spec.initial.variance,
        "center": spec.initial.center,
        "n_trajectories": spec.n_trajectories,
    }
    summary = EnsembleSummary(
        grid=grid,
        mean_x2=means[0], stderr_mean_x2=stderr[0],
        mean_x_sq=means[1], stderr_mean_x_sq=stderr[1],
        mean_var=means[2], stderr_mean_var=stderr[2],
        mean_pn=means[3], stderr_mean_pn=stderr[3],
        n_trajectories=count,
        meta=meta,
    )
    return summary, records


def run_ensemble(spec: RunSpec, n_workers: int | None = None):
    """Run the full ensemble and aggregate it into an ``EnsembleSummary``.

    The result is a deterministic function of (seed, spec) alone; the
    worker count only changes wall time.  Returns the summary, or
    (summary, records) when ``spec.keep_records`` is set.  Any trajectory
    failure aborts the whole run with a ``TrajectoryAbort`` naming the
    trajectory index and base seed.
    """
    n_workers = resolve_workers(n_workers)
    _check_memory(spec, n_workers)
    params = spec.params
    if spec.unravelling.tag == "jump_event_driven":
        grid = spec.grid.times(params)
    else:
        grid = spec.grid.step_indices(params) * params.dt
    n_times = grid.size
    blocks = [(b, min(b + BLOCK_SIZE, spec.n_trajectories))
              for b in range(0, spec.n_trajectories, BLOCK_SIZE)]
    if n_workers == 1 or len(blocks) == 1:
        partials = [_run_block(spec, b0, b1, n_times) for b0, b1 in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_run_block, spec, b0, b1, n_times)
                       for b0, b1 in blocks]
            partials = [f.result() for f in futures]
    summary, records = _merge_blocks(partials, grid, spec)
    if spec.keep_records:
        return summary, records
    return summary


# ---------------------------------------------------------------------------
# Unravelling equivalence against the master equation
# ---------------------------------------------------------------------------

@dataclass
class UnravellingComparison:
    """Elementwise z-scores of one unravelling against the master equation."""

    tag: str
    checkpoints: np.ndarray
    mean_projector: list
    max_abs_z: float
    max_corrected_z: float
    n_comparisons: int


@dataclass
class EquivalenceReport:
    checkpoints: np.ndarray
    comparisons: list
    threshold: float
    lindblad_states: list

    @property
    def passed(self) -> bool:
        return all(c.max_corrected_z < self.threshold for c in self.comparisons)

    def max_corrected_z(self) -> float:
        return max(c.max_corrected_z for c in self.comparisons)


def _corrected_z(z: float, n_comparisons: int) -> float:
    """Bonferroni-corrected |z|: the raw two-sided p-value is multiplied by
    the number of comparisons and mapped back to a z-score."""
    p = min(1.0, 2.0 * _normal.sf(abs(z)) * n_comparisons)
    if p <= 0.0:
        return np.inf
    return float(_normal.isf(p / 2.0))


def _projector_moments(spec: RunSpec, checkpoint_steps: np.ndarray):
    """Mean projector and elementwise variance moments over an ensemble."""
    params = spec.params
    n = params.n_sites
    n_chk = checkpoint_steps.size
    sum_proj = np.zeros((n_chk, n, n), dtype=np.complex128)
    sum_sq_re = np.zeros((n_chk, n, n))
    sum_sq_im = np.zeros((n_chk, n, n))
    for k in range(spec.n_trajectories):
        stream = stream_for_trajectory(params.seed, k, spec.unravelling.stream_kind)
        psi = make_initial(params, spec.initial)
        tmp = np.empty_like(psi.amps)
        if spec.unravelling.tag == "jump":
            cap = max(256, int(params.gamma * params.t_max * 10))
            jump_steps = np.empty(cap, dtype=np.int64)
            jump_sites = np.empty(cap, dtype=np.int64)
            n_jumps = 0
        prev = 0
        for ci, target in enumerate(checkpoint_steps):
            n_steps = int(target - prev)
            if spec.unravelling.tag == "jump":
                status, step, n_jumps, _ = kernels.jump_kernel(
                    psi.amps, tmp, stream.generator, n_steps, prev, params.gamma,
                    params.dt, params.periodic, jump_steps, jump_sites, n_jumps)
                if status == 2:
                    raise TrajectoryAbort("jump log capacity exceeded", k, params.seed)
            else:
                _run_kernel(psi, params, stream, n_steps, spec.unravelling,
                            windowed=False, tmp=tmp)
            prev = int(target)
            proj = np.outer(psi.amps, psi.amps.conj())
            sum_proj[ci] += proj
            sum_sq_re[ci] += proj.real ** 2
            sum_sq_im[ci] += proj.imag ** 2
    return sum_proj, sum_sq_re, sum_sq_im


def compare_unravellings(params: ModelParams, t_checkpoints,
                         n_trajectories: int = 5000,
                         initial: InitialState | None = None,
                         unravellings=("wnp", "qsd", "jump"),
                         z_threshold: float = 4.0,
                         se_floor: float = 1e-6,
                         lindblad_dt: float = lindblad.DEFAULT_DT,
                         oracle_gamma: float | None = None) -> EquivalenceReport:
    """Test each unravelling's mean projector against the master equation.

    For every checkpoint and matrix element, the real and imaginary parts
    of M[|psi><psi|] are compared with the integrated density matrix
    through z = diff / sqrt(SE^2 + floor^2), where the floor grows with
    dt and the checkpoint time to absorb the deterministic discrepancy
    between the Euler scheme and the RK4 oracle (decisive when the
    trajectory scatter vanishes, e.g. gamma = 0).  z-scores are
    Bonferroni-corrected over all comparisons of the unravelling.
    ``oracle_gamma`` overrides the oracle's noise strength (negative
    control).
    """
    if params.n_sites > 15:
        raise ConfigurationError(
            "equivalence comparison is meant for small lattices (N <= 15)"
        )
    if initial is None:
        initial = InitialState("delta_site", 0.0, 0)
    checkpoints = np.asarray(t_checkpoints, dtype=np.float64)
    steps = np.round(checkpoints / params.dt).astype(np.int64)
    checkpoints = steps * params.dt

    oracle_params = params if oracle_gamma is None else replace(params, gamma=oracle_gamma)
    rho0 = DensityMatrix.from_pure(make_initial(params, initial))
    oracle = lindblad.integrate(rho0, oracle_params, checkpoints, dt=lindblad_dt)

    comparisons = []
    for tag in unravellings:
        kind = UnravellingKind(tag)
        spec = RunSpec(params=params, unravelling=kind, initial=initial,
                       n_trajectories=n_trajectories, windowed=False)
        sum_proj, sum_sq_re, sum_sq_im = _projector_moments(spec, steps)
        m = n_trajectories
        mean = sum_proj / m
        n_comp = 2 * params.n_sites ** 2 * checkpoints.size
        max_z = 0.0
        mean_list = []
        for ci in range(checkpoints.size):
            target = oracle.states[ci].rho.rho
            floor = max(se_floor, EULER_BIAS_SCALE * params.dt * checkpoints[ci])
            for part, sum_sq in (("real", sum_sq_re), ("imag", sum_sq_im)):
                mm = mean[ci].real if part == "real" else mean[ci].imag
                tt = target.real if part == "real" else target.imag
                if m > 1:
                    var = np.maximum(sum_sq[ci] - m * mm ** 2, 0.0) / (m - 1)
                else:
                    var = np.zeros_like(mm)
                se = np.sqrt(var / m + floor ** 2)
                max_z = max(max_z, float(np.max(np.abs(mm - tt) / se)))
            mean_list.append(mean[ci])
        comparisons.append(UnravellingComparison(
            tag=tag,
            checkpoints=checkpoints,
            mean_projector=mean_list,
            max_abs_z=max_z,
            max_corrected_z=_corrected_z(max_z, n_comp),
            n_comparisons=n_comp,
        ))
    return EquivalenceReport(checkpoints=checkpoints, comparisons=comparisons,
                             threshold=z_threshold, lindblad_states=oracle.states)


def require_equivalence(report: EquivalenceReport) -> None:
    if not report.passed:
        worst = max(report.comparisons, key=lambda c: c.max_corrected_z)
        raise EquivalenceFailure(
            f"unravelling {worst.tag!r} deviates from the master equation: "
            f"max corrected |z| = {worst.max_corrected_z:.2f} "
            f">= {report.threshold}"
        )
